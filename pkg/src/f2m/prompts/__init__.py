"""Versioned prompt text assets.

Prompts are shipped as plain text files so an experiment can pin the
exact wording; bumping a version means adding a new file, never editing
an old one.  Prediction caches key on these version strings.
"""

from __future__ import annotations

from functools import lru_cache
from importlib import resources

CONVERT_PROMPT_VERSION = "convert_v1"
REFINE_PROMPT_VERSION = "refine_v1"
JUDGE_SYMBOLIC_PROMPT_VERSION = "judge_symbolic_v1"
JUDGE_STRUCTURAL_PROMPT_VERSION = "judge_structural_v1"


@lru_cache(maxsize=None)
def load(version: str) -> str:
    """Read one prompt asset by its version name."""
    return resources.files(__package__).joinpath(f"{version}.txt").read_text("utf-8")


def fill(template: str, **values: str) -> str:
    """Substitute ``{name}`` placeholders literally.

    Plain string replacement, not str.format: prompt bodies contain
    braces of their own.
    """
    for key, value in values.items():
        template = template.replace("{" + key + "}", value)
    return template
