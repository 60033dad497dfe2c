"""Command-line entry points.

Exit codes are fixed for scripting: 0 success, 1 failure, 2 usage error,
3 success after a single automatic repair.  Every command works offline
with ``--model mock``.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import corpus, edits, metrics, providers
from .mermaid import Tier, parse_flowchart, serialize, validate

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_REPAIRED = 3


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(EXIT_FAILURE)


@click.group()
def main() -> None:
    """Flowchart image to Mermaid code toolkit."""


@main.command()
@click.argument("image", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--model", default="mock", show_default=True, help="Model id.")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path),
              help="Write the Mermaid code here instead of stdout.")
@click.option("--timeout", default=60.0, show_default=True)
@click.option("--retries", default=2, show_default=True)
def convert(image: Path, model: str, out: Path | None, timeout: float,
            retries: int) -> None:
    """Convert a flowchart image to Mermaid code."""
    media_type = corpus.media_type_for(image)
    if media_type is None:
        _fail(f"cannot infer a supported image type from {image.name!r}")
    cfg = providers.config_for_model(model, timeout=timeout, max_retries=retries)
    try:
        result = providers.convert_image(cfg, image.read_bytes(), media_type)
    except (providers.UnsupportedImageType, providers.InvalidOutput,
            providers.ProviderUnreachable) as exc:
        _fail(str(exc))
    if out is not None:
        out.write_text(result.code + "\n", encoding="utf-8")
        click.echo(f"wrote {out}", err=True)
    else:
        click.echo(result.code)
    sys.exit(EXIT_OK if result.tier is Tier.VALID else EXIT_REPAIRED)


@main.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
def check(file: Path) -> None:
    """Validate a .mmd file and print its tier."""
    report = validate(file.read_text("utf-8"))
    if report.tier is Tier.VALID:
        click.echo("valid")
        sys.exit(EXIT_OK)
    if report.tier is Tier.REPAIRED:
        click.echo(f"repaired: {report.repair}")
        sys.exit(EXIT_REPAIRED)
    click.echo(f"invalid: line {report.error_line}, column {report.error_column}: "
               f"{report.error_message}")
    sys.exit(EXIT_FAILURE)


@main.command(name="eval")
@click.option("--manifest", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Corpus manifest.csv (columns id,image_path,gold_path).")
@click.option("--model", default="mock", show_default=True)
@click.option("--mode", type=click.Choice([metrics.MODE_DETERMINISTIC,
                                           metrics.MODE_JUDGE]),
              default=metrics.MODE_DETERMINISTIC, show_default=True)
@click.option("--judge-model", default="gpt-4.1", show_default=True,
              help="Judge model id for --mode judge.")
@click.option("--jobs", default=1, show_default=True,
              help="Concurrent conversion/scoring workers.")
def eval_cmd(manifest: Path, model: str, mode: str, judge_model: str,
             jobs: int) -> None:
    """Score a corpus and write report.<model>.csv plus a summary.csv row."""
    try:
        result = corpus.run_eval(manifest, model, mode=mode,
                                 judge_model=judge_model, jobs=jobs)
    except corpus.ManifestError as exc:
        _fail(str(exc))
    for failure in result.failures:
        click.echo(f"record {failure.sample_id} failed: {failure.error}", err=True)
    scored = len(result.records)
    click.echo(f"scored {scored}/{len(result.outcomes)} records "
               f"-> {result.report_path.name}")
    if result.summary is not None:
        click.echo(f"summary row appended -> {result.summary_path.name}")
    sys.exit(EXIT_OK if scored else EXIT_FAILURE)


@main.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--op", "op_json", required=True,
              help='Edit command JSON, e.g. \'{"op": "add_edge", "source": "A", '
                   '"target": "B", "label": "Yes"}\'.')
def edit(file: Path, op_json: str) -> None:
    """Apply one edit command to a .mmd file in place."""
    try:
        payload = json.loads(op_json)
        command = edits.command_from_json(payload)
    except (json.JSONDecodeError, ValueError) as exc:
        raise click.UsageError(f"bad --op value: {exc}")
    report = validate(file.read_text("utf-8"))
    if report.graph is None:
        _fail(f"{file} is not valid Mermaid: {report.error_message}")
    try:
        graph = edits.apply_edit(report.graph, command)
    except (edits.UnknownId, edits.DuplicateEdge, edits.EmptyLabel,
            ValueError) as exc:
        _fail(str(exc))
    file.write_text(serialize(graph) + "\n", encoding="utf-8")
    click.echo(f"updated {file}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=None, type=int,
              help=f"Port (default ${'{'}F2M_PORT{'}'} or 8000).")
@click.option("--static-dir", type=click.Path(file_okay=False, path_type=Path),
              help="Directory with the built web client, served at /.")
def serve(host: str, port: int | None, static_dir: Path | None) -> None:
    """Run the HTTP service."""
    import os

    import uvicorn

    from .service import ENV_PORT, create_app
    if port is None:
        port = int(os.environ.get(ENV_PORT, "8000"))
    candidates = [static_dir] if static_dir else [Path("frontend/dist")]
    resolved = next((c for c in candidates if c and c.is_dir()), None)
    app = create_app(static_dir=resolved)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
