"""Flowchart image to Mermaid code toolkit.

Core pieces: the Mermaid flowchart grammar subset (parse / serialize /
sanitize / validate / normalize), structural edit commands, provider
clients for conversion / refinement / judging, deterministic and
judge-based evaluation metrics, a corpus evaluator, an HTTP service, and
the ``f2m`` command line.
"""

from .edits import (AddEdge, AddNode, DeleteEdge, DeleteNode, DuplicateEdge,
                    EmptyLabel, InsertBefore, RenameNode, SetEdgeLabel,
                    UnknownId, apply_edit, command_from_json, command_to_json,
                    fresh_id, insert_before)
from .mermaid import (Direction, EdgeSpec, EdgeStyle, EmptyOutput, FlowGraph,
                      MermaidSyntaxError, NodeShape, NodeSpec, NormalizedGraph,
                      SyntaxReport, Tier, normalize_graph, normalize_label,
                      parse_flowchart, sanitize_model_output, serialize,
                      validate)
from .metrics import (EmptyCorpus, EvalRecord, MalformedJudgeOutput,
                      MetricReport, StructuralScores, SymbolicScores,
                      TokenCountEmbedder, aggregate, completeness,
                      entity_metrics, evaluate_pair, flow_accuracy,
                      parse_judge_csv, reconstructability, relation_metrics,
                      semantic_fidelity, semantic_similarity,
                      structural_accuracy, syntax_validity)
from .providers import (ConvertRequest, InvalidOutput, JudgeRequest,
                        MockProvider, ProviderConfig, ProviderResponse,
                        ProviderUnreachable, RefineRequest, UnsupportedImageType,
                        config_for_model, convert_image, judge_structural,
                        judge_symbolic, refine_code, request_digest)

__version__ = "0.1.0"
