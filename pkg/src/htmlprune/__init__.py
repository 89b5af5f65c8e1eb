"""Refine retrieved HTML for retrieval-augmented generation.

Clean raw pages, carve them into a granularity-adjustable block tree,
score blocks against the query, and greedily prune to a length budget.
"""

from .blocks import (BlockNode, BlockPath, BlockTree, InvalidGranularity,
                     assign_paths, blocks_debug_dump, build_block_tree,
                     refine_granularity, render_path)
from .cleaning import CleanConfig, clean, clean_content, compress_structure
from .dom import (DocumentSet, DomNode, EmptyDocument, EmptyDocumentSet,
                  concat_documents, count_words, extract_text, parse_html,
                  serialize)
from .estimators import HtmlCleaner, HtmlRefiner
from .pipeline import (RefineConfig, RefinePipeline, RefineResult,
                       RefineStats, StagedPrune, describe_blocks, fetch_html,
                       fetch_urls, ingest_record, load_config, report_stats,
                       two_stage_prune)
from .pruning import (AuditEntry, Budget, BudgetUnattainable, PruneResult,
                      prune)
from .scoring import (Bm25Scorer, GenerativeScorer, RecordingProvider,
                      RecordingScorer, RemoteEmbeddingScorer, ReplayProvider,
                      ReplayScorer, ResponseStore, ScorerUnavailable,
                      generative_score)
from .tokentree import (DuplicatePath, HashLogitsProvider,
                        IncompleteProbabilities, ProviderError,
                        RemoteLogitsProvider, TagPathTokenizer, TokenNode,
                        TraversalStats, build_token_tree, call_count,
                        compute_probabilities, score_blocks)

__version__ = "0.1.0"

__all__ = [
    "AuditEntry", "BlockNode", "BlockPath", "BlockTree", "Bm25Scorer",
    "Budget", "BudgetUnattainable", "CleanConfig", "DocumentSet", "DomNode",
    "DuplicatePath", "EmptyDocument", "EmptyDocumentSet", "GenerativeScorer",
    "HashLogitsProvider", "HtmlCleaner", "HtmlRefiner",
    "IncompleteProbabilities", "InvalidGranularity", "ProviderError",
    "PruneResult", "RecordingProvider", "RecordingScorer", "RefineConfig",
    "RefinePipeline", "RefineResult", "RefineStats", "RemoteEmbeddingScorer",
    "RemoteLogitsProvider", "ReplayProvider", "ReplayScorer", "ResponseStore",
    "ScorerUnavailable", "StagedPrune", "TagPathTokenizer", "TokenNode",
    "TraversalStats", "assign_paths", "blocks_debug_dump", "build_block_tree",
    "build_token_tree", "call_count", "clean", "clean_content",
    "compute_probabilities", "compress_structure", "concat_documents",
    "count_words", "describe_blocks", "extract_text", "fetch_html",
    "fetch_urls", "generative_score", "ingest_record", "load_config",
    "parse_html", "prune", "refine_granularity", "render_path",
    "report_stats", "score_blocks", "serialize", "two_stage_prune",
]
