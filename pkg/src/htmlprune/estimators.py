"""Estimator wrappers so the refinery drops into sklearn pipelines.

Both classes follow the usual contract: constructor stores parameters
verbatim, ``fit`` validates them and the input shape, ``transform`` does
the work. ``get_params``/``set_params``/``clone`` come from the base
class for free.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .cleaning import CleanConfig, clean
from .dom import parse_html, serialize
from .pipeline import RefineConfig, RefinePipeline


def _check_documents(X) -> list:
    """Validate a batch of raw documents: non-empty list of str or bytes."""
    if isinstance(X, (str, bytes)):
        raise TypeError("expected a list of documents, got a single one")
    docs = list(X)
    if not docs:
        raise ValueError("empty document batch")
    for i, doc in enumerate(docs):
        if not isinstance(doc, (str, bytes)):
            raise TypeError(f"document {i} is {type(doc).__name__}, "
                            f"expected str or bytes")
    return docs


def _check_records(X) -> list[dict]:
    """Validate a batch of records: dicts with html, or bare documents."""
    if isinstance(X, (str, bytes, dict)):
        raise TypeError("expected a list of records, got a single one")
    records = []
    for i, rec in enumerate(X):
        if isinstance(rec, (str, bytes)):
            records.append({"html": rec, "query": ""})
        elif isinstance(rec, dict):
            if "html" not in rec:
                raise ValueError(f"record {i} has no 'html' key")
            records.append({"html": rec["html"],
                            "query": rec.get("query", "")})
        else:
            raise TypeError(f"record {i} is {type(rec).__name__}, "
                            f"expected str, bytes, or dict")
    if not records:
        raise ValueError("empty record batch")
    return records


class HtmlCleaner(TransformerMixin, BaseEstimator):
    """Strips scripts, styles, comments, and unlisted attributes.

    Output keeps only visible structure and text; single-child wrapper
    chains are collapsed and empty elements removed.
    """

    def __init__(self, attr_allowlist=(), drop_tags=("script", "style"),
                 strip_comments=True):
        self.attr_allowlist = attr_allowlist
        self.drop_tags = drop_tags
        self.strip_comments = strip_comments

    def fit(self, X, y=None):
        _check_documents(X)
        self.config_ = CleanConfig(
            attr_allowlist=frozenset(self.attr_allowlist),
            drop_tags=frozenset(self.drop_tags),
            strip_comments=bool(self.strip_comments))
        return self

    def transform(self, X) -> list[str]:
        check_is_fitted(self)
        return [serialize(clean(parse_html(doc), self.config_))
                for doc in _check_documents(X)]


class HtmlRefiner(TransformerMixin, BaseEstimator):
    """Full clean-block-score-prune refinement as a transformer.

    ``transform`` takes records (dicts with ``html`` and ``query``, or
    bare documents for an empty query) and returns pruned HTML strings.
    """

    def __init__(self, coarse_words=256, fine_words=128,
                 intermediate_budget=8192, final_budget=4096,
                 budget_unit="words", stage1="lexical", stage2="gen",
                 embed_endpoint=None, logits_endpoint=None,
                 embed_fallback=False, attr_allowlist=(),
                 drop_tags=("script", "style"), strip_comments=True,
                 seed=0, workers=1, embed_scorer=None, logits_provider=None):
        self.coarse_words = coarse_words
        self.fine_words = fine_words
        self.intermediate_budget = intermediate_budget
        self.final_budget = final_budget
        self.budget_unit = budget_unit
        self.stage1 = stage1
        self.stage2 = stage2
        self.embed_endpoint = embed_endpoint
        self.logits_endpoint = logits_endpoint
        self.embed_fallback = embed_fallback
        self.attr_allowlist = attr_allowlist
        self.drop_tags = drop_tags
        self.strip_comments = strip_comments
        self.seed = seed
        self.workers = workers
        self.embed_scorer = embed_scorer
        self.logits_provider = logits_provider

    def fit(self, X, y=None):
        _check_records(X)
        config = RefineConfig(
            coarse_words=self.coarse_words, fine_words=self.fine_words,
            intermediate_budget=self.intermediate_budget,
            final_budget=self.final_budget, budget_unit=self.budget_unit,
            stage1=self.stage1, stage2=self.stage2,
            embed_endpoint=self.embed_endpoint,
            logits_endpoint=self.logits_endpoint,
            embed_fallback=bool(self.embed_fallback),
            attr_allowlist=tuple(self.attr_allowlist),
            drop_tags=tuple(self.drop_tags),
            strip_comments=bool(self.strip_comments), seed=self.seed,
            workers=self.workers)
        self.pipeline_ = RefinePipeline(config, self.embed_scorer,
                                        self.logits_provider)
        return self

    def transform(self, X) -> list[str]:
        check_is_fitted(self)
        results = self.pipeline_.refine_many(_check_records(X))
        return [r.html for r in results]
