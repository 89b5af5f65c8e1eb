"""Relevance scorers for block pruning.

Two families: embedding-style scorers rate each block's text against the
query (local BM25 by default, or a remote service over HTTP), and the
generative scorer rates blocks by path probability in the token trie.
Record/replay wrappers capture remote responses so a run can be repeated
offline byte-for-byte.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from collections import Counter
from pathlib import Path

import requests

from .blocks import BlockTree
from .tokentree import (HashLogitsProvider, TagPathTokenizer, TraversalStats,
                        build_token_tree, call_count, compute_probabilities,
                        score_blocks)


class ScorerUnavailable(RuntimeError):
    """The scorer cannot produce scores (network down, replay miss)."""


_WORD = re.compile(r"[a-z0-9]+")


def _terms(text: str) -> list[str]:
    return _WORD.findall(text.lower())


class Bm25Scorer:
    """Local lexical scorer, no network needed.

    Treats the block set as the corpus, so document frequencies reflect
    the page at hand. Uses the non-negative idf variant
    ``ln(1 + (N - df + 0.5) / (df + 0.5))``.
    """

    def __init__(self, k1: float = 1.2, b: float = 0.75):
        self.k1 = k1
        self.b = b

    def score_blocks(self, query: str, texts: list[str]) -> list[float]:
        docs = [_terms(text) for text in texts]
        n_docs = len(docs)
        if n_docs == 0:
            return []
        avg_len = sum(len(d) for d in docs) / n_docs
        df: Counter[str] = Counter()
        for doc in docs:
            df.update(set(doc))
        scores = []
        for doc in docs:
            tf = Counter(doc)
            score = 0.0
            for term in _terms(query):
                if term not in tf:
                    continue
                idf = math.log(1.0 + (n_docs - df[term] + 0.5) / (df[term] + 0.5))
                norm = 1.0 - self.b + self.b * (len(doc) / avg_len if avg_len else 0.0)
                score += idf * (tf[term] * (self.k1 + 1.0)) / (tf[term] + self.k1 * norm)
            scores.append(score)
        return scores


class RemoteEmbeddingScorer:
    """Client for an embedding service speaking JSON over HTTP.

    Request: ``{"query": str, "texts": [str]}``; response:
    ``{"scores": [float]}``, one score per text in order. Large block
    sets are sent in ``batch_size`` chunks in block order, so request
    payloads do not depend on worker count. Transient failures
    (connection errors, timeouts, 5xx) are retried up to ``retries``
    times per batch; anything else fails immediately.
    """

    def __init__(self, endpoint: str, timeout: float = 30.0,
                 batch_size: int = 64, retries: int = 2):
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if retries < 0:
            raise ValueError("retries must be >= 0")
        self.endpoint = endpoint
        self.timeout = timeout
        self.batch_size = batch_size
        self.retries = retries

    def score_blocks(self, query: str, texts: list[str]) -> list[float]:
        scores: list[float] = []
        for start in range(0, len(texts), self.batch_size):
            scores.extend(self._post(query, texts[start:start + self.batch_size]))
        return scores

    def _post(self, query: str, texts: list[str]) -> list[float]:
        payload = {"query": query, "texts": texts}
        last_error: Exception | None = None
        for _ in range(self.retries + 1):
            try:
                response = requests.post(self.endpoint, json=payload,
                                          timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = exc
                continue
            if response.status_code >= 500:
                last_error = ScorerUnavailable(
                    f"server error {response.status_code}")
                continue
            try:
                response.raise_for_status()
                scores = response.json()["scores"]
            except Exception as exc:
                raise ScorerUnavailable(
                    f"embedding request to {self.endpoint} failed: {exc}") from exc
            if not isinstance(scores, list) or len(scores) != len(texts):
                raise ScorerUnavailable(
                    f"malformed scores response from {self.endpoint}")
            return [float(x) for x in scores]
        raise ScorerUnavailable(
            f"embedding request to {self.endpoint} failed after "
            f"{self.retries + 1} attempts: {last_error}") from last_error


def _request_key(payload: dict) -> str:
    canonical = json.dumps(payload, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class ResponseStore:
    """Keyed float-list responses, saved as one JSON file."""

    def __init__(self, entries: dict[str, list[float]] | None = None):
        self.entries = entries if entries is not None else {}

    @classmethod
    def load(cls, path: str | Path) -> "ResponseStore":
        with open(path, encoding="utf-8") as f:
            return cls(json.load(f))

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.entries, f, sort_keys=True)

    def put(self, payload: dict, values: list[float]) -> None:
        self.entries[_request_key(payload)] = list(values)

    def get(self, payload: dict) -> list[float] | None:
        return self.entries.get(_request_key(payload))


class RecordingScorer:
    """Wraps an embedding scorer and records every response."""

    def __init__(self, inner, store: ResponseStore):
        self.inner = inner
        self.store = store

    def score_blocks(self, query: str, texts: list[str]) -> list[float]:
        scores = self.inner.score_blocks(query, texts)
        self.store.put({"query": query, "texts": texts}, scores)
        return scores


class ReplayScorer:
    """Serves recorded embedding responses; raises on a miss."""

    def __init__(self, store: ResponseStore):
        self.store = store

    def score_blocks(self, query: str, texts: list[str]) -> list[float]:
        scores = self.store.get({"query": query, "texts": texts})
        if scores is None:
            raise ScorerUnavailable("no recorded response for this request")
        return scores


class RecordingProvider:
    """Wraps a logits provider and records every response."""

    def __init__(self, inner, store: ResponseStore):
        self.inner = inner
        self.store = store

    def logits(self, prefix: list[int], candidates: list[int]) -> list[float]:
        values = self.inner.logits(prefix, candidates)
        self.store.put({"prefix": prefix, "candidates": candidates}, values)
        return values


class ReplayProvider:
    """Serves recorded logits responses; raises on a miss."""

    def __init__(self, store: ResponseStore):
        self.store = store

    def logits(self, prefix: list[int], candidates: list[int]) -> list[float]:
        values = self.store.get({"prefix": prefix, "candidates": candidates})
        if values is None:
            raise ScorerUnavailable("no recorded response for this request")
        return values


class GenerativeScorer:
    """Scores blocks by summed log-probability of their path tokens.

    Builds the trie from the tree's paths with a fresh tokenizer each
    call (token ids depend only on the tree, keeping runs reproducible),
    fills probabilities with dynamic skipping, and writes scores back
    onto the blocks. ``last_stats`` reports provider usage for the most
    recent call.
    """

    def __init__(self, provider, context: str = ""):
        self.provider = provider
        self.context = context
        self.last_stats: TraversalStats | None = None

    def score_tree(self, tree: BlockTree) -> list[float]:
        tok = TagPathTokenizer()
        prefix = tok.encode(self.context) if self.context else []
        root = build_token_tree(tree, tok)
        compute_probabilities(root, prefix, self.provider)
        results = score_blocks(root, tree, tok)
        self.last_stats = call_count(root)
        return [r.score for r in results]


def generative_score(query: str, tree: BlockTree,
                     tok: TagPathTokenizer | None = None,
                     provider=None) -> list[float]:
    """One-shot path-probability scores for the tree's blocks."""
    tok = tok if tok is not None else TagPathTokenizer()
    provider = provider if provider is not None else HashLogitsProvider()
    prefix = tok.encode(query) if query else []
    root = build_token_tree(tree, tok)
    compute_probabilities(root, prefix, provider)
    return [r.score for r in score_blocks(root, tree, tok)]
