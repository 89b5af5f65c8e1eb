"""Token trie over block paths with dynamically skipped probabilities.

Block paths are tokenized and merged into a trie that mirrors the block
tree one-to-one. Probabilities follow three rules: the first path token
and singleton children cost nothing (probability 1.0); a sibling group of
two or more is scored by one softmax over provider logits for the whole
group. Traversal is depth-first so consecutive provider calls share the
longest possible prefix, which lets a caching provider reuse state. A
block's score is the sum of log-probabilities along its path, always <= 0.
"""

from __future__ import annotations

import hashlib
import math
import re
import uuid
from dataclasses import dataclass

import requests

from .blocks import BlockPath, BlockTree, render_path


class DuplicatePath(ValueError):
    """Two blocks rendered to the same path string (upstream invariant broken)."""


class IncompleteProbabilities(RuntimeError):
    """A block score needed a node whose probability was never computed."""


class ProviderError(RuntimeError):
    """A logits provider failed; carries the offending prefix."""

    def __init__(self, message: str, prefix: list[int] | None = None):
        super().__init__(message)
        self.prefix = prefix


class TagPathTokenizer:
    """Splits path strings on tag-bracket boundaries.

    ``"<html1><body>"`` becomes ``["<", "html1", "><", "body", ">"]``.
    Ids are assigned in first-seen order, so a fresh instance per document
    set keeps runs reproducible. ``decode(encode(s)) == s`` for any string.
    """

    _SPLIT = re.compile(r"><|<|>|[^<>]+")

    def __init__(self) -> None:
        self._ids: dict[str, int] = {}
        self._strings: list[str] = []

    def encode(self, text: str) -> list[int]:
        ids = []
        for piece in self._SPLIT.findall(text):
            token_id = self._ids.get(piece)
            if token_id is None:
                token_id = len(self._strings)
                self._ids[piece] = token_id
                self._strings.append(piece)
            ids.append(token_id)
        return ids

    def decode(self, ids: list[int]) -> str:
        return "".join(self._strings[i] for i in ids)


@dataclass(slots=True)
class TokenNode:
    """One trie node; ``token`` is None only on the synthetic root."""

    token: int | None
    depth: int
    children: list["TokenNode"]
    logprob: float | None = None

    @property
    def prob(self) -> float | None:
        return None if self.logprob is None else math.exp(self.logprob)

    def child_for(self, token: int) -> "TokenNode | None":
        for child in self.children:
            if child.token == token:
                return child
        return None


@dataclass(frozen=True, slots=True)
class BlockScore:
    path: BlockPath
    score: float


@dataclass(frozen=True, slots=True)
class TraversalStats:
    """How much work probability computation needs on a given trie."""

    provider_calls: int
    total_nodes: int
    skipped_nodes: int

    @property
    def skipped_fraction(self) -> float:
        if self.total_nodes == 0:
            return 1.0
        return self.skipped_nodes / self.total_nodes


def build_token_tree(tree: BlockTree, tok) -> TokenNode:
    """Merge the tokenized block paths into a trie.

    Requires paths to be assigned; raises :class:`DuplicatePath` if two
    blocks render to the same string.
    """
    root = TokenNode(token=None, depth=0, children=[], logprob=0.0)
    seen: set[str] = set()
    for block in tree.blocks:
        if block.path is None:
            raise ValueError("block has no path; run assign_paths first")
        rendered = render_path(block.path)
        if rendered in seen:
            raise DuplicatePath(f"duplicate block path {rendered!r}")
        seen.add(rendered)
        node = root
        for token in tok.encode(rendered):
            child = node.child_for(token)
            if child is None:
                child = TokenNode(token=token, depth=node.depth + 1, children=[])
                node.children.append(child)
            node = child
    return root


def compute_probabilities(root: TokenNode, input_prefix: list[int],
                          provider) -> TokenNode:
    """Fill every node's log-probability, depth-first with dynamic skipping.

    First-level tokens and singleton children get probability 1.0 without
    any provider call; each larger sibling group costs one call, softmaxed
    over the group's logits given the shared prefix. Provider failures are
    re-raised as :class:`ProviderError` with the offending prefix.
    """
    root.logprob = 0.0
    stack: list[tuple[TokenNode, tuple[int, ...]]] = [(root, tuple(input_prefix))]
    while stack:
        node, prefix = stack.pop()
        children = node.children
        if not children:
            continue
        if node.depth == 0 or len(children) == 1:
            # n == 1 or K == 1: no inference needed
            for child in children:
                child.logprob = 0.0
        else:
            candidates = [child.token for child in children]
            try:
                logits = provider.logits(list(prefix), candidates)
            except ProviderError:
                raise
            except Exception as exc:
                raise ProviderError(
                    f"logits provider failed: {exc}", prefix=list(prefix)
                ) from exc
            if len(logits) != len(candidates):
                raise ProviderError(
                    f"provider returned {len(logits)} logits for "
                    f"{len(candidates)} candidates", prefix=list(prefix))
            for child, logprob in zip(children, _log_softmax(logits)):
                child.logprob = logprob
        for child in reversed(children):
            stack.append((child, prefix + (child.token,)))
    return root


def _log_softmax(logits: list[float]) -> list[float]:
    peak = max(logits)
    log_z = peak + math.log(sum(math.exp(x - peak) for x in logits))
    return [x - log_z for x in logits]


def score_blocks(root: TokenNode, tree: BlockTree, tok) -> list[BlockScore]:
    """Sum log-probabilities along each block's path; write scores back.

    Returns one :class:`BlockScore` per block in document order and sets
    ``block.score`` for the pruner. Raises
    :class:`IncompleteProbabilities` if a needed node was never filled.
    """
    results: list[BlockScore] = []
    for block in tree.blocks:
        rendered = render_path(block.path)
        node = root
        total = 0.0
        for token in tok.encode(rendered):
            node = node.child_for(token)
            if node is None:
                raise ValueError(
                    f"path {rendered!r} is not in the trie; was it built "
                    f"from a different tree or tokenizer?")
            if node.logprob is None:
                raise IncompleteProbabilities(
                    f"no probability on token {token} of {rendered!r}")
            total += node.logprob
        block.score = total
        results.append(BlockScore(path=block.path, score=total))
    return results


def call_count(root: TokenNode) -> TraversalStats:
    """Provider calls and skipped nodes for a built trie.

    One call per sibling group of two or more below the first level; all
    other nodes are skipped (probability fixed at 1.0 by rule).
    """
    calls = 0
    total = 0
    inferred = 0
    stack = [root]
    while stack:
        node = stack.pop()
        if node.token is not None:
            total += 1
        if node.depth >= 1 and len(node.children) >= 2:
            calls += 1
            inferred += len(node.children)
        stack.extend(node.children)
    return TraversalStats(provider_calls=calls, total_nodes=total,
                          skipped_nodes=total - inferred)


class HashLogitsProvider:
    """Deterministic stand-in provider: logits from a seeded hash.

    Each (prefix, candidate) pair maps to a stable value in [-2, 2] via
    SHA-256, so results are identical across platforms and runs. Every
    call is recorded on ``calls`` for instrumentation.
    """

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.calls: list[tuple[tuple[int, ...], tuple[int, ...]]] = []

    def logits(self, prefix: list[int], candidates: list[int]) -> list[float]:
        self.calls.append((tuple(prefix), tuple(candidates)))
        key = ",".join(map(str, prefix))
        out = []
        for candidate in candidates:
            digest = hashlib.sha256(
                f"{self.seed}|{key}|{candidate}".encode()).digest()
            unit = int.from_bytes(digest[:8], "big") / float(2 ** 64)
            out.append(unit * 4.0 - 2.0)
        return out


class RemoteLogitsProvider:
    """Client for a logits service speaking JSON over HTTP.

    Request: ``{"session_id", "prefix_tokens": [int], "candidates": [int]}``;
    response: ``{"logits": [float]}``. The service may cache on
    ``session_id`` plus prefix.
    """

    def __init__(self, endpoint: str, session_id: str | None = None,
                 timeout: float = 30.0):
        self.endpoint = endpoint
        self.session_id = session_id or uuid.uuid4().hex
        self.timeout = timeout

    def logits(self, prefix: list[int], candidates: list[int]) -> list[float]:
        payload = {
            "session_id": self.session_id,
            "prefix_tokens": list(prefix),
            "candidates": list(candidates),
        }
        try:
            response = requests.post(self.endpoint, json=payload,
                                      timeout=self.timeout)
            response.raise_for_status()
            logits = response.json()["logits"]
        except Exception as exc:
            raise ProviderError(
                f"logits request to {self.endpoint} failed: {exc}",
                prefix=list(prefix)) from exc
        if not isinstance(logits, list) or len(logits) != len(candidates):
            raise ProviderError(
                f"malformed logits response from {self.endpoint}",
                prefix=list(prefix))
        return [float(x) for x in logits]
