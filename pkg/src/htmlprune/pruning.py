"""Greedy block deletion under a serialized-length budget.

Scores are computed once, up front. Blocks are then deleted from the
lowest score upward (ties: the later block in document order goes first)
until the serialized output fits the budget. Deleting a block's content
can leave ancestor elements empty; those are removed on the spot. The
survivor is structurally compressed before being returned. The input
tree is never mutated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .blocks import BlockNode, BlockTree, render_path
from .cleaning import compress_structure
from .dom import (DOCUMENT, ELEMENT, PAYLOAD, DocumentSet, DomNode,
                  extract_text, serialize)


class BudgetUnattainable(ValueError):
    """The budget is smaller than what deleting every block achieves."""

    def __init__(self, limit: int, minimal_length: int):
        super().__init__(
            f"budget of {limit} unattainable; minimum is {minimal_length}")
        self.limit = limit
        self.minimal_length = minimal_length


def words_counter(html: str) -> int:
    return len(html.split())


def chars_counter(html: str) -> int:
    return len(html)


_COUNTERS = {"words": words_counter, "chars": chars_counter}
BUDGET_UNITS = tuple(_COUNTERS)


@dataclass(frozen=True, slots=True)
class Budget:
    """Length limit over the serialized HTML string.

    "words" splits on whitespace and "chars" counts characters. Other
    units (say tokenizer-based ones) need an explicit ``counter``.
    """

    limit: int
    unit: str = "words"
    counter: Callable[[str], int] | None = None

    def __post_init__(self) -> None:
        if self.counter is None and self.unit not in _COUNTERS:
            raise ValueError(
                f"unknown budget unit {self.unit!r}; pass a counter for it")

    def measure(self, html: str) -> int:
        counter = self.counter or _COUNTERS[self.unit]
        return counter(html)


@dataclass(frozen=True, slots=True)
class AuditEntry:
    """One deletion: which block went, its score, the length afterwards."""

    path: str
    score: float
    length_after: int


@dataclass(slots=True)
class PruneResult:
    docset: DocumentSet
    length: int
    deleted: list[AuditEntry] = field(default_factory=list)


def _is_empty(node: DomNode) -> bool:
    if node.kind != ELEMENT:
        return False
    if node.element_children:
        return False
    if any(c.kind == PAYLOAD for c in node.children):
        return False
    return extract_text(node) == ""


def _remove_empty_ancestors(node: DomNode | None) -> None:
    while node is not None and _is_empty(node):
        parent = node.parent
        node.detach()
        node = parent


def _delete_block(block: BlockNode, clone_of: dict[int, DomNode]) -> None:
    node = clone_of[id(block.source)]
    if node.kind == DOCUMENT:
        # stray top-level text: drop the runs, keep the container
        for run in node.text_runs:
            run.detach()
        return
    if block.is_leaf:
        parent = node.parent
        node.detach()
        _remove_empty_ancestors(parent)
    else:
        for run in node.text_runs:
            run.detach()
        _remove_empty_ancestors(node)


def prune(tree: BlockTree, budget: Budget | int, query: str | None = None,
          scorer=None) -> PruneResult:
    """Delete lowest-scoring blocks until the serialization fits.

    Blocks must carry scores: either assigned beforehand, or computed
    here by passing ``scorer`` (its ``score_blocks(query, texts)`` runs
    once over the block texts and the results are written back). Raises
    :class:`BudgetUnattainable` (with the minimum reachable length) if
    even deleting all blocks leaves the output over the limit.
    """
    if isinstance(budget, int):
        budget = Budget(limit=budget)
    if scorer is not None:
        scores = scorer.score_blocks(query or "",
                                     [b.block_text for b in tree.blocks])
        if len(scores) != len(tree.blocks):
            raise ValueError("scorer returned a wrong-length score vector")
        for block, score in zip(tree.blocks, scores):
            block.score = float(score)
    for block in tree.blocks:
        if block.score is None:
            raise ValueError("all blocks must be scored before pruning")

    memo: dict[int, DomNode] = {}
    document = tree.docset.document.clone(memo)
    order = sorted(tree.blocks, key=lambda b: (b.score, -b.doc_order))

    deleted: list[AuditEntry] = []
    length = budget.measure(serialize(document))
    queue = iter(order)
    while length > budget.limit:
        block = next(queue, None)
        if block is None:
            break
        node = memo[id(block.source)]
        if node.kind != DOCUMENT and node.parent is None:
            continue  # already gone with a removed ancestor
        _delete_block(block, memo)
        length = budget.measure(serialize(document))
        deleted.append(AuditEntry(path=render_path(block.path or ()),
                                  score=block.score, length_after=length))

    document = compress_structure(document)
    length = budget.measure(serialize(document))
    if length > budget.limit:
        raise BudgetUnattainable(budget.limit, length)
    docset = DocumentSet(document=document,
                         provenance=list(tree.docset.provenance))
    return PruneResult(docset=docset, length=length, deleted=deleted)
