"""Granularity-adjustable block tree over a cleaned DOM.

A block is the smallest prunable unit: either a merged subtree's full text
(leaf block) or one node's directly attached text (non-leaf block). The
tree is built breadth-first; a node whose total word count is under the
granularity is merged whole, otherwise its children are expanded and any
attached text becomes a non-leaf block. Each block carries a disambiguated
root-to-node tag path such as ``<html1><body><div2><p>``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .dom import (
    DOCUMENT,
    ELEMENT,
    TEXT,
    DocumentSet,
    DomNode,
    collapse_ws,
    count_words,
    extract_text,
)

# Disambiguated tag names from root to a block; renders as "<a><b2><c>".
BlockPath = tuple[str, ...]


class InvalidGranularity(ValueError):
    """Raised when a refinement does not strictly decrease the granularity."""


@dataclass(slots=True)
class BlockNode:
    """One prunable block.

    Leaf blocks own the full text of their source subtree; non-leaf blocks
    own only the text directly attached to their source node. ``doc_order``
    is the source node's pre-order index, used as the deterministic
    tie-break everywhere.
    """

    source: DomNode
    block_text: str
    is_leaf: bool
    word_count: int
    doc_order: int
    path: BlockPath | None = None
    score: float | None = None


@dataclass(slots=True)
class BlockTree:
    """Blocks of one document set at a fixed granularity.

    ``blocks`` is flat, in document order; nesting is implied by DOM
    ancestry of the source nodes.
    """

    docset: DocumentSet
    granularity: int
    blocks: list[BlockNode] = field(default_factory=list)


def render_path(path: BlockPath) -> str:
    """Render segments to the canonical string form, e.g. ``<html1><body>``."""
    return "".join(f"<{segment}>" for segment in path)


def build_block_tree(docset: DocumentSet, max_words: int) -> BlockTree:
    """Merge DOM nodes into blocks of at most ``max_words`` words.

    Breadth-first over the documents: a leaf element always becomes a
    block; an element whose subtree holds fewer than ``max_words`` words is
    merged into a single leaf block; otherwise its children are expanded
    and its attached text, if any, becomes a non-leaf block. Oversized
    blocks occur only where a single unsplittable element exceeds the
    limit.
    """
    if max_words < 1:
        raise ValueError("max_words must be >= 1")
    document = docset.document
    subtree_words = _subtree_word_counts(document)
    order = {id(node): i for i, node in enumerate(document.iter())}

    blocks: list[BlockNode] = []

    def add(source: DomNode, text: str, is_leaf: bool) -> None:
        blocks.append(BlockNode(
            source=source,
            block_text=text,
            is_leaf=is_leaf,
            word_count=count_words(text),
            doc_order=order[id(source)],
        ))

    queue: deque[DomNode] = deque()
    # The document container never merges: blocks never span documents.
    for child in document.element_children:
        queue.append(child)
    doc_text = document.attached_text
    if doc_text:
        add(document, doc_text, is_leaf=False)

    while queue:
        node = queue.popleft()
        children = node.element_children
        if not children:
            add(node, extract_text(node), is_leaf=True)
        elif subtree_words[id(node)] < max_words:
            add(node, extract_text(node), is_leaf=True)
        else:
            queue.extend(children)
            attached = node.attached_text
            if attached:
                add(node, attached, is_leaf=False)

    blocks.sort(key=lambda b: b.doc_order)
    return BlockTree(docset=docset, granularity=max_words, blocks=blocks)


def _subtree_word_counts(root: DomNode) -> dict[int, int]:
    """Word count of all text under each node, in one post-order pass."""
    counts: dict[int, int] = {}
    stack: list[tuple[DomNode, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if not expanded:
            stack.append((node, True))
            for child in node.children:
                stack.append((child, False))
        else:
            if node.kind == TEXT:
                counts[id(node)] = count_words(collapse_ws(node.data))
            elif node.kind in (ELEMENT, DOCUMENT):
                counts[id(node)] = sum(counts[id(c)] for c in node.children)
            else:
                counts[id(node)] = 0
    return counts


def assign_paths(tree: BlockTree) -> BlockTree:
    """Fill in every block's disambiguated tag path.

    Root tags already carry their ordinal from document concatenation and
    are used verbatim. Below the roots, a tag gets an ordinal suffix only
    when the same tag occurs more than once among its element siblings,
    numbered in document order from 1.
    """
    document = tree.docset.document
    segments: dict[int, BlockPath] = {id(document): ()}
    stack: list[DomNode] = [document]
    while stack:
        node = stack.pop()
        base = segments[id(node)]
        children = node.element_children
        tag_total: dict[str, int] = {}
        for child in children:
            tag_total[child.tag] = tag_total.get(child.tag, 0) + 1
        seen: dict[str, int] = {}
        for child in children:
            tag = child.tag
            seen[tag] = seen.get(tag, 0) + 1
            if node.kind == DOCUMENT or tag_total[tag] == 1:
                name = tag
            else:
                name = f"{tag}{seen[tag]}"
            segments[id(child)] = base + (name,)
            stack.append(child)
    for block in tree.blocks:
        block.path = segments[id(block.source)]
    return tree


def refine_granularity(tree: BlockTree, finer_max_words: int) -> BlockTree:
    """Rebuild the tree over the same DOM with a strictly finer granularity."""
    if finer_max_words >= tree.granularity:
        raise InvalidGranularity(
            f"finer granularity {finer_max_words} must be < {tree.granularity}")
    return build_block_tree(tree.docset, finer_max_words)


def blocks_debug_dump(tree: BlockTree) -> list[dict]:
    """JSON-ready view of the blocks: path, is_leaf, word_count, text."""
    return [
        {
            "path": render_path(block.path) if block.path is not None else None,
            "is_leaf": block.is_leaf,
            "word_count": block.word_count,
            "text": block.block_text,
        }
        for block in tree.blocks
    ]
