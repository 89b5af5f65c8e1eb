"""Query-independent HTML cleaning and lossless structural compression.

Cleaning drops invisible payloads (scripts, styles, comments) and strips
attributes down to an allowlist; visible text is never touched. Structural
compression then collapses single-nested tag chains onto their innermost
element and removes empty elements, repeated to a fixed point. Both
preserve the collapsed visible text exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .dom import (
    COMMENT,
    DOCUMENT,
    ELEMENT,
    PAYLOAD,
    TEXT,
    DomNode,
    collapse_ws,
)

DEFAULT_DROP_TAGS = frozenset({"script", "style"})


@dataclass(frozen=True)
class CleanConfig:
    """Pure-data knobs for :func:`clean`.

    ``attr_allowlist`` names attributes kept verbatim (empty by default:
    every attribute is dropped). ``drop_tags`` are removed together with
    everything inside them.
    """

    attr_allowlist: frozenset[str] = frozenset()
    drop_tags: frozenset[str] = DEFAULT_DROP_TAGS
    strip_comments: bool = True

    @classmethod
    def from_dict(cls, data: dict) -> "CleanConfig":
        return cls(
            attr_allowlist=frozenset(data.get("attr_allowlist", ())),
            drop_tags=frozenset(data.get("drop_tags", DEFAULT_DROP_TAGS)),
            strip_comments=bool(data.get("strip_comments", True)),
        )


def clean_content(tree: DomNode, cfg: CleanConfig | None = None) -> DomNode:
    """Remove dropped tags, comments, and non-allowlisted attributes.

    Returns a new tree; text runs pass through unchanged.
    """
    cfg = cfg or CleanConfig()
    copy = _clean_node(tree, cfg)
    if copy is None:
        raise ValueError("the root node itself is configured to be dropped")
    return copy


def _clean_node(node: DomNode, cfg: CleanConfig) -> DomNode | None:
    if node.kind == COMMENT:
        return None if cfg.strip_comments else DomNode(kind=COMMENT, data=node.data)
    if node.kind in (TEXT, PAYLOAD):
        return DomNode(kind=node.kind, data=node.data)
    if node.kind == ELEMENT and node.tag in cfg.drop_tags:
        return None
    attrs = {}
    if node.kind == ELEMENT:
        attrs = {k: v for k, v in node.attrs.items() if k in cfg.attr_allowlist}
    copy = DomNode(kind=node.kind, tag=node.tag, attrs=attrs)
    for child in node.children:
        kept = _clean_node(child, cfg)
        if kept is not None:
            copy.append_child(kept)
    return copy


def compress_structure(tree: DomNode) -> DomNode:
    """Collapse single-nested tag chains and drop empty elements.

    A chain like ``<div><div><p>t</p></div></div>`` becomes ``<p>t</p>``;
    elements with no visible text and no children are removed. Runs to a
    fixed point; the input is not mutated.
    """
    if tree.kind not in (ELEMENT, DOCUMENT):
        return tree.clone()
    result = _compress_node(tree)
    if result is None:
        # the whole tree was empty; keep an empty container of the same kind
        return DomNode(kind=tree.kind, tag=tree.tag, attrs=dict(tree.attrs))
    return result


def _is_ws_text(node: DomNode) -> bool:
    return node.kind == TEXT and collapse_ws(node.data) == ""


def _compress_node(node: DomNode) -> DomNode | None:
    if node.kind in (TEXT, PAYLOAD, COMMENT):
        return DomNode(kind=node.kind, data=node.data)

    kept: list[DomNode] = []
    for child in node.children:
        processed = _compress_node(child)
        if processed is not None:
            kept.append(processed)

    has_element = any(c.kind == ELEMENT for c in kept)
    if has_element:
        # drop line-formatting whitespace between tags; keep inline spaces
        kept = [c for c in kept
                if not (_is_ws_text(c) and ("\n" in c.data or "\r" in c.data))]

    if node.kind == DOCUMENT:
        doc = DomNode(kind=DOCUMENT)
        for c in kept:
            doc.append_child(c)
        return doc

    elements = [c for c in kept if c.kind == ELEMENT]
    has_text = any(c.kind == TEXT and collapse_ws(c.data) for c in kept)
    has_payload = any(c.kind == PAYLOAD for c in kept)

    if not elements and not has_text and not has_payload:
        return None  # empty element
    if len(elements) == 1 and len(kept) >= 1 and not has_text and not has_payload:
        return elements[0]  # single-nested wrapper: keep the inner element

    copy = DomNode(kind=ELEMENT, tag=node.tag, attrs=dict(node.attrs))
    for c in kept:
        copy.append_child(c)
    return copy


def clean(tree: DomNode, cfg: CleanConfig | None = None) -> DomNode:
    """Content cleaning followed by structural compression. Idempotent."""
    return compress_structure(clean_content(tree, cfg))
