"""Lenient DOM for scraped web HTML: parse, rewrite, serialize.

The node model keeps three views of the text under an element apart:
``content`` (all text in the subtree), ``children`` (text wrapped by child
tags), and directly attached text runs. Text runs are stored verbatim;
whitespace is collapsed only when text is extracted, so serialized output
stays close to the source bytes.

Parsing never fails on malformed input: unclosed tags are auto-closed,
stray end tags are ignored, and common implied-close rules (``<p>``,
``<li>``, table cells) are applied. Full HTML5 conformance is a non-goal.
"""

from __future__ import annotations

import codecs
import re
from collections import defaultdict
from dataclasses import dataclass, field
from html.parser import HTMLParser

ELEMENT = "element"
TEXT = "text"
COMMENT = "comment"
PAYLOAD = "payload"  # raw script/style contents, never visible text
DOCUMENT = "document"

VOID_ELEMENTS = {
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link",
    "meta", "param", "source", "track", "wbr",
}

RAW_TEXT_ELEMENTS = {"script", "style"}

# Start tags that implicitly close the innermost open element of a given
# name (subset of the HTML5 rules; enough for real-web leniency).
_P_CLOSERS = {
    "address", "article", "aside", "blockquote", "details", "div", "dl",
    "fieldset", "figcaption", "figure", "footer", "form", "h1", "h2", "h3",
    "h4", "h5", "h6", "header", "hr", "main", "nav", "ol", "p", "pre",
    "section", "table", "ul",
}
_IMPLIED_CLOSERS: dict[str, frozenset[str]] = {
    "p": frozenset(_P_CLOSERS),
    "li": frozenset({"li"}),
    "dt": frozenset({"dt", "dd"}),
    "dd": frozenset({"dt", "dd"}),
    "tr": frozenset({"tr"}),
    "td": frozenset({"td", "th", "tr"}),
    "th": frozenset({"td", "th", "tr"}),
    "thead": frozenset({"tbody", "tfoot"}),
    "tbody": frozenset({"tbody", "tfoot"}),
    "option": frozenset({"option", "optgroup"}),
    "optgroup": frozenset({"optgroup"}),
}


class EmptyDocument(ValueError):
    """Raised when the input decodes to an empty string."""


class EmptyDocumentSet(ValueError):
    """Raised when a document set is built from zero documents."""


@dataclass(eq=True, slots=True)
class DomNode:
    """One node of the parsed tree.

    ``kind`` is one of ``element``, ``text``, ``comment``, ``payload``, or
    ``document``. Elements carry ``tag``/``attrs``/``children``; the other
    kinds carry their raw ``data``. The ``document`` kind is the unnamed
    container returned by :func:`parse_html`; it serializes to the plain
    concatenation of its children.
    """

    kind: str
    tag: str | None = None
    attrs: dict[str, str | None] = field(default_factory=dict)
    data: str = ""
    children: list["DomNode"] = field(default_factory=list)
    parent: "DomNode | None" = field(default=None, repr=False, compare=False)

    def __repr__(self) -> str:  # pragma: no cover - debug helper
        if self.kind == ELEMENT:
            return f"DomNode(<{self.tag}> {len(self.children)} children)"
        if self.kind == DOCUMENT:
            return f"DomNode(document, {len(self.children)} children)"
        return f"DomNode({self.kind}, {self.data[:30]!r})"

    # -- structure helpers ------------------------------------------------

    @property
    def element_children(self) -> list["DomNode"]:
        return [c for c in self.children if c.kind == ELEMENT]

    @property
    def text_runs(self) -> list["DomNode"]:
        return [c for c in self.children if c.kind == TEXT]

    @property
    def attached_text(self) -> str:
        """Directly attached text: the node's own runs, collapsed and joined."""
        parts = [collapse_ws(r.data) for r in self.text_runs]
        return " ".join(p for p in parts if p)

    def append_child(self, child: "DomNode") -> None:
        child.parent = self
        self.children.append(child)

    def detach(self) -> None:
        """Remove this node from its parent, if any.

        Removal is by identity: equal-valued siblings must not be
        confused with this node.
        """
        if self.parent is not None:
            siblings = self.parent.children
            for i, child in enumerate(siblings):
                if child is self:
                    del siblings[i]
                    break
            self.parent = None

    def clone(self, memo: dict[int, "DomNode"] | None = None) -> "DomNode":
        """Deep copy. ``memo`` (if given) maps original node ids to copies."""
        copy = DomNode(kind=self.kind, tag=self.tag, attrs=dict(self.attrs),
                       data=self.data)
        if memo is not None:
            memo[id(self)] = copy
        for child in self.children:
            copy.append_child(child.clone(memo))
        return copy

    def iter(self):
        """Pre-order traversal over this node and all descendants."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))


@dataclass(slots=True)
class DocumentSet:
    """Retrieved documents merged under one document container.

    ``document`` is a document-kind node whose element children are the
    per-document roots in retrieval order, with disambiguated tags
    (``html1``, ``html2``, ...). ``provenance`` holds one source id per
    input document.
    """

    document: DomNode
    provenance: list[str] = field(default_factory=list)


# -- text ------------------------------------------------------------------


def collapse_ws(text: str) -> str:
    """Collapse runs of whitespace to single spaces and trim the ends."""
    return " ".join(text.split())


def count_words(text: str) -> int:
    """Number of words: maximal non-whitespace runs after collapsing."""
    return len(text.split())


def extract_text(node: DomNode) -> str:
    """All visible text under ``node``: runs collapsed, joined by spaces.

    Comments and script/style payloads do not count as text.
    """
    parts: list[str] = []
    stack = [node]
    while stack:
        cur = stack.pop()
        if cur.kind == TEXT:
            collapsed = collapse_ws(cur.data)
            if collapsed:
                parts.append(collapsed)
        elif cur.kind in (ELEMENT, DOCUMENT):
            stack.extend(reversed(cur.children))
    return " ".join(parts)


# -- parsing ----------------------------------------------------------------

_CHARSET_RE = re.compile(rb"""charset\s*=\s*["']?\s*([A-Za-z0-9_.:-]+)""", re.I)


def _decode(raw: bytes) -> str:
    if raw.startswith(codecs.BOM_UTF8):
        return raw[len(codecs.BOM_UTF8):].decode("utf-8", "replace")
    for bom, enc in ((codecs.BOM_UTF16_LE, "utf-16-le"),
                     (codecs.BOM_UTF16_BE, "utf-16-be")):
        if raw.startswith(bom):
            return raw[len(bom):].decode(enc, "replace")
    match = _CHARSET_RE.search(raw[:2048])
    if match:
        name = match.group(1).decode("ascii", "ignore")
        try:
            codec = codecs.lookup(name)
        except LookupError:
            codec = None
        if codec is not None:
            return raw.decode(codec.name, "replace")
    return raw.decode("utf-8", "replace")


class _TreeBuilder(HTMLParser):
    """Builds DomNode trees with auto-close recovery on malformed input."""

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.document = DomNode(kind=DOCUMENT)
        self._stack: list[DomNode] = [self.document]

    @property
    def _current(self) -> DomNode:
        return self._stack[-1]

    def _apply_implied_closes(self, tag: str) -> None:
        while len(self._stack) > 1:
            closers = _IMPLIED_CLOSERS.get(self._stack[-1].tag or "")
            if closers and tag in closers:
                self._stack.pop()
            else:
                break

    def handle_starttag(self, tag, attrs):
        self._apply_implied_closes(tag)
        attr_map: dict[str, str | None] = {}
        for name, value in attrs:
            if name not in attr_map:  # first occurrence wins, as in browsers
                attr_map[name] = value
        node = DomNode(kind=ELEMENT, tag=tag, attrs=attr_map)
        self._current.append_child(node)
        if tag not in VOID_ELEMENTS:
            self._stack.append(node)

    def handle_startendtag(self, tag, attrs):
        # "/>" on a non-void element does not close it in HTML; only void
        # elements are genuinely empty.
        self.handle_starttag(tag, attrs)

    def handle_endtag(self, tag):
        if tag in VOID_ELEMENTS:
            return
        for i in range(len(self._stack) - 1, 0, -1):
            if self._stack[i].tag == tag:
                del self._stack[i:]
                return
        # stray end tag: ignore

    def handle_data(self, data):
        if not data:
            return
        current = self._current
        if current.kind == ELEMENT and current.tag in RAW_TEXT_ELEMENTS:
            kind = PAYLOAD
        else:
            kind = TEXT
        last = current.children[-1] if current.children else None
        if last is not None and last.kind == kind:
            last.data += data
        else:
            current.append_child(DomNode(kind=kind, data=data))

    def handle_comment(self, data):
        self._current.append_child(DomNode(kind=COMMENT, data=data))

    def handle_decl(self, decl):  # doctype carries no content; drop
        pass

    def handle_unknown_decl(self, data):  # CDATA and friends; drop
        pass

    def handle_pi(self, data):
        pass


def parse_html(raw: bytes | str) -> DomNode:
    """Parse possibly malformed HTML into a document node.

    Byte input has its encoding sniffed from a BOM or ``charset=`` in the
    first 2 KiB, falling back to UTF-8 with replacement. Raises
    :class:`EmptyDocument` if the input decodes to an empty string.
    """
    text = _decode(raw) if isinstance(raw, bytes) else raw
    if text.startswith("﻿"):
        text = text[1:]
    if text == "":
        raise EmptyDocument("input is empty after decoding")
    builder = _TreeBuilder()
    builder.feed(text)
    builder.close()
    return builder.document


# -- serialization -----------------------------------------------------------


def _escape_text(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _escape_attr(value: str) -> str:
    return value.replace("&", "&amp;").replace('"', "&quot;")


def serialize(node: DomNode) -> str:
    """Render a node back to HTML text.

    Attributes keep their stored order; text runs are emitted verbatim up
    to entity escaping, with no whitespace added or removed.
    """
    out: list[str] = []
    _serialize_into(node, out)
    return "".join(out)


def _serialize_into(node: DomNode, out: list[str]) -> None:
    if node.kind == TEXT:
        out.append(_escape_text(node.data))
    elif node.kind == PAYLOAD:
        out.append(node.data)
    elif node.kind == COMMENT:
        out.append(f"<!--{node.data}-->")
    elif node.kind == DOCUMENT:
        for child in node.children:
            _serialize_into(child, out)
    else:
        parts = [node.tag or ""]
        for name, value in node.attrs.items():
            if value is None:
                parts.append(name)
            else:
                parts.append(f'{name}="{_escape_attr(value)}"')
        out.append(f"<{' '.join(parts)}>")
        if node.tag in VOID_ELEMENTS and not node.children:
            return
        for child in node.children:
            _serialize_into(child, out)
        out.append(f"</{node.tag}>")


# -- document sets ------------------------------------------------------------


def concat_documents(docs: list[DomNode],
                     provenance: list[str] | None = None) -> DocumentSet:
    """Merge parsed documents into one set, in retrieval order.

    Top-level element tags are renamed with per-tag ordinals (``html1``,
    ``html2``, ...) so every root is unambiguous before paths are built.
    Inputs are cloned, not mutated. Raises :class:`EmptyDocumentSet` on an
    empty list.
    """
    if not docs:
        raise EmptyDocumentSet("need at least one document")
    if provenance is not None and len(provenance) != len(docs):
        raise ValueError("provenance must align with docs")
    document = DomNode(kind=DOCUMENT)
    counts: dict[str, int] = defaultdict(int)
    for doc in docs:
        tops = doc.children if doc.kind == DOCUMENT else [doc]
        for top in tops:
            copy = top.clone()
            if copy.kind == ELEMENT:
                counts[copy.tag] += 1
                copy.tag = f"{copy.tag}{counts[copy.tag]}"
            document.append_child(copy)
    if provenance is None:
        provenance = [f"doc-{i + 1}" for i in range(len(docs))]
    return DocumentSet(document=document, provenance=list(provenance))
