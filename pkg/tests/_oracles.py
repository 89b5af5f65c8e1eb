"""Reference implementations written independently of the package.

Each function recomputes an expected result from first principles (raw
string scans, plain recursion, rewrite-to-fixed-point) so package output
can be checked against something that shares no code with it.
"""

from __future__ import annotations

import html as html_mod
import math
import re
from collections import Counter

from htmlprune.dom import COMMENT, DOCUMENT, ELEMENT, PAYLOAD, TEXT, DomNode

_VOIDS = {"area", "base", "br", "col", "embed", "hr", "img", "input", "link",
          "meta", "source", "track", "wbr"}


# -- visible text straight off the raw markup --------------------------------

_NAME = re.compile(r"<([a-zA-Z][a-zA-Z0-9]*)")


def _skip_tag(raw: str, i: int) -> int:
    """Index just past the '>' closing the tag opened at ``i``; quote-aware."""
    j = i + 1
    quote = None
    while j < len(raw):
        c = raw[j]
        if quote is not None:
            if c == quote:
                quote = None
        elif c in "\"'":
            quote = c
        elif c == ">":
            return j + 1
        j += 1
    return len(raw)


def raw_visible_text(raw: str) -> str:
    """Visible text of raw HTML: tags become spaces, comments and
    script/style contents vanish, character references decode, whitespace
    collapses. A ``<`` not opening any markup construct is literal text."""
    out: list[str] = []
    i, n = 0, len(raw)
    while i < n:
        c = raw[i]
        if c != "<":
            out.append(c)
            i += 1
            continue
        if raw.startswith("<!--", i):
            end = raw.find("-->", i + 4)
            i = n if end < 0 else end + 3
            out.append(" ")
            continue
        nxt = raw[i + 1] if i + 1 < n else ""
        if nxt.isalpha():
            name = _NAME.match(raw, i).group(1).lower()
            j = _skip_tag(raw, i)
            if name in ("script", "style"):
                m = re.compile(rf"</\s*{name}", re.I).search(raw, j)
                if m is None:
                    j = n
                else:
                    k = raw.find(">", m.end())
                    j = n if k < 0 else k + 1
            out.append(" ")
            i = j
        elif nxt == "/" or nxt in "!?":
            j = raw.find(">", i)
            i = n if j < 0 else j + 1
            out.append(" ")
        else:
            out.append("<")
            i += 1
    return " ".join(html_mod.unescape("".join(out)).split())


# -- tree text and serialization ---------------------------------------------


def tree_visible_text(node: DomNode) -> str:
    """Recursive equivalent of the text a reader sees under ``node``."""
    if node.kind == TEXT:
        return " ".join(node.data.split())
    if node.kind in (ELEMENT, DOCUMENT):
        parts = [tree_visible_text(c) for c in node.children]
        return " ".join(p for p in parts if p)
    return ""


def reference_serialize(node: DomNode) -> str:
    """Independent renderer following the same output format contract."""
    if node.kind == TEXT:
        return (node.data.replace("&", "&amp;").replace("<", "&lt;")
                .replace(">", "&gt;"))
    if node.kind == PAYLOAD:
        return node.data
    if node.kind == COMMENT:
        return f"<!--{node.data}-->"
    if node.kind == DOCUMENT:
        return "".join(reference_serialize(c) for c in node.children)
    attrs = ""
    for key, value in node.attrs.items():
        if value is None:
            attrs += f" {key}"
        else:
            escaped = value.replace("&", "&amp;").replace('"', "&quot;")
            attrs += f' {key}="{escaped}"'
    inner = "".join(reference_serialize(c) for c in node.children)
    if node.tag in _VOIDS and not node.children:
        return f"<{node.tag}{attrs}>"
    return f"<{node.tag}{attrs}>{inner}</{node.tag}>"


# -- block tree reference ------------------------------------------------------


def reference_blocks(document: DomNode, max_words: int) -> list[dict]:
    """Recursive transcription of the block construction rules.

    Returns dicts with the source node's identity, leaf flag, text, and
    word count, sorted by pre-order position.
    """
    position: dict[int, int] = {}

    def index(node: DomNode, counter: list[int]) -> None:
        position[id(node)] = counter[0]
        counter[0] += 1
        for child in node.children:
            index(child, counter)

    index(document, [0])

    def total_words(node: DomNode) -> int:
        if node.kind == TEXT:
            return len(node.data.split())
        if node.kind in (ELEMENT, DOCUMENT):
            return sum(total_words(c) for c in node.children)
        return 0

    def own_text(node: DomNode) -> str:
        runs = [" ".join(c.data.split()) for c in node.children
                if c.kind == TEXT]
        return " ".join(r for r in runs if r)

    out: list[dict] = []

    def emit(node: DomNode, text: str, is_leaf: bool) -> None:
        out.append({"source": id(node), "is_leaf": is_leaf, "text": text,
                    "words": len(text.split()),
                    "position": position[id(node)]})

    def visit(el: DomNode) -> None:
        kids = [c for c in el.children if c.kind == ELEMENT]
        if not kids:
            emit(el, tree_visible_text(el), True)
        elif total_words(el) < max_words:
            emit(el, tree_visible_text(el), True)
        else:
            if own_text(el):
                emit(el, own_text(el), False)
            for kid in kids:
                visit(kid)

    if own_text(document):
        emit(document, own_text(document), False)
    for child in document.children:
        if child.kind == ELEMENT:
            visit(child)
    out.sort(key=lambda b: b["position"])
    return out


# -- structural compression by single rewrites --------------------------------


def _is_line_ws(node: DomNode) -> bool:
    return (node.kind == TEXT and not node.data.split()
            and ("\n" in node.data or "\r" in node.data))


def _try_rewrite(node: DomNode) -> bool:
    """Apply one rewrite, deepest first, below ``node``.

    Order at each level: reduce subtrees, then remove empty element
    children, then collapse single-nested children, then drop formatting
    whitespace if element children remain. Returns True if anything fired.
    """
    for child in node.children:
        if child.kind == ELEMENT and _try_rewrite(child):
            return True
    for i, child in enumerate(node.children):
        if child.kind != ELEMENT:
            continue
        elements = [c for c in child.children if c.kind == ELEMENT]
        has_text = any(c.kind == TEXT and c.data.split()
                       for c in child.children)
        has_payload = any(c.kind == PAYLOAD for c in child.children)
        if not elements and not has_text and not has_payload:
            del node.children[i]
            return True
        if len(elements) == 1 and not has_text and not has_payload:
            node.children[i] = elements[0]
            elements[0].parent = node
            return True
    if (any(c.kind == ELEMENT for c in node.children)
            and any(_is_line_ws(c) for c in node.children)):
        node.children = [c for c in node.children if not _is_line_ws(c)]
        return True
    return False


def reference_compress(tree: DomNode) -> DomNode:
    """One rewrite at a time until nothing applies; checks the real
    single-pass implementation reaches the same fixed point."""
    root = tree.clone()
    if root.kind in (ELEMENT, DOCUMENT):
        while _try_rewrite(root):
            pass
    return root


# -- greedy pruning simulation -------------------------------------------------


def reference_prune(tree, limit: int, unit: str = "words"):
    """Replay the deletion policy over an independent mutable copy.

    Returns ``(final_html, lengths_after)`` or raises ``ValueError`` with
    the minimum length if the budget cannot be met.
    """
    count = (lambda s: len(s.split())) if unit == "words" else len
    memo: dict[int, DomNode] = {}
    root = tree.docset.document.clone(memo)

    def is_empty(node: DomNode) -> bool:
        return (node.kind == ELEMENT
                and not any(c.kind == ELEMENT for c in node.children)
                and not any(c.kind == PAYLOAD for c in node.children)
                and tree_visible_text(node) == "")

    def remove(node: DomNode) -> None:
        # by identity: sibling nodes can compare equal by value
        node.parent.children = [c for c in node.parent.children
                                if c is not node]
        node.parent = None

    lengths: list[int] = []
    order = sorted(tree.blocks, key=lambda b: (b.score, -b.doc_order))
    length = count(reference_serialize(root))
    for block in order:
        if length <= limit:
            break
        node = memo[id(block.source)]
        if node.kind != DOCUMENT and node.parent is None:
            continue
        if node.kind == DOCUMENT:
            node.children = [c for c in node.children if c.kind != TEXT]
        elif block.is_leaf:
            parent = node.parent
            remove(node)
            node = parent
            while node is not None and is_empty(node):
                parent = node.parent
                remove(node)
                node = parent
        else:
            node.children = [c for c in node.children if c.kind != TEXT]
            while node is not None and is_empty(node):
                parent = node.parent
                remove(node)
                node = parent
        length = count(reference_serialize(root))
        lengths.append(length)

    root = reference_compress(root)
    length = count(reference_serialize(root))
    if length > limit:
        raise ValueError(f"minimum {length}")
    return reference_serialize(root), lengths


# -- token path scoring without any skipping ----------------------------------

_PIECES = re.compile(r"><|[<>]|[^<>]+")


def reference_token_scores(rendered_paths: list[str], context: str,
                           provider) -> tuple[list[float], int]:
    """Scores from the chain rule applied longhand, plus expected call count.

    Builds its own token id table (first-seen over the context, then the
    paths in order), finds each position's sibling group by scanning all
    paths, and asks the provider once per multi-member group.
    """
    ids: dict[str, int] = {}

    def encode(text: str) -> list[int]:
        seq = []
        for piece in _PIECES.findall(text):
            if piece not in ids:
                ids[piece] = len(ids)
            seq.append(ids[piece])
        return seq

    ctx = encode(context) if context else []
    seqs = [encode(p) for p in rendered_paths]

    group_cache: dict[tuple[int, ...], list[int]] = {}

    def group_after(prefix: tuple[int, ...]) -> list[int]:
        if prefix not in group_cache:
            members: list[int] = []
            for seq in seqs:
                if (len(seq) > len(prefix)
                        and tuple(seq[:len(prefix)]) == prefix
                        and seq[len(prefix)] not in members):
                    members.append(seq[len(prefix)])
            group_cache[prefix] = members
        return group_cache[prefix]

    logprob_cache: dict[tuple[int, ...], float] = {}

    def logprob_of(prefix: tuple[int, ...], token: int) -> float:
        key = prefix + (token,)
        if key not in logprob_cache:
            group = group_after(prefix)
            if len(prefix) == 0 or len(group) == 1:
                logprob_cache[key] = 0.0
            else:
                logits = provider.logits(ctx + list(prefix), group)
                exps = [math.exp(x) for x in logits]
                total = sum(exps)
                for member, e in zip(group, exps):
                    logprob_cache[prefix + (member,)] = math.log(e / total)
        return logprob_cache[key]

    scores = []
    for seq in seqs:
        total = 0.0
        for n in range(len(seq)):
            total += logprob_of(tuple(seq[:n]), seq[n])
        scores.append(total)

    expected_calls = sum(
        1 for prefix, group in group_cache.items()
        if len(prefix) >= 1 and len(group) >= 2)
    return scores, expected_calls


# -- lexical ranking ------------------------------------------------------------


def reference_bm25(query: str, texts: list[str], k1: float = 1.2,
                   b: float = 0.75) -> list[float]:
    token = re.compile(r"[a-z0-9]+")
    docs = [token.findall(t.lower()) for t in texts]
    n = len(docs)
    if n == 0:
        return []
    avgdl = sum(map(len, docs)) / n
    df: Counter[str] = Counter()
    for d in docs:
        for t in set(d):
            df[t] += 1
    out = []
    for d in docs:
        tf = Counter(d)
        s = 0.0
        for t in token.findall(query.lower()):
            if t in tf:
                idf = math.log(1.0 + (n - df[t] + 0.5) / (df[t] + 0.5))
                dl = len(d) / avgdl if avgdl > 0 else 0.0
                s += idf * tf[t] * (k1 + 1.0) / (tf[t] + k1 * (1.0 - b + b * dl))
        out.append(s)
    return out
