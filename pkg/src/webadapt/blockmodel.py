"""Shared document model: DOM trees plus the visual-block vocabulary.

Everything downstream (segmentation, noise filtering, translation checks)
works on the two tree types defined here.  ``DomNode`` is a minimal DOM:
element and text nodes only, built by an error-tolerant HTML parser or a
strict XML parser.  ``VisualBlock`` is the hierarchical block structure the
segmenter produces; it serializes to plain nested ``{id, doc, text,
children}`` objects for dumps and reports.
"""

from __future__ import annotations

import json
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from html import escape
from html.parser import HTMLParser


class ParseError(ValueError):
    """Byte stream cannot be decoded into an HTML document."""


class XmlError(ValueError):
    """XML is not well formed; ``position`` is (line, column)."""

    def __init__(self, message: str, position: tuple[int, int] | None = None):
        super().__init__(message)
        self.position = position


ELEMENT = "element"
TEXT = "text"

# Elements that never take content and therefore never get an end tag.
VOID_ELEMENTS = frozenset(
    "area base br col embed hr img input link meta param source track wbr".split()
)

# Subtrees whose text is never rendered.
INVISIBLE_ELEMENTS = frozenset("script style head template title noscript".split())

MEDIA_ELEMENTS = frozenset(
    "img picture svg canvas video audio object embed iframe".split()
)

# A start tag in this set implicitly closes an open <p> (HTML5 tree
# construction: "p" is in button scope when these appear).
_CLOSES_P = frozenset(
    "address article aside blockquote div dl fieldset figure footer form "
    "h1 h2 h3 h4 h5 h6 header hr main nav ol p pre section table ul".split()
)

# tag -> open tags it implicitly closes when it starts.
_IMPLIED_CLOSES = {
    "li": frozenset(["li"]),
    "dt": frozenset(["dt", "dd"]),
    "dd": frozenset(["dt", "dd"]),
    "tr": frozenset(["tr", "td", "th"]),
    "td": frozenset(["td", "th"]),
    "th": frozenset(["td", "th"]),
    "thead": frozenset(["tr", "td", "th"]),
    "tbody": frozenset(["tr", "td", "th", "thead"]),
    "tfoot": frozenset(["tr", "td", "th", "tbody"]),
    "option": frozenset(["option"]),
}

_DISPLAY_NONE_RE = re.compile(r"\bdisplay\s*:\s*none\b", re.I)
_META_CHARSET_RE = re.compile(
    rb"""<meta[^>]+charset\s*=\s*["']?\s*([a-zA-Z0-9_\-]+)""", re.I
)

# Control characters that never occur in text in any supported encoding
# (the WHATWG mime-sniffing "binary data byte" set, as code points).
_BINARY_CHARS = frozenset(
    chr(c) for c in [*range(0x00, 0x09), 0x0B, *range(0x0E, 0x1B), *range(0x1C, 0x20)]
)


@dataclass(eq=False)
class DomNode:
    """One node of the document tree.

    ``kind`` is ``element`` or ``text``.  Element tags are lowercase.
    Nodes compare by identity; use :func:`same_tree` for structural checks.
    """

    kind: str
    tag: str = ""
    attributes: dict[str, str] = field(default_factory=dict)
    children: list[DomNode] = field(default_factory=list)
    text: str = ""
    parent: DomNode | None = field(default=None, repr=False, compare=False)

    def is_element(self) -> bool:
        return self.kind == ELEMENT

    def is_text(self) -> bool:
        return self.kind == TEXT

    def append(self, child: DomNode) -> None:
        child.parent = self
        self.children.append(child)

    def iter(self):
        """Pre-order traversal of the subtree, including self."""
        yield self
        for child in self.children:
            yield from child.iter()

    def ancestors(self):
        node = self.parent
        while node is not None:
            yield node
            node = node.parent


def element(tag: str, attrs: dict[str, str] | None = None, *children: DomNode) -> DomNode:
    node = DomNode(kind=ELEMENT, tag=tag.lower(), attributes=dict(attrs or {}))
    for child in children:
        node.append(child)
    return node


def text_node(content: str) -> DomNode:
    return DomNode(kind=TEXT, text=content)


def same_tree(a: DomNode, b: DomNode) -> bool:
    """Structural equality (ignores parent pointers)."""
    if a.kind != b.kind:
        return False
    if a.is_text():
        return a.text == b.text
    if a.tag != b.tag or a.attributes != b.attributes:
        return False
    if len(a.children) != len(b.children):
        return False
    return all(same_tree(x, y) for x, y in zip(a.children, b.children))


def _looks_binary(decoded: str) -> bool:
    return any(ch in _BINARY_CHARS for ch in decoded)


def decode_body(body: bytes, charset_hint: str | None = None) -> str:
    """Decode raw page bytes to text.

    Tries, in order: a UTF-16 byte-order mark, the caller's charset hint,
    a ``<meta charset>`` declaration found in the first 1024 bytes, UTF-8,
    then Latin-1.  The first decode that succeeds and does not look like
    binary data wins; binary-looking output raises :class:`ParseError`.
    """
    candidates: list[str] = []
    if body.startswith(b"\xff\xfe") or body.startswith(b"\xfe\xff"):
        candidates.append("utf-16")
    if charset_hint:
        candidates.append(charset_hint)
    meta = _META_CHARSET_RE.search(body[:1024])
    if meta:
        candidates.append(meta.group(1).decode("ascii", "replace"))
    candidates += ["utf-8-sig", "latin-1"]

    seen = set()
    for enc in candidates:
        key = enc.lower()
        if key in seen:
            continue
        seen.add(key)
        try:
            decoded = body.decode(enc)
        except (UnicodeDecodeError, LookupError):
            continue
        if _looks_binary(decoded):
            raise ParseError(f"byte stream decodes to binary data (charset {enc})")
        if decoded.startswith("﻿"):
            decoded = decoded[1:]
        return decoded
    raise ParseError("undecodable byte stream")


class _TreeBuilder(HTMLParser):
    """Error-tolerant tree construction over the stdlib tokenizer.

    Recovery rules are the common subset of the HTML5 tree-construction
    algorithm: void elements never open, a few start tags imply end tags
    (``<p>a<p>b`` yields sibling paragraphs), mismatched end tags pop to
    the nearest open match or are dropped, and everything still open at
    end of input is closed.
    """

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.top: list[DomNode] = []
        self.stack: list[DomNode] = []

    def _attach(self, node: DomNode) -> None:
        if self.stack:
            self.stack[-1].append(node)
        else:
            self.top.append(node)

    def _implied_end_tags(self, tag: str) -> None:
        closers = set(_IMPLIED_CLOSES.get(tag, ()))
        if tag in _CLOSES_P:
            closers.add("p")
        while self.stack and self.stack[-1].tag in closers:
            self.stack.pop()

    def handle_starttag(self, tag, attrs):
        self._implied_end_tags(tag)
        attributes: dict[str, str] = {}
        for name, value in attrs:
            attributes.setdefault(name, value if value is not None else "")
        node = DomNode(kind=ELEMENT, tag=tag, attributes=attributes)
        self._attach(node)
        if tag not in VOID_ELEMENTS:
            self.stack.append(node)

    def handle_startendtag(self, tag, attrs):
        self.handle_starttag(tag, attrs)
        if tag not in VOID_ELEMENTS:
            self.stack.pop()

    def handle_endtag(self, tag):
        if tag in VOID_ELEMENTS:
            return
        for i in range(len(self.stack) - 1, -1, -1):
            if self.stack[i].tag == tag:
                del self.stack[i:]
                return
        # stray end tag: ignore

    def handle_data(self, data):
        if not data:
            return
        self._attach(DomNode(kind=TEXT, text=data))

    def root(self) -> DomNode:
        top = [n for n in self.top if n.is_element() or n.text.strip()]
        if len(top) == 1 and top[0].is_element() and top[0].tag == "html":
            return top[0]
        root = element("html")
        for node in top:
            root.append(node)
        return root


def parse_html(body: bytes | str, charset_hint: str | None = None) -> DomNode:
    """Parse HTML bytes (or text) into a single-rooted DOM tree.

    Unclosed and mis-nested tags are recovered; a synthetic ``html`` root
    wraps documents that lack one.  Raises :class:`ParseError` for empty
    or undecodable input.
    """
    if isinstance(body, bytes):
        if not body:
            raise ParseError("empty body")
        markup = decode_body(body, charset_hint)
    else:
        if not body:
            raise ParseError("empty body")
        markup = body
    builder = _TreeBuilder()
    builder.feed(markup)
    builder.close()
    return builder.root()


def _local_name(tag: str) -> str:
    if tag.startswith("{"):
        return tag.rpartition("}")[2]
    return tag


def _from_etree(elem: ET.Element) -> DomNode:
    node = DomNode(
        kind=ELEMENT,
        tag=_local_name(elem.tag).lower(),
        attributes={_local_name(k): v for k, v in elem.attrib.items()},
    )
    if elem.text:
        node.append(text_node(elem.text))
    for child in elem:
        node.append(_from_etree(child))
        if child.tail:
            node.append(text_node(child.tail))
    return node


def parse_xml(body: bytes) -> DomNode:
    """Parse well-formed XML; raises :class:`XmlError` with the failure position."""
    if not body:
        raise XmlError("empty body")
    try:
        root = ET.fromstring(body)
    except ET.ParseError as exc:
        raise XmlError(str(exc), position=exc.position) from exc
    return _from_etree(root)


def is_visible(node: DomNode) -> bool:
    """True for text nodes that render: non-blank and outside invisible subtrees."""
    if not node.is_text() or not node.text.strip():
        return False
    for anc in node.ancestors():
        if anc.tag in INVISIBLE_ELEMENTS:
            return False
        style = anc.attributes.get("style", "")
        if style and _DISPLAY_NONE_RE.search(style):
            return False
    return True


def visible_text_nodes(root: DomNode) -> list[DomNode]:
    """All visible text nodes of the subtree, in document order."""
    return [n for n in root.iter() if is_visible(n)]


def collect_text(*nodes: DomNode) -> str:
    """Visible text of the given subtrees, whitespace-normalized."""
    parts: list[str] = []
    for node in nodes:
        for tn in visible_text_nodes(node):
            parts.append(" ".join(tn.text.split()))
    return " ".join(p for p in parts if p)


_ESCAPE_TEXT_RAW = frozenset(["script", "style"])


def serialize_html(node: DomNode) -> str:
    """Serialize a DOM tree back to markup (no pretty-printing).

    Parsing the output reproduces the same tree (comments and doctype are
    not represented, so they do not round-trip).
    """
    out: list[str] = []
    _serialize(node, out)
    return "".join(out)


def _serialize(node: DomNode, out: list[str]) -> None:
    if node.is_text():
        raw = node.parent is not None and node.parent.tag in _ESCAPE_TEXT_RAW
        out.append(node.text if raw else escape(node.text, quote=False))
        return
    out.append(f"<{node.tag}")
    for name, value in node.attributes.items():
        out.append(f' {name}="{escape(value)}"')
    out.append(">")
    if node.tag in VOID_ELEMENTS:
        return
    for child in node.children:
        _serialize(child, out)
    out.append(f"</{node.tag}>")


HORIZONTAL = "horizontal"
VERTICAL = "vertical"


@dataclass
class Separator:
    """A gap between two adjacent sibling blocks with a structural weight."""

    orientation: str
    weight: int
    between: tuple[int, int]


@dataclass(eq=False)
class VisualBlock:
    """One node of the hierarchical segmentation result.

    ``dom_refs`` holds the visible text nodes the block covers (an internal
    block covers the union of its children's).  ``source_nodes`` are the
    DOM nodes the block was carved from; they drive separator detection
    and are not serialized.
    """

    id: str
    doc: int = 10
    text: str = ""
    children: list[VisualBlock] = field(default_factory=list)
    dom_refs: list[DomNode] = field(default_factory=list, repr=False)
    source_nodes: list[DomNode] = field(default_factory=list, repr=False)

    def is_leaf(self) -> bool:
        return not self.children

    def leaves(self) -> list[VisualBlock]:
        if self.is_leaf():
            return [self]
        out: list[VisualBlock] = []
        for child in self.children:
            out.extend(child.leaves())
        return out

    def iter(self):
        yield self
        for child in self.children:
            yield from child.iter()


def block_to_dict(block: VisualBlock) -> dict:
    return {
        "id": block.id,
        "doc": block.doc,
        "text": block.text,
        "children": [block_to_dict(c) for c in block.children],
    }


def block_from_dict(data: dict) -> VisualBlock:
    return VisualBlock(
        id=data["id"],
        doc=data["doc"],
        text=data.get("text", ""),
        children=[block_from_dict(c) for c in data.get("children", [])],
    )


def dump_block_tree(block: VisualBlock) -> str:
    return json.dumps(block_to_dict(block), ensure_ascii=False, indent=2)


def load_block_tree(serialized: str) -> VisualBlock:
    return block_from_dict(json.loads(serialized))
