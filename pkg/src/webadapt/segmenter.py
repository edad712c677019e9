"""Structural page segmentation with a coherence threshold.

A DOM tree is divided top-down into a hierarchy of visual blocks: block-level
elements become blocks, runs of inline content coalesce into leaf blocks,
and single-child wrapper chains collapse.  Every internal block gets a
degree of coherence (doc, 1..10) from the separators between its children:
strong separation means low coherence.  Partitioning at a permitted degree
of coherence (pdoc) stops descending into any block whose doc has reached
the threshold; the leaves of the stopped tree are the emitted segments.

Separator weights are structural stand-ins for rendered layout cues:

* a horizontal rule between two blocks        +4
* a change in leading heading level           +2
* a change of tag category (table vs list..)  +1
* crossing an element boundary (new parent)   +1

Weights sum when several cues coincide.  An internal block's doc is
10 minus its strongest child separator (capped so doc stays >= 1); leaves
have doc 10.  Flash-dominated pages and XML without HTML vocabulary are
reported as unsupported rather than segmented, and an input with no
visible text or media at all is unsupported with an empty-document reason.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from . import blockmodel, corpus
from .blockmodel import (
    HORIZONTAL,
    MEDIA_ELEMENTS,
    VERTICAL,
    DomNode,
    ParseError,
    Separator,
    VisualBlock,
    XmlError,
)
from .corpus import PageRecord, PageTechnology

DEFAULT_PDOC = 6

WEIGHT_RULE = 4
WEIGHT_HEADING = 2
WEIGHT_CATEGORY = 1
WEIGHT_PARENT = 1

# Elements that start their own block when encountered as children.
BLOCK_LEVEL = frozenset(
    """address article aside blockquote body dd div dl dt fieldset
    figcaption figure footer form h1 h2 h3 h4 h5 h6 header hgroup li main
    nav ol p pre section table tbody td tfoot th thead tr ul""".split()
)

HEADINGS = frozenset(["h1", "h2", "h3", "h4", "h5", "h6"])

_CATEGORY = {}
for _tag in HEADINGS:
    _CATEGORY[_tag] = "heading"
for _tag in ("ul", "ol", "dl", "li", "dt", "dd"):
    _CATEGORY[_tag] = "list"
for _tag in ("table", "thead", "tbody", "tfoot", "tr", "td", "th"):
    _CATEGORY[_tag] = "table"
for _tag in MEDIA_ELEMENTS | {"figure", "figcaption"}:
    _CATEGORY[_tag] = "media"
for _tag in ("form", "fieldset", "input", "select", "textarea", "button", "label"):
    _CATEGORY[_tag] = "form"
for _tag in ("p", "pre", "blockquote", "address"):
    _CATEGORY[_tag] = "text"

# Tags whose subtree counts as HTML page vocabulary when deciding whether
# a parsed XML document is a page at all or just data.
HTML_VOCABULARY = (
    frozenset(
        """html head body title meta link a b i em strong span br hr img
    script style noscript""".split()
    )
    | BLOCK_LEVEL
)


class EmptyDocument(ValueError):
    """The document has no visible text and no media elements."""


@dataclass(frozen=True)
class PDoC:
    """Permitted degree of coherence: the partition granularity knob."""

    value: int

    def __post_init__(self):
        if not 1 <= self.value <= 10:
            raise ValueError(f"pdoc must be in [1, 10], got {self.value}")


def as_pdoc(value) -> PDoC:
    if isinstance(value, PDoC):
        return value
    return PDoC(int(value))


class SegmentationStatus(Enum):
    SEGMENTED = "Segmented"
    SINGLE_BLOCK = "SingleBlock"
    UNSUPPORTED = "Unsupported"


@dataclass
class SegmentationOutcome:
    """Result of segmenting one page.

    ``tree`` is the partition tree cut at the requested pdoc (absent when
    unsupported); ``full_tree`` keeps the uncut hierarchy so a different
    pdoc can be applied without re-segmenting; ``dom`` is the document the
    blocks refer into.
    """

    status: SegmentationStatus
    tree: VisualBlock | None = None
    reason: str = ""
    full_tree: VisualBlock | None = None
    dom: DomNode | None = None


def _is_ignorable(node: DomNode) -> bool:
    if node.is_text():
        return not node.text.strip()
    return node.tag in blockmodel.INVISIBLE_ELEMENTS or node.tag == "hr"


def _has_media(node: DomNode) -> bool:
    return any(
        n.is_element() and n.tag in MEDIA_ELEMENTS for n in node.iter()
    )


def _run_matters(run: list[DomNode]) -> bool:
    for node in run:
        if node.is_text() and node.text.strip() and blockmodel.is_visible(node):
            return True
        if node.is_element() and (blockmodel.collect_text(node) or _has_media(node)):
            return True
    return False


def _make_block(sources: list[DomNode]) -> VisualBlock:
    refs = []
    for src in sources:
        refs.extend(blockmodel.visible_text_nodes(src))
    return VisualBlock(
        id="",
        doc=10,
        text=blockmodel.collect_text(*sources),
        dom_refs=refs,
        source_nodes=sources,
    )


def _build(element: DomNode) -> VisualBlock | None:
    """Block for one block-level element, or None if nothing renders."""
    children: list[VisualBlock] = []
    run: list[DomNode] = []

    def flush():
        nonlocal run
        if run and _run_matters(run):
            children.append(_make_block(run))
        run = []

    for child in element.children:
        if _is_ignorable(child):
            continue
        if child.is_element() and child.tag in BLOCK_LEVEL:
            flush()
            sub = _build(child)
            if sub is not None:
                children.append(sub)
        else:
            run.append(child)
    flush()

    if not children:
        if blockmodel.collect_text(element) or _has_media(element):
            return _make_block([element])
        return None
    if len(children) == 1:
        only = children[0]
        # A lone leaf whose sources are all direct children stands for the
        # element itself; keep the element so heading and cell cues survive.
        if only.is_leaf() and all(s.parent is element for s in only.source_nodes):
            return _make_block([element])
        return only
    block = _make_block([element])
    block.children = children
    return block


def _assign_ids(block: VisualBlock, label: str) -> None:
    block.id = label
    for i, child in enumerate(block.children, start=1):
        _assign_ids(child, f"{label}-{i}")


def _assign_docs(block: VisualBlock, dom: DomNode) -> None:
    if block.is_leaf():
        block.doc = 10
        return
    for child in block.children:
        _assign_docs(child, dom)
    separators = detect_separators(block.children, dom)
    strongest = max((s.weight for s in separators), default=0)
    block.doc = 10 - min(9, strongest)


def build_block_tree(dom: DomNode) -> VisualBlock:
    """Full block hierarchy for a page, with ids and doc values assigned.

    Raises :class:`EmptyDocument` when the page has no visible text and
    no media.
    """
    root = _build(dom)
    if root is None:
        raise EmptyDocument("no visible text or media")
    _assign_ids(root, "VB1")
    _assign_docs(root, dom)
    return root


def extract_blocks(dom: DomNode) -> list[VisualBlock]:
    """Top-level division of a page: the root's child blocks (or the lone
    leaf for a page that does not divide)."""
    tree = build_block_tree(dom)
    return tree.children if tree.children else [tree]


def _preorder_index(dom: DomNode) -> dict[int, int]:
    return {id(node): i for i, node in enumerate(dom.iter())}


def _span(block: VisualBlock, index: dict[int, int]) -> tuple[int, int]:
    positions = [
        index[id(n)]
        for src in block.source_nodes
        for n in src.iter()
        if id(n) in index
    ]
    if not positions:
        return (0, 0)
    return (min(positions), max(positions))


def _lead_heading(block: VisualBlock) -> int | None:
    """Heading level the block opens with, before any visible text."""
    for src in block.source_nodes:
        for node in src.iter():
            if node.is_element() and node.tag in HEADINGS:
                return int(node.tag[1])
            if blockmodel.is_visible(node):
                return None
    return None


def _category(block: VisualBlock) -> str:
    primary = None
    for src in block.source_nodes:
        if src.is_element():
            primary = src
            break
    if primary is None:
        return "text"
    if primary.tag in _CATEGORY:
        return _CATEGORY[primary.tag]
    return "container" if primary.tag in BLOCK_LEVEL else "text"


def _first_parent(block: VisualBlock) -> DomNode | None:
    for src in block.source_nodes:
        return src.parent
    return None


def _orientation(a: VisualBlock, b: VisualBlock) -> str:
    def cell(block: VisualBlock) -> DomNode | None:
        for src in block.source_nodes:
            if src.is_element() and src.tag in ("td", "th"):
                return src
        return None

    ca, cb = cell(a), cell(b)
    if ca is not None and cb is not None and ca.parent is cb.parent:
        return VERTICAL
    return HORIZONTAL


def detect_separators(blocks: list[VisualBlock], dom: DomNode) -> list[Separator]:
    """Separators between adjacent sibling blocks, weights summed per the
    module's cue table."""
    if len(blocks) < 2:
        return []
    index = _preorder_index(dom)
    rules = [
        index[id(n)]
        for n in dom.iter()
        if n.is_element() and n.tag == "hr" and id(n) in index
    ]
    spans = [_span(b, index) for b in blocks]
    out: list[Separator] = []
    for i in range(len(blocks) - 1):
        a, b = blocks[i], blocks[i + 1]
        weight = 0
        gap_lo, gap_hi = spans[i][1], spans[i + 1][0]
        if any(gap_lo < pos < gap_hi for pos in rules):
            weight += WEIGHT_RULE
        lead_a, lead_b = _lead_heading(a), _lead_heading(b)
        if (lead_a is not None or lead_b is not None) and lead_a != lead_b:
            weight += WEIGHT_HEADING
        if _category(a) != _category(b):
            weight += WEIGHT_CATEGORY
        pa, pb = _first_parent(a), _first_parent(b)
        if pa is not pb:
            weight += WEIGHT_PARENT
        out.append(
            Separator(orientation=_orientation(a, b), weight=weight, between=(i, i + 1))
        )
    return out


def _prune_copy(block: VisualBlock, pdoc: int) -> VisualBlock:
    if block.is_leaf() or block.doc >= pdoc:
        leaves = block.leaves()
        refs = [r for leaf in leaves for r in leaf.dom_refs]
        text = " ".join(leaf.text for leaf in leaves if leaf.text)
        return VisualBlock(
            id=block.id,
            doc=block.doc,
            text=text,
            dom_refs=refs,
            source_nodes=list(block.source_nodes),
        )
    copy = VisualBlock(
        id=block.id,
        doc=block.doc,
        text=block.text,
        dom_refs=list(block.dom_refs),
        source_nodes=list(block.source_nodes),
    )
    copy.children = [_prune_copy(c, pdoc) for c in block.children]
    return copy


def prune_tree(tree: VisualBlock, pdoc) -> VisualBlock:
    """A copy of the tree cut where doc reaches the threshold; the copy's
    leaves are the partition."""
    return _prune_copy(tree, as_pdoc(pdoc).value)


def filter_by_pdoc(tree: VisualBlock, pdoc) -> list[VisualBlock]:
    """Partition leaf set of an existing tree at a (possibly different)
    threshold, without re-segmenting."""
    threshold = as_pdoc(pdoc).value

    def walk(block: VisualBlock) -> list[VisualBlock]:
        if block.is_leaf() or block.doc >= threshold:
            return [block]
        out: list[VisualBlock] = []
        for child in block.children:
            out.extend(walk(child))
        return out

    return walk(tree)


def is_html_like(dom: DomNode) -> bool:
    """Whether a parsed tree speaks HTML at all (vs data-only XML)."""
    tags = [n.tag for n in dom.iter() if n.is_element()]
    if not tags:
        return False
    if tags[0] in ("html", "body"):
        return True
    known = sum(1 for t in tags if t in HTML_VOCABULARY)
    return known * 2 >= len(tags)


def segment(dom: DomNode, pdoc=DEFAULT_PDOC) -> SegmentationOutcome:
    """Segment a parsed page and cut the hierarchy at the given pdoc."""
    threshold = as_pdoc(pdoc)
    if not is_html_like(dom):
        return SegmentationOutcome(
            status=SegmentationStatus.UNSUPPORTED,
            reason="data-only xml: document has no html vocabulary to segment",
        )
    holders = corpus.flash_objects(dom)
    if holders:
        outside = [
            tn
            for tn in blockmodel.visible_text_nodes(dom)
            if not any(anc in holders for anc in tn.ancestors())
        ]
        tokens = " ".join(tn.text for tn in outside).split()
        if len(tokens) < corpus.EMBED_DOMINANCE_TOKENS:
            return SegmentationOutcome(
                status=SegmentationStatus.UNSUPPORTED,
                reason="flash: page content lives in an embedded flash object",
            )
    try:
        full = build_block_tree(dom)
    except EmptyDocument as exc:
        return SegmentationOutcome(
            status=SegmentationStatus.UNSUPPORTED, reason=f"empty document: {exc}"
        )
    pruned = prune_tree(full, threshold)
    leaf_count = len(pruned.leaves())
    if leaf_count >= 2:
        return SegmentationOutcome(
            status=SegmentationStatus.SEGMENTED, tree=pruned, full_tree=full, dom=dom
        )
    return SegmentationOutcome(
        status=SegmentationStatus.SINGLE_BLOCK,
        tree=pruned,
        reason=f"whole page coheres at pdoc {threshold.value}",
        full_tree=full,
        dom=dom,
    )


def segment_page(
    body: bytes,
    pdoc=DEFAULT_PDOC,
    url: str = "",
    content_type: str = "",
    technology: PageTechnology | None = None,
) -> SegmentationOutcome:
    """Classify raw page bytes and segment when the technology allows.

    Flash containers and data-only XML come back Unsupported with the
    technology named in the reason; malformed input never raises.
    """
    record = PageRecord(url=url or "file:///page", body=body, content_type=content_type)
    tech = technology or corpus.classify_technology(record)
    if tech is PageTechnology.FLASH:
        return SegmentationOutcome(
            status=SegmentationStatus.UNSUPPORTED,
            reason="flash: container bytes cannot be segmented as markup",
        )
    if not body:
        return SegmentationOutcome(
            status=SegmentationStatus.UNSUPPORTED, reason="empty document: no bytes"
        )
    if tech is PageTechnology.XML:
        try:
            dom = blockmodel.parse_xml(body)
        except XmlError as exc:
            return SegmentationOutcome(
                status=SegmentationStatus.UNSUPPORTED,
                reason=f"xml: not well formed: {exc}",
            )
        return segment(dom, pdoc)
    try:
        dom = blockmodel.parse_html(body)
    except ParseError as exc:
        return SegmentationOutcome(
            status=SegmentationStatus.UNSUPPORTED, reason=f"parse: {exc}"
        )
    return segment(dom, pdoc)
