"""Rebuild a captured Flash site as small-screen HTML.

Inputs are an MHTML capture of the original site (the MIME multipart
archive a browser saves) and a segment file holding the text that was
read out of the Flash rendering, one record per line.  Output is one
single-column HTML page per original page/tab, a navigation list on every
page replacing the Flash tabs, small images re-emitted as files, and a
site manifest.  Emitted pages carry a mobile viewport and never contain
script elements.

Segment file grammar (one JSON object per line):

    {"site": "acme", "page": "home", "order": 0, "role": "Heading",
     "text": "Welcome", "link_target": ""}

role is one of Heading, Body, Link, Caption; link_target (Link role) is
either another page id of the same site or an absolute URL.
(site, page, order) must be unique; text must be non-empty.
"""

from __future__ import annotations

import base64
import binascii
import email
import email.errors
import json
import re
from dataclasses import dataclass, field
from html import escape
from pathlib import Path
from urllib.parse import urlsplit

from . import blockmodel

PAGE_BUDGET = 64 * 1024
ASSET_INLINE_LIMIT = 100 * 1024
SINGLE_COLUMN = "single-column"
TEMPLATES = (SINGLE_COLUMN,)
SITE_MANIFEST = "site-manifest"

ROLES = ("Heading", "Body", "Link", "Caption")

_KNOWN_ENCODINGS = ("base64", "quoted-printable", "7bit", "8bit", "binary")


class MhtmlError(ValueError):
    """Archive cannot be parsed; ``kind`` names the failure."""

    MISSING_BOUNDARY = "missing-boundary"
    MALFORMED_HEADERS = "malformed-headers"
    UNDECODABLE_PART = "undecodable-part"
    IO = "io"

    def __init__(self, kind: str, message: str, part_index: int | None = None):
        super().__init__(message)
        self.kind = kind
        self.part_index = part_index


class SegmentError(ValueError):
    """Segment file violates the grammar; ``line`` is 1-based."""

    DUPLICATE_KEY = "duplicate-key"
    EMPTY_TEXT = "empty-text"
    BAD_ROLE = "bad-role"
    BAD_LINE = "bad-line"
    IO = "io"

    def __init__(self, kind: str, line: int, message: str):
        super().__init__(message)
        self.kind = kind
        self.line = line


class TemplateError(ValueError):
    """Unknown page template."""


@dataclass
class MimePart:
    """One decoded part of an MHTML archive.

    When lenient parsing hits an undecodable body, the raw payload bytes
    are preserved and ``decode_error`` is set.
    """

    content_type: str
    content_location: str = ""
    transfer_encoding: str = "7bit"
    headers: dict[str, str] = field(default_factory=dict)
    body: bytes = b""
    decode_error: bool = False


@dataclass
class MhtmlArchive:
    parts: list[MimePart]
    boundary: str
    root_content_location: str = ""


def parse_mhtml(data: bytes, strict: bool = False) -> MhtmlArchive:
    """Split a multipart archive into decoded parts, order preserved.

    Both CRLF and LF captures are accepted.  With ``strict`` a part whose
    body fails its declared transfer encoding raises UndecodablePart;
    otherwise the raw body is kept and the part flagged.
    """
    msg = email.message_from_bytes(data)
    for defect in msg.defects:
        if isinstance(defect, email.errors.NoBoundaryInMultipartDefect):
            raise MhtmlError(MhtmlError.MISSING_BOUNDARY, "multipart without a boundary parameter")
    if not msg.is_multipart():
        raise MhtmlError(
            MhtmlError.MISSING_BOUNDARY,
            f"not a multipart archive (content type {msg.get_content_type()})",
        )
    boundary = msg.get_boundary()
    if not boundary:
        raise MhtmlError(MhtmlError.MISSING_BOUNDARY, "multipart without a boundary parameter")

    parts: list[MimePart] = []
    index = -1
    for sub in msg.walk():
        if sub.is_multipart():
            continue
        index += 1
        if sub.defects:
            names = ", ".join(type(d).__name__ for d in sub.defects)
            raise MhtmlError(
                MhtmlError.MALFORMED_HEADERS,
                f"part {index}: malformed headers ({names})",
                part_index=index,
            )
        headers: dict[str, str] = {}
        for name, value in sub.items():
            headers.setdefault(name, value)
        encoding = (sub.get("Content-Transfer-Encoding") or "7bit").strip().lower()
        raw = sub.get_payload(decode=False)
        if not isinstance(raw, str):
            raw = ""
        body, failed = _decode_payload(sub, raw, encoding)
        if failed:
            if strict:
                raise MhtmlError(
                    MhtmlError.UNDECODABLE_PART,
                    f"part {index}: body does not decode as {encoding}",
                    part_index=index,
                )
            body = raw.encode("utf-8", "surrogateescape")
        parts.append(
            MimePart(
                content_type=sub.get_content_type(),
                content_location=(sub.get("Content-Location") or "").strip(),
                transfer_encoding=encoding,
                headers=headers,
                body=body,
                decode_error=failed,
            )
        )
    if not parts:
        raise MhtmlError(MhtmlError.MISSING_BOUNDARY, "boundary never delimits any part")

    root_location = parts[0].content_location
    start = msg.get_param("start")
    if start:
        want = start.strip("<>")
        for sub_index, sub in enumerate(s for s in msg.walk() if not s.is_multipart()):
            if (sub.get("Content-ID") or "").strip("<>") == want:
                root_location = parts[sub_index].content_location
                break
    return MhtmlArchive(parts=parts, boundary=boundary, root_content_location=root_location)


def _decode_payload(sub, raw: str, encoding: str) -> tuple[bytes, bool]:
    if encoding == "base64":
        compact = re.sub(r"\s+", "", raw)
        try:
            return base64.b64decode(compact, validate=True), False
        except (binascii.Error, ValueError):
            return b"", True
    if encoding in _KNOWN_ENCODINGS:
        decoded = sub.get_payload(decode=True)
        if decoded is None:
            return raw.encode("utf-8", "surrogateescape"), False
        return decoded, False
    return b"", True


@dataclass(frozen=True)
class TextSegment:
    site: str
    page: str
    order: int
    role: str
    text: str
    link_target: str = ""


def ingest_segments(path: str | Path) -> list[TextSegment]:
    """Read and validate a segment file; result sorted by (page, order)."""
    p = Path(path)
    segments: list[TextSegment] = []
    seen: set[tuple[str, str, int]] = set()
    with open(p, encoding="utf-8") as fh:
        for lineno, rawline in enumerate(fh, start=1):
            line = rawline.strip()
            if not line or line.startswith("#"):
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SegmentError(
                    SegmentError.BAD_LINE, lineno, f"line {lineno}: not valid JSON: {exc}"
                ) from exc
            if not isinstance(data, dict):
                raise SegmentError(
                    SegmentError.BAD_LINE, lineno, f"line {lineno}: expected an object"
                )
            missing = {"site", "page", "order", "role", "text"} - set(data)
            if missing:
                raise SegmentError(
                    SegmentError.BAD_LINE,
                    lineno,
                    f"line {lineno}: missing fields: {sorted(missing)}",
                )
            order = data["order"]
            if isinstance(order, bool) or not isinstance(order, int) or order < 0:
                raise SegmentError(
                    SegmentError.BAD_LINE,
                    lineno,
                    f"line {lineno}: order must be a non-negative integer",
                )
            role = data["role"]
            if role not in ROLES:
                raise SegmentError(
                    SegmentError.BAD_ROLE,
                    lineno,
                    f"line {lineno}: role {role!r} not one of {', '.join(ROLES)}",
                )
            text = str(data["text"])
            if not text.strip():
                raise SegmentError(
                    SegmentError.EMPTY_TEXT, lineno, f"line {lineno}: empty text"
                )
            key = (str(data["site"]), str(data["page"]), order)
            if key in seen:
                raise SegmentError(
                    SegmentError.DUPLICATE_KEY,
                    lineno,
                    f"line {lineno}: duplicate (site, page, order) {key}",
                )
            seen.add(key)
            segments.append(
                TextSegment(
                    site=key[0],
                    page=key[1],
                    order=order,
                    role=role,
                    text=text,
                    link_target=str(data.get("link_target", "") or ""),
                )
            )
    segments.sort(key=lambda s: (s.page, s.order))
    return segments


@dataclass
class TranslatedPage:
    page_id: str
    title: str
    path: str
    html: str
    part: int = 1


@dataclass
class TranslatedSite:
    site: str
    pages: list[TranslatedPage]
    nav_index: dict[str, str]
    assets: list[tuple[str, bytes]] = field(default_factory=list)


_STYLE = (
    "body{margin:0 auto;max-width:40em;padding:0 1em;font-family:sans-serif}"
    "nav ul{list-style:none;padding:0}"
    "nav li{display:inline-block;margin-right:1em}"
)


def _slug(name: str) -> str:
    s = re.sub(r"[^a-z0-9._-]+", "-", name.lower()).strip("-._")
    return s or "page"


def _page_paths(page_ids: list[str]) -> dict[str, str]:
    taken: set[str] = set()
    paths: dict[str, str] = {}
    for pid in page_ids:
        base = _slug(pid)
        candidate = base
        n = 1
        while candidate in taken:
            n += 1
            candidate = f"{base}-{n}"
        taken.add(candidate)
        paths[pid] = candidate + ".html"
    return paths


def _render_segment(seg: TextSegment, nav_index: dict[str, str]) -> str:
    text = escape(seg.text, quote=False)
    if seg.role == "Heading":
        return f"<h2>{text}</h2>"
    if seg.role == "Body":
        return f"<p>{text}</p>"
    if seg.role == "Caption":
        return f"<figure><figcaption>{text}</figcaption></figure>"
    target = nav_index.get(seg.link_target, seg.link_target) or "#"
    return f'<p><a href="{escape(target)}">{text}</a></p>'


def _render_page(
    site: str,
    title: str,
    nav_html: str,
    main_html: str,
    aside_html: str,
    continued_html: str,
) -> str:
    return (
        "<!doctype html>\n"
        '<html lang="en"><head><meta charset="utf-8">'
        '<meta name="viewport" content="width=device-width, initial-scale=1">'
        f"<title>{escape(title, quote=False)} - {escape(site, quote=False)}</title>"
        f"<style>{_STYLE}</style></head>"
        f"<body><header><nav><ul>{nav_html}</ul></nav></header>"
        f"<main>{main_html}</main>"
        f"{aside_html}{continued_html}</body></html>\n"
    )


def reconstruct_html(
    segments: list[TextSegment],
    assets: MhtmlArchive | None = None,
    template: str = SINGLE_COLUMN,
    page_budget: int = PAGE_BUDGET,
) -> TranslatedSite:
    """Compose the translated pages in memory.

    One page per distinct page id, segments in order, navigation for the
    whole site on every page.  A page whose serialized form would exceed
    the byte budget is split at segment boundaries into numbered
    continuation files chained by a Continued link.
    """
    if template not in TEMPLATES:
        raise TemplateError(
            f"unknown template {template!r}; available: {', '.join(TEMPLATES)}"
        )
    if not segments:
        raise ValueError("no segments to translate")
    sites = {s.site for s in segments}
    if len(sites) > 1:
        raise ValueError(f"segments span multiple sites: {sorted(sites)}")
    site = segments[0].site

    ordered = sorted(segments, key=lambda s: (s.page, s.order))
    page_ids: list[str] = []
    per_page: dict[str, list[TextSegment]] = {}
    for seg in ordered:
        if seg.page not in per_page:
            per_page[seg.page] = []
            page_ids.append(seg.page)
        per_page[seg.page].append(seg)

    nav_index = _page_paths(page_ids)
    nav_html = "".join(
        f'<li><a href="{escape(nav_index[pid])}">{escape(pid, quote=False)}</a></li>'
        for pid in page_ids
    )
    page_assets = _match_assets(assets, page_ids) if assets else {}
    asset_names, emitted_assets = _name_assets(page_assets)

    pages: list[TranslatedPage] = []
    for pid in page_ids:
        aside = _render_aside(page_assets.get(pid, []), asset_names)
        chunks = _split_segments(
            site, pid, per_page[pid], nav_html, nav_index, aside, page_budget
        )
        first_path = nav_index[pid]
        stem = first_path[: -len(".html")]
        for part_no, chunk in enumerate(chunks, start=1):
            path = first_path if part_no == 1 else f"{stem}.{part_no}.html"
            next_path = (
                f"{stem}.{part_no + 1}.html" if part_no < len(chunks) else ""
            )
            continued = (
                f'<nav class="continued"><a href="{escape(next_path)}">Continued</a></nav>'
                if next_path
                else ""
            )
            main_html = "".join(_render_segment(s, nav_index) for s in chunk)
            html = _render_page(
                site, pid, nav_html, main_html, aside if part_no == 1 else "", continued
            )
            pages.append(
                TranslatedPage(page_id=pid, title=pid, path=path, html=html, part=part_no)
            )
    return TranslatedSite(
        site=site, pages=pages, nav_index=nav_index, assets=emitted_assets
    )


def _split_segments(
    site: str,
    pid: str,
    segs: list[TextSegment],
    nav_html: str,
    nav_index: dict[str, str],
    aside: str,
    budget: int,
) -> list[list[TextSegment]]:
    # Headroom covers the Continued link added after the split decision.
    limit = max(1024, budget - 256)
    chunks: list[list[TextSegment]] = []
    current: list[TextSegment] = []
    for seg in segs:
        candidate = current + [seg]
        main_html = "".join(_render_segment(s, nav_index) for s in candidate)
        rendered = _render_page(site, pid, nav_html, main_html, aside, "")
        if current and len(rendered.encode("utf-8")) > limit:
            chunks.append(current)
            current = [seg]
        else:
            current = candidate
    if current:
        chunks.append(current)
    return chunks


def _match_assets(archive: MhtmlArchive, page_ids: list[str]) -> dict[str, list[MimePart]]:
    matched: dict[str, list[MimePart]] = {}
    by_key = {}
    for pid in page_ids:
        by_key[pid.lower()] = pid
        by_key[_slug(pid)] = pid
    for part in archive.parts:
        if not part.content_type.startswith("image/") or part.decode_error:
            continue
        stem = Path(urlsplit(part.content_location).path).name
        stem = stem.rsplit(".", 1)[0].lower() if stem else ""
        pid = by_key.get(stem) or by_key.get(_slug(stem))
        if pid is not None:
            matched.setdefault(pid, []).append(part)
    return matched


def _name_assets(
    page_assets: dict[str, list[MimePart]]
) -> tuple[dict[int, str], list[tuple[str, bytes]]]:
    """Unique file names for every re-emitted image, keyed by part identity."""
    names: dict[int, str] = {}
    emitted: list[tuple[str, bytes]] = []
    taken: set[str] = set()
    for parts in page_assets.values():
        for part in parts:
            if len(part.body) >= ASSET_INLINE_LIMIT:
                continue
            base = _slug(Path(urlsplit(part.content_location).path).name or "asset")
            candidate = base
            n = 1
            while candidate in taken:
                n += 1
                stem, dot, ext = base.rpartition(".")
                candidate = f"{stem}-{n}.{ext}" if dot else f"{base}-{n}"
            taken.add(candidate)
            names[id(part)] = candidate
            emitted.append((candidate, part.body))
    return names, emitted


def _render_aside(parts: list[MimePart], asset_names: dict[int, str]) -> str:
    if not parts:
        return ""
    items: list[str] = []
    for part in parts:
        name = asset_names.get(id(part))
        if name is not None:
            items.append(f'<img src="assets/{escape(name)}" alt="">')
        else:
            href = part.content_location or "#"
            items.append(f'<p><a href="{escape(href)}">{escape(href, quote=False)}</a></p>')
    return f"<aside>{''.join(items)}</aside>"


def extract_texts(html: bytes | str) -> list[str]:
    """Visible texts inside <main>, whitespace-normalized, document order.

    This is the inverse of page composition for checking that every
    ingested segment survived translation.
    """
    dom = blockmodel.parse_html(html if isinstance(html, bytes) else html.encode("utf-8"))
    texts: list[str] = []
    for node in dom.iter():
        if node.is_element() and node.tag == "main":
            for tn in blockmodel.visible_text_nodes(node):
                texts.append(" ".join(tn.text.split()))
    return texts


def site_texts(site: TranslatedSite) -> dict[str, list[str]]:
    """Per page id, the visible main-content texts across all its parts."""
    out: dict[str, list[str]] = {}
    for page in site.pages:
        out.setdefault(page.page_id, []).extend(extract_texts(page.html))
    return out


def translate_site(
    mhtml_path: str | Path | None,
    segments_path: str | Path,
    out_dir: str | Path,
    template: str = SINGLE_COLUMN,
    page_budget: int = PAGE_BUDGET,
    strict_mhtml: bool = False,
) -> TranslatedSite:
    """Full pipeline: parse capture, ingest segments, compose, persist.

    Component failures re-raise with a stage tag (mhtml:, segments:,
    reconstruct:) prefixed to the message.  A missing or empty capture is
    allowed; the site is then text-only.
    """
    seg_path = Path(segments_path)
    if not seg_path.is_file():
        raise SegmentError(
            SegmentError.IO, 0, f"segments: file not found: {seg_path}"
        )
    try:
        segments = ingest_segments(seg_path)
    except SegmentError as exc:
        raise SegmentError(exc.kind, exc.line, f"segments: {exc}") from exc

    archive: MhtmlArchive | None = None
    if mhtml_path is not None:
        cap_path = Path(mhtml_path)
        if not cap_path.is_file():
            raise MhtmlError(MhtmlError.IO, f"mhtml: file not found: {cap_path}")
        data = cap_path.read_bytes()
        if data.strip():
            try:
                archive = parse_mhtml(data, strict=strict_mhtml)
            except MhtmlError as exc:
                raise MhtmlError(exc.kind, f"mhtml: {exc}", exc.part_index) from exc

    try:
        site = reconstruct_html(segments, archive, template, page_budget)
    except (TemplateError, ValueError) as exc:
        raise type(exc)(f"reconstruct: {exc}") from exc

    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    for page in site.pages:
        (root / page.path).write_text(page.html, encoding="utf-8")
    if site.assets:
        (root / "assets").mkdir(exist_ok=True)
        for name, body in site.assets:
            (root / "assets" / name).write_bytes(body)
    manifest = {
        "site": site.site,
        "pages": [
            {"page_id": p.page_id, "path": p.path, "title": p.title, "part": p.part}
            for p in site.pages
        ],
        "nav_index": site.nav_index,
    }
    (root / SITE_MANIFEST).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return site
