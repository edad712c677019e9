"""Corpus construction: fetch or load pages, detect their technology, persist
a dataset manifest.

Technology detection is a pure function of (url, content_type, body) with a
fixed precedence: container magic bytes, then the declared media type, then
the URL suffix, then body prefix heuristics, else Unknown.  An HTML shell
whose content is one embedded Flash object counts as Flash when fewer than
50 visible tokens remain outside the object.
"""

from __future__ import annotations

import hashlib
import json
import mimetypes
import posixpath
import re
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from urllib.parse import urljoin, urlsplit, urlunsplit

import requests

from . import blockmodel
from .blockmodel import DomNode, ParseError

SOURCE_LIVE = "live-fetch"
SOURCE_LOCAL = "local-file"

REDIRECT_LIMIT = 5
EMBED_DOMINANCE_TOKENS = 50

MANIFEST_NAME = "manifest.jsonl"


class PageTechnology(Enum):
    HTML = "Html"
    XML = "Xml"
    FLASH = "Flash"
    UNKNOWN = "Unknown"


# Container signatures at offset 0: uncompressed, zlib and lzma Flash files.
FLASH_SIGNATURES = (b"FWS", b"CWS", b"ZWS")

FLASH_MIME = "application/x-shockwave-flash"
FLASH_CLASSID = "d27cdb6e-ae6d-11cf-96b8-444553540000"

_XML_MIMES = frozenset(["text/xml", "application/xml"])
_HTML_MIMES = frozenset(["text/html", "application/xhtml+xml"])

_XML_DECL_RE = re.compile(rb"^(?:\xef\xbb\xbf|\xff\xfe|\xfe\xff)?\s*<\?xml", re.S)
_HTML_PREFIX_RE = re.compile(
    rb"^(?:\xef\xbb\xbf)?\s*(?:<!doctype\s+html|<html)", re.I | re.S
)


@dataclass
class PageRecord:
    """A fetched or locally loaded page plus its detected technology."""

    url: str
    body: bytes
    content_type: str = ""
    technology: PageTechnology = PageTechnology.UNKNOWN
    fetched_at: float = 0.0
    source: str = SOURCE_LIVE
    final_url: str = ""


class FetchError(Exception):
    """A failed fetch; ``stage`` names what failed.

    Stages: ``timeout``, ``dns``, ``network``, ``too-many-redirects``,
    ``http`` (with ``status`` set).
    """

    TIMEOUT = "timeout"
    DNS = "dns"
    NETWORK = "network"
    TOO_MANY_REDIRECTS = "too-many-redirects"
    HTTP = "http"

    def __init__(self, stage: str, url: str, message: str = "", status: int | None = None):
        detail = message or stage
        if status is not None:
            detail = f"status {status}"
        super().__init__(f"{stage}: {url}: {detail}")
        self.stage = stage
        self.url = url
        self.status = status


def fetch_page(url: str, timeout: float = 10.0, session: requests.Session | None = None) -> PageRecord:
    """Fetch one URL, following at most five redirects.

    Returns a PageRecord with technology Unknown (classification is a
    separate step).  Raises :class:`FetchError` naming the failed stage.
    """
    if timeout <= 0:
        raise ValueError("timeout must be positive")
    parts = urlsplit(url)
    if not parts.scheme or not parts.netloc:
        raise ValueError(f"url must be absolute: {url!r}")
    owned = session is None
    sess = session or requests.Session()
    sess.max_redirects = REDIRECT_LIMIT
    try:
        try:
            response = sess.get(url, timeout=timeout, allow_redirects=True)
        except requests.exceptions.Timeout as exc:
            raise FetchError(FetchError.TIMEOUT, url, str(exc)) from exc
        except requests.exceptions.TooManyRedirects as exc:
            raise FetchError(FetchError.TOO_MANY_REDIRECTS, url, str(exc)) from exc
        except requests.exceptions.ConnectionError as exc:
            text = repr(exc)
            if "NameResolution" in text or "getaddrinfo" in text or "Name or service" in text:
                raise FetchError(FetchError.DNS, url, str(exc)) from exc
            raise FetchError(FetchError.NETWORK, url, str(exc)) from exc
        if response.status_code >= 400:
            raise FetchError(FetchError.HTTP, url, status=response.status_code)
        return PageRecord(
            url=url,
            body=response.content,
            content_type=response.headers.get("Content-Type", ""),
            technology=PageTechnology.UNKNOWN,
            fetched_at=time.time(),
            source=SOURCE_LIVE,
            final_url=str(response.url),
        )
    finally:
        if owned:
            sess.close()


def load_page(path: str | Path) -> PageRecord:
    """Load a local file as a PageRecord (source ``local-file``)."""
    p = Path(path)
    body = p.read_bytes()
    guessed, _ = mimetypes.guess_type(p.name)
    return PageRecord(
        url=p.resolve().as_uri(),
        body=body,
        content_type=guessed or "",
        technology=PageTechnology.UNKNOWN,
        fetched_at=time.time(),
        source=SOURCE_LOCAL,
    )


def _media_type(content_type: str) -> str:
    return content_type.split(";", 1)[0].strip().lower()


def _url_path(url: str) -> str:
    return urlsplit(url).path.lower()


def _flash_reference(node: DomNode) -> bool:
    if node.tag not in ("embed", "object"):
        return False
    attrs = node.attributes
    if _media_type(attrs.get("type", "")) == FLASH_MIME:
        return True
    for key in ("src", "data"):
        if attrs.get(key, "").lower().split("?", 1)[0].endswith(".swf"):
            return True
    if FLASH_CLASSID in attrs.get("classid", "").lower():
        return True
    for child in node.children:
        if child.is_element() and child.tag == "param":
            if child.attributes.get("name", "").lower() == "movie":
                return True
    return False


def flash_objects(dom: DomNode) -> list[DomNode]:
    """All embed/object elements in the tree that reference a Flash resource."""
    return [n for n in dom.iter() if n.is_element() and _flash_reference(n)]


def _embedded_flash_dominates(body: bytes, content_type: str) -> bool:
    try:
        dom = blockmodel.parse_html(body)
    except ParseError:
        return False
    holders = flash_objects(dom)
    if not holders:
        return False
    visible = blockmodel.visible_text_nodes(dom)
    outside: list[str] = []
    for tn in visible:
        if any(anc in holders for anc in tn.ancestors()):
            continue
        outside.append(tn.text)
    tokens = " ".join(outside).split()
    return len(tokens) < EMBED_DOMINANCE_TOKENS


def classify_technology(page: PageRecord) -> PageTechnology:
    """Detect the page technology; pure in (url, content_type, body)."""
    body = page.body
    url = page.url
    media = _media_type(page.content_type)

    if body.startswith(FLASH_SIGNATURES):
        return PageTechnology.FLASH

    result = PageTechnology.UNKNOWN
    if media == FLASH_MIME:
        result = PageTechnology.FLASH
    elif media in _HTML_MIMES:
        result = PageTechnology.HTML
    elif media in _XML_MIMES or media.endswith("+xml"):
        result = PageTechnology.XML

    if result is PageTechnology.UNKNOWN:
        path = _url_path(url)
        if path.endswith(".xml"):
            result = PageTechnology.XML
        elif path.endswith((".html", ".htm")):
            result = PageTechnology.HTML
        elif path.endswith(".swf"):
            result = PageTechnology.FLASH

    if result is PageTechnology.UNKNOWN:
        if _XML_DECL_RE.match(body):
            result = PageTechnology.XML
        elif _HTML_PREFIX_RE.match(body):
            result = PageTechnology.HTML

    if result is PageTechnology.HTML and _embedded_flash_dominates(body, page.content_type):
        return PageTechnology.FLASH
    return result


def classify(page: PageRecord) -> PageRecord:
    """Classify in place and return the record (convenience for pipelines)."""
    page.technology = classify_technology(page)
    return page


def normalize_url(url: str, base: str | None = None) -> str:
    """Canonical form for dedupe: lowercase scheme/host, no fragment,
    dot segments resolved."""
    if base:
        url = urljoin(base, url)
    parts = urlsplit(url)
    host = parts.hostname or ""
    netloc = host.lower()
    if parts.port is not None:
        netloc = f"{netloc}:{parts.port}"
    path = parts.path or "/"
    normalized = posixpath.normpath(path)
    if path.endswith("/") and normalized != "/":
        normalized += "/"
    return urlunsplit((parts.scheme.lower(), netloc, normalized, parts.query, ""))


def extract_links(dom: DomNode, base_url: str) -> list[str]:
    """Absolute http(s) targets of anchor elements, in document order."""
    links: list[str] = []
    for node in dom.iter():
        if node.is_element() and node.tag == "a":
            href = node.attributes.get("href", "").strip()
            if not href or href.startswith(("#", "javascript:", "mailto:")):
                continue
            absolute = urljoin(base_url, href)
            if urlsplit(absolute).scheme in ("http", "https"):
                links.append(absolute)
    return links


@dataclass
class ScanFailure:
    url: str
    error: FetchError


@dataclass
class ScanResult:
    """Pages collected by a scan plus per-URL fetch failures."""

    records: list[PageRecord] = field(default_factory=list)
    failures: list[ScanFailure] = field(default_factory=list)

    def __iter__(self):
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)


def scan_domain(
    seed_url: str,
    max_pages: int,
    same_host_only: bool = True,
    timeout: float = 10.0,
    fetcher=fetch_page,
) -> ScanResult:
    """Breadth-first crawl from a seed, classified, deduplicated, bounded.

    Fetch failures are recorded per URL and never abort the scan.
    """
    if max_pages < 1:
        raise ValueError("max_pages must be at least 1")
    seed = normalize_url(seed_url)
    seed_host = (urlsplit(seed).hostname or "").lower()
    queue: list[str] = [seed]
    seen: set[str] = {seed}
    result = ScanResult()
    while queue and len(result.records) < max_pages:
        url = queue.pop(0)
        try:
            record = fetcher(url, timeout)
        except FetchError as err:
            result.failures.append(ScanFailure(url=url, error=err))
            continue
        record.technology = classify_technology(record)
        result.records.append(record)
        if record.technology is not PageTechnology.HTML:
            continue
        try:
            dom = blockmodel.parse_html(record.body)
        except ParseError:
            continue
        base = record.final_url or record.url
        for link in extract_links(dom, base):
            normalized = normalize_url(link)
            if same_host_only and (urlsplit(normalized).hostname or "").lower() != seed_host:
                continue
            if normalized in seen:
                continue
            seen.add(normalized)
            queue.append(normalized)
    return result


@dataclass
class ManifestEntry:
    url: str
    technology: PageTechnology
    body_digest: str
    local_path: str


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]
    created_at: str
    root: Path

    @property
    def path(self) -> Path:
        return self.root / MANIFEST_NAME

    def read_body(self, entry: ManifestEntry) -> bytes:
        return (self.root / entry.local_path).read_bytes()


class ManifestError(ValueError):
    """Manifest file is inconsistent with the stored bodies."""


_EXTENSION = {
    PageTechnology.HTML: ".html",
    PageTechnology.XML: ".xml",
    PageTechnology.FLASH: ".swf",
    PageTechnology.UNKNOWN: ".bin",
}


def build_manifest(records: list[PageRecord], out_dir: str | Path) -> DatasetManifest:
    """Persist page bodies under out_dir and write the manifest file.

    Duplicate URLs keep the first occurrence.  Bodies are stored under
    content-derived names, so re-running over the same records rewrites
    identical files and identical entry lines (only created_at changes).
    """
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    entries: list[ManifestEntry] = []
    taken: set[str] = set()
    for record in records:
        if record.url in taken:
            continue
        taken.add(record.url)
        digest = hashlib.sha256(record.body).hexdigest()
        name = digest[:16] + _EXTENSION[record.technology]
        (root / name).write_bytes(record.body)
        entries.append(
            ManifestEntry(
                url=record.url,
                technology=record.technology,
                body_digest=digest,
                local_path=name,
            )
        )
    created_at = datetime.now(timezone.utc).isoformat()
    lines = [json.dumps({"created_at": created_at})]
    for entry in entries:
        lines.append(
            json.dumps(
                {
                    "url": entry.url,
                    "technology": entry.technology.value,
                    "body_digest": entry.body_digest,
                    "local_path": entry.local_path,
                },
                sort_keys=True,
            )
        )
    (root / MANIFEST_NAME).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return DatasetManifest(entries=entries, created_at=created_at, root=root)


def load_manifest(path: str | Path) -> DatasetManifest:
    """Read a manifest and verify every stored body against its digest."""
    manifest_path = Path(path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / MANIFEST_NAME
    root = manifest_path.parent
    created_at = ""
    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    with open(manifest_path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"line {lineno}: not valid JSON: {exc}") from exc
            if "url" not in data:
                created_at = data.get("created_at", created_at)
                continue
            try:
                technology = PageTechnology(data["technology"])
            except (KeyError, ValueError) as exc:
                raise ManifestError(f"line {lineno}: bad technology") from exc
            entry = ManifestEntry(
                url=data["url"],
                technology=technology,
                body_digest=data.get("body_digest", ""),
                local_path=data.get("local_path", ""),
            )
            if entry.url in seen:
                raise ManifestError(f"line {lineno}: duplicate url {entry.url}")
            seen.add(entry.url)
            stored = root / entry.local_path
            if not stored.is_file():
                raise ManifestError(f"line {lineno}: missing body file {entry.local_path}")
            actual = hashlib.sha256(stored.read_bytes()).hexdigest()
            if actual != entry.body_digest:
                raise ManifestError(
                    f"line {lineno}: digest mismatch for {entry.local_path}"
                )
            entries.append(entry)
    return DatasetManifest(entries=entries, created_at=created_at, root=root)
