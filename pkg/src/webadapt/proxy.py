"""Reverse proxy for translated sites: per-port listeners, host-aware routing.

Each route binds a (host, port) pair either to a directory of translated
pages (serve) or to an upstream URL (forward).  Route config is one JSON
object per line:

    {"host": "acme.test", "port": 8081, "mode": "serve", "site_dir": "out/acme"}
    {"host": "other.test", "port": 8082, "mode": "forward",
     "upstream": "http://127.0.0.1:9000"}

Relative site_dir paths resolve against the config file's directory.
Port 0 asks the kernel for an ephemeral port; the running table reports
the real one.  Responses: 200 for served files, 404 within a routed site,
403 for path traversal attempts, 502 for unrouted hosts and upstream
failures.
"""

from __future__ import annotations

import json
import mimetypes
import os
import posixpath
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from time import perf_counter
from urllib.parse import unquote

import requests

from .translator import SITE_MANIFEST

MODE_SERVE = "serve"
MODE_FORWARD = "forward"

BIND_ENV = "WEBADAPT_BIND"
DEFAULT_BIND = "127.0.0.1"

SERVE_FILE = "serve-file"
FORWARD = "forward"
NOT_ROUTED = "not-routed"
TRAVERSAL_REJECTED = "traversal-rejected"


class ConfigError(ValueError):
    def __init__(self, line: int, fieldname: str, message: str):
        super().__init__(f"line {line}, field {fieldname}: {message}")
        self.line = line
        self.field = fieldname


class BindError(OSError):
    def __init__(self, port: int, message: str):
        super().__init__(f"cannot bind port {port}: {message}")
        self.port = port


@dataclass(frozen=True)
class Route:
    host: str
    port: int
    mode: str
    site_dir: Path | None = None
    upstream: str | None = None
    index_path: str = "index.html"


@dataclass(frozen=True)
class RouteTable:
    routes: tuple[Route, ...]

    def find(self, host: str, port: int) -> Route | None:
        key = (host.lower(), port)
        for route in self.routes:
            if (route.host.lower(), route.port) == key:
                return route
        return None

    def ports(self) -> list[int]:
        out: list[int] = []
        for route in self.routes:
            if route.port not in out:
                out.append(route.port)
        return out


def _site_index(site_dir: Path) -> str:
    manifest = site_dir / SITE_MANIFEST
    if manifest.is_file():
        try:
            data = json.loads(manifest.read_text(encoding="utf-8"))
            pages = data.get("pages") or []
            if pages and pages[0].get("path"):
                return pages[0]["path"]
        except (json.JSONDecodeError, OSError):
            pass
    return "index.html"


def load_routes(path: str | Path) -> RouteTable:
    """Parse and validate a route config; duplicates and dangling
    directories are rejected with line/field diagnostics."""
    config = Path(path)
    base = config.parent
    routes: list[Route] = []
    seen: set[tuple[str, int]] = set()
    with open(config, encoding="utf-8") as fh:
        for lineno, rawline in enumerate(fh, start=1):
            line = rawline.strip()
            if not line or line.startswith("#"):
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ConfigError(lineno, "-", f"not valid JSON: {exc}") from exc
            host = data.get("host")
            if not host or not isinstance(host, str):
                raise ConfigError(lineno, "host", "required non-empty string")
            port = data.get("port")
            if isinstance(port, bool) or not isinstance(port, int) or not 0 <= port <= 65535:
                raise ConfigError(lineno, "port", "required integer in [0, 65535]")
            mode = data.get("mode")
            if mode not in (MODE_SERVE, MODE_FORWARD):
                raise ConfigError(lineno, "mode", f"must be {MODE_SERVE} or {MODE_FORWARD}")
            key = (host.lower(), port)
            if key in seen:
                raise ConfigError(lineno, "host", f"duplicate route for {host}:{port}")
            seen.add(key)
            if mode == MODE_SERVE:
                raw_dir = data.get("site_dir")
                if not raw_dir or not isinstance(raw_dir, str):
                    raise ConfigError(lineno, "site_dir", "required for serve routes")
                site_dir = Path(raw_dir)
                if not site_dir.is_absolute():
                    site_dir = base / site_dir
                if not site_dir.is_dir():
                    raise ConfigError(lineno, "site_dir", f"no such directory: {site_dir}")
                routes.append(
                    Route(
                        host=host,
                        port=port,
                        mode=mode,
                        site_dir=site_dir,
                        index_path=_site_index(site_dir),
                    )
                )
            else:
                upstream = data.get("upstream")
                if (
                    not upstream
                    or not isinstance(upstream, str)
                    or not upstream.startswith(("http://", "https://"))
                ):
                    raise ConfigError(lineno, "upstream", "required absolute http(s) URL")
                routes.append(Route(host=host, port=port, mode=mode, upstream=upstream))
    return RouteTable(routes=tuple(routes))


@dataclass
class RoutingDecision:
    kind: str
    file_path: Path | None = None
    upstream_url: str | None = None
    route: Route | None = None


def route_request(table: RouteTable, host: str, port: int, path: str) -> RoutingDecision:
    """Pure routing: map a request triple to a decision.

    Any ".." segment (before or after percent-decoding) is rejected, and
    the resolved file must stay inside site_dir.
    """
    route = table.find(host, port)
    if route is None:
        return RoutingDecision(kind=NOT_ROUTED)
    if route.mode == MODE_FORWARD:
        upstream = (route.upstream or "").rstrip("/")
        return RoutingDecision(kind=FORWARD, upstream_url=upstream + path, route=route)

    raw = path.split("?", 1)[0].split("#", 1)[0]
    unquoted = unquote(raw).replace("\\", "/")
    if any(seg == ".." for seg in unquoted.split("/")):
        return RoutingDecision(kind=TRAVERSAL_REJECTED, route=route)
    rel = posixpath.normpath(unquoted.lstrip("/"))
    if rel in ("", "."):
        rel = route.index_path
    site_dir = route.site_dir
    assert site_dir is not None
    candidate = site_dir / rel
    try:
        inside = candidate.resolve().is_relative_to(site_dir.resolve())
    except (OSError, ValueError):
        inside = False
    if not inside:
        return RoutingDecision(kind=TRAVERSAL_REJECTED, route=route)
    return RoutingDecision(kind=SERVE_FILE, file_path=candidate, route=route)


@dataclass
class ProxyServer:
    """Running listeners plus the (possibly port-rewritten) route table."""

    table: RouteTable
    servers: list[ThreadingHTTPServer] = field(default_factory=list)
    threads: list[threading.Thread] = field(default_factory=list)
    access_log: list[str] = field(default_factory=list)
    log_path: Path | None = None
    _lock: threading.Lock = field(default_factory=threading.Lock)

    def ports(self) -> list[int]:
        return [s.server_address[1] for s in self.servers]

    def log_line(self, host: str, port: int, path: str, status: int, nbytes: int, ms: float) -> None:
        stamp = datetime.now(timezone.utc).isoformat()
        line = f"{stamp} {host} {port} {path} {status} {nbytes} {ms:.1f}"
        with self._lock:
            self.access_log.append(line)
            if self.log_path is not None:
                with open(self.log_path, "a", encoding="utf-8") as fh:
                    fh.write(line + "\n")

    def shutdown(self) -> None:
        """Stop accepting; in-flight requests finish before this returns."""
        for server in self.servers:
            server.shutdown()
        for server in self.servers:
            server.server_close()
        for thread in self.threads:
            thread.join(timeout=10)

    def __enter__(self) -> "ProxyServer":
        return self

    def __exit__(self, *exc) -> None:
        self.shutdown()


def _make_handler(proxy: ProxyServer):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.0"
        timeout = 30

        def do_GET(self):
            self._handle(send_body=True)

        def do_HEAD(self):
            self._handle(send_body=False)

        def log_message(self, fmt, *args):
            pass

        def _respond(self, status: int, body: bytes, content_type: str, send_body: bool):
            self.send_response(status)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            if send_body:
                self.wfile.write(body)
            return len(body)

        def _handle(self, send_body: bool):
            start = perf_counter()
            host = (self.headers.get("Host") or "").split(":")[0].strip()
            port = self.server.server_address[1]
            decision = route_request(proxy.table, host, port, self.path)
            if decision.kind == NOT_ROUTED:
                body = f"no route for {host}:{port}\n".encode()
                status = 502
                nbytes = self._respond(status, body, "text/plain; charset=utf-8", send_body)
            elif decision.kind == TRAVERSAL_REJECTED:
                status = 403
                nbytes = self._respond(
                    status, b"path rejected\n", "text/plain; charset=utf-8", send_body
                )
            elif decision.kind == FORWARD:
                status, nbytes = self._forward(decision.upstream_url, send_body)
            else:
                status, nbytes = self._serve_file(decision.file_path, send_body)
            proxy.log_line(host, port, self.path, status, nbytes, (perf_counter() - start) * 1000)

        def _serve_file(self, file_path: Path, send_body: bool):
            if not file_path.is_file():
                return 404, self._respond(
                    404, b"not found\n", "text/plain; charset=utf-8", send_body
                )
            body = file_path.read_bytes()
            ctype, _ = mimetypes.guess_type(file_path.name)
            return 200, self._respond(
                200, body, ctype or "application/octet-stream", send_body
            )

        def _forward(self, upstream_url: str, send_body: bool):
            try:
                resp = requests.get(upstream_url, timeout=30)
            except requests.RequestException as exc:
                body = f"upstream failure: {exc}\n".encode()
                return 502, self._respond(502, body, "text/plain; charset=utf-8", send_body)
            ctype = resp.headers.get("Content-Type", "application/octet-stream")
            return resp.status_code, self._respond(
                resp.status_code, resp.content, ctype, send_body
            )

    return Handler


def serve(
    table: RouteTable, bind: str | None = None, log_path: str | Path | None = None
) -> ProxyServer:
    """Start one listener per distinct port and return the running handle.

    Raises :class:`BindError` (after closing anything already bound) when
    a port is taken.
    """
    address = bind or os.environ.get(BIND_ENV) or DEFAULT_BIND
    proxy = ProxyServer(table=table, log_path=Path(log_path) if log_path else None)
    handler = _make_handler(proxy)
    port_map: dict[int, int] = {}
    for port in table.ports():
        try:
            server = ThreadingHTTPServer((address, port), handler)
        except OSError as exc:
            for started in proxy.servers:
                started.server_close()
            raise BindError(port, str(exc)) from exc
        proxy.servers.append(server)
        port_map[port] = server.server_address[1]
    if any(requested != actual for requested, actual in port_map.items()):
        proxy.table = RouteTable(
            routes=tuple(
                Route(
                    host=r.host,
                    port=port_map[r.port],
                    mode=r.mode,
                    site_dir=r.site_dir,
                    upstream=r.upstream,
                    index_path=r.index_path,
                )
                for r in table.routes
            )
        )
    for server in proxy.servers:
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        proxy.threads.append(thread)
    return proxy
