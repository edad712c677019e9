"""Shared fixtures: a tiny HTTP fixture server, corpus pages, MHTML builders."""

from __future__ import annotations

import struct
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from webadapt import corpus

UNIVERSITY_HTML = b"""<!doctype html>
<html><head><meta charset="utf-8"><title>State University</title></head>
<body>
<div id="masthead"><h1>State University</h1></div>
<hr>
<div id="news">
<h2>Campus news</h2>
<p>The research council announced twelve new grants for the physics and
chemistry departments this spring semester, the largest round in a decade
according to the provost office.</p>
<p>Registration for autumn courses opens next Monday morning and closes at
the end of the month for all returning students across every faculty.</p>
</div>
<hr>
<table><tr><td>Admissions office, North Hall</td><td>Library hours, eight to
ten daily</td><td>Campus map and visitor directions</td></tr></table>
<hr>
<div id="footer"><a href="/about.html">About</a> <a href="/contact.html">Contact</a>
<a href="/jobs.html">Jobs</a></div>
</body></html>
"""

GAZETTE_HTML = b"""<html><head><title>City Gazette</title></head><body>
<div class="nav"><a href="/">Home</a> <a href="/world">World</a> <a href="/sport">Sport</a></div>
<hr>
<h2>Rainfall breaks records</h2>
<p>Meteorologists confirmed on Tuesday that the city received more rain in a
single week than in any comparable period since measurements began, flooding
basements along the river and closing two bridges for inspection while crews
pumped water from the underpasses near the station.</p>
<p>City engineers expect the remaining closures to lift by Friday provided the
forecast holds, though they cautioned that saturated ground could still shift
under the older embankments south of the mill district.</p>
<hr>
<p class="copyright">&#169; 2012 Gazette</p>
</body></html>
"""

CATALOG_HTML = b"""<html><body>
<h2>Course catalog</h2>
<p>Undergraduate courses for the spring term are listed by department with
meeting times, assigned rooms and the examiner responsible for each course.</p>
<hr>
<table><tr><td>Physics 101, Mon 9am, Hall A, Prof Stone</td>
<td>Chemistry 210, Tue 11am, Lab 3, Prof Reyes</td></tr></table>
</body></html>
"""

DATA_XML = (
    b'<?xml version="1.0"?>\n<shrubbery>\n'
    b'<plant genus="polystichum">fern</plant>\n'
    b"<plant>moss</plant>\n<stone>granite</stone>\n</shrubbery>\n"
)

FEED_XML = (
    b'<?xml version="1.0" encoding="utf-8"?>\n'
    b"<catalog><item sku=\"1\"><name>bolt</name><qty>40</qty></item>"
    b"<item sku=\"2\"><name>nut</name><qty>95</qty></item></catalog>\n"
)


def swf_bytes(length: int = 256, compressed: bool = False) -> bytes:
    """A plausible Flash container: signature, version, little-endian size."""
    signature = b"CWS" if compressed else b"FWS"
    header = signature + bytes([9]) + struct.pack("<I", length)
    return header + b"\x00" * (length - len(header))


@pytest.fixture
def corpus_records():
    """Mixed-technology page records, already classified."""
    records = [
        corpus.PageRecord(url="http://uni.test/index.html", body=UNIVERSITY_HTML,
                          content_type="text/html"),
        corpus.PageRecord(url="http://gazette.test/index.html", body=GAZETTE_HTML,
                          content_type="text/html"),
        corpus.PageRecord(url="http://uni.test/catalog.html", body=CATALOG_HTML,
                          content_type="text/html"),
        corpus.PageRecord(url="http://games.test/intro", body=swf_bytes(),
                          content_type="application/x-shockwave-flash"),
        corpus.PageRecord(url="http://games.test/menu", body=swf_bytes(compressed=True),
                          content_type=""),
        corpus.PageRecord(url="http://shop.test/web.xml", body=DATA_XML,
                          content_type="text/xml"),
        corpus.PageRecord(url="http://shop.test/feed.xml", body=FEED_XML,
                          content_type="application/xml"),
    ]
    for record in records:
        record.technology = corpus.classify_technology(record)
    return records


@pytest.fixture
def fixture_manifest(corpus_records, tmp_path):
    return corpus.build_manifest(corpus_records, tmp_path / "dataset")


def crlf_join(*lines: bytes) -> bytes:
    return b"\r\n".join(lines)


def make_mhtml(parts, boundary: str = "fixture-bound", start: str | None = None) -> bytes:
    """Assemble a multipart/related capture from (headers, payload) pairs.

    ``parts`` is a list of dicts: {"headers": [(name, value), ...],
    "payload": bytes already in wire form}.
    """
    ctype = f'multipart/related; boundary="{boundary}"'
    if start:
        ctype += f'; start="{start}"'
    out = [
        b"From: <saved by fixture>",
        b"MIME-Version: 1.0",
        b"Content-Type: " + ctype.encode(),
        b"",
    ]
    for part in parts:
        out.append(b"--" + boundary.encode())
        for name, value in part["headers"]:
            out.append(f"{name}: {value}".encode())
        out.append(b"")
        out.append(part["payload"])
    out.append(b"--" + boundary.encode() + b"--")
    out.append(b"")
    return crlf_join(*out)


class _FixtureHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.0"
    responses_map: dict = {}

    def log_message(self, fmt, *args):
        pass

    def do_GET(self):
        canned = self.responses_map.get(self.path.split("?", 1)[0])
        if canned is None:
            self.send_response(404)
            self.send_header("Content-Length", "0")
            self.end_headers()
            return
        delay = canned.get("delay", 0)
        if delay:
            time.sleep(delay)
        status = canned.get("status", 200)
        body = canned.get("body", b"")
        self.send_response(status)
        for name, value in canned.get("headers", {}).items():
            self.send_header(name, value)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


class FixtureServer:
    """Loopback HTTP server mapping exact paths to canned responses."""

    def __init__(self, responses: dict):
        handler = type("Handler", (_FixtureHandler,), {"responses_map": responses})
        self.server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
        self.port = self.server.server_address[1]
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self.thread.start()

    def url(self, path: str = "/") -> str:
        return f"http://127.0.0.1:{self.port}{path}"

    def close(self):
        self.server.shutdown()
        self.server.server_close()
        self.thread.join(timeout=5)


@pytest.fixture
def make_fixture_server():
    servers: list[FixtureServer] = []

    def factory(responses: dict) -> FixtureServer:
        server = FixtureServer(responses)
        servers.append(server)
        return server

    yield factory
    for server in servers:
        server.close()
