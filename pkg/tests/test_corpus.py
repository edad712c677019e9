import socket

import pytest

from conftest import DATA_XML, UNIVERSITY_HTML, swf_bytes
from webadapt import corpus
from webadapt.corpus import (
    FetchError,
    ManifestError,
    PageRecord,
    PageTechnology,
    build_manifest,
    classify_technology,
    extract_links,
    fetch_page,
    load_manifest,
    load_page,
    normalize_url,
    scan_domain,
)


def record(url="http://x.test/", body=b"", content_type=""):
    return PageRecord(url=url, body=body, content_type=content_type)


class TestClassification:
    def test_magic_bytes_win_over_xml_suffix(self):
        page = record(url="http://x.test/app.xml", body=swf_bytes())
        assert classify_technology(page) is PageTechnology.FLASH

    def test_magic_bytes_win_over_html_content_type(self):
        page = record(body=swf_bytes(compressed=True), content_type="text/html")
        assert classify_technology(page) is PageTechnology.FLASH

    @pytest.mark.parametrize("signature", [b"FWS", b"CWS", b"ZWS"])
    def test_all_flash_signatures(self, signature):
        page = record(body=signature + b"\x09\x10\x00\x00\x00rest")
        assert classify_technology(page) is PageTechnology.FLASH

    def test_signature_not_at_start_is_not_flash(self):
        page = record(body=b"xFWS\x09", content_type="")
        assert classify_technology(page) is PageTechnology.UNKNOWN

    def test_content_type_html(self):
        page = record(body=b"<p>x</p>", content_type="text/html; charset=utf-8")
        assert classify_technology(page) is PageTechnology.HTML

    def test_content_type_xml(self):
        page = record(body=DATA_XML, content_type="application/xml")
        assert classify_technology(page) is PageTechnology.XML

    def test_content_type_flash_mime(self):
        page = record(body=b"not even swf", content_type="application/x-shockwave-flash")
        assert classify_technology(page) is PageTechnology.FLASH

    def test_content_type_wins_over_suffix(self):
        page = record(url="http://x.test/page.xml", body=b"<p>x</p>",
                      content_type="text/html")
        assert classify_technology(page) is PageTechnology.HTML

    def test_url_suffix_html(self):
        page = record(url="http://x.test/a/b.html", body=b"<p>x</p>")
        assert classify_technology(page) is PageTechnology.HTML

    def test_url_suffix_xml(self):
        page = record(url="http://x.test/feed.xml", body=DATA_XML)
        assert classify_technology(page) is PageTechnology.XML

    def test_url_suffix_swf(self):
        page = record(url="http://x.test/banner.swf", body=b"")
        assert classify_technology(page) is PageTechnology.FLASH

    def test_body_prefix_doctype(self):
        page = record(url="http://x.test/nosuffix", body=b"  <!DOCTYPE html><p>x</p>")
        assert classify_technology(page) is PageTechnology.HTML

    def test_body_prefix_xml_declaration(self):
        page = record(url="http://x.test/nosuffix", body=DATA_XML)
        assert classify_technology(page) is PageTechnology.XML

    def test_unclassifiable_is_unknown(self):
        page = record(url="http://x.test/blob", body=b"plain words only")
        assert classify_technology(page) is PageTechnology.UNKNOWN

    def test_classification_is_deterministic(self, corpus_records):
        for page in corpus_records:
            assert classify_technology(page) is page.technology

    def test_fixture_corpus_covers_three_technologies(self, corpus_records):
        kinds = {page.technology for page in corpus_records}
        assert kinds == {PageTechnology.HTML, PageTechnology.FLASH, PageTechnology.XML}


class TestEmbeddedFlashDominance:
    def wrap(self, visible: str) -> bytes:
        return (
            "<html><body><object type=\"application/x-shockwave-flash\" "
            "data=\"movie.swf\"></object><p>" + visible + "</p></body></html>"
        ).encode()

    def test_sparse_text_flash_page_counts_as_flash(self):
        page = record(body=self.wrap("skip intro"), content_type="text/html")
        assert classify_technology(page) is PageTechnology.FLASH

    def test_texty_page_with_embedded_movie_stays_html(self):
        words = " ".join(f"word{i}" for i in range(60))
        page = record(body=self.wrap(words), content_type="text/html")
        assert classify_technology(page) is PageTechnology.HTML

    def test_embed_src_swf_counts(self):
        body = b"<html><body><embed src='game.swf'><p>play</p></body></html>"
        page = record(body=body, content_type="text/html")
        assert classify_technology(page) is PageTechnology.FLASH

    def test_classid_counts(self):
        body = (b"<html><body><object classid='clsid:D27CDB6E-AE6D-11cf-96B8-444553540000'>"
                b"<param name='movie' value='m.swf'></object></body></html>")
        page = record(body=body, content_type="text/html")
        assert classify_technology(page) is PageTechnology.FLASH

    def test_html_without_flash_reference_unaffected(self):
        page = record(body=b"<html><body><p>hi</p></body></html>", content_type="text/html")
        assert classify_technology(page) is PageTechnology.HTML


class TestNormalizeUrl:
    @pytest.mark.parametrize(
        "raw,expected",
        [
            ("HTTP://Example.COM/a", "http://example.com/a"),
            ("http://example.com", "http://example.com/"),
            ("http://example.com/a/../b", "http://example.com/b"),
            ("http://example.com/a/", "http://example.com/a/"),
            ("http://example.com/a#frag", "http://example.com/a"),
            ("http://example.com:8080/x?q=1", "http://example.com:8080/x?q=1"),
        ],
    )
    def test_cases(self, raw, expected):
        assert normalize_url(raw) == expected

    def test_relative_against_base(self):
        assert normalize_url("../up", base="http://h.test/a/b/c") == "http://h.test/a/up"

    def test_idempotent(self):
        once = normalize_url("HTTP://H.test/a/./b/../c#x")
        assert normalize_url(once) == once


class TestExtractLinks:
    def test_skips_fragments_and_schemes(self):
        from webadapt.blockmodel import parse_html

        dom = parse_html(
            b"<a href='/one'>1</a><a href='#top'>t</a><a href='mailto:x@y'>m</a>"
            b"<a href='javascript:void(0)'>j</a><a href='ftp://h/f'>f</a>"
            b"<a href='http://other.test/two'>2</a><a>none</a>"
        )
        links = extract_links(dom, "http://h.test/base/")
        assert links == ["http://h.test/one", "http://other.test/two"]


class TestFetchPage:
    def test_success(self, make_fixture_server):
        server = make_fixture_server({
            "/page": {"body": b"<p>ok</p>", "headers": {"Content-Type": "text/html"}},
        })
        page = fetch_page(server.url("/page"))
        assert page.body == b"<p>ok</p>"
        assert page.content_type.startswith("text/html")
        assert page.source == corpus.SOURCE_LIVE
        assert page.final_url == server.url("/page")

    def test_redirect_followed_and_final_url_recorded(self, make_fixture_server):
        server = make_fixture_server({
            "/old": {"status": 302, "headers": {"Location": "/new"}},
            "/new": {"body": b"moved here"},
        })
        page = fetch_page(server.url("/old"))
        assert page.body == b"moved here"
        assert page.final_url.endswith("/new")

    def test_http_error_status(self, make_fixture_server):
        server = make_fixture_server({"/gone": {"status": 404, "body": b"nope"}})
        with pytest.raises(FetchError) as err:
            fetch_page(server.url("/gone"))
        assert err.value.stage == FetchError.HTTP
        assert err.value.status == 404

    def test_timeout(self, make_fixture_server):
        server = make_fixture_server({"/slow": {"body": b"x", "delay": 2.0}})
        with pytest.raises(FetchError) as err:
            fetch_page(server.url("/slow"), timeout=0.3)
        assert err.value.stage == FetchError.TIMEOUT

    def test_connection_refused(self):
        probe = socket.socket()
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
        probe.close()
        with pytest.raises(FetchError) as err:
            fetch_page(f"http://127.0.0.1:{port}/", timeout=2)
        assert err.value.stage == FetchError.NETWORK

    def test_dns_failure(self):
        with pytest.raises(FetchError) as err:
            fetch_page("http://no-such-host-zz.invalid/", timeout=5)
        assert err.value.stage == FetchError.DNS

    def test_redirect_loop(self, make_fixture_server):
        server = make_fixture_server({
            "/a": {"status": 302, "headers": {"Location": "/b"}},
            "/b": {"status": 302, "headers": {"Location": "/a"}},
        })
        with pytest.raises(FetchError) as err:
            fetch_page(server.url("/a"))
        assert err.value.stage == FetchError.TOO_MANY_REDIRECTS

    def test_relative_url_rejected(self):
        with pytest.raises(ValueError):
            fetch_page("page.html")


class TestLoadPage:
    def test_reads_file(self, tmp_path):
        target = tmp_path / "saved.html"
        target.write_bytes(UNIVERSITY_HTML)
        page = load_page(target)
        assert page.body == UNIVERSITY_HTML
        assert page.url.startswith("file://")
        assert page.source == corpus.SOURCE_LOCAL
        assert page.content_type == "text/html"


def site_fetcher(pages):
    def fetcher(url, timeout):
        if url not in pages:
            raise FetchError(FetchError.HTTP, url, status=404)
        body, ctype = pages[url]
        return PageRecord(url=url, body=body, content_type=ctype)
    return fetcher


class TestScanDomain:
    PAGES = {
        "http://uni.test/": (
            b"<html><body><a href='/b.html'>b</a> <a href='/c.html'>c</a>"
            b"<a href='http://other.test/x'>off-site</a></body></html>",
            "text/html",
        ),
        "http://uni.test/b.html": (
            b"<html><body><a href='/'>home</a><a href='/c.html'>c</a></body></html>",
            "text/html",
        ),
        "http://uni.test/c.html": (b"<html><body>leaf</body></html>", "text/html"),
    }

    def test_bfs_collects_reachable_pages(self):
        result = scan_domain("http://uni.test/", max_pages=10, fetcher=site_fetcher(self.PAGES))
        assert [r.url for r in result] == list(self.PAGES)
        assert result.failures == []

    def test_max_pages_bounds_the_crawl(self):
        result = scan_domain("http://uni.test/", max_pages=1, fetcher=site_fetcher(self.PAGES))
        assert len(result) == 1

    def test_off_host_links_are_not_followed(self):
        result = scan_domain("http://uni.test/", max_pages=10, fetcher=site_fetcher(self.PAGES))
        assert all(r.url.startswith("http://uni.test/") for r in result)

    def test_off_host_links_followed_when_allowed(self):
        pages = dict(self.PAGES)
        pages["http://other.test/x"] = (b"<html><body>elsewhere</body></html>", "text/html")
        result = scan_domain("http://uni.test/", max_pages=10, same_host_only=False,
                             fetcher=site_fetcher(pages))
        assert "http://other.test/x" in [r.url for r in result]

    def test_duplicate_links_fetched_once(self):
        calls = []

        def counting(url, timeout):
            calls.append(url)
            return site_fetcher(self.PAGES)(url, timeout)

        scan_domain("http://uni.test/", max_pages=10, fetcher=counting)
        assert len(calls) == len(set(calls))

    def test_fetch_failures_recorded_not_fatal(self):
        pages = dict(self.PAGES)
        del pages["http://uni.test/b.html"]
        result = scan_domain("http://uni.test/", max_pages=10, fetcher=site_fetcher(pages))
        assert [f.url for f in result.failures] == ["http://uni.test/b.html"]
        assert [r.url for r in result] == ["http://uni.test/", "http://uni.test/c.html"]

    def test_records_are_classified(self):
        result = scan_domain("http://uni.test/", max_pages=2, fetcher=site_fetcher(self.PAGES))
        assert all(r.technology is PageTechnology.HTML for r in result)

    def test_zero_pages_rejected(self):
        with pytest.raises(ValueError):
            scan_domain("http://uni.test/", max_pages=0, fetcher=site_fetcher(self.PAGES))


class TestManifest:
    def test_entries_and_files(self, fixture_manifest, corpus_records):
        assert len(fixture_manifest.entries) == len(corpus_records)
        for entry in fixture_manifest.entries:
            assert (fixture_manifest.root / entry.local_path).is_file()
            assert len(entry.body_digest) == 64

    def test_extension_follows_technology(self, fixture_manifest):
        by_tech = {e.technology: e.local_path for e in fixture_manifest.entries}
        assert by_tech[PageTechnology.HTML].endswith(".html")
        assert by_tech[PageTechnology.FLASH].endswith(".swf")
        assert by_tech[PageTechnology.XML].endswith(".xml")

    def test_entry_lines_deterministic(self, corpus_records, tmp_path):
        first = build_manifest(corpus_records, tmp_path / "one")
        second = build_manifest(corpus_records, tmp_path / "two")
        lines_a = (first.root / "manifest.jsonl").read_text().splitlines()
        lines_b = (second.root / "manifest.jsonl").read_text().splitlines()
        assert lines_a[1:] == lines_b[1:]

    def test_duplicate_urls_keep_first(self, tmp_path):
        records = [
            record(url="http://x.test/p", body=b"first", content_type="text/html"),
            record(url="http://x.test/p", body=b"second", content_type="text/html"),
        ]
        for r in records:
            r.technology = classify_technology(r)
        manifest = build_manifest(records, tmp_path / "d")
        assert len(manifest.entries) == 1
        assert manifest.read_body(manifest.entries[0]) == b"first"

    def test_load_round_trip(self, fixture_manifest):
        loaded = load_manifest(fixture_manifest.root)
        assert [e.url for e in loaded.entries] == [e.url for e in fixture_manifest.entries]
        assert loaded.created_at == fixture_manifest.created_at
        for entry in loaded.entries:
            assert loaded.read_body(entry) == fixture_manifest.read_body(entry)

    def test_load_detects_corrupt_body(self, fixture_manifest):
        victim = fixture_manifest.entries[0]
        (fixture_manifest.root / victim.local_path).write_bytes(b"tampered")
        with pytest.raises(ManifestError, match="digest"):
            load_manifest(fixture_manifest.root)

    def test_load_detects_missing_body(self, fixture_manifest):
        victim = fixture_manifest.entries[0]
        (fixture_manifest.root / victim.local_path).unlink()
        with pytest.raises(ManifestError, match="missing"):
            load_manifest(fixture_manifest.root)

    def test_load_rejects_duplicate_urls(self, fixture_manifest):
        path = fixture_manifest.path
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines + [lines[1]]) + "\n")
        with pytest.raises(ManifestError, match="duplicate"):
            load_manifest(fixture_manifest.root)

    def test_load_rejects_bad_json(self, fixture_manifest):
        path = fixture_manifest.path
        path.write_text(path.read_text() + "{not json\n")
        with pytest.raises(ManifestError, match="JSON"):
            load_manifest(fixture_manifest.root)

    def test_load_rejects_unknown_technology(self, fixture_manifest):
        path = fixture_manifest.path
        text = path.read_text().replace('"Html"', '"Applet"', 1)
        path.write_text(text)
        with pytest.raises(ManifestError, match="technology"):
            load_manifest(fixture_manifest.root)
