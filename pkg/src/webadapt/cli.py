"""Command line front end; one subcommand per pipeline stage.

Exit codes: 0 success, 1 domain error (one-line diagnostic on stderr),
2 usage error.
"""

from __future__ import annotations

import argparse
import sys
import threading
from pathlib import Path

from . import __version__, corpus, evaluator, proxy, reporting, segmenter, translator
from .blockmodel import dump_block_tree
from .noisefilter import AllNoise, RuleSet, strip_noise
from .segmenter import SegmentationStatus


def _error(stage: str, message: str) -> None:
    print(f"{stage}: {message}", file=sys.stderr)


def _is_url(target: str) -> bool:
    return "://" in target


def _read_input(target: str, timeout: float) -> corpus.PageRecord:
    if _is_url(target):
        return corpus.fetch_page(target, timeout=timeout)
    path = Path(target)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {target}")
    return corpus.load_page(path)


def cmd_classify(args) -> int:
    status = 0
    for target in args.inputs:
        try:
            record = _read_input(target, args.timeout)
        except (corpus.FetchError, OSError, ValueError) as exc:
            _error("classify", str(exc))
            status = 1
            continue
        technology = corpus.classify_technology(record)
        print(f"{target}\t{technology.value}")
    return status


def cmd_scan(args) -> int:
    try:
        result = corpus.scan_domain(
            args.seed,
            max_pages=args.max_pages,
            same_host_only=not args.all_hosts,
            timeout=args.timeout,
        )
    except ValueError as exc:
        _error("scan", str(exc))
        return 1
    for failure in result.failures:
        _error("fetch", str(failure.error))
    if not result.records:
        _error("scan", "no pages fetched")
        return 1
    manifest = corpus.build_manifest(result.records, args.out)
    for entry in manifest.entries:
        print(f"{entry.url}\t{entry.technology.value}\t{entry.local_path}")
    print(f"{len(manifest.entries)} pages -> {manifest.path}")
    return 0


def cmd_segment(args) -> int:
    try:
        record = _read_input(args.input, args.timeout)
    except (corpus.FetchError, OSError, ValueError) as exc:
        _error("segment", str(exc))
        return 1
    outcome = segmenter.segment_page(
        record.body, pdoc=args.pdoc, url=record.url, content_type=record.content_type
    )
    if outcome.status is SegmentationStatus.UNSUPPORTED:
        print(f"{outcome.status.value}: {outcome.reason}")
        return 0
    leaves = len(outcome.tree.leaves())
    print(f"{outcome.status.value}: {leaves} block(s) at pdoc {args.pdoc}")
    if args.dump:
        Path(args.dump).write_text(dump_block_tree(outcome.tree) + "\n", encoding="utf-8")
        print(f"block tree -> {args.dump}")
    return 0


def cmd_strip_noise(args) -> int:
    try:
        record = _read_input(args.input, args.timeout)
        rules = RuleSet.from_file(args.rules) if args.rules else RuleSet()
    except (corpus.FetchError, OSError, ValueError) as exc:
        _error("strip-noise", str(exc))
        return 1
    outcome = segmenter.segment_page(
        record.body, pdoc=args.pdoc, url=record.url, content_type=record.content_type
    )
    if outcome.tree is None or outcome.dom is None:
        _error("segment", outcome.reason or "nothing to filter")
        return 1
    try:
        filtered = strip_noise(outcome.tree, outcome.dom, rules)
    except AllNoise as exc:
        _error("strip-noise", str(exc))
        return 1
    print(dump_block_tree(filtered))
    return 0


def cmd_translate(args) -> int:
    try:
        site = translator.translate_site(
            args.mhtml,
            args.segments,
            args.out,
            page_budget=args.page_budget,
            strict_mhtml=args.strict_mhtml,
        )
    except (translator.MhtmlError, translator.SegmentError, ValueError) as exc:
        _error("translate", str(exc))
        return 1
    except OSError as exc:
        _error("io", str(exc))
        return 1
    print(f"{len(site.pages)} page file(s) for site {site.site!r} -> {args.out}")
    return 0


def cmd_serve(args) -> int:
    try:
        table = proxy.load_routes(args.routes)
    except (proxy.ConfigError, OSError) as exc:
        _error("config", str(exc))
        return 1
    try:
        handle = proxy.serve(table, bind=args.bind, log_path=args.log)
    except proxy.BindError as exc:
        _error("bind", str(exc))
        return 1
    for port in handle.ports():
        print(f"listening on port {port}")
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        pass
    finally:
        handle.shutdown()
    return 0


def _parse_pages_file(path: str) -> list[tuple[str, str]]:
    pages: list[tuple[str, str]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, rawline in enumerate(fh, start=1):
            line = rawline.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) == 1:
                pages.append((evaluator.VARIANT_TRANSLATED, parts[0]))
            elif len(parts) == 2 and parts[0] in ("C", "T"):
                pages.append((parts[0], parts[1]))
            else:
                raise ValueError(f"line {lineno}: expected 'url' or 'C|T url'")
    if not pages:
        raise ValueError("pages file lists no URLs")
    return pages


def cmd_evaluate(args) -> int:
    try:
        table = proxy.load_routes(args.routes)
        pages = _parse_pages_file(args.pages)
    except (proxy.ConfigError, OSError, ValueError) as exc:
        _error("evaluate", str(exc))
        return 1
    try:
        handle = proxy.serve(table, bind=args.bind)
    except proxy.BindError as exc:
        _error("bind", str(exc))
        return 1
    records = []
    whole_failures = 0
    try:
        for variant, url in pages:
            try:
                records.append(
                    evaluator.measure_response(
                        url,
                        repeats=args.repeats,
                        variant=variant,
                        device_profile=args.device_profile,
                    )
                )
            except evaluator.MeasurementFailed as exc:
                _error("measure", str(exc))
                whole_failures += 1
    finally:
        handle.shutdown()
    if not records:
        _error("evaluate", "no URL produced a single successful sample")
        return 1
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reporting.write_timing_csv(records, out / "timing.csv")
    reporting.timing_figure(records, out / "timing.png")
    for rec in records:
        print(
            f"{rec.variant} {rec.url} median {rec.median_ms:.1f} ms "
            f"({len(rec.samples)} sample(s), {rec.failures} failure(s))"
        )
    print(f"report -> {out / 'timing.csv'}")
    return 1 if whole_failures else 0


def cmd_report(args) -> int:
    if bool(args.hv) != bool(args.sv):
        _error("report", "--hv and --sv must be given together")
        return 2
    try:
        manifest = corpus.load_manifest(args.manifest)
        rules = RuleSet.from_file(args.rules) if args.rules else RuleSet()
    except (corpus.ManifestError, OSError, ValueError) as exc:
        _error("report", str(exc))
        return 1
    out = Path(args.out)
    try:
        cells = evaluator.feasibility_report(
            manifest, pdoc=args.pdoc, rules=rules, out_dir=out
        )
    except ValueError as exc:
        _error("report", str(exc))
        return 1
    for cell in cells:
        print(f"{cell.system}\t{cell.technology.value}\t{cell.outcome}\t(n={cell.n_pages})")
    if args.hv:
        try:
            hv = evaluator.load_ratings(args.hv)
            sv = evaluator.load_ratings(args.sv)
            a, b = evaluator.paired_ratings(hv, sv)
            result = evaluator.coverage_score(a, b)
        except (evaluator.KappaError, OSError, ValueError) as exc:
            _error("kappa", str(exc))
            return 1
        reporting.write_kappa_csv([(args.page_set, result)], out / "kappa.csv")
        reporting.kappa_figure([(args.page_set, result)], out / "kappa.png")
        print(
            f"kappa[{args.page_set}] = {result.kappa:.4f} "
            f"(pr_a {result.pr_a:.4f}, pr_e {result.pr_e:.4f}, {result.band.value})"
        )
    print(f"report -> {out / 'feasibility.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="webadapt",
        description=(
            "Classify, segment, de-noise, translate and serve web pages for "
            "small screens; score the result."
        ),
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="detect the technology of pages or files")
    p.add_argument("inputs", nargs="+", metavar="url|path")
    p.add_argument("--timeout", type=float, default=10.0)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("scan", help="crawl a domain and build a dataset manifest")
    p.add_argument("seed", help="absolute seed URL")
    p.add_argument("--max-pages", type=int, default=20)
    p.add_argument("--out", required=True, help="manifest output directory")
    p.add_argument("--timeout", type=float, default=10.0)
    p.add_argument("--all-hosts", action="store_true", help="follow off-host links")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("segment", help="segment a page into visual blocks")
    p.add_argument("input", metavar="url|path")
    p.add_argument("--pdoc", type=int, choices=range(1, 11), metavar="1..10", default=segmenter.DEFAULT_PDOC)
    p.add_argument("--dump", help="write the block tree to this file")
    p.add_argument("--timeout", type=float, default=10.0)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("strip-noise", help="segment then drop boilerplate blocks")
    p.add_argument("input", metavar="url|path")
    p.add_argument("--rules", help="JSON rule thresholds")
    p.add_argument("--pdoc", type=int, choices=range(1, 11), metavar="1..10", default=segmenter.DEFAULT_PDOC)
    p.add_argument("--timeout", type=float, default=10.0)
    p.set_defaults(func=cmd_strip_noise)

    p = sub.add_parser("translate", help="rebuild a captured Flash site as HTML")
    p.add_argument("--mhtml", help="MHTML capture of the original site")
    p.add_argument("--segments", required=True, help="extracted text segments (JSONL)")
    p.add_argument("--out", required=True, help="site output directory")
    p.add_argument("--page-budget", type=int, default=translator.PAGE_BUDGET)
    p.add_argument("--strict-mhtml", action="store_true")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("serve", help="serve translated sites through the proxy")
    p.add_argument("--routes", required=True, help="route config (JSONL)")
    p.add_argument("--bind", default=None, help="bind address (default 127.0.0.1)")
    p.add_argument("--log", default=None, help="access log file")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("evaluate", help="measure response times through the proxy")
    p.add_argument("--routes", required=True)
    p.add_argument("--pages", required=True, help="file of URLs ('C|T url' per line)")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--device-profile", default="local")
    p.add_argument("--bind", default=None)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="feasibility matrix and coverage agreement")
    p.add_argument("--manifest", required=True)
    p.add_argument("--pdoc", type=int, choices=range(1, 11), metavar="1..10", default=segmenter.DEFAULT_PDOC)
    p.add_argument("--rules", help="JSON rule thresholds")
    p.add_argument("--hv", help="human-view ratings (page_id,value per line)")
    p.add_argument("--sv", help="system-view ratings (page_id,value per line)")
    p.add_argument("--page-set", default="default")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
