"""Adapt web content for small screens: classify page technology, segment
HTML into coherent blocks, strip boilerplate, rebuild captured Flash sites
as static pages, serve them through a reverse proxy, and score coverage
and response time."""

__version__ = "0.1.0"

from .blockmodel import DomNode, VisualBlock, parse_html, parse_xml
from .corpus import (
    PageRecord,
    PageTechnology,
    build_manifest,
    classify_technology,
    fetch_page,
    load_manifest,
    scan_domain,
)
from .evaluator import compute_kappa, coverage_score, feasibility_report, measure_response
from .noisefilter import RuleSet, classify_block, compute_features, strip_noise
from .proxy import load_routes, route_request, serve
from .segmenter import PDoC, SegmentationOutcome, segment, segment_page
from .translator import ingest_segments, parse_mhtml, reconstruct_html, translate_site

__all__ = [
    "DomNode",
    "PDoC",
    "PageRecord",
    "PageTechnology",
    "RuleSet",
    "SegmentationOutcome",
    "VisualBlock",
    "__version__",
    "build_manifest",
    "classify_block",
    "classify_technology",
    "compute_features",
    "compute_kappa",
    "coverage_score",
    "feasibility_report",
    "fetch_page",
    "ingest_segments",
    "load_manifest",
    "load_routes",
    "measure_response",
    "parse_html",
    "parse_mhtml",
    "parse_xml",
    "reconstruct_html",
    "route_request",
    "scan_domain",
    "segment",
    "segment_page",
    "serve",
    "strip_noise",
    "translate_site",
]
