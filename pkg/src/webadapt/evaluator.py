"""Scoring: chance-corrected agreement, response timing, feasibility matrix.

Agreement between two raters over the same items is summarized as

    kappa = (pr_a - pr_e) / (1 - pr_e)

where pr_a is the fraction of items the raters agree on and pr_e is the
probability of chance agreement from the raters' observed marginal
frequencies: pr_e = sum over categories c of marginal_a(c) * marginal_b(c).
Bands are strict: kappa above 0.9 is Excellent, above 0.7 Strong, anything
else Weak.

Content coverage uses ratings restricted to {0, 0.5, 1} per page (full
loss, half loss, no loss).  Response timing is wall-clock per request with
the median over repeats.  The feasibility matrix aggregates per-page
segmentation and noise-filter outcomes per technology.
"""

from __future__ import annotations

import statistics
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from time import perf_counter
from typing import Hashable, Sequence

import requests

from . import noisefilter, segmenter
from .corpus import DatasetManifest, PageTechnology
from .noisefilter import AllNoise, RuleSet
from .segmenter import DEFAULT_PDOC, SegmentationStatus
from .translator import TextSegment, TranslatedSite, site_texts

RATING_VALUES = (0.0, 0.5, 1.0)

SYSTEM_SEGMENTER = "Segmenter"
SYSTEM_NOISEFILTER = "NoiseFilter"

OUTCOME_WORKS = "Works"
OUTCOME_SINGLE_BLOCK = "SingleBlock"
OUTCOME_FAILS = "Fails"

VARIANT_ORIGINAL = "C"
VARIANT_TRANSLATED = "T"


class Band(Enum):
    WEAK = "Weak"
    STRONG = "Strong"
    EXCELLENT = "Excellent"


class KappaError(ValueError):
    pass


class LengthMismatch(KappaError):
    pass


class EmptyInput(KappaError):
    pass


class DegenerateMarginals(KappaError):
    pass


@dataclass(frozen=True)
class KappaResult:
    pr_a: float
    pr_e: float
    kappa: float
    band: Band


def band_of(kappa: float) -> Band:
    if kappa > 0.9:
        return Band.EXCELLENT
    if kappa > 0.7:
        return Band.STRONG
    return Band.WEAK


def compute_kappa(ratings_a: Sequence[Hashable], ratings_b: Sequence[Hashable]) -> KappaResult:
    """Agreement between two equal-length rating vectors.

    Categories can be any hashable labels; the statistic is invariant
    under relabeling both vectors with the same bijection.  Complete
    agreement gives kappa 1; agreement at exactly the chance rate gives
    kappa 0.  When both raters use a single identical category the
    chance term is 1 and kappa is taken as 1 (the raters agree
    everywhere); a chance term of 1 without full agreement is an error.
    """
    if len(ratings_a) != len(ratings_b):
        raise LengthMismatch(
            f"rating vectors differ in length: {len(ratings_a)} vs {len(ratings_b)}"
        )
    n = len(ratings_a)
    if n == 0:
        raise EmptyInput("rating vectors are empty")
    agreements = sum(1 for x, y in zip(ratings_a, ratings_b) if x == y)
    pr_a = agreements / n
    counts_a = Counter(ratings_a)
    counts_b = Counter(ratings_b)
    pr_e = sum(
        (counts_a[c] / n) * (counts_b[c] / n) for c in counts_a.keys() | counts_b.keys()
    )
    if pr_e >= 1.0:
        if pr_a == 1.0:
            return KappaResult(pr_a=1.0, pr_e=1.0, kappa=1.0, band=band_of(1.0))
        raise DegenerateMarginals("chance agreement is 1 without full agreement")
    kappa = (pr_a - pr_e) / (1.0 - pr_e)
    return KappaResult(pr_a=pr_a, pr_e=pr_e, kappa=kappa, band=band_of(kappa))


def validate_rating(value) -> float:
    v = float(value)
    if v not in RATING_VALUES:
        raise ValueError(f"coverage rating must be one of {RATING_VALUES}, got {value!r}")
    return v


def coverage_score(
    human_view: Sequence[float], system_view: Sequence[float]
) -> KappaResult:
    """Kappa over per-page coverage ratings; values restricted to 0, 0.5, 1."""
    hv = [validate_rating(v) for v in human_view]
    sv = [validate_rating(v) for v in system_view]
    return compute_kappa(hv, sv)


def load_ratings(path: str | Path) -> dict[str, float]:
    """Rating file: one "page_id,value" line per page; # starts a comment."""
    ratings: dict[str, float] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, rawline in enumerate(fh, start=1):
            line = rawline.strip()
            if not line or line.startswith("#"):
                continue
            page_id, sep, value = line.partition(",")
            if not sep:
                raise ValueError(f"line {lineno}: expected page_id,value")
            page_id = page_id.strip()
            if page_id in ratings:
                raise ValueError(f"line {lineno}: duplicate page {page_id}")
            try:
                ratings[page_id] = validate_rating(value.strip())
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from exc
    return ratings


def paired_ratings(
    hv: dict[str, float], sv: dict[str, float]
) -> tuple[list[float], list[float]]:
    """Align two rating maps over the identical page set, sorted by page id."""
    if set(hv) != set(sv):
        only_h = sorted(set(hv) - set(sv))
        only_s = sorted(set(sv) - set(hv))
        raise LengthMismatch(
            f"rating files cover different pages (only in first: {only_h}, "
            f"only in second: {only_s})"
        )
    keys = sorted(hv)
    return [hv[k] for k in keys], [sv[k] for k in keys]


def system_view_ratings(
    site: TranslatedSite, segments: Sequence[TextSegment]
) -> dict[str, float]:
    """Automated coverage rating per page from the emitted HTML itself.

    1 when the page's extracted texts equal its segment texts in order,
    0.5 when at least half survived, 0 otherwise.
    """
    expected: dict[str, list[str]] = {}
    for seg in sorted(segments, key=lambda s: (s.page, s.order)):
        expected.setdefault(seg.page, []).append(" ".join(seg.text.split()))
    actual = site_texts(site)
    out: dict[str, float] = {}
    for page, want in expected.items():
        got = actual.get(page, [])
        if got == want:
            out[page] = 1.0
        else:
            surviving = sum(1 for t in want if t in got)
            out[page] = 0.5 if surviving * 2 >= len(want) else 0.0
    return out


class MeasurementFailed(Exception):
    def __init__(self, url: str, message: str):
        super().__init__(f"{url}: {message}")
        self.url = url


@dataclass
class TimingRecord:
    url: str
    variant: str
    device_profile: str
    samples: list[float] = field(default_factory=list)
    median_ms: float = 0.0
    failures: int = 0


def measure_response(
    url: str,
    repeats: int = 5,
    variant: str = VARIANT_TRANSLATED,
    device_profile: str = "local",
    timeout: float = 30.0,
    session: requests.Session | None = None,
) -> TimingRecord:
    """Wall-clock latency samples for one URL; median over the successes.

    Requests run serially to avoid self-contention.  Raises
    :class:`MeasurementFailed` when every repeat fails.
    """
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    if variant not in (VARIANT_ORIGINAL, VARIANT_TRANSLATED):
        raise ValueError(f"variant must be C or T, got {variant!r}")
    owned = session is None
    sess = session or requests.Session()
    samples: list[float] = []
    failures = 0
    last_error = ""
    try:
        for _ in range(repeats):
            start = perf_counter()
            try:
                resp = sess.get(url, timeout=timeout)
                _ = resp.content
                if resp.status_code >= 400:
                    failures += 1
                    last_error = f"status {resp.status_code}"
                    continue
            except requests.RequestException as exc:
                failures += 1
                last_error = str(exc)
                continue
            samples.append((perf_counter() - start) * 1000.0)
    finally:
        if owned:
            sess.close()
    if not samples:
        raise MeasurementFailed(url, last_error or "no successful samples")
    return TimingRecord(
        url=url,
        variant=variant,
        device_profile=device_profile,
        samples=samples,
        median_ms=statistics.median(samples),
        failures=failures,
    )


@dataclass(frozen=True)
class FeasibilityCell:
    system: str
    technology: PageTechnology
    outcome: str
    n_pages: int


def _majority(outcomes: list[str]) -> str:
    n = len(outcomes)
    counts = Counter(outcomes)
    if counts[OUTCOME_WORKS] * 2 > n:
        return OUTCOME_WORKS
    if counts[OUTCOME_SINGLE_BLOCK] * 2 > n:
        return OUTCOME_SINGLE_BLOCK
    return OUTCOME_FAILS


def feasibility_report(
    manifest: DatasetManifest,
    pdoc=DEFAULT_PDOC,
    rules: RuleSet | None = None,
    out_dir: str | Path | None = None,
) -> list[FeasibilityCell]:
    """Run segmenter and noise filter over every manifest entry and
    aggregate outcomes per (system, technology) by strict majority.

    With out_dir set, writes feasibility.csv and feasibility.png there.
    """
    if not manifest.entries:
        raise ValueError("manifest has no entries")
    rules = rules or noisefilter.DEFAULT_RULES
    seg_outcomes: dict[PageTechnology, list[str]] = {}
    noise_outcomes: dict[PageTechnology, list[str]] = {}
    for entry in manifest.entries:
        body = manifest.read_body(entry)
        outcome = segmenter.segment_page(
            body, pdoc, url=entry.url, technology=entry.technology
        )
        if outcome.status is SegmentationStatus.SEGMENTED:
            seg_outcomes.setdefault(entry.technology, []).append(OUTCOME_WORKS)
        elif outcome.status is SegmentationStatus.SINGLE_BLOCK:
            seg_outcomes.setdefault(entry.technology, []).append(OUTCOME_SINGLE_BLOCK)
        else:
            seg_outcomes.setdefault(entry.technology, []).append(OUTCOME_FAILS)
        if outcome.tree is None or outcome.dom is None:
            noise_outcomes.setdefault(entry.technology, []).append(OUTCOME_FAILS)
        else:
            try:
                noisefilter.strip_noise(outcome.tree, outcome.dom, rules)
                noise_outcomes.setdefault(entry.technology, []).append(OUTCOME_WORKS)
            except (AllNoise, ValueError):
                noise_outcomes.setdefault(entry.technology, []).append(OUTCOME_FAILS)
    cells: list[FeasibilityCell] = []
    for technology in PageTechnology:
        if technology in seg_outcomes:
            cells.append(
                FeasibilityCell(
                    system=SYSTEM_SEGMENTER,
                    technology=technology,
                    outcome=_majority(seg_outcomes[technology]),
                    n_pages=len(seg_outcomes[technology]),
                )
            )
    for technology in PageTechnology:
        if technology in noise_outcomes:
            cells.append(
                FeasibilityCell(
                    system=SYSTEM_NOISEFILTER,
                    technology=technology,
                    outcome=_majority(noise_outcomes[technology]),
                    n_pages=len(noise_outcomes[technology]),
                )
            )
    if out_dir is not None:
        from . import reporting

        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        reporting.write_feasibility_csv(cells, out / "feasibility.csv")
        reporting.feasibility_figure(cells, out / "feasibility.png")
    return cells
