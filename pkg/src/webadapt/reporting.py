"""Report emission: comma-separated tables and matching figures.

Every writer takes computed results and a target path; figures render
headlessly (no display needed) next to the delimited output.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluator import (
    OUTCOME_FAILS,
    OUTCOME_SINGLE_BLOCK,
    OUTCOME_WORKS,
    FeasibilityCell,
    KappaResult,
    TimingRecord,
)

_OUTCOME_COLORS = {
    OUTCOME_WORKS: "#4caf50",
    OUTCOME_SINGLE_BLOCK: "#ff9800",
    OUTCOME_FAILS: "#f44336",
}


def write_timing_csv(records: Sequence[TimingRecord], path: str | Path) -> None:
    """Columns: url, variant, device_profile, median_ms, samples
    (samples is the raw series, semicolon-separated)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["url", "variant", "device_profile", "median_ms", "samples"])
        for rec in records:
            writer.writerow(
                [
                    rec.url,
                    rec.variant,
                    rec.device_profile,
                    f"{rec.median_ms:.3f}",
                    ";".join(f"{s:.3f}" for s in rec.samples),
                ]
            )


def write_kappa_csv(results: Sequence[tuple[str, KappaResult]], path: str | Path) -> None:
    """Columns: page_set, pr_a, pr_e, kappa, band."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["page_set", "pr_a", "pr_e", "kappa", "band"])
        for name, result in results:
            writer.writerow(
                [
                    name,
                    f"{result.pr_a:.6f}",
                    f"{result.pr_e:.6f}",
                    f"{result.kappa:.6f}",
                    result.band.value,
                ]
            )


def write_feasibility_csv(cells: Sequence[FeasibilityCell], path: str | Path) -> None:
    """Columns: system, technology, outcome, n_pages."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["system", "technology", "outcome", "n_pages"])
        for cell in cells:
            writer.writerow(
                [cell.system, cell.technology.value, cell.outcome, cell.n_pages]
            )


def _short(url: str, limit: int = 40) -> str:
    return url if len(url) <= limit else "…" + url[-(limit - 1):]


def timing_figure(records: Sequence[TimingRecord], path: str | Path) -> None:
    """Bar chart of median latency per URL, one bar color per variant."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    labels = [f"{_short(r.url)}\n[{r.variant}]" for r in records]
    values = [r.median_ms for r in records]
    colors = ["#f44336" if r.variant == "C" else "#2196f3" for r in records]
    ax.bar(range(len(records)), values, color=colors)
    ax.set_xticks(range(len(records)))
    ax.set_xticklabels(labels, fontsize=7, rotation=20, ha="right")
    ax.set_ylabel("median response time (ms)")
    ax.set_title("Response time: original capture (C) vs translated pages (T)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def kappa_figure(results: Sequence[tuple[str, KappaResult]], path: str | Path) -> None:
    """Bars of kappa per page set with the 0.7 and 0.9 band thresholds."""
    fig, ax = plt.subplots(figsize=(7, 4))
    names = [name for name, _ in results]
    values = [r.kappa for _, r in results]
    ax.bar(range(len(results)), values, color="#2196f3")
    ax.axhline(0.7, linestyle="--", color="#ff9800", linewidth=1, label="strong > 0.7")
    ax.axhline(0.9, linestyle="--", color="#4caf50", linewidth=1, label="excellent > 0.9")
    ax.set_xticks(range(len(results)))
    ax.set_xticklabels(names, fontsize=8, rotation=15, ha="right")
    ax.set_ylim(min(0.0, *values) - 0.05, 1.05)
    ax.set_ylabel("kappa")
    ax.set_title("Content coverage agreement")
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def feasibility_figure(cells: Sequence[FeasibilityCell], path: str | Path) -> None:
    """Colored (system x technology) grid annotated with outcomes."""
    systems: list[str] = []
    technologies: list[str] = []
    for cell in cells:
        if cell.system not in systems:
            systems.append(cell.system)
        if cell.technology.value not in technologies:
            technologies.append(cell.technology.value)
    fig, ax = plt.subplots(
        figsize=(1.8 * max(3, len(technologies)), 1.2 * max(2, len(systems)) + 1)
    )
    ax.set_xlim(0, len(technologies))
    ax.set_ylim(0, len(systems))
    for cell in cells:
        x = technologies.index(cell.technology.value)
        y = systems.index(cell.system)
        ax.add_patch(
            plt.Rectangle(
                (x, y), 1, 1, color=_OUTCOME_COLORS.get(cell.outcome, "#9e9e9e")
            )
        )
        ax.text(
            x + 0.5,
            y + 0.5,
            f"{cell.outcome}\n(n={cell.n_pages})",
            ha="center",
            va="center",
            fontsize=9,
        )
    ax.set_xticks([i + 0.5 for i in range(len(technologies))])
    ax.set_xticklabels(technologies)
    ax.set_yticks([i + 0.5 for i in range(len(systems))])
    ax.set_yticklabels(systems)
    ax.set_title("Feasibility by page technology")
    ax.invert_yaxis()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
