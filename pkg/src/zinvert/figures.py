"""Render the delimited outputs as matplotlib figures (Agg, file output only)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .engine import FitnessTrace
from .evaluation import CATEGORIES, HistogramRow, RocRow

_CATEGORY_LABELS = {
    "genuine": "genuine",
    "imposter": "imposter",
    "mated_attack_type1": "mated attack (type-1)",
    "mated_attack_type2": "mated attack (type-2)",
}


def save_trace_figure(traces: list[FitnessTrace], path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for k, trace in enumerate(traces):
        label = f"restart {k}" if len(traces) > 1 else "best fitness"
        ax.plot(trace.best_fitness_per_generation, label=label)
    ax.set_xlabel("generation")
    ax.set_ylabel("best fitness")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_roc_figure(rows: list[RocRow], path: str | Path) -> None:
    fars = [r.far for r in rows]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.semilogx(fars, [r.tar for r in rows], label="TAR (genuine)")
    ax.semilogx(fars, [r.sar_type1 for r in rows], label="SAR type-1")
    ax.semilogx(fars, [r.sar_type2 for r in rows], label="SAR type-2")
    ax.set_xlabel("FAR")
    ax.set_ylabel("acceptance rate")
    ax.set_ylim(-0.02, 1.02)
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_distributions_figure(rows: list[HistogramRow], path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name in CATEGORIES:
        cat_rows = [r for r in rows if r.category == name]
        if not cat_rows:
            continue
        centers = [(r.bin_low + r.bin_high) / 2 for r in cat_rows]
        widths = [r.bin_high - r.bin_low for r in cat_rows]
        ax.bar(
            centers,
            [r.mass for r in cat_rows],
            width=widths,
            alpha=0.45,
            label=_CATEGORY_LABELS[name],
        )
    ax.set_xlabel("normalized similarity score")
    ax.set_ylabel("bin mass")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_sweep_figure(
    values, means, stddevs, axis_label: str, path: str | Path
) -> None:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.errorbar(values, means, yerr=stddevs, marker="o", capsize=4)
    ax.set_xlabel(axis_label)
    ax.set_ylabel("mean final error")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
