"""Figure rendering for CLI reports.

Every renderer writes a PNG next to the CSV it illustrates. The Agg
backend and stripped metadata keep the bytes reproducible for one
matplotlib version, which the CLI's determinism contract relies on.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DPI = 150
_SAVE = dict(dpi=_DPI, metadata={"Software": None})


def render_mode_bars(report, path, title: str = "") -> None:
    """Bar chart of mean AUC per mode with standard-error whiskers."""
    modes = [s.mode for s in report.summaries]
    means = [s.mean_auc for s in report.summaries]
    errs = [s.std_error for s in report.summaries]
    fig, ax = plt.subplots(figsize=(max(4.0, 1.3 * len(modes)), 3.2))
    ax.bar(modes, means, yerr=errs, capsize=4, color="#4878a8")
    ax.set_ylabel("AUC")
    ax.set_ylim(0.0, 1.05)
    ax.axhline(0.5, linestyle=":", linewidth=1, color="gray")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)


def render_party_bars(aucs, path, title: str = "") -> None:
    """Bar chart of one run's per-party AUC."""
    labels = [f"party {i}" for i in range(len(aucs))]
    fig, ax = plt.subplots(figsize=(max(3.6, 0.9 * len(labels)), 3.2))
    ax.bar(labels, list(aucs), color="#5a9367")
    ax.set_ylabel("AUC")
    ax.set_ylim(0.0, 1.05)
    ax.axhline(0.5, linestyle=":", linewidth=1, color="gray")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)


def render_party_sweep(rows, path, title: str = "") -> None:
    """Mean AUC against party count, one line per mode.

    rows: iterable of (parties, mode, mean_auc, std_error).
    """
    by_mode: dict = {}
    for parties, mode, mean, err in rows:
        by_mode.setdefault(mode, []).append((int(parties), float(mean), float(err)))
    fig, ax = plt.subplots(figsize=(4.8, 3.2))
    for mode, points in by_mode.items():
        points.sort()
        xs = [p for p, _, _ in points]
        ys = [v for _, v, _ in points]
        es = [e for _, _, e in points]
        ax.errorbar(xs, ys, yerr=es, marker="o", capsize=3, label=mode)
    ax.set_xlabel("parties")
    ax.set_ylabel("AUC")
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)


def render_correlation_heatmap(C, path, title: str = "") -> None:
    """Signed correlation heatmap between raw and shared columns."""
    C = np.asarray(C, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(4.2, 3.6))
    im = ax.imshow(C, vmin=-1.0, vmax=1.0, cmap="RdBu_r", aspect="auto")
    ax.set_xlabel("shared representation column")
    ax.set_ylabel("raw feature column")
    fig.colorbar(im, ax=ax, label="correlation")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)
