"""Figure rendering for CLI reports.

Each helper writes one PNG next to the CSV it illustrates and returns the
figure path.  Uses the non-interactive Agg backend so reports work headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def plot_distribution_comparison(path, table_a, table_b, label_a="empirical", label_b="exact"):
    keys = sorted(set(table_a.as_dict()) | set(table_b.as_dict()))
    da, db = table_a.as_dict(), table_b.as_dict()
    xs = np.arange(len(keys))
    fig, ax = plt.subplots(figsize=(9, 4))
    ax.bar(xs - 0.2, [da.get(k, 0) for k in keys], width=0.4, label=label_a)
    ax.bar(xs + 0.2, [db.get(k, 0) for k in keys], width=0.4, label=label_b)
    ax.set_xlabel("outcome index (sorted)")
    ax.set_ylabel("probability")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_chog_trace(path, traces, labels):
    fig, ax = plt.subplots(figsize=(7, 4))
    for trace, label in zip(traces, labels):
        ax.plot(np.arange(1, len(trace.running_ratio) + 1), trace.running_ratio, label=label)
    ax.axhline(0.5, color="gray", ls="--", lw=0.8)
    ax.set_xlabel("sample pairs")
    ax.set_ylabel("running ratio")
    ax.set_ylim(-0.02, 1.02)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_correlator_histograms(path, series, labels, bins=30):
    fig, ax = plt.subplots(figsize=(7, 4))
    lo = min(np.min(s) for s in series)
    hi = max(np.max(s) for s in series)
    edges = np.linspace(lo, hi, bins + 1)
    for values, label in zip(series, labels):
        ax.hist(values, bins=edges, histtype="step", density=True, label=label)
    ax.set_xlabel("two-point correlator value")
    ax.set_ylabel("density")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_burnin_curve(path, curve, ylabel, burn=None):
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(np.arange(len(curve)), curve)
    if burn is not None:
        ax.axvline(burn, color="red", ls="--", lw=0.8, label=f"estimate {burn}")
        ax.legend()
    ax.set_xlabel("burn-in steps")
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_scaling(path, rows, fit_exponent=None):
    """rows: (N, kernel, term_count, seconds) tuples."""
    fig, ax = plt.subplots(figsize=(7, 4))
    kernels = sorted({r[1] for r in rows})
    for kern in kernels:
        pts = [(r[0], r[3]) for r in rows if r[1] == kern]
        ns = sorted({p[0] for p in pts})
        med = [np.median([p[1] for p in pts if p[0] == n]) for n in ns]
        ax.semilogy(ns, med, "o-", label=kern)
    if fit_exponent is not None:
        ax.set_title(f"fitted per-photon exponent {fit_exponent:.3f}")
    ax.set_xlabel("total photons N")
    ax.set_ylabel("seconds (median)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
