"""Figure rendering for sweep results.

Renders the MSE-versus-SNR curves (one line per scheme, log MSE axis) next to
the delimited output, plus the lattice quantization floor for reference.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .experiment import SweepResult

_STYLE = {
    "direct": dict(color="tab:blue", marker="o"),
    "collective": dict(color="tab:green", marker="s"),
    "successive": dict(color="tab:red", marker="^"),
    "analog_baseline": dict(color="tab:gray", marker="x", linestyle="--"),
}


def plot_sweep(result: SweepResult, path, floor: float | None = None, title: str | None = None):
    """Write an MSE-vs-SNR figure for every scheme present in ``result``."""
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    by_scheme: dict[str, list] = {}
    for p in result.rows():
        by_scheme.setdefault(p.scheme, []).append(p)
    for scheme, pts in sorted(by_scheme.items()):
        snrs = [p.snr_db for p in pts]
        mses = [p.mse_per_dim for p in pts]
        ax.semilogy(snrs, mses, label=scheme, markersize=4, **_STYLE.get(scheme, {}))
    if floor is not None and floor > 0:
        ax.axhline(floor, color="k", linewidth=0.8, linestyle=":", label="quantization floor")
    ax.set_xlabel("SNR [dB]")
    ax.set_ylabel("MSE per dimension")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
