"""Optional PNG figures for ``compare`` and ``platoon`` (enabled by ``--plot``).

The delimited tables are the primary output; figures are rendered from the
same in-memory results with the non-interactive Agg backend.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .coeffs import open_loop_variance  # noqa: E402
from .dist import gaussian_values  # noqa: E402

LABELS = {
    "monte-carlo": "Monte Carlo",
    "quadrature": "quadrature",
    "particle": "particle",
    "open-loop": "open loop",
    "open-loop-particle": "open loop (particle)",
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def plot_compare(data, outdir):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    dens = data["densities"]
    mc = data["mc"]
    fig, axes = plt.subplots(1, len(dens) - 1 or 1, figsize=(3.2 * max(len(dens) - 1, 1), 3),
                             squeeze=False)
    for ax, (k, pdf) in zip(axes[0], list(enumerate(dens, start=1))[1:]):
        ax.plot(pdf.z, pdf.values, label="triggered")
        sd = np.sqrt(open_loop_variance(data["spec"], k))
        ax.plot(pdf.z, gaussian_values(pdf.z, sd), "--", label="open loop")
        samples = mc.error_samples.get(k)
        if samples is not None and samples.size:
            ax.hist(samples, bins=60, density=True, alpha=0.3, label="Monte Carlo")
        ax.set_title(f"k = {k}")
        ax.set_xlabel("error")
    axes[0][0].legend(fontsize=7)
    _save(fig, outdir / "pdfs.png")

    fig, ax = plt.subplots(figsize=(5, 3.2))
    for method, (values, _, _) in data["cols"].items():
        v = np.asarray(values)
        k = np.arange(v.size)
        ax.plot(k, v, marker="o" if method == "monte-carlo" else None, ms=3,
                label=LABELS.get(method, method))
    ax.set_xlabel("k")
    ax.set_ylabel("communication rate")
    ax.legend(fontsize=7)
    _save(fig, outdir / "acr.png")


def plot_platoon(data, outdir):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    runs = data["runs"]
    first = runs[0]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(5.5, 4.5), sharex=True)
    ax1.plot(first.t, first.mean_gap)
    ax1.axhline(first.config.d, color="k", lw=0.6, ls=":")
    ax1.set_ylabel("mean gap [m]")
    ax2.plot(first.t, first.mean_velocity, label="follower")
    ax2.plot(first.t, first.leader_velocity, "--", label="leader")
    ax2.set_ylabel("velocity [m/s]")
    ax2.set_xlabel("t [s]")
    ax2.legend(fontsize=7)
    _save(fig, outdir / "tracking.png")

    for res in runs:
        fig, ax = plt.subplots(figsize=(5, 3))
        ax.plot(res.t, res.acr_gt.values, lw=0.8, label="Monte Carlo")
        ax.plot(res.t, res.acr_model.values, label="particle model")
        ax.plot(res.t, res.acr_openloop.values, "--", label="open loop")
        ax.set_xlabel("t [s]")
        ax.set_ylabel("communication rate")
        ax.set_title(f"eta = {res.config.eta:g}")
        ax.legend(fontsize=7)
        _save(fig, outdir / f"acr_eta{res.config.eta:g}.png")

    rows = data["sweep"]
    eta = [r.eta for r in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3))
    ax1.plot(eta, [r.model for r in rows], "o-", label="particle model")
    ax1.plot(eta, [r.openloop for r in rows], "s--", label="open loop")
    ax1.plot(eta, [r.gt_tail for r in rows], "x:", label="Monte Carlo")
    ax1.set_xlabel("eta")
    ax1.set_ylabel("stationary rate")
    ax1.legend(fontsize=7)
    ax2.plot(eta, [r.ratio for r in rows], "o-")
    ax2.set_xlabel("eta")
    ax2.set_ylabel("open loop / model")
    _save(fig, outdir / "sweep.png")
