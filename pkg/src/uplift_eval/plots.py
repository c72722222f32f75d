"""Render evaluation reports as figures saved next to their data files."""

from __future__ import annotations

from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .curves import Curve
from .experiments import CounterexampleReport, ExperimentReport, NuSurfaceReport, analytic_curve_points

__all__ = [
    "plot_curve",
    "plot_counterexample",
    "plot_variance_study",
    "plot_nu_surface",
]

_FIGSIZE = (6.0, 4.0)


def _curve_points(curve: Curve) -> tuple[np.ndarray, np.ndarray]:
    keep = ~np.isnan(curve.values)
    xs = np.concatenate([[0.0], curve.xs[keep]])
    vs = np.concatenate([[0.0], curve.values[keep]])
    return xs, vs


def plot_curve(curve: Curve, path, title: str | None = None) -> None:
    """Curve polyline plus the random-targeting chord to its endpoint."""
    xs, vs = _curve_points(curve)
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.plot(xs, vs, color="tab:blue", lw=1.5, label=curve.constructor)
    ax.plot([0.0, xs[-1]], [0.0, vs[-1]], "k--", lw=1.0, label="random baseline")
    ax.set_xlabel("ranked population fraction")
    ax.set_ylabel(f"cumulative gain ({curve.scale})")
    ax.legend(loc="best", fontsize=8)
    ax.grid(alpha=0.3)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_counterexample(
    report: CounterexampleReport,
    segments_by_model: Mapping[str, Sequence[tuple[float, float]]],
    path,
) -> None:
    """Expected curves for every score set of a counterexample population."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    for name, segments in segments_by_model.items():
        pts = np.array(analytic_curve_points(segments))
        label = f"{name} (area {report.analytic_auuc[name]:.4f})"
        style = {"true": {"color": "tab:blue"}, "model": {"color": "tab:green"}}.get(name, {})
        ax.plot(pts[:, 0], pts[:, 1], marker="o", ms=3, label=label, **style)
    ax.axhline(0.0, color="k", lw=0.5)
    ax.set_xlabel("ranked population fraction")
    ax.set_ylabel("expected cumulative gain")
    ax.set_title(f"{report.counterexample}: metric misranks = {report.verdict}")
    ax.legend(loc="best", fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_variance_study(report: ExperimentReport, path) -> None:
    """Metric variance against the mixing weight, with both argmins marked."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    nus = np.array(report.nus)
    ax.plot(nus, report.variances, marker="o", ms=3, color="tab:blue")
    band = 2.0 * np.sqrt(report.var_of_variances)
    ax.fill_between(nus, report.variances - band, report.variances + band, alpha=0.2, color="tab:blue")
    ax.axvline(report.argmin_nu_empirical, color="tab:orange", lw=1.0, label=f"empirical {report.argmin_nu_empirical:.3f}")
    ax.axvline(report.argmin_nu_theoretical, color="tab:green", ls="--", lw=1.0, label=f"theoretical {report.argmin_nu_theoretical:.3f}")
    ax.set_xlabel("mixing weight")
    ax.set_ylabel(f"variance of {report.metric}")
    ax.legend(loc="best", fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_nu_surface(report: NuSurfaceReport, path) -> None:
    """Variance heatmap over responder rate x mixing weight with argmin trace."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    extent = (report.nus[0], report.nus[-1], report.p_y1_grid[0], report.p_y1_grid[-1])
    im = ax.imshow(report.variances, origin="lower", aspect="auto", extent=extent, cmap="viridis")
    ax.plot(report.argmin_nu_empirical, report.p_y1_grid, "wo-", ms=4, lw=1.0, label="empirical argmin")
    ax.plot(report.argmin_nu_theoretical, report.p_y1_grid, "r--", lw=1.0, label="theoretical argmin")
    ax.set_xlabel("mixing weight")
    ax.set_ylabel("population responder rate")
    ax.legend(loc="best", fontsize=8)
    fig.colorbar(im, ax=ax, label="metric variance")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
