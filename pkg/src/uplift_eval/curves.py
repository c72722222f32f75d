"""Discrete uplift and Qini curve estimators.

Every constructor returns a :class:`Curve`: per-rank points on a cumulative
grid with an implied origin at (0, 0). The classical construction walks the
ranking and moves up for treated responders and down for control responders;
the inverted-label construction does the same on non-responders with the arms
swapped. Propensity-weighted variants rebalance unbalanced or non-RCT data on
both axes, and the six classical curve formulas from the uplift literature
(separate/joint ranking x absolute/relative gains) are available for
comparison.

Curves whose formula divides by an empty arm count at some prefix mark those
points as absent (NaN) instead of producing infinities; integration bridges
absent points linearly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Mapping, Sequence

import numpy as np

from .data import ScoredDataset
from .errors import DegenerateWindowError, DimensionError, DomainError, ValidationError

__all__ = [
    "Curve",
    "KernelSpec",
    "curve_v1",
    "curve_v2",
    "curve_vnu",
    "curve_q1",
    "curve_q2",
    "curve_qnu",
    "curve_rebalanced",
    "curve_ips_local",
    "curve_ips_global",
    "table1_curve",
    "TABLE1_VARIANTS",
    "interpolate_iso_uplift",
    "scaling_factor_checksums",
    "curve_to_csv",
    "curve_header",
]


@dataclass(frozen=True)
class Curve:
    """Piecewise-linear curve on a cumulative population grid.

    ``xs[i]`` is the x coordinate of prefix position k = i + 1; the origin
    (0, 0) is implied and not stored. ``values`` may contain NaN where the
    constructor's formula is undefined for that prefix. ``scale`` is
    ``"normalized"`` (values carry a 1/N factor) or ``"absolute"``.
    """

    xs: np.ndarray
    values: np.ndarray
    scale: str
    constructor: str
    dataset_size: int
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.xs) != len(self.values):
            raise ValidationError("xs and values must have equal length")
        self.xs.setflags(write=False)
        self.values.setflags(write=False)

    def __len__(self) -> int:
        return len(self.xs)

    @property
    def x_end(self) -> float:
        return float(self.xs[-1])

    @property
    def end_value(self) -> float:
        return float(self.values[-1])

    def value_at(self, k: int) -> float:
        """Curve value for the top-k prefix, 1-based; k = 0 is the origin."""
        if k == 0:
            return 0.0
        return float(self.values[k - 1])

    def scaled(self, c: float) -> "Curve":
        return replace(self, values=self.values * c)


@dataclass(frozen=True)
class KernelSpec:
    """Boxcar window of ``2 * half_width + 1`` sorted ranks, renormalized at
    the boundaries so the effective weights always sum to one."""

    kind: str = "boxcar"
    half_width: int = 1

    def __post_init__(self):
        if self.kind != "boxcar":
            raise DomainError(f"unsupported kernel kind {self.kind!r}")
        if self.half_width < 1:
            raise DomainError("half_width must be a positive integer")


def _require_binary(scored: ScoredDataset) -> None:
    if not scored.dataset.binary_outcomes:
        raise DomainError("this estimator requires binary outcomes")


def _uniform_grid(n: int) -> np.ndarray:
    return np.arange(1, n + 1, dtype=np.float64) / n


def _v1_increments(scored: ScoredDataset) -> np.ndarray:
    t, y = scored.sorted_treatments, scored.sorted_outcomes
    return np.where((t == 1) & (y == 1), 1.0, 0.0) - np.where((t == 0) & (y == 1), 1.0, 0.0)


def _v2_increments(scored: ScoredDataset) -> np.ndarray:
    t, y = scored.sorted_treatments, scored.sorted_outcomes
    return np.where((t == 0) & (y == 0), 1.0, 0.0) - np.where((t == 1) & (y == 0), 1.0, 0.0)


def curve_v1(scored: ScoredDataset) -> Curve:
    """Classical uplift curve: up on treated responders, down on control responders.

    Values are cumulative sums of +-1 increments divided by N, on the uniform
    grid k/N.
    """
    _require_binary(scored)
    n = len(scored)
    values = np.cumsum(_v1_increments(scored)) / n
    return Curve(xs=_uniform_grid(n), values=values, scale="normalized", constructor="v1", dataset_size=n)


def curve_v2(scored: ScoredDataset) -> Curve:
    """Inverted-label curve: up on control non-responders, down on treated ones.

    Pointwise it estimates the same quantity as :func:`curve_v1` but from the
    complementary cells of the (treatment, outcome) table.
    """
    _require_binary(scored)
    n = len(scored)
    values = np.cumsum(_v2_increments(scored)) / n
    return Curve(xs=_uniform_grid(n), values=values, scale="normalized", constructor="v2", dataset_size=n)


def curve_vnu(scored: ScoredDataset, nu: float) -> Curve:
    """Convex combination (1 - nu) * v1 + nu * v2, pointwise exact."""
    if not 0.0 <= nu <= 1.0:
        raise DomainError(f"nu={nu} outside [0, 1]")
    a, b = curve_v1(scored), curve_v2(scored)
    return Curve(
        xs=a.xs,
        values=(1.0 - nu) * a.values + nu * b.values,
        scale="normalized",
        constructor="vnu",
        dataset_size=a.dataset_size,
        params={"nu": nu},
    )


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha={alpha} outside (0, 1)")


def curve_q1(scored: ScoredDataset, alpha: float) -> Curve:
    """Rescaled classical curve for an RCT with treatment probability ``alpha``.

    Treated responders count +1/alpha and control responders -1/(1 - alpha),
    which keeps the per-unit expectation equal to the prefix uplift for any
    alpha (at alpha = 1/2 the increments are +-2, twice the classical ones).
    """
    _require_binary(scored)
    _check_alpha(alpha)
    t, y = scored.sorted_treatments, scored.sorted_outcomes
    inc = np.where((t == 1) & (y == 1), 1.0 / alpha, 0.0) - np.where((t == 0) & (y == 1), 1.0 / (1.0 - alpha), 0.0)
    n = len(scored)
    return Curve(
        xs=_uniform_grid(n),
        values=np.cumsum(inc) / n,
        scale="normalized",
        constructor="q1",
        dataset_size=n,
        params={"alpha": alpha},
    )


def curve_q2(scored: ScoredDataset, alpha: float) -> Curve:
    """Rescaled inverted-label curve; see :func:`curve_q1`."""
    _require_binary(scored)
    _check_alpha(alpha)
    t, y = scored.sorted_treatments, scored.sorted_outcomes
    inc = np.where((t == 0) & (y == 0), 1.0 / (1.0 - alpha), 0.0) - np.where((t == 1) & (y == 0), 1.0 / alpha, 0.0)
    n = len(scored)
    return Curve(
        xs=_uniform_grid(n),
        values=np.cumsum(inc) / n,
        scale="normalized",
        constructor="q2",
        dataset_size=n,
        params={"alpha": alpha},
    )


def curve_qnu(scored: ScoredDataset, nu: float, alpha: float) -> Curve:
    """Convex combination of the rescaled curve pair."""
    if not 0.0 <= nu <= 1.0:
        raise DomainError(f"nu={nu} outside [0, 1]")
    a, b = curve_q1(scored, alpha), curve_q2(scored, alpha)
    return Curve(
        xs=a.xs,
        values=(1.0 - nu) * a.values + nu * b.values,
        scale="normalized",
        constructor="qnu",
        dataset_size=a.dataset_size,
        params={"nu": nu, "alpha": alpha},
    )


def _rebalanced_cumsum(scored: ScoredDataset) -> np.ndarray:
    t, y, q = scored.sorted_treatments, scored.sorted_outcomes, scored.sorted_propensities
    return np.cumsum((y * t - y * (1.0 - t)) / q)


def curve_rebalanced(scored: ScoredDataset) -> Curve:
    """Propensity-rebalanced curve for unbalanced and non-RCT data.

    Each unit's signed outcome is divided by the propensity of its logged arm
    (y-axis rebalancing), and the grid carries per-unit widths 1/(2 q_i N)
    instead of 1/N (x-axis rebalancing), so integrating this curve directly
    yields the rebalanced area metric. Values are on the absolute scale.
    """
    q = scored.sorted_propensities
    n = len(scored)
    xs = np.cumsum(1.0 / (2.0 * q)) / n
    return Curve(
        xs=xs,
        values=_rebalanced_cumsum(scored),
        scale="absolute",
        constructor="rebalanced",
        dataset_size=n,
    )


def curve_ips_global(scored: ScoredDataset) -> Curve:
    """Importance-sampling curve targeting the balanced 50% logging policy.

    Each unit is weighted by 0.5 / q_i. Equal to the rebalanced curve's values
    divided by 2N, exactly, on the uniform grid k/N; with constant q = 1/2 it
    reduces to the classical curve.
    """
    n = len(scored)
    return Curve(
        xs=_uniform_grid(n),
        values=_rebalanced_cumsum(scored) / (2 * n),
        scale="normalized",
        constructor="ips_global",
        dataset_size=n,
    )


def local_treated_rate(scored: ScoredDataset, kernel: KernelSpec) -> np.ndarray:
    """Boxcar average of the treated indicator around each sorted rank.

    Windows are clipped to [1, N] and renormalized by their effective size.
    """
    t = scored.sorted_treatments
    n = len(t)
    w = kernel.half_width
    csum = np.concatenate([[0.0], np.cumsum(t)])
    k = np.arange(1, n + 1)
    lo = np.maximum(k - w, 1)
    hi = np.minimum(k + w, n)
    return (csum[hi] - csum[lo - 1]) / (hi - lo + 1)


def curve_ips_local(scored: ScoredDataset, kernel: KernelSpec) -> Curve:
    """Locally reweighted curve: cumulative responder counts per arm, each
    divided by a local estimate of the treated rate at that rank.

    Raises :class:`DegenerateWindowError` when any window contains a single
    arm only (local overlap failure); widen the kernel in that case.
    """
    _require_binary(scored)
    e_t = local_treated_rate(scored, kernel)
    if ((e_t == 0.0) | (e_t == 1.0)).any():
        k_bad = int(np.flatnonzero((e_t == 0.0) | (e_t == 1.0))[0]) + 1
        raise DegenerateWindowError(
            f"window around rank {k_bad} contains a single arm; widen the kernel (half_width={kernel.half_width})"
        )
    t, y = scored.sorted_treatments, scored.sorted_outcomes
    r_t = np.cumsum((t == 1) & (y == 1))
    r_c = np.cumsum((t == 0) & (y == 1))
    values = r_t / e_t - r_c / (1.0 - e_t)
    n = len(scored)
    return Curve(
        xs=_uniform_grid(n),
        values=values,
        scale="absolute",
        constructor="ips_local",
        dataset_size=n,
        params={"kernel": {"kind": kernel.kind, "half_width": kernel.half_width}},
    )


TABLE1_VARIANTS = (
    "qini-sep-abs",
    "uplift-sep-abs",
    "uplift-sep-rel",
    "qini-joint-abs",
    "uplift-joint-abs",
    "uplift-joint-rel",
)


def _prefix_size(p: float, size: int) -> int:
    # smallest non-empty prefix covering proportion p; exact p*size preserved
    return max(int(np.ceil(p * size - 1e-9)), 1)


def table1_curve(
    scored: ScoredDataset,
    variant: str,
    grid: Sequence[float] | Sequence[int] | None = None,
) -> Curve:
    """One of the six classical curve formulas.

    Separate variants rank the treatment and control groups independently and
    take ``grid`` as proportions p in (0, 1] (default: percentiles 0.01..1);
    joint variants use the shared ranking and take ``grid`` as prefix sizes k
    (default: 1..N). Prefixes where a formula divides by an empty arm are
    reported as NaN.
    """
    if variant not in TABLE1_VARIANTS:
        raise DomainError(f"unknown variant {variant!r}, expected one of {TABLE1_VARIANTS}")
    _require_binary(scored)
    family, ranking, gains = variant.split("-")
    n = len(scored)
    if ranking == "sep":
        grid_p = np.asarray(grid if grid is not None else np.arange(1, 101) / 100.0, dtype=np.float64)
        if ((grid_p <= 0) | (grid_p > 1)).any():
            raise DomainError("separate-variant grid must lie in (0, 1]")
        values = _table1_separate(scored, family, gains, grid_p)
        xs = grid_p
    else:
        grid_k = np.asarray(grid if grid is not None else np.arange(1, n + 1), dtype=np.int64)
        if ((grid_k < 1) | (grid_k > n)).any():
            raise DomainError(f"joint-variant grid must lie in [1, {n}]")
        values = _table1_joint(scored, family, gains, grid_k)
        xs = grid_k.astype(np.float64) / n
    return Curve(
        xs=xs,
        values=values,
        scale="absolute" if gains == "abs" else "normalized",
        constructor=f"table1:{variant}",
        dataset_size=n,
        params={"ranking": ranking},
    )


def _table1_separate(scored: ScoredDataset, family: str, gains: str, grid_p: np.ndarray) -> np.ndarray:
    t = scored.sorted_treatments
    y = scored.sorted_outcomes
    resp_t = np.cumsum(y[t == 1])  # responders among top-j of the treated-only ranking
    resp_c = np.cumsum(y[t == 0])
    size_t, size_c = len(resp_t), len(resp_c)
    if size_t == 0 or size_c == 0:
        raise DomainError("separate variants need both arms non-empty")
    out = np.empty(len(grid_p))
    for i, p in enumerate(grid_p):
        k_t = _prefix_size(p, size_t)
        k_c = _prefix_size(p, size_c)
        r_t = resp_t[k_t - 1]
        r_c = resp_c[k_c - 1]
        if family == "qini":
            out[i] = r_t - r_c * (size_t / size_c)
        elif gains == "abs":
            out[i] = r_t - r_c
        else:  # relative to the number of selected units per arm
            out[i] = r_t / k_t - r_c / k_c
    return out


def _table1_joint(scored: ScoredDataset, family: str, gains: str, grid_k: np.ndarray) -> np.ndarray:
    t = scored.sorted_treatments
    y = scored.sorted_outcomes
    n_t = np.cumsum(t == 1)
    n_c = np.cumsum(t == 0)
    r_t = np.cumsum((t == 1) & (y == 1)).astype(np.float64)
    r_c = np.cumsum((t == 0) & (y == 1)).astype(np.float64)
    i = grid_k - 1
    with np.errstate(divide="ignore", invalid="ignore"):
        if family == "qini":
            out = np.where(n_c[i] > 0, r_t[i] - r_c[i] * (n_t[i] / np.maximum(n_c[i], 1)), np.nan)
        elif gains == "abs":
            defined = (n_t[i] > 0) & (n_c[i] > 0)
            rate_diff = r_t[i] / np.maximum(n_t[i], 1) - r_c[i] / np.maximum(n_c[i], 1)
            out = np.where(defined, rate_diff * grid_k, np.nan)
        else:
            size_t, size_c = int(n_t[-1]), int(n_c[-1])
            if size_t == 0 or size_c == 0:
                raise DomainError("uplift-joint-rel needs both arms non-empty")
            out = r_t[i] / size_t - r_c[i] / size_c
    return out


def interpolate_iso_uplift(curve: Curve, scored: ScoredDataset) -> Curve:
    """Replace within-tie-run points by the chord between run endpoints.

    Runs of equal predicted uplift have no meaningful internal order, so only
    the curve values at the last position of each run are kept; every other
    position is linearly interpolated (in the curve's x coordinate) between
    the enclosing kept points, with the origin as the left anchor of the first
    run. Metrics of the result are invariant to any within-run permutation.
    """
    if len(curve) != len(scored):
        raise DimensionError(f"curve has {len(curve)} points for {len(scored)} records")
    anchors = scored.iso_last  # 1-based positions whose values are order-insensitive
    if len(anchors) == len(curve):
        return replace(curve, params={**curve.params, "interpolated": True})
    xs = curve.xs
    values = curve.values.copy()
    anchor_x = np.concatenate([[0.0], xs[anchors - 1]])
    anchor_v = np.concatenate([[0.0], values[anchors - 1]])
    start = 0  # 0-based index of the first position in the current run
    for g, last in enumerate(anchors):
        x0, v0 = anchor_x[g], anchor_v[g]
        x1, v1 = anchor_x[g + 1], anchor_v[g + 1]
        inner = slice(start, int(last) - 1)
        if inner.stop > inner.start:
            if x1 == x0:
                values[inner] = v1
            else:
                values[inner] = v0 + (xs[inner] - x0) * (v1 - v0) / (x1 - x0)
        start = int(last)
    return replace(curve, values=values, params={**curve.params, "interpolated": True})


def scaling_factor_checksums(treatments: Sequence[int] | np.ndarray) -> tuple[Fraction, Fraction]:
    """Exact sums of the per-unit rebalancing factors of an RCT dataset.

    Returns ``(sum_i (t_i/|T| + (1-t_i)/|C|) * (|T|+|C|),
    (1/2) sum_i (t_i/|T| + (1-t_i)/|C|))`` as exact rationals; they equal
    ``2 * (|T|+|C|)`` and ``1`` whenever both arms are non-empty.
    """
    t = np.asarray(treatments)
    size_t = int((t == 1).sum())
    size_c = int((t == 0).sum())
    if size_t == 0 or size_c == 0:
        raise DomainError("checksums need both arms non-empty")
    total = size_t * Fraction(1, size_t) + size_c * Fraction(1, size_c)
    return total * (size_t + size_c), total / 2


def curve_header(curve: Curve) -> dict:
    """JSON-serializable metadata header for a curve file."""
    header = {
        "constructor": curve.constructor,
        "scale": curve.scale,
        "N": curve.dataset_size,
    }
    for key in ("nu", "alpha", "kernel", "interpolated"):
        if key in curve.params:
            header[key] = curve.params[key]
    return header


def curve_to_csv(curve: Curve) -> str:
    """Render ``k,x,value`` rows (k is the 1-based prefix position)."""
    lines = ["k,x,value"]
    for k, (x, v) in enumerate(zip(curve.xs, curve.values), start=1):
        lines.append(f"{k},{x!r},{'' if np.isnan(v) else repr(float(v))}")
    return "\n".join(lines) + "\n"
