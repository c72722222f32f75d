"""Scalar metrics over curves and datasets.

Area under the uplift curve (the model-comparison scalar), its baseline-
subtracted variant, ground-truth treatment-effect error, and the closed-form
moments of the rescaled curve increments that drive the variance-minimizing
estimator combination.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .curves import Curve
from .errors import BoundsError, DimensionError, DomainError

__all__ = [
    "MetricReport",
    "TheoreticalMoments",
    "area_under_curve",
    "delta_auuc",
    "metric_report",
    "pehe",
    "optimal_nu",
    "expected_slope",
    "theoretical_moments",
    "q_increment",
]


@dataclass(frozen=True)
class MetricReport:
    """Area metrics of one curve.

    ``delta_auuc`` subtracts the triangle under the straight line from the
    origin to the curve's arrival point (the random-targeting baseline).
    ``auuc_riemann`` is the right-endpoint discrete sum alternative to the
    trapezoidal ``auuc``; the two agree up to one grid cell.
    """

    auuc: float
    delta_auuc: float
    endpoint: float
    constructor: str
    interpolated: bool
    auuc_riemann: float

    def to_dict(self) -> dict:
        return {
            "auuc": self.auuc,
            "delta_auuc": self.delta_auuc,
            "endpoint": self.endpoint,
            "constructor": self.constructor,
            "interpolated": self.interpolated,
            "auuc_riemann": self.auuc_riemann,
        }


def _valid_points(curve: Curve) -> tuple[np.ndarray, np.ndarray]:
    """Curve polyline including the implied origin, with absent points dropped."""
    keep = ~np.isnan(curve.values)
    xs = np.concatenate([[0.0], curve.xs[keep]])
    vs = np.concatenate([[0.0], curve.values[keep]])
    return xs, vs


def area_under_curve(curve: Curve, upto: float | None = None, method: str = "trapezoid") -> float:
    """Integrate the piecewise-linear curve over [0, upto] in its x coordinate.

    ``method="trapezoid"`` integrates the polyline through the curve points
    (absent points bridged linearly); ``method="riemann_right"`` instead sums
    value * cell-width per grid cell, which reproduces the discrete-sum form
    of the rebalanced area formula since rebalanced curves carry per-unit
    widths in their grid.
    """
    xs, vs = _valid_points(curve)
    if upto is None:
        upto = float(xs[-1])
    if upto <= 0.0:
        raise BoundsError(f"upto={upto} must be positive")
    if upto > xs[-1] + 1e-12:
        raise BoundsError(f"upto={upto} beyond curve extent {xs[-1]}")
    upto = min(upto, float(xs[-1]))
    if method == "trapezoid":
        j = int(np.searchsorted(xs, upto, side="right")) - 1
        area = float(np.trapezoid(vs[: j + 1], xs[: j + 1])) if j >= 1 else 0.0
        if upto > xs[j]:  # partial last cell, linear between the bracketing points
            v_up = vs[j] + (vs[j + 1] - vs[j]) * (upto - xs[j]) / (xs[j + 1] - xs[j])
            area += 0.5 * (vs[j] + v_up) * (upto - xs[j])
        return area
    if method == "riemann_right":
        area = 0.0
        for i in range(1, len(xs)):
            if xs[i] <= upto:
                area += vs[i] * (xs[i] - xs[i - 1])
            else:
                area += vs[i] * (upto - xs[i - 1])
                break
        return area
    raise DomainError(f"unknown quadrature {method!r}")


def delta_auuc(curve: Curve) -> float:
    """Area between the curve and the chord from the origin to its endpoint.

    The chord is the expected curve of uniformly random targeting, so this is
    the incremental area credited to the ranking itself.
    """
    xs, vs = _valid_points(curve)
    return area_under_curve(curve) - float(xs[-1]) * float(vs[-1]) / 2.0


def metric_report(curve: Curve) -> MetricReport:
    xs, vs = _valid_points(curve)
    auuc = area_under_curve(curve)
    return MetricReport(
        auuc=auuc,
        delta_auuc=auuc - float(xs[-1]) * float(vs[-1]) / 2.0,
        endpoint=float(vs[-1]),
        constructor=curve.constructor,
        interpolated=bool(curve.params.get("interpolated", False)),
        auuc_riemann=area_under_curve(curve, method="riemann_right"),
    )


def pehe(tau_hat: Sequence[float] | np.ndarray, tau: Sequence[float] | np.ndarray) -> float:
    """Mean squared error between estimated and true unit-level effects."""
    tau_hat = np.asarray(tau_hat, dtype=np.float64)
    tau = np.asarray(tau, dtype=np.float64)
    if tau_hat.shape != tau.shape:
        raise DimensionError(f"shape mismatch {tau_hat.shape} vs {tau.shape}")
    if tau_hat.size == 0:
        raise DimensionError("need at least one unit")
    return float(np.mean((tau_hat - tau) ** 2))


def optimal_nu(p0: float, p1: float, alpha: float) -> float:
    """Mixing weight minimizing the variance of the combined curve increment.

    ``p1`` and ``p0`` are the response rates under treatment and control and
    ``alpha`` the treatment probability. Equivalently nu satisfies
    nu + P(y=1) = p0 + p1; at alpha = 1/2 it is simply P(y=1).
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha={alpha} outside (0, 1)")
    return p1 * (1.0 - alpha) + p0 * alpha


def expected_slope(q, beta1, beta0):
    """Expected per-unit slope of the classical curve over one homogeneous group.

    A unit treated with probability q responds with probability beta1 when
    treated (+1 step) and beta0 when control (-1 step), giving
    q * (beta1 + beta0) - beta0. Exact for Fraction inputs. At q = 1/2 this is
    half the group's true uplift, the ordering-faithful case.
    """
    return q * (beta1 + beta0) - beta0


@dataclass(frozen=True)
class TheoreticalMoments:
    """Closed-form moments of the rescaled increment pair at one prefix.

    ``var_coeffs = (a, b, c)`` are the coefficients of the increment-variance
    quadratic a * nu^2 + b * nu + c; its vertex is the optimal mixing weight.
    """

    e_q1: float
    e_q2: float
    e_q1_sq: float
    e_q2_sq: float
    cov_q1q2: float
    var_coeffs: tuple[float, float, float] = field(repr=False)

    def var_qnu(self, nu: float) -> float:
        a, b, c = self.var_coeffs
        return a * nu * nu + b * nu + c

    def var_qnu_derivative(self, nu: float) -> float:
        a, b, _ = self.var_coeffs
        return 2.0 * a * nu + b

    @property
    def argmin_nu(self) -> float:
        a, b, _ = self.var_coeffs
        return -b / (2.0 * a)


def theoretical_moments(p0: float, p1: float, alpha: float) -> TheoreticalMoments:
    """First and second moments of the rescaled increments Q1 and Q2.

    Both have mean p1 - p0. Their squares sum to 1/(alpha (1 - alpha)) in
    expectation, and the product Q1 * Q2 vanishes pointwise (Q1 is supported
    on responders, Q2 on non-responders), so their covariance is
    -(p1 - p0)^2. The combined increment's variance is therefore a strictly
    convex quadratic in the mixing weight.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha={alpha} outside (0, 1)")
    mean = p1 - p0
    e_q1_sq = p1 / alpha + p0 / (1.0 - alpha)
    e_q2_sq = (1.0 - p0) / (1.0 - alpha) + (1.0 - p1) / alpha
    cov = -(mean * mean)
    var1 = e_q1_sq - mean * mean
    var2 = e_q2_sq - mean * mean
    # Var((1-nu) Q1 + nu Q2) expanded in powers of nu.
    a = var1 + var2 - 2.0 * cov
    b = -2.0 * var1 + 2.0 * cov
    c = var1
    return TheoreticalMoments(
        e_q1=mean,
        e_q2=mean,
        e_q1_sq=e_q1_sq,
        e_q2_sq=e_q2_sq,
        cov_q1q2=cov,
        var_coeffs=(a, b, c),
    )


def q_increment(y: int, t: int, alpha: float, which: str) -> float:
    """Rescaled curve increment of one unit.

    Q1: +1/alpha for treated responders, -1/(1-alpha) for control responders,
    0 otherwise. Q2: +1/(1-alpha) for control non-responders, -1/alpha for
    treated non-responders, 0 otherwise.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha={alpha} outside (0, 1)")
    if which == "Q1":
        if y == 1 and t == 1:
            return 1.0 / alpha
        if y == 1 and t == 0:
            return -1.0 / (1.0 - alpha)
        return 0.0
    if which == "Q2":
        if y == 0 and t == 0:
            return 1.0 / (1.0 - alpha)
        if y == 0 and t == 1:
            return -1.0 / alpha
        return 0.0
    raise DomainError(f"which must be 'Q1' or 'Q2', got {which!r}")
