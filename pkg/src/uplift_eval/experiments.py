"""Monte Carlo harness: counterexample reproduction and variance studies.

The analytic side builds expected curves from per-group slopes taken in each
model's ranking order (groups sharing a score are merged into one segment with
the population-weighted mean slope) and integrates them in closed form. The
Monte Carlo side draws seeded realizations through the generators module and
evaluates the library's curve estimators, so the two routes check each other.

Realization ``r`` of a study uses ``seed ^ r``; aggregation is a sum of
per-realization statistics, so results are independent of execution order.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .curves import curve_q1, curve_q2, curve_rebalanced, curve_v1, interpolate_iso_uplift
from .data import rank_by_score
from .errors import DomainError, PreconditionError, ValidationError
from .generators import (
    GeneratedPopulation,
    PopulationSpec,
    generate,
    heterogeneous_spec,
    realization_spec,
    toy1_spec,
    toy2_spec,
    toy3_spec,
    with_uniform_treatment_prob,
)
from .metrics import area_under_curve, expected_slope, optimal_nu

__all__ = [
    "VarianceStudyConfig",
    "CounterexampleReport",
    "ExperimentReport",
    "NuSurfaceReport",
    "UnbiasednessReport",
    "analytic_segments",
    "analytic_curve_points",
    "analytic_auuc",
    "run_counterexample",
    "unbiasedness_check",
    "variance_study",
    "nu_surface_sweep",
    "TOY_SPECS",
]

TOY_SPECS = {"toy1": toy1_spec, "toy2": toy2_spec, "toy3": toy3_spec}


# ---------------------------------------------------------------------------
# Analytic expected curves
# ---------------------------------------------------------------------------

def analytic_segments(
    spec: PopulationSpec,
    score_set: str = "model",
    estimator: str = "v1",
):
    """Expected-curve segments (width, slope) in ranking order.

    Groups are ordered by descending score; equal-score groups merge into one
    segment whose slope is the share-weighted mean of the member slopes. With
    ``estimator="v1"`` the slope of a group is ``q (b1 + b0) - b0``; with
    ``estimator="rebalanced"`` the propensity weighting makes it the group's
    true uplift ``b1 - b0`` (both on the normalized scale, with segment widths
    equal to population shares).
    """
    scores = spec.group_scores(score_set)
    if estimator == "v1":
        slopes = [expected_slope(g.treatment_prob, g.beta_treated, g.beta_control) for g in spec.groups]
    elif estimator == "rebalanced":
        slopes = [g.true_uplift for g in spec.groups]
    else:
        raise DomainError(f"unknown estimator {estimator!r}")

    order = sorted(range(len(spec.groups)), key=lambda i: (-scores[i], i))
    segments: list[tuple[float, float]] = []
    i = 0
    while i < len(order):
        j = i
        while j < len(order) and scores[order[j]] == scores[order[i]]:
            j += 1
        members = order[i:j]
        width = sum(spec.groups[g].share for g in members)
        slope = sum(spec.groups[g].share * slopes[g] for g in members) / width
        segments.append((width, slope))
        i = j
    return segments


def analytic_curve_points(segments: Sequence[tuple[float, float]]) -> list[tuple[float, float]]:
    """Breakpoints of the expected piecewise-linear curve, origin included."""
    points = [(0.0, 0.0)]
    x, v = 0.0, 0.0
    for width, slope in segments:
        x += width
        v += slope * width
        points.append((x, v))
    return points


def analytic_auuc(segments: Sequence[tuple[float, float]]) -> float:
    """Exact integral of the expected curve over its full extent."""
    area, v = 0.0, 0.0
    for width, slope in segments:
        area += v * width + slope * width * width / 2.0
        v += slope * width
    return area


# ---------------------------------------------------------------------------
# Counterexamples
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CounterexampleReport:
    """Analytic and Monte Carlo comparison of a model against the exact uplift.

    ``verdict`` is True when the area metric prefers the evaluated model to
    the exact uplift (i.e. the metric misranks them), decided analytically;
    the Monte Carlo columns report agreement.
    """

    counterexample: str
    estimator: str
    n: int
    realizations: int
    seed: int
    analytic_slopes: Mapping[str, float]
    analytic_auuc: Mapping[str, float]
    mc_auuc_mean: Mapping[str, float]
    mc_auuc_stderr: Mapping[str, float]
    mc_diff_mean: float
    mc_diff_stderr: float
    verdict: bool

    def to_dict(self) -> dict:
        return {
            "counterexample": self.counterexample,
            "estimator": self.estimator,
            "n": self.n,
            "realizations": self.realizations,
            "seed": self.seed,
            "analytic_slopes": dict(self.analytic_slopes),
            "analytic_auuc": dict(self.analytic_auuc),
            "mc_auuc_mean": dict(self.mc_auuc_mean),
            "mc_auuc_stderr": dict(self.mc_auuc_stderr),
            "mc_diff_mean": self.mc_diff_mean,
            "mc_diff_stderr": self.mc_diff_stderr,
            "verdict": self.verdict,
        }


def _mc_auuc(gen: GeneratedPopulation, score_set: str, estimator: str) -> float:
    """Normalized-area sample value of one realization under one model."""
    scored = rank_by_score(gen.logged, gen.score_sets[score_set])
    if estimator == "v1":
        curve = curve_v1(scored)
        scale = 1.0
    elif estimator == "rebalanced":
        curve = curve_rebalanced(scored)
        scale = 1.0 / len(scored)
    else:
        raise DomainError(f"unknown estimator {estimator!r}")
    curve = interpolate_iso_uplift(curve, scored)
    return area_under_curve(curve) * scale


def run_counterexample(
    counterexample: str | PopulationSpec,
    n: int = 40_000,
    realizations: int = 200,
    seed: int = 0,
    estimator: str = "v1",
    q_override: float | None = None,
) -> CounterexampleReport:
    """Reproduce one of the built-in counterexamples (or a custom spec).

    Builds the population, computes the expected curves of the evaluated model
    and of the exact uplift from per-group slopes, and cross-checks the
    analytic areas against Monte Carlo means over seeded realizations. With
    ``q_override`` every group's treatment probability is replaced, which
    turns the pathological designs back into well-behaved ones.
    """
    if isinstance(counterexample, str):
        try:
            spec = TOY_SPECS[counterexample](n=n, seed=seed)
        except KeyError:
            raise ValidationError(f"unknown counterexample {counterexample!r}; have {sorted(TOY_SPECS)}") from None
        name = counterexample
    else:
        spec = replace(counterexample, n=n, seed=seed)
        name = "custom"
    if q_override is not None:
        spec = with_uniform_treatment_prob(spec, q_override)

    slopes = {
        g.label: expected_slope(g.treatment_prob, g.beta_treated, g.beta_control)
        for g in spec.groups
    }
    score_sets = spec.available_score_sets
    analytic = {s: analytic_auuc(analytic_segments(spec, s, estimator)) for s in score_sets}

    sums = {s: 0.0 for s in score_sets}
    sumsq = {s: 0.0 for s in score_sets}
    diff_sum = diff_sumsq = 0.0
    for r in range(realizations):
        gen = generate(realization_spec(spec, r))
        values = {s: _mc_auuc(gen, s, estimator) for s in score_sets}
        for s, v in values.items():
            sums[s] += v
            sumsq[s] += v * v
        d = values["model"] - values["true"]
        diff_sum += d
        diff_sumsq += d * d

    m = realizations
    means = {s: sums[s] / m for s in score_sets}
    stderrs = {
        s: math.sqrt(max(sumsq[s] / m - means[s] ** 2, 0.0) / max(m - 1, 1))
        for s in score_sets
    }
    diff_mean = diff_sum / m
    diff_stderr = math.sqrt(max(diff_sumsq / m - diff_mean**2, 0.0) / max(m - 1, 1))

    return CounterexampleReport(
        counterexample=name,
        estimator=estimator,
        n=spec.n,
        realizations=realizations,
        seed=seed,
        analytic_slopes=slopes,
        analytic_auuc=analytic,
        mc_auuc_mean=means,
        mc_auuc_stderr=stderrs,
        mc_diff_mean=diff_mean,
        mc_diff_stderr=diff_stderr,
        verdict=analytic["model"] > analytic["true"],
    )


# ---------------------------------------------------------------------------
# Unbiasedness
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UnbiasednessReport:
    """Monte Carlo means of the rescaled curve estimators against their
    analytic prefix targets, one z-score per (r, nu) cell."""

    alpha: float
    r_grid: tuple[float, ...]
    nus: tuple[float, ...]
    k_values: tuple[int, ...]
    targets: np.ndarray
    means: np.ndarray
    stderrs: np.ndarray
    z_scores: np.ndarray
    realizations: int
    seed: int

    @property
    def max_abs_z(self) -> float:
        return float(np.max(np.abs(self.z_scores)))

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "r_grid": list(self.r_grid),
            "nus": list(self.nus),
            "k_values": list(self.k_values),
            "targets": self.targets.tolist(),
            "means": self.means.tolist(),
            "stderrs": self.stderrs.tolist(),
            "z_scores": self.z_scores.tolist(),
            "realizations": self.realizations,
            "seed": self.seed,
        }


def _ranked_group_layout(spec: PopulationSpec, score_set: str) -> np.ndarray:
    """Per-sorted-position group index implied by scores and stable ties.

    Units are laid out in group blocks, so sorting by descending score with
    index tie-breaks keeps whole groups contiguous in (score, block) order.
    """
    counts = spec.group_counts()
    scores = spec.group_scores(score_set)
    order = sorted(range(len(spec.groups)), key=lambda i: (-scores[i], i))
    return np.repeat(np.array(order), counts[np.array(order)])


def _prefix_uplift_target(spec: PopulationSpec, k: int, layout: np.ndarray) -> float:
    """Normalized expected curve value at prefix k: sum of unit uplifts / N."""
    uplifts = np.array([g.true_uplift for g in spec.groups])
    return float(uplifts[layout[:k]].sum()) / spec.n


def unbiasedness_check(
    population: PopulationSpec,
    r_grid: Sequence[float] = (0.25, 0.5, 1.0),
    nus: Sequence[float] = (0.0, 0.5, 1.0),
    realizations: int = 1000,
    seed: int = 0,
    score_set: str = "model",
) -> UnbiasednessReport:
    """Check the rescaled estimators' means at chosen prefixes of an RCT.

    For each r the target is the expected normalized curve value
    r * (p1(r) - p0(r)) computed from group parameters in ranking order; the
    classical pair and every convex combination share it, so each (r, nu)
    cell reports a z-score of the Monte Carlo mean against the target.
    """
    alpha = population.uniform_treatment_prob
    if alpha is None:
        raise PreconditionError("unbiasedness targets assume an RCT: uniform treatment probability across groups")
    if not r_grid:
        raise ValidationError("r_grid must be non-empty")
    if realizations < 2:
        raise ValidationError("need at least 2 realizations")

    n = population.n
    k_values = tuple(min(max(int(math.ceil(r * n)), 1), n) for r in r_grid)
    layout = _ranked_group_layout(population, score_set)
    targets_r = [_prefix_uplift_target(population, k, layout) for k in k_values]

    nus = tuple(float(v) for v in nus)
    sums = np.zeros((len(k_values), len(nus)))
    sumsq = np.zeros_like(sums)
    for r in range(realizations):
        gen = generate(realization_spec(population, r))
        scored = rank_by_score(gen.logged, gen.score_sets[score_set])
        v1 = curve_q1(scored, alpha)
        v2 = curve_q2(scored, alpha)
        for i, k in enumerate(k_values):
            a, b = v1.value_at(k), v2.value_at(k)
            for j, nu in enumerate(nus):
                v = (1.0 - nu) * a + nu * b
                sums[i, j] += v
                sumsq[i, j] += v * v

    means = sums / realizations
    variances = np.maximum(sumsq / realizations - means**2, 0.0)
    stderrs = np.sqrt(variances / (realizations - 1))
    targets = np.tile(np.array(targets_r)[:, None], (1, len(nus)))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(stderrs > 0, (means - targets) / stderrs, np.where(means == targets, 0.0, np.inf))
    return UnbiasednessReport(
        alpha=alpha,
        r_grid=tuple(float(r) for r in r_grid),
        nus=nus,
        k_values=k_values,
        targets=targets,
        means=means,
        stderrs=stderrs,
        z_scores=z,
        realizations=realizations,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Variance study
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VarianceStudyConfig:
    """Monte Carlo study of the area metric's variance across mixing weights."""

    population: PopulationSpec
    nus: tuple[float, ...]
    realizations: int = 101
    seed: int = 0
    metric: str = "auuc_trapezoid"
    score_set: str = "model"

    def __post_init__(self):
        object.__setattr__(self, "nus", tuple(float(v) for v in self.nus))
        if self.realizations < 2:
            raise ValidationError("need at least 2 realizations")
        if not self.nus:
            raise ValidationError("nus grid must be non-empty")
        if any(not 0.0 <= v <= 1.0 for v in self.nus):
            raise ValidationError("nus must lie in [0, 1]")
        if self.metric not in ("auuc_trapezoid", "auuc_riemann"):
            raise ValidationError(f"unknown metric {self.metric!r}")


@dataclass(frozen=True)
class ExperimentReport:
    """Per-nu moments of the area metric plus the variance argmin comparison."""

    nus: tuple[float, ...]
    means: np.ndarray
    variances: np.ndarray
    var_of_variances: np.ndarray
    argmin_nu_empirical: float
    argmin_nu_theoretical: float
    p_y1: float
    alpha: float
    realizations: int
    seed: int
    metric: str

    def to_dict(self) -> dict:
        return {
            "nus": list(self.nus),
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
            "var_of_variances": self.var_of_variances.tolist(),
            "argmin_nu_empirical": self.argmin_nu_empirical,
            "argmin_nu_theoretical": self.argmin_nu_theoretical,
            "p_y1": self.p_y1,
            "alpha": self.alpha,
            "realizations": self.realizations,
            "seed": self.seed,
            "metric": self.metric,
        }

    def to_tidy_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["nu", "p_y1", "mean", "var"])
        for nu, mean, var in zip(self.nus, self.means, self.variances):
            writer.writerow([nu, self.p_y1, repr(float(mean)), repr(float(var))])
        return buf.getvalue()


def _auuc_pair(gen: GeneratedPopulation, alpha: float, method: str, score_set: str) -> tuple[float, float]:
    """AUUC of the rescaled classical/inverted pair for one realization.

    The combined-estimator curve is pointwise linear in nu and shares its tie
    structure with the pair, so the whole nu grid follows from these two
    numbers exactly.
    """
    scored = rank_by_score(gen.logged, gen.score_sets[score_set])
    c1 = interpolate_iso_uplift(curve_q1(scored, alpha), scored)
    c2 = interpolate_iso_uplift(curve_q2(scored, alpha), scored)
    return area_under_curve(c1, method=method), area_under_curve(c2, method=method)


def variance_study(config: VarianceStudyConfig) -> ExperimentReport:
    """Sample the area metric of the combined estimator across a nu grid.

    Draws seeded realizations of an RCT population, evaluates the rescaled
    curve pair once per realization, and reports per-nu mean, variance, and
    the variance of the variance estimate, plus the empirical argmin over the
    grid against the closed-form optimum.
    """
    spec = config.population
    alpha = spec.uniform_treatment_prob
    if alpha is None:
        raise PreconditionError("variance study assumes an RCT population")
    method = "trapezoid" if config.metric == "auuc_trapezoid" else "riemann_right"

    a1 = np.empty(config.realizations)
    a2 = np.empty(config.realizations)
    for r in range(config.realizations):
        gen = generate(realization_spec(replace(spec, seed=config.seed), r))
        a1[r], a2[r] = _auuc_pair(gen, alpha, method, config.score_set)

    nus = np.array(config.nus)
    samples = (1.0 - nus[:, None]) * a1[None, :] + nus[:, None] * a2[None, :]
    means = samples.mean(axis=1)
    variances = samples.var(axis=1, ddof=1)
    var_of_variances = _variance_of_variance(samples, means)

    p0, p1 = spec.response_rates()
    return ExperimentReport(
        nus=config.nus,
        means=means,
        variances=variances,
        var_of_variances=var_of_variances,
        argmin_nu_empirical=float(nus[int(np.argmin(variances))]),
        argmin_nu_theoretical=optimal_nu(p0, p1, alpha),
        p_y1=alpha * p1 + (1.0 - alpha) * p0,
        alpha=alpha,
        realizations=config.realizations,
        seed=config.seed,
        metric=config.metric,
    )


def _variance_of_variance(samples: np.ndarray, means: np.ndarray) -> np.ndarray:
    """Large-sample variance of the per-row sample-variance estimates."""
    m = samples.shape[1]
    centered = samples - means[:, None]
    m2 = (centered**2).mean(axis=1)
    m4 = (centered**4).mean(axis=1)
    return np.maximum(m4 - (m - 3) / (m - 1) * m2**2, 0.0) / m


@dataclass(frozen=True)
class NuSurfaceReport:
    """Variance surface over (population responder rate) x (mixing weight)."""

    p_y1_grid: tuple[float, ...]
    nus: tuple[float, ...]
    variances: np.ndarray  # |p_y1_grid| x |nus|
    means: np.ndarray
    argmin_nu_empirical: tuple[float, ...]
    argmin_nu_theoretical: tuple[float, ...]
    reports: tuple[ExperimentReport, ...] = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "p_y1_grid": list(self.p_y1_grid),
            "nus": list(self.nus),
            "variances": self.variances.tolist(),
            "means": self.means.tolist(),
            "argmin_nu_empirical": list(self.argmin_nu_empirical),
            "argmin_nu_theoretical": list(self.argmin_nu_theoretical),
        }

    def to_tidy_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["nu", "p_y1", "mean", "var"])
        for i, p in enumerate(self.p_y1_grid):
            for j, nu in enumerate(self.nus):
                writer.writerow([nu, p, repr(float(self.means[i, j])), repr(float(self.variances[i, j]))])
        return buf.getvalue()


def nu_surface_sweep(
    p_y1_grid: Sequence[float],
    nus: Sequence[float],
    base: VarianceStudyConfig,
) -> NuSurfaceReport:
    """Run a variance study per target responder rate and stack the results.

    The base config's population must be an equal-share RCT (as produced by
    :func:`heterogeneous_spec`); each sweep point rebuilds it with the same
    segment count, treatment probability, and seed but a new responder-rate
    target, so surfaces across the grid are directly comparable.
    """
    spec = base.population
    alpha = spec.uniform_treatment_prob
    if alpha is None:
        raise PreconditionError("sweep base population must be an RCT")
    shares = {g.share for g in spec.groups}
    if len(shares) != 1:
        raise PreconditionError("sweep base population must have equal-share segments")
    if len(p_y1_grid) == 0:
        raise ValidationError("p_y1_grid must be non-empty")

    reports = []
    for p in p_y1_grid:
        pop = heterogeneous_spec(len(spec.groups), alpha, p, seed=spec.seed, n=spec.n)
        reports.append(variance_study(replace(base, population=pop, nus=tuple(nus))))
    return NuSurfaceReport(
        p_y1_grid=tuple(float(p) for p in p_y1_grid),
        nus=tuple(float(v) for v in nus),
        variances=np.array([r.variances for r in reports]),
        means=np.array([r.means for r in reports]),
        argmin_nu_empirical=tuple(r.argmin_nu_empirical for r in reports),
        argmin_nu_theoretical=tuple(r.argmin_nu_theoretical for r in reports),
        reports=tuple(reports),
    )


def report_to_json(report) -> str:
    """Serialize any report object with a ``to_dict`` method."""
    return json.dumps(report.to_dict(), indent=2)
