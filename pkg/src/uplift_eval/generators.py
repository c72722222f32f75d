"""Synthetic logged-bandit populations with exact full-feedback ground truth.

Populations are mixtures of homogeneous groups: each group has a size share, a
treatment probability, Bernoulli response rates under each arm, and the
constant score the evaluated model assigns to its members. The classic unit
archetypes are the deterministic corners of this model: convincing units
(respond iff treated), sure things (always respond), lost causes (never
respond), and sleeping dogs (respond iff left alone).

Three built-in populations reproduce the pathologies that break the classical
area metric: per-group treatment rates on an observational study, a uniform
but unbalanced treatment rate, and an unbalanced two-group Bernoulli design
where the worse of two equal-capacity models wins. A seeded heterogeneous
builder produces many-segment RCT populations for the variance experiments.

Generation is deterministic given (groups, n, seed) and uses a counter-based
generator, so Monte Carlo realizations can be derived independently from
``seed ^ realization_index``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .data import FullFeedbackDataset, LoggedBanditDataset
from .errors import ValidationError

__all__ = [
    "GroupSpec",
    "PopulationSpec",
    "GeneratedPopulation",
    "generate",
    "toy1_spec",
    "toy2_spec",
    "toy3_spec",
    "heterogeneous_spec",
    "spec_to_json",
    "spec_from_json",
    "with_uniform_treatment_prob",
]

_MASK64 = (1 << 64) - 1
_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15


@dataclass(frozen=True)
class GroupSpec:
    """One homogeneous population segment.

    ``model_score`` is the constant predicted uplift that the evaluated model
    assigns to every unit of the group; the group's true uplift is
    ``beta_treated - beta_control``.
    """

    label: str
    share: float
    treatment_prob: float
    beta_treated: float
    beta_control: float
    model_score: float

    @property
    def true_uplift(self) -> float:
        return self.beta_treated - self.beta_control


@dataclass(frozen=True)
class PopulationSpec:
    """A mixture of groups plus the draw size and seed.

    ``score_sets`` carries alternative per-group score assignments keyed by
    model name (the primary model lives in ``GroupSpec.model_score`` and the
    exact uplift is always available as ``"true"``).
    """

    groups: tuple[GroupSpec, ...]
    n: int
    seed: int
    score_sets: Mapping[str, tuple[float, ...]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        if self.n < 1:
            raise ValidationError(f"population size n={self.n} must be >= 1")
        if not self.groups:
            raise ValidationError("at least one group required")
        total = sum(g.share for g in self.groups)
        if abs(total - 1.0) > 1e-12:
            raise ValidationError(f"group shares sum to {total!r}, expected 1")
        for g in self.groups:
            if not 0.0 < g.share <= 1.0:
                raise ValidationError(f"group {g.label}: share {g.share} outside (0, 1]")
            if not 0.0 < g.treatment_prob < 1.0:
                raise ValidationError(f"group {g.label}: treatment_prob {g.treatment_prob} outside (0, 1)")
            for name, b in (("beta_treated", g.beta_treated), ("beta_control", g.beta_control)):
                if not 0.0 <= b <= 1.0:
                    raise ValidationError(f"group {g.label}: {name} {b} outside [0, 1]")
        for name, scores in self.score_sets.items():
            if len(scores) != len(self.groups):
                raise ValidationError(f"score set {name!r} has {len(scores)} entries for {len(self.groups)} groups")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(g.label for g in self.groups)

    def group_scores(self, score_set: str = "model") -> np.ndarray:
        """Per-group scores of a named model; "model" and "true" always exist."""
        if score_set == "model":
            return np.array([g.model_score for g in self.groups])
        if score_set == "true":
            return np.array([g.true_uplift for g in self.groups])
        try:
            return np.asarray(self.score_sets[score_set], dtype=np.float64)
        except KeyError:
            raise ValidationError(f"unknown score set {score_set!r}; have {sorted(self.available_score_sets)}") from None

    @property
    def available_score_sets(self) -> tuple[str, ...]:
        return ("model", "true", *self.score_sets.keys())

    @property
    def uniform_treatment_prob(self) -> float | None:
        """The common treatment probability when the design is an RCT, else None."""
        probs = {g.treatment_prob for g in self.groups}
        return probs.pop() if len(probs) == 1 else None

    def response_rates(self) -> tuple[float, float]:
        """Share-weighted population response rates (p0, p1)."""
        p0 = sum(g.share * g.beta_control for g in self.groups)
        p1 = sum(g.share * g.beta_treated for g in self.groups)
        return p0, p1

    def group_counts(self) -> np.ndarray:
        """Exact proportional allocation: floor(share * n) plus largest-remainder fixup."""
        shares = np.array([g.share for g in self.groups])
        exact = shares * self.n
        counts = np.floor(exact).astype(np.int64)
        remainder = self.n - int(counts.sum())
        if remainder > 0:
            frac = exact - counts
            top = np.argsort(-frac, kind="stable")[:remainder]
            counts[top] += 1
        return counts


@dataclass(frozen=True)
class GeneratedPopulation:
    """One synthetic draw: the logged dataset, its full-feedback twin, and scores.

    ``scores`` is the evaluated model's per-record score; ``score_sets`` maps
    every available model name (including "model" and "true") to per-record
    scores.
    """

    spec: PopulationSpec
    logged: LoggedBanditDataset
    full: FullFeedbackDataset
    scores: np.ndarray
    score_sets: Mapping[str, np.ndarray]
    group_index: np.ndarray


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed & _MASK64))


def generate(spec: PopulationSpec) -> GeneratedPopulation:
    """Draw one population: group blocks, then independent t, y(1), y(0) per unit.

    The logged record exposes only the outcome of the drawn arm, with the
    propensity of that arm (treatment_prob for treated units, its complement
    for control units); the full-feedback twin retains both potential
    outcomes.
    """
    counts = spec.group_counts()
    group_index = np.repeat(np.arange(len(spec.groups)), counts)
    q = np.array([g.treatment_prob for g in spec.groups])[group_index]
    b1 = np.array([g.beta_treated for g in spec.groups])[group_index]
    b0 = np.array([g.beta_control for g in spec.groups])[group_index]

    rng = _rng(spec.seed)
    t = (rng.random(spec.n) < q).astype(np.int8)
    y1 = (rng.random(spec.n) < b1).astype(np.float64)
    y0 = (rng.random(spec.n) < b0).astype(np.float64)

    outcome = np.where(t == 1, y1, y0)
    propensity = np.where(t == 1, q, 1.0 - q)
    labels = [spec.groups[g].label for g in group_index]
    unit_ids = np.arange(1, spec.n + 1)

    logged = LoggedBanditDataset(unit_ids, labels, t, outcome, propensity)
    full = FullFeedbackDataset(unit_ids, labels, y1, y0)
    score_sets = {
        name: spec.group_scores(name)[group_index].astype(np.float64)
        for name in spec.available_score_sets
    }
    return GeneratedPopulation(
        spec=spec,
        logged=logged,
        full=full,
        scores=score_sets["model"],
        score_sets=score_sets,
        group_index=group_index,
    )


def realization_spec(spec: PopulationSpec, realization: int) -> PopulationSpec:
    """Spec for one Monte Carlo realization; xor keeps streams independent."""
    return replace(spec, seed=(spec.seed ^ realization) & _MASK64)


# Archetype response rates: (beta_treated, beta_control).
_ARCHETYPES = {
    "CO": (1.0, 0.0),  # respond iff treated
    "ST": (1.0, 1.0),  # always respond
    "LC": (0.0, 0.0),  # never respond
    "SD": (0.0, 1.0),  # respond iff not treated
}


def _archetype_groups(qs: Sequence[float], model_scores: Sequence[float]) -> tuple[GroupSpec, ...]:
    return tuple(
        GroupSpec(
            label=label,
            share=0.25,
            treatment_prob=q,
            beta_treated=_ARCHETYPES[label][0],
            beta_control=_ARCHETYPES[label][1],
            model_score=s,
        )
        for label, q, s in zip(("CO", "ST", "LC", "SD"), qs, model_scores)
    )


def toy1_spec(n: int = 100_000, seed: int = 0) -> PopulationSpec:
    """Observational study: four equal archetype groups with per-group
    treatment rates (1/4, 5/6, 5/12, 1/2), overall treated fraction 1/2.

    The evaluated model scores (0, 1, 1, -1) merge ST and LC ahead of CO; the
    merged segment's expected slope exceeds CO's, so the area metric prefers
    this model to the exact uplift.
    """
    groups = _archetype_groups((0.25, 5.0 / 6.0, 5.0 / 12.0, 0.5), (0.0, 1.0, 1.0, -1.0))
    return PopulationSpec(groups=groups, n=n, seed=seed)


def toy2_spec(n: int = 100_000, seed: int = 0, q0: float = 0.75) -> PopulationSpec:
    """Unbalanced RCT: same four archetypes, uniform treatment rate ``q0``.

    The evaluated model distinguishes ST from LC with scores
    (1, 1/2, -1/2, -1); the merged variant (1, 1/2, 1/2, -1) and the exact
    uplift (1, 0, 0, -1) are available as score sets "u_n" and "true".
    """
    groups = _archetype_groups((q0,) * 4, (1.0, 0.5, -0.5, -1.0))
    return PopulationSpec(
        groups=groups,
        n=n,
        seed=seed,
        score_sets={"u_n": (1.0, 0.5, 0.5, -1.0)},
    )


def toy3_spec(n: int = 100_000, seed: int = 0, q0: float = 0.1) -> PopulationSpec:
    """Unbalanced two-group Bernoulli design with equal model capacity.

    Response rates (0.4, 0.2) and (0.2, 0.1) give true uplifts 0.2 > 0.1, yet
    at q0 = 0.1 the expected slopes invert (-0.14 < -0.07), so the model
    scoring the groups (0.1, 0.2) beats the exact uplift on the area metric.
    Group shares are equal.
    """
    groups = (
        GroupSpec(label="X1", share=0.5, treatment_prob=q0, beta_treated=0.4, beta_control=0.2, model_score=0.1),
        GroupSpec(label="X2", share=0.5, treatment_prob=q0, beta_treated=0.2, beta_control=0.1, model_score=0.2),
    )
    return PopulationSpec(groups=groups, n=n, seed=seed)


def heterogeneous_spec(
    n_segments: int,
    alpha: float,
    p_y1_target: float,
    seed: int,
    n: int = 10_000,
) -> PopulationSpec:
    """Equal-share RCT population with seeded per-segment response rates.

    Draws (beta_control, beta_treated) per segment, then shifts all of them by
    a common offset so the population responder rate
    ``alpha * mean(beta_treated) + (1 - alpha) * mean(beta_control)`` equals
    ``p_y1_target``. Segment model scores equal their true uplift (the good
    model); a permuted assignment is emitted as score set "bad". Retries with
    a derived seed when the shift pushes a rate out of [0, 1].
    """
    if n_segments < 2:
        raise ValidationError("need at least 2 segments")
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha={alpha} outside (0, 1)")
    if not 0.0 < p_y1_target < 1.0:
        raise ValidationError(f"p_y1_target={p_y1_target} outside (0, 1)")

    attempt_seed = seed
    for _ in range(100):
        rng = _rng(attempt_seed)
        b0 = rng.uniform(0.35, 0.65, n_segments)
        b1 = rng.uniform(0.35, 0.65, n_segments)
        shift = p_y1_target - float(np.mean(alpha * b1 + (1.0 - alpha) * b0))
        b0 = b0 + shift
        b1 = b1 + shift
        if ((b0 >= 0.0) & (b0 <= 1.0) & (b1 >= 0.0) & (b1 <= 1.0)).all():
            good = b1 - b0
            if len(np.unique(good)) == n_segments:
                bad = _permuted_scores(rng, good)
                groups = tuple(
                    GroupSpec(
                        label=f"seg{i:02d}",
                        share=1.0 / n_segments,
                        treatment_prob=alpha,
                        beta_treated=float(b1[i]),
                        beta_control=float(b0[i]),
                        model_score=float(good[i]),
                    )
                    for i in range(n_segments)
                )
                return PopulationSpec(groups=groups, n=n, seed=seed, score_sets={"bad": tuple(bad)})
        attempt_seed = (attempt_seed + _SPLITMIX_GAMMA) & _MASK64
    raise ValidationError(
        f"could not fit segment response rates in [0, 1] for p_y1_target={p_y1_target} after 100 attempts"
    )


def _permuted_scores(rng: np.random.Generator, good: np.ndarray) -> np.ndarray:
    for _ in range(20):
        perm = rng.permutation(len(good))
        if not np.array_equal(perm, np.arange(len(good))):
            return good[perm]
    return np.roll(good, 1)


def with_uniform_treatment_prob(spec: PopulationSpec, q0: float) -> PopulationSpec:
    """Same population with every group's treatment probability set to ``q0``."""
    return replace(spec, groups=tuple(replace(g, treatment_prob=q0) for g in spec.groups))


def spec_to_json(spec: PopulationSpec) -> str:
    doc = {
        "groups": [
            {
                "label": g.label,
                "share": g.share,
                "treatment_prob": g.treatment_prob,
                "beta_treated": g.beta_treated,
                "beta_control": g.beta_control,
                "model_score": g.model_score,
            }
            for g in spec.groups
        ],
        "n": spec.n,
        "seed": spec.seed,
        "score_sets": {k: list(v) for k, v in spec.score_sets.items()},
    }
    return json.dumps(doc, indent=2)


def spec_from_json(source) -> PopulationSpec:
    """Parse a population spec document (path, JSON string, or mapping)."""
    if isinstance(source, Path):
        doc = json.loads(source.read_text(encoding="utf-8"))
    elif isinstance(source, str):
        doc = json.loads(Path(source).read_text(encoding="utf-8")) if source.lstrip()[:1] not in "{[" else json.loads(source)
    elif isinstance(source, Mapping):
        doc = dict(source)
    else:
        doc = json.load(source)
    try:
        groups = tuple(GroupSpec(**g) for g in doc["groups"])
        return PopulationSpec(
            groups=groups,
            n=int(doc["n"]),
            seed=int(doc["seed"]),
            score_sets={k: tuple(float(x) for x in v) for k, v in doc.get("score_sets", {}).items()},
        )
    except (KeyError, TypeError) as e:
        raise ValidationError(f"bad population spec document: {e}") from None
