"""Shared builders for the test suite."""

from fractions import Fraction

import numpy as np
import pytest

from uplift_eval import LoggedBanditDataset, rank_by_score


def make_dataset(treatments, outcomes, propensities=0.5, scores=None):
    """Build a dataset (+ ranking when scores given) from plain sequences."""
    n = len(treatments)
    q = np.full(n, propensities, dtype=float) if np.isscalar(propensities) else np.asarray(propensities, float)
    ds = LoggedBanditDataset(
        unit_ids=np.arange(1, n + 1),
        features=["g"] * n,
        treatments=treatments,
        outcomes=outcomes,
        propensities=q,
    )
    if scores is None:
        return ds
    return ds, rank_by_score(ds, scores)


def sorted_pairs(scored):
    """(treatment, outcome) pairs in ranked order, for hand-rule oracles."""
    return list(zip(scored.sorted_treatments.astype(int), scored.sorted_outcomes.astype(int)))


def exact_polyline_area(xs, vs, upto=None):
    """Trapezoid area under the polyline through (0,0) and the given points,
    in exact rational arithmetic; independent of the library's quadrature."""
    pts = [(Fraction(0), Fraction(0))]
    pts += [(Fraction(x).limit_denominator(10**12), Fraction(v).limit_denominator(10**12)) for x, v in zip(xs, vs)]
    limit = pts[-1][0] if upto is None else Fraction(upto).limit_denominator(10**12)
    area = Fraction(0)
    for (x0, v0), (x1, v1) in zip(pts, pts[1:]):
        if x1 <= limit:
            area += (v0 + v1) * (x1 - x0) / 2
        else:
            if x0 < limit:
                v_mid = v0 + (v1 - v0) * (limit - x0) / (x1 - x0)
                area += (v0 + v_mid) * (limit - x0) / 2
            break
    return area


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


ACCEPTANCE_TITLES = {
    "c01": "toy1 misranking on an observational study",
    "c02": "toy2 misranking on an unbalanced RCT + balanced fix",
    "c03": "toy3 slope inversion at equal model capacity",
    "c04": "rebalancing restores the exact uplift",
    "c05": "estimator unbiasedness on RCT populations",
    "c06": "optimal mixing weight (closed form + sampling)",
    "c07": "exact identities (checksums, IPS ratio, combination, covariance)",
    "c08": "classical-variant proportionality on a stratified RCT",
    "c09": "tie-interpolation invariance",
    "c10": "ground-truth effect error",
}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance criterion."""
    outcomes = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py" in nodeid and getattr(rep, "when", "call") == "call":
                key = nodeid.split("::test_")[-1].split("_")[0]
                outcomes[key] = outcome
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(outcomes):
        status = "PASS" if outcomes[key] == "passed" else "FAIL"
        title = ACCEPTANCE_TITLES.get(key, key)
        terminalreporter.write_line(f"criterion {key[1:].lstrip('0'):>2}: {status}  {title}")


def random_logged_dataset(rng, n, n_score_levels=None, q_mode="mixed"):
    """Random dataset with both arms guaranteed non-empty."""
    while True:
        t = rng.integers(0, 2, n)
        if 0 < t.sum() < n:
            break
    y = rng.integers(0, 2, n)
    if q_mode == "half":
        q = np.full(n, 0.5)
    else:
        base = rng.uniform(0.1, 0.9, n)
        q = np.where(t == 1, base, 1.0 - base)
    if n_score_levels is None:
        scores = rng.normal(size=n)
    else:
        scores = rng.integers(0, n_score_levels, n).astype(float)
    return make_dataset(t, y, q, scores=scores)
