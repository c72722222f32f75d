"""Synthetic population builders: exact parameterizations and sampling laws."""

import numpy as np
import pytest

import uplift_eval as ue
from uplift_eval.errors import ValidationError
from uplift_eval.generators import (
    realization_spec,
    spec_from_json,
    spec_to_json,
    with_uniform_treatment_prob,
)


class TestToySpecs:
    def test_toy1_parameters(self):
        spec = ue.toy1_spec()
        assert spec.labels == ("CO", "ST", "LC", "SD")
        assert [g.treatment_prob for g in spec.groups] == [0.25, 5 / 6, 5 / 12, 0.5]
        assert [g.model_score for g in spec.groups] == [0.0, 1.0, 1.0, -1.0]
        assert [g.true_uplift for g in spec.groups] == [1.0, 0.0, 0.0, -1.0]
        assert all(g.share == 0.25 for g in spec.groups)
        # overall treatment ratio is 1/2 by construction
        assert sum(g.share * g.treatment_prob for g in spec.groups) == pytest.approx(0.5)

    def test_toy1_sd_group_deterministic(self):
        sd = ue.toy1_spec().groups[3]
        assert (sd.beta_treated, sd.beta_control) == (0.0, 1.0)

    def test_toy2_parameters(self):
        spec = ue.toy2_spec()
        assert all(g.treatment_prob == 0.75 for g in spec.groups)
        assert [g.model_score for g in spec.groups] == [1.0, 0.5, -0.5, -1.0]
        assert spec.score_sets["u_n"] == (1.0, 0.5, 0.5, -1.0)
        assert list(spec.group_scores("true")) == [1.0, 0.0, 0.0, -1.0]

    def test_toy2_propensity_field_values(self):
        gen = ue.generate(ue.toy2_spec(n=2000, seed=3))
        assert set(np.unique(gen.logged.propensities)) == {0.25, 0.75}

    def test_toy3_parameters(self):
        spec = ue.toy3_spec()
        g1, g2 = spec.groups
        assert (g1.beta_treated, g1.beta_control, g2.beta_treated, g2.beta_control) == (0.4, 0.2, 0.2, 0.1)
        assert g1.true_uplift == pytest.approx(0.2)
        assert g2.true_uplift == pytest.approx(0.1)
        assert (g1.model_score, g2.model_score) == (0.1, 0.2)
        assert all(g.treatment_prob == 0.1 for g in spec.groups)

    def test_q_override(self):
        spec = with_uniform_treatment_prob(ue.toy3_spec(), 0.5)
        assert all(g.treatment_prob == 0.5 for g in spec.groups)


class TestGenerate:
    def test_noiseless_archetypes(self):
        gen = ue.generate(ue.toy1_spec(n=4000, seed=7))
        labels = np.array(gen.logged.features)
        t = gen.logged.treatments
        y = gen.logged.outcomes
        co = labels == "CO"
        assert (y[co & (t == 1)] == 1).all() and (y[co & (t == 0)] == 0).all()
        assert (y[labels == "LC"] == 0).all()
        assert (y[labels == "ST"] == 1).all()
        sd = labels == "SD"
        assert (y[sd & (t == 1)] == 0).all() and (y[sd & (t == 0)] == 1).all()

    def test_logged_outcome_consistent_with_full_feedback(self):
        spec = ue.heterogeneous_spec(5, 0.4, 0.45, seed=11, n=3000)
        gen = ue.generate(spec)
        t = gen.logged.treatments
        want = t * gen.full.outcomes_treated + (1 - t) * gen.full.outcomes_control
        np.testing.assert_array_equal(gen.logged.outcomes, want)
        np.testing.assert_array_equal(gen.full.true_ite, gen.full.outcomes_treated - gen.full.outcomes_control)

    def test_propensity_is_probability_of_logged_arm(self):
        gen = ue.generate(ue.toy1_spec(n=2000, seed=5))
        labels = np.array(gen.logged.features)
        q_by_label = {g.label: g.treatment_prob for g in gen.spec.groups}
        for label, q in q_by_label.items():
            m = labels == label
            t = gen.logged.treatments[m]
            expected = np.where(t == 1, q, 1.0 - q)
            np.testing.assert_allclose(gen.logged.propensities[m], expected)

    def test_overall_treated_fraction_toy1(self):
        n = 100_000
        gen = ue.generate(ue.toy1_spec(n=n, seed=1))
        sigma = np.sqrt(0.25 / n)
        assert abs(gen.logged.n_treated / n - 0.5) < 3 * sigma

    def test_group_level_rates_within_four_se(self):
        n = 100_000
        spec = ue.toy3_spec(n=n, seed=13)
        gen = ue.generate(spec)
        labels = np.array(gen.logged.features)
        for g in spec.groups:
            m = labels == g.label
            count = int(m.sum())
            t = gen.logged.treatments[m]
            frac = t.mean()
            se = np.sqrt(g.treatment_prob * (1 - g.treatment_prob) / count)
            assert abs(frac - g.treatment_prob) < 4 * se
            treated_y = gen.logged.outcomes[m][t == 1]
            se1 = np.sqrt(g.beta_treated * (1 - g.beta_treated) / len(treated_y))
            assert abs(treated_y.mean() - g.beta_treated) < 4 * se1
            control_y = gen.logged.outcomes[m][t == 0]
            se0 = np.sqrt(g.beta_control * (1 - g.beta_control) / len(control_y))
            assert abs(control_y.mean() - g.beta_control) < 4 * se0

    def test_exact_group_allocation(self):
        spec = ue.toy1_spec(n=1003, seed=0)
        counts = spec.group_counts()
        assert counts.sum() == 1003
        assert counts.max() - counts.min() <= 1

    def test_deterministic_for_fixed_seed(self):
        a = ue.generate(ue.toy2_spec(n=5000, seed=42))
        b = ue.generate(ue.toy2_spec(n=5000, seed=42))
        np.testing.assert_array_equal(a.logged.outcomes, b.logged.outcomes)
        np.testing.assert_array_equal(a.logged.treatments, b.logged.treatments)
        c = ue.generate(ue.toy2_spec(n=5000, seed=43))
        assert not np.array_equal(a.logged.treatments, c.logged.treatments)

    def test_realization_seeds_xor(self):
        spec = ue.toy1_spec(n=100, seed=6)
        assert realization_spec(spec, 3).seed == 6 ^ 3
        assert realization_spec(spec, 0).seed == 6

    def test_model_scores_follow_groups(self):
        gen = ue.generate(ue.toy3_spec(n=1000, seed=2))
        labels = np.array(gen.logged.features)
        assert (gen.scores[labels == "X1"] == 0.1).all()
        assert (gen.scores[labels == "X2"] == 0.2).all()
        np.testing.assert_array_equal(
            gen.score_sets["true"], np.where(labels == "X1", 0.2, 0.1)
        )


class TestHeterogeneousSpec:
    def test_population_rate_hits_target(self):
        for target in (0.2, 0.5, 0.8):
            spec = ue.heterogeneous_spec(6, 0.3, target, seed=9)
            p0, p1 = spec.response_rates()
            assert abs(0.3 * p1 + 0.7 * p0 - target) < 1e-9

    def test_balanced_single_rate(self):
        spec = ue.heterogeneous_spec(4, 0.5, 0.37, seed=21)
        p0, p1 = spec.response_rates()
        assert (p0 + p1) / 2 == pytest.approx(0.37, abs=1e-9)

    def test_good_model_scores_equal_true_uplift(self):
        spec = ue.heterogeneous_spec(5, 0.5, 0.5, seed=14)
        for g in spec.groups:
            assert g.model_score == pytest.approx(g.true_uplift)
        assert len({g.model_score for g in spec.groups}) == 5

    def test_bad_model_is_permutation(self):
        spec = ue.heterogeneous_spec(5, 0.5, 0.5, seed=14)
        good = sorted(g.model_score for g in spec.groups)
        bad = sorted(spec.score_sets["bad"])
        np.testing.assert_allclose(bad, good)
        assert tuple(spec.score_sets["bad"]) != tuple(g.model_score for g in spec.groups)

    def test_deterministic(self):
        a = ue.heterogeneous_spec(4, 0.5, 0.5, seed=3)
        b = ue.heterogeneous_spec(4, 0.5, 0.5, seed=3)
        assert a == b

    def test_validation(self):
        with pytest.raises(ValidationError):
            ue.heterogeneous_spec(1, 0.5, 0.5, seed=0)
        with pytest.raises(ValidationError):
            ue.heterogeneous_spec(4, 0.0, 0.5, seed=0)
        with pytest.raises(ValidationError):
            ue.heterogeneous_spec(4, 0.5, 1.5, seed=0)


class TestSpecValidationAndJson:
    def test_shares_must_sum_to_one(self):
        groups = (
            ue.GroupSpec("a", 0.5, 0.5, 1.0, 0.0, 1.0),
            ue.GroupSpec("b", 0.4, 0.5, 0.0, 0.0, 0.0),
        )
        with pytest.raises(ValidationError, match="shares"):
            ue.PopulationSpec(groups=groups, n=10, seed=0)

    def test_overlap_in_spec(self):
        with pytest.raises(ValidationError):
            ue.PopulationSpec(
                groups=(ue.GroupSpec("a", 1.0, 1.0, 1.0, 0.0, 1.0),), n=10, seed=0
            )

    def test_json_roundtrip(self):
        spec = ue.toy2_spec(n=777, seed=5)
        doc = spec_to_json(spec)
        back = spec_from_json(doc)
        assert back == spec

    def test_unknown_score_set(self):
        spec = ue.toy1_spec()
        with pytest.raises(ValidationError):
            spec.group_scores("nonexistent")

    def test_uniform_treatment_prob_detection(self):
        assert ue.toy2_spec().uniform_treatment_prob == 0.75
        assert ue.toy1_spec().uniform_treatment_prob is None
