"""Dataset loading, validation, ranking, and prefix counting."""

import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import uplift_eval as ue
from uplift_eval.errors import (
    BoundsError,
    DimensionError,
    DomainError,
    OverlapViolationError,
    ParseError,
)

from conftest import make_dataset

CSV_OK = """unit_id,features,treatment,outcome,propensity
7,ST,1,1,0.5
8,CO,0,0,0.25
9,1.5|2.0,1,1,0.75
"""


class TestLoadDataset:
    def test_field_mapping(self):
        ds = ue.load_dataset(io.StringIO(CSV_OK))
        rec = ds[0]
        assert (rec.unit_id, rec.features, rec.treatment, rec.outcome, rec.propensity) == (7, "ST", 1, 1.0, 0.5)
        assert ds[2].features == (1.5, 2.0)
        assert ds.binary_outcomes

    def test_bytes_and_path_sources(self, tmp_path):
        assert len(ue.load_dataset(CSV_OK.encode())) == 3
        p = tmp_path / "d.csv"
        p.write_text(CSV_OK)
        assert len(ue.load_dataset(p)) == 3

    @pytest.mark.parametrize("q", ["0.0", "1.0", "-0.1", "1.5"])
    def test_overlap_violation_rejected(self, q):
        csv_text = f"unit_id,features,treatment,outcome,propensity\n1,g,1,1,{q}\n"
        with pytest.raises(OverlapViolationError):
            ue.load_dataset(io.StringIO(csv_text))

    def test_bad_treatment(self):
        csv_text = "unit_id,features,treatment,outcome,propensity\n1,g,2,1,0.5\n"
        with pytest.raises(DomainError):
            ue.load_dataset(io.StringIO(csv_text))

    def test_malformed_row_reports_line_number(self):
        csv_text = "unit_id,features,treatment,outcome,propensity\n1,g,1,1,0.5\n2,g,oops,1,0.5\n"
        with pytest.raises(ParseError, match="line 3"):
            ue.load_dataset(io.StringIO(csv_text))

    def test_wrong_width_row(self):
        csv_text = "unit_id,features,treatment,outcome,propensity\n1,g,1,1\n"
        with pytest.raises(ParseError, match="line 2"):
            ue.load_dataset(io.StringIO(csv_text))

    def test_bad_header(self):
        with pytest.raises(ParseError):
            ue.load_dataset(io.StringIO("id,x,t,y,q\n"))

    def test_score_column_roundtrip(self, tmp_path):
        ds = make_dataset([1, 0, 1], [1, 0, 1], 0.5)
        p = tmp_path / "d.csv"
        ue.save_dataset(ds, p, scores=np.array([0.3, 0.1, 0.2]))
        back = ue.load_dataset(p)
        assert back.scores is not None
        np.testing.assert_array_equal(back.scores, [0.3, 0.1, 0.2])
        np.testing.assert_array_equal(back.treatments, ds.treatments)
        np.testing.assert_array_equal(back.propensities, ds.propensities)

    def test_non_binary_outcome_flag(self):
        csv_text = "unit_id,features,treatment,outcome,propensity\n1,g,1,2.5,0.5\n"
        ds = ue.load_dataset(io.StringIO(csv_text))
        assert not ds.binary_outcomes


class TestRankByScore:
    def test_spec_permutation(self):
        ds = make_dataset([1, 0, 1], [1, 1, 0], 0.5)
        scored = ue.rank_by_score(ds, [0.1, 0.5, 0.3])
        # 1-based original indices in ranked order
        assert list(scored.order + 1) == [2, 3, 1]

    def test_tie_runs(self):
        ds = make_dataset([1, 0, 1, 0], [1, 1, 0, 0], 0.5)
        scored = ue.rank_by_score(ds, [3, 2, 2, 1])
        assert [list(r) for r in scored.iso_groups] == [[1], [2, 3], [4]]
        assert list(scored.iso_last) == [1, 3, 4]

    def test_all_equal_scores(self):
        ds = make_dataset([1, 0, 1, 0], [1, 1, 0, 0], 0.5)
        scored = ue.rank_by_score(ds, [7.0] * 4)
        assert list(scored.iso_last) == [4]
        assert list(scored.order) == [0, 1, 2, 3]
        assert scored.has_ties

    def test_length_mismatch(self):
        ds = make_dataset([1, 0], [1, 1], 0.5)
        with pytest.raises(DimensionError):
            ue.rank_by_score(ds, [1.0])

    @pytest.mark.parametrize("bad", [float("nan"), float("inf"), -float("inf")])
    def test_non_finite_scores(self, bad):
        ds = make_dataset([1, 0], [1, 1], 0.5)
        with pytest.raises(DomainError):
            ue.rank_by_score(ds, [bad, 0.0])

    @given(scores=st.lists(st.integers(-5, 5), min_size=1, max_size=40))
    @settings(max_examples=100, deadline=None)
    def test_invariant_under_increasing_transform(self, scores):
        n = len(scores)
        ds = make_dataset([i % 2 for i in range(n)], [0] * n, 0.5)
        base = ue.rank_by_score(ds, [float(s) for s in scores])
        for transform in (lambda x: 2.0 * x + 1.0, lambda x: x**3):
            other = ue.rank_by_score(ds, [transform(float(s)) for s in scores])
            np.testing.assert_array_equal(base.order, other.order)
            np.testing.assert_array_equal(base.iso_last, other.iso_last)

    def test_reranking_sorted_is_identity(self, rng):
        n = 50
        scores = np.sort(rng.normal(size=n))[::-1]
        ds = make_dataset(rng.integers(0, 2, n), rng.integers(0, 2, n), 0.5)
        scored = ue.rank_by_score(ds, scores)
        np.testing.assert_array_equal(scored.order, np.arange(n))


def brute_force_counts(pairs, k):
    """Independent oracle: explicit loop over the top-k prefix."""
    nt = nc = rt = rc = 0
    for t, y in pairs[:k]:
        if t == 1:
            nt += 1
            rt += y
        else:
            nc += 1
            rc += y
    return nt, nc, rt, rc


class TestTopKCounts:
    def test_spec_example(self):
        ds, scored = make_dataset([1, 0, 1], [1, 1, 0], 0.5, scores=[3, 2, 1])
        c = ue.top_k_counts(scored, 2)
        assert (c.n_treated, c.n_control, c.responders_treated, c.responders_control) == (1, 1, 1, 1)

    def test_full_prefix_and_bounds(self):
        ds, scored = make_dataset([1, 0, 1], [1, 1, 0], 0.5, scores=[3, 2, 1])
        c = ue.top_k_counts(scored, 3)
        assert c.n_treated + c.n_control == 3
        for bad in (0, 4, -1):
            with pytest.raises(BoundsError):
                ue.top_k_counts(scored, bad)

    def test_all_control(self):
        ds, scored = make_dataset([0, 0, 0], [1, 0, 1], 0.5, scores=[3, 2, 1])
        for k in (1, 2, 3):
            c = ue.top_k_counts(scored, k)
            assert c.n_treated == 0 and c.responders_treated == 0

    def test_against_brute_force(self, rng):
        from conftest import random_logged_dataset, sorted_pairs

        for _ in range(20):
            ds, scored = random_logged_dataset(rng, int(rng.integers(2, 60)))
            pairs = sorted_pairs(scored)
            for k in range(1, len(pairs) + 1):
                c = ue.top_k_counts(scored, k)
                assert (c.n_treated, c.n_control, c.responders_treated, c.responders_control) == brute_force_counts(pairs, k)

    @given(
        data=st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=2, max_size=50),
    )
    @settings(max_examples=60, deadline=None)
    def test_monotone_in_k(self, data):
        t = [d[0] for d in data]
        y = [d[1] for d in data]
        ds, scored = make_dataset(t, y, 0.5, scores=list(range(len(data))))
        prev = (0, 0, 0, 0)
        for k in range(1, len(data) + 1):
            c = ue.top_k_counts(scored, k)
            cur = (c.n_treated, c.n_control, c.responders_treated, c.responders_control)
            assert all(a >= b for a, b in zip(cur, prev))
            prev = cur


class TestDatasetValidation:
    def test_propensity_bounds(self):
        with pytest.raises(OverlapViolationError):
            make_dataset([1, 0], [1, 0], [0.5, 1.0])

    def test_treatment_domain(self):
        with pytest.raises(DomainError):
            make_dataset([1, 3], [1, 0], 0.5)

    def test_records_are_immutable_views(self):
        ds = make_dataset([1, 0], [1, 0], 0.5)
        with pytest.raises(ValueError):
            ds.treatments[0] = 0
