import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from regime_pcmci.core import FitResult, LinkCoefficients, hard_assignment_from_labels
from regime_pcmci.metrics import (delta_gamma, delta_phi, evaluate, link_counts, link_rates, match_regimes,
                                  prediction_error, summarize)
from regime_pcmci.synthetic import get_experiment

labels_k2 = st.lists(st.integers(0, 1), min_size=5, max_size=60)


def fit_from_truth(truth, T):
    coeffs = truth.coefficients
    return FitResult(truth.assignment, coeffs.to_parents(), coeffs, 0.0, 0.0, 1, True, 0)


class TestDeltaGamma:
    def test_identical(self):
        a = hard_assignment_from_labels([0, 1, 1, 0], 2)
        np.testing.assert_array_equal(delta_gamma(a, a), [0, 0])

    def test_one_wrong_step(self):
        labels = np.zeros(103, dtype=int)
        other = labels.copy()
        other[50] = 1
        dg = delta_gamma(hard_assignment_from_labels(other, 2), hard_assignment_from_labels(labels, 2), 3)
        np.testing.assert_allclose(dg, [1.0, 1.0])

    def test_everywhere_wrong(self):
        a = hard_assignment_from_labels([0] * 10, 2)
        b = hard_assignment_from_labels([1] * 10, 2)
        np.testing.assert_allclose(delta_gamma(a, b), [100, 100])

    @given(labels_k2, st.data())
    def test_triangle_and_symmetry(self, a, data):
        n = len(a)
        b = data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
        c = data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
        A, B, C = (hard_assignment_from_labels(x, 2) for x in (a, b, c))
        assert np.all(delta_gamma(A, C) <= delta_gamma(A, B) + delta_gamma(B, C) + 1e-9)
        np.testing.assert_allclose(delta_gamma(A, B), delta_gamma(B, A))
        perm = (1, 0)
        np.testing.assert_allclose(delta_gamma(A.permuted(perm), B.permuted(perm)).sum(), delta_gamma(A, B).sum())


class TestMatching:
    def test_swapped_labels(self):
        ref = hard_assignment_from_labels([0, 0, 1, 1, 0], 2)
        est = ref.permuted((1, 0))
        perm = match_regimes(est, ref)
        assert perm == (1, 0)
        np.testing.assert_array_equal(delta_gamma(est.permuted(perm), ref), [0, 0])

    def test_identity(self):
        ref = hard_assignment_from_labels([0, 1, 2, 2, 1], 3)
        assert match_regimes(ref, ref) == (0, 1, 2)

    @given(labels_k2, st.data())
    def test_k2_picks_smaller_error(self, a, data):
        b = data.draw(st.lists(st.integers(0, 1), min_size=len(a), max_size=len(a)))
        A, B = hard_assignment_from_labels(a, 2), hard_assignment_from_labels(b, 2)
        raw = delta_gamma(A, B).sum()
        matched = delta_gamma(A.permuted(match_regimes(A, B)), B).sum()
        assert matched == pytest.approx(min(raw, 200 - raw))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            match_regimes(hard_assignment_from_labels([0, 1], 2), hard_assignment_from_labels([0, 1, 1], 2))


class TestLinks:
    ref = np.zeros((2, 2, 2, 2))
    ref[0, 1, 0, 1] = 0.8
    ref[0, 0, 0, 1] = 0.2
    ref[1, 1, 1, 1] = -0.5

    def test_exact(self):
        assert link_rates(self.ref, self.ref) == (1.0, 0.0)

    def test_empty(self):
        assert link_rates(np.zeros_like(self.ref), self.ref) == (0.0, 0.0)

    def test_complement(self):
        est = np.where(self.ref == 0, 0.3, 0.0)
        est[..., 0] = 0
        assert link_rates(est, self.ref) == (0.0, 1.0)

    def test_cross_scope(self):
        counts = link_counts(self.ref, self.ref, "cross")
        assert counts.tp == 1 and counts.fp == 0
        assert counts.tp + counts.fn + counts.fp + counts.tn == 2 * 2 * 1 * 1

    @given(st.integers(0, 10**6))
    def test_counts_partition_grid(self, seed):
        rng = np.random.default_rng(seed)
        ref = rng.choice([0.0, 0.5], size=(2, 3, 3, 4))
        est = rng.choice([0.0, -0.2], size=(2, 3, 3, 4))
        for scope, per in (("all", 9), ("cross", 6)):
            c = link_counts(est, ref, scope)
            grid = ref[..., 1:]
            mask = np.ones(grid.shape, bool) if scope == "all" else ~np.eye(3, dtype=bool)[None, :, :, None]
            assert c.tp + c.fn == int(np.sum((grid != 0) & mask))
            assert c.fp + c.tn == int(np.sum((grid == 0) & mask))
            assert c.tp + c.fn + c.fp + c.tn == 2 * per * 3

    def test_lag_range_padding(self):
        short = self.ref[..., :2]
        long = np.zeros((2, 2, 2, 4))
        long[..., :2] = short
        assert link_rates(long, short) == (1.0, 0.0)
        assert link_counts(long, short).tn == 2 * 4 * 3 - 3


class TestDeltaPhi:
    def test_exact(self):
        ref = np.zeros((1, 1, 1, 2))
        ref[0, 0, 0, 1] = 0.8
        assert delta_phi(ref, ref) == (0.0, 0.0)

    def test_single_link(self):
        ref = np.zeros((1, 1, 1, 2))
        ref[0, 0, 0, 1] = 0.8
        est = ref * 0.9
        d, pct = delta_phi(est, ref)
        assert d == pytest.approx(0.08) and pct == pytest.approx(10.0)

    def test_missed_link_counts_in_full(self):
        ref = np.zeros((1, 1, 1, 2))
        ref[0, 0, 0, 1] = 0.8
        d, pct = delta_phi(np.zeros_like(ref), ref)
        assert d == pytest.approx(0.8) and pct == pytest.approx(100.0)

    def test_empty_reference(self):
        assert all(math.isnan(v) for v in delta_phi(np.zeros((1, 1, 1, 2)), np.zeros((1, 1, 1, 2))))


class TestPredictionError:
    def test_perfect(self):
        x = np.zeros((10, 1))
        x[0] = 1.0
        for t in range(1, 10):
            x[t] = 0.5 * x[t - 1]
        phi = np.zeros((1, 1, 1, 2))
        phi[0, 0, 0, 1] = 0.5
        from regime_pcmci.core import TimeSeries
        coeffs = LinkCoefficients(phi)
        res = FitResult(hard_assignment_from_labels([0] * 10, 1), coeffs.to_parents(), coeffs, 0.0, 0.0, 1, True, 0)
        assert prediction_error(TimeSeries(x), res, 1) == (0.0, 0.0)

    def test_true_model_gaussian_moments(self):
        series, truth = get_experiment("sign_x1").generate(6)
        eps, mae = prediction_error(series, fit_from_truth(truth, series.T), 3)
        assert eps == pytest.approx(1.0, abs=0.05)
        assert mae == pytest.approx(math.sqrt(2 / math.pi), abs=0.05)


class TestEvaluate:
    def test_truth_injected(self):
        series, truth = get_experiment("lag").generate(2)
        report = evaluate(series, fit_from_truth(truth, series.T), truth.assignment, truth.coefficients, 3)
        assert report.delta_gamma_pct == 0
        assert (report.tpr_all, report.fpr_all, report.delta_phi) == (1.0, 0.0, 0.0)

    def test_invariant_under_relabelling(self):
        series, truth = get_experiment("sign_x1x2").generate(2)
        coeffs = truth.coefficients.permuted((1, 0))
        swapped = FitResult(truth.assignment.permuted((1, 0)), coeffs.to_parents(), coeffs, 0.0, 0.0, 1, True, 0)
        report = evaluate(series, swapped, truth.assignment, truth.coefficients, 3)
        assert report.matched_permutation == (1, 0)
        assert report.delta_gamma_pct == 0 and report.delta_phi == 0

    def test_summary_and_filter(self):
        series, truth = get_experiment("lag").generate(2)
        good = evaluate(series, fit_from_truth(truth, series.T), truth.assignment, truth.coefficients, 3)
        bad = good.__class__(**{**good.__dict__, "delta_gamma_pct": 40.0, "tpr_all": 0.5, "converged": False})
        row = summarize([good, bad])
        assert row["n_runs"] == 2 and row["tpr_all"] == pytest.approx(0.75)
        assert row["local_minima_fraction"] == 0.5
        assert math.isnan(row["tpr_all_ref"])
        filtered = summarize([good, bad], [good, good], max_delta_gamma=11.7)
        assert filtered["n_runs"] == 1 and filtered["tpr_all"] == 1.0 and filtered["tpr_all_ref"] == 1.0
        assert good.to_dict()["delta_gamma_per_regime"] == [0.0, 0.0]
