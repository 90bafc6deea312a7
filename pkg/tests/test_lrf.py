import numpy as np
import pytest

from lrbandit.core import AlgorithmConfig, AlsSettings, ScoringState
from lrbandit.lrf import DegenerateSupportError, als_fit, fit_ensemble, gated_means


def observe(state, rng, fraction=None, count=None, matrix=None):
    total = state.m * state.n
    take = count if count is not None else int(fraction * total)
    for code in rng.permutation(total)[:take]:
        i, j = divmod(int(code), state.n)
        value = matrix[i, j] if matrix is not None else rng.random()
        state.record(i, j, float(value))
    return state


def planted_rank1(m, n, rng):
    u = rng.uniform(0.3, 1.0, m)
    v = rng.uniform(0.3, 1.0, n)
    s = np.outer(u, v)
    return s / s.max()


class TestAlsFit:
    def test_planted_rank1_recovery(self):
        rng = np.random.default_rng(0)
        s = planted_rank1(30, 40, rng)
        state = observe(ScoringState(30, 40), rng, fraction=0.4, matrix=s)
        pair = als_fit(state, state.mask.copy(), rank=1, stream=1)
        rel = np.linalg.norm(pair.predict() - s) / np.linalg.norm(s)
        assert rel < 1e-3

    def test_constant_matrix_is_rank_one(self):
        state = ScoringState(5, 7)
        rng = np.random.default_rng(1)
        for code in rng.permutation(35)[:20]:
            i, j = divmod(int(code), 7)
            state.record(i, j, 0.42)
        pair = als_fit(state, state.mask.copy(), rank=1, stream=2)
        assert np.abs(pair.predict()[state.mask] - 0.42).max() < 1e-6

    def test_single_point_fit(self):
        state = ScoringState(3, 3)
        state.record(0, 1, 0.8)
        pair = als_fit(state, state.mask.copy(), rank=1,
                       settings=AlsSettings(ridge=1e-6), stream=3)
        pred = pair.predict()
        assert abs(pred[0, 1] - 0.8) < 1e-3
        # rows and columns with no observations fall back to the fitted average
        assert np.all(np.isfinite(pred))
        assert abs(pred[2, 2] - pred[0, 1]) < 1e-3

    def test_objective_monotone_every_alternation(self):
        rng = np.random.default_rng(4)
        for seed in range(20):
            s = planted_rank1(12, 18, rng)
            state = observe(ScoringState(12, 18), rng, fraction=0.5, matrix=s)
            pair = als_fit(state, state.mask.copy(), rank=1, stream=seed)
            assert np.all(np.diff(pair.objective_history) <= 0.0)

    def test_member_mask_must_be_subset(self):
        state = ScoringState(3, 3)
        state.record(0, 0, 0.5)
        bad = np.ones((3, 3), dtype=bool)
        with pytest.raises(ValueError):
            als_fit(state, bad, rank=1, stream=0)

    def test_empty_member_mask_degenerate(self):
        state = ScoringState(3, 3)
        state.record(0, 0, 0.5)
        with pytest.raises(DegenerateSupportError):
            als_fit(state, np.zeros((3, 3), dtype=bool), rank=1, stream=0)

    def test_hidden_entries_do_not_participate(self):
        # An entry excluded from the member mask can disagree wildly without
        # moving the fit.
        rng = np.random.default_rng(5)
        s = planted_rank1(10, 12, rng)
        state = observe(ScoringState(10, 12), rng, fraction=0.6, matrix=s)
        member = state.mask.copy()
        victim = tuple(np.argwhere(member)[0])
        member[victim] = False
        pair = als_fit(state, member, rank=1, stream=6)
        state.observed[victim] = 1.0  # corrupt the hidden cell afterwards
        pair2 = als_fit(state, member, rank=1, stream=6)
        # kept-entry sums are computed as full minus hidden, so exclusion is
        # exact up to cancellation in the last bits
        assert np.allclose(pair.u, pair2.u, atol=1e-9)
        assert np.allclose(pair.v, pair2.v, atol=1e-9)

    def test_rank2_matrix_needs_rank2(self):
        rng = np.random.default_rng(7)
        s = 0.5 * planted_rank1(20, 25, rng) + 0.5 * planted_rank1(20, 25, rng)
        state = observe(ScoringState(20, 25), rng, fraction=0.7, matrix=s)
        r1 = als_fit(state, state.mask.copy(), rank=1, stream=8)
        r2 = als_fit(state, state.mask.copy(), rank=2, stream=8)
        err1 = np.linalg.norm(r1.predict() - s) / np.linalg.norm(s)
        err2 = np.linalg.norm(r2.predict() - s) / np.linalg.norm(s)
        assert err2 < err1


class TestFitEnsemble:
    def build_state(self, seed=0, m=6, n=8, count=24):
        rng = np.random.default_rng(seed)
        return observe(ScoringState(m, n), rng, count=count)

    def test_single_member_zero_uncertainty(self):
        state = self.build_state()
        cfg = AlgorithmConfig(budget_total=30, ensemble_size=1)
        ens = fit_ensemble(state, cfg, 0)
        assert np.all(ens.uncertainty == 0.0)

    def test_fully_observed_zero_uncertainty(self):
        rng = np.random.default_rng(1)
        state = observe(ScoringState(4, 5), rng, count=20)
        cfg = AlgorithmConfig(budget_total=20, ensemble_size=6)
        ens = fit_ensemble(state, cfg, 0)
        assert np.all(ens.uncertainty == 0.0)

    def test_uncertainty_zero_on_observed(self):
        state = self.build_state(seed=2)
        cfg = AlgorithmConfig(budget_total=30, ensemble_size=5)
        ens = fit_ensemble(state, cfg, 3)
        assert np.all(ens.uncertainty[state.mask] == 0.0)
        assert np.all(ens.uncertainty >= 0.0)

    def test_estimate_clamped(self):
        state = self.build_state(seed=3)
        cfg = AlgorithmConfig(budget_total=30, ensemble_size=5)
        ens = fit_ensemble(state, cfg, 4)
        assert ens.estimate.min() >= 0.0
        assert ens.estimate.max() <= 1.0

    def test_recoverable_input_low_uncertainty(self):
        # every row and column touched, exact rank-1: the completed estimate
        # reproduces the full matrix and the members agree
        rng = np.random.default_rng(6)
        s = planted_rank1(16, 20, rng)
        state = observe(ScoringState(16, 20), rng, fraction=0.5, matrix=s)
        cfg = AlgorithmConfig(budget_total=200, ensemble_size=16)
        ens = fit_ensemble(state, cfg, 5)
        assert ens.uncertainty[~state.mask].max() < 0.05
        rel = np.linalg.norm(ens.estimate - s) / np.linalg.norm(s)
        assert rel < 1e-3

    def test_seed_determinism_bit_identical(self):
        state = self.build_state(seed=7)
        cfg = AlgorithmConfig(budget_total=30, ensemble_size=8)
        a = fit_ensemble(state, cfg, 11)
        b = fit_ensemble(state, cfg, 11)
        assert np.array_equal(a.estimate, b.estimate)
        assert np.array_equal(a.uncertainty, b.uncertainty)
        for pa, pb in zip(a.members, b.members):
            assert np.array_equal(pa.u, pb.u)
            assert np.array_equal(pa.v, pb.v)

    def test_different_seeds_differ(self):
        state = self.build_state(seed=8)
        cfg = AlgorithmConfig(budget_total=30, ensemble_size=4)
        a = fit_ensemble(state, cfg, 1)
        b = fit_ensemble(state, cfg, 2)
        assert not np.array_equal(a.estimate, b.estimate)

    def test_member_count_and_dropout_share(self):
        state = self.build_state(seed=9, count=30)
        cfg = AlgorithmConfig(budget_total=40, ensemble_size=7, dropout_fraction=0.2)
        ens = fit_ensemble(state, cfg, 6)
        assert len(ens.members) == 7

    def test_no_observations_degenerate(self):
        state = ScoringState(3, 3)
        cfg = AlgorithmConfig(budget_total=5, ensemble_size=2)
        with pytest.raises(DegenerateSupportError):
            fit_ensemble(state, cfg, 0)

    def test_aggregation_matches_brute_force(self):
        # Direct formula evaluation over all i, j, c.
        rng = np.random.default_rng(10)
        for seed in range(10):
            state = observe(ScoringState(6, 8), rng, count=int(rng.integers(10, 40)))
            cfg = AlgorithmConfig(
                budget_total=48, ensemble_size=5, dropout_fraction=float(rng.uniform(0, 0.4))
            )
            ens = fit_ensemble(state, cfg, seed)
            preds = np.stack([p.predict() for p in ens.members])
            mean = preds.mean(axis=0)
            gate = 1.0 - state.mask.astype(float)
            spread = np.sqrt(np.mean((gate * (preds - mean)) ** 2, axis=0))
            assert np.abs(ens.estimate - np.clip(mean, 0, 1)).max() < 1e-12
            assert np.abs(ens.uncertainty - spread).max() < 1e-12


class TestGatedMeans:
    def test_fully_observed_row_ignores_estimate(self):
        rng = np.random.default_rng(0)
        state = ScoringState(2, 5)
        for j in range(5):
            state.record(0, j, float(rng.random()))
        state.record(1, 0, 0.5)
        wild = np.full((2, 5), 123.0)
        means = gated_means(state, wild)
        assert means[0] == state.row_mean(0)

    def test_nothing_observed_uses_estimate(self):
        state = ScoringState(3, 4)
        means = gated_means(state, np.full((3, 4), 0.5))
        assert np.allclose(means, 0.5, atol=1e-15)

    def test_hand_example(self):
        state = ScoringState(1, 4)
        state.record(0, 0, 1.0)
        state.record(0, 2, 0.0)
        estimate = np.array([[9.0, 0.6, 9.0, 0.2]])
        assert gated_means(state, estimate)[0] == pytest.approx(0.45, abs=1e-15)

    def test_shape_mismatch(self):
        state = ScoringState(2, 3)
        with pytest.raises(ValueError):
            gated_means(state, np.zeros((3, 2)))
