"""Tests for the four detectors and the ternary quantizer."""

import numpy as np
import pytest

from soavmud.detectors import (
    DetectorConfig,
    EnumerationBoundError,
    exhaustive_map,
    lasso,
    lmmse,
    map_lattice_objective,
    map_soav,
    run_detector,
    threshold_map,
)
from soavmud.model import (
    SymbolPrior,
    SystemInstance,
    bpsk_prior,
    gaussian_matrix,
    substream,
    synthesize,
)
from soavmud.optim import SolverConfig
from soavmud.soav import default_offset, soav_objective, solve_weights

BINARY = SymbolPrior(alphabet=(-1.0, 1.0), probs=(0.5, 0.5))  # rho -> 0 limit


def scalar_instance(y, sigma_w2=1.0, b=1.0):
    return SystemInstance(
        S=[[1.0]], gains=[1.0], sigma_w2=sigma_w2, b=[b], w=[0.0], y=[y]
    )


class TestThresholdMap:
    def test_half_open_boundaries(self):
        raw = [-0.51, -0.5, 0.49, 0.5]
        np.testing.assert_array_equal(threshold_map(raw, 0.5), [-1, 0, 0, 1])

    def test_zero_vector_maps_to_zero(self):
        np.testing.assert_array_equal(threshold_map(np.zeros(5), 0.5), np.zeros(5))

    def test_lattice_points_are_fixed(self):
        lattice = np.array([-1.0, 0.0, 1.0, 1.0, -1.0])
        np.testing.assert_array_equal(threshold_map(lattice, 0.5), lattice)

    def test_idempotent(self):
        rng = np.random.default_rng(0)
        raw = rng.uniform(-2, 2, size=300)
        once = threshold_map(raw, 0.5)
        np.testing.assert_array_equal(threshold_map(once, 0.5), once)

    def test_rejects_nonpositive_alpha(self):
        with pytest.raises(ValueError):
            threshold_map([0.0], 0.0)


class TestLmmse:
    def test_scalar_formula(self):
        result = lmmse(scalar_instance(y=1.0), BINARY)
        assert result.raw[0] == pytest.approx(0.5, rel=1e-12)

    def test_huge_noise_shrinks_to_zero(self):
        rng = np.random.default_rng(1)
        prior = bpsk_prior(0.5)
        inst = synthesize(prior, gaussian_matrix(7, 10, rng), np.ones(10), 1e6, rng)
        result = lmmse(inst, prior)
        assert np.linalg.norm(result.raw) < 1e-3 * np.linalg.norm(inst.y)

    def test_orthonormal_rows_low_noise_limit(self):
        rng = np.random.default_rng(2)
        q, _ = np.linalg.qr(rng.standard_normal((10, 10)))
        S = q[:6]
        inst = synthesize(BINARY, S, np.ones(10), 1e-6, rng, noiseless=True)
        result = lmmse(inst, BINARY)
        np.testing.assert_allclose(result.raw, S.T @ inst.y, atol=1e-4)

    def test_raw_output_linear_in_y(self):
        rng = np.random.default_rng(3)
        prior = bpsk_prior(0.8)
        S = gaussian_matrix(7, 10, rng)
        base = synthesize(prior, S, np.ones(10), 0.3, rng)
        y1 = rng.standard_normal(7)
        y2 = rng.standard_normal(7)

        def raw_for(y):
            inst = SystemInstance(S=S, gains=np.ones(10), sigma_w2=0.3,
                                  b=base.b, w=base.w, y=y)
            return lmmse(inst, prior).raw

        np.testing.assert_allclose(
            raw_for(y1 + y2), raw_for(y1) + raw_for(y2), atol=1e-10
        )


class TestLasso:
    def test_zero_measurement_returns_zero(self):
        inst = SystemInstance(S=np.eye(4), gains=np.ones(4), sigma_w2=1.0,
                              b=np.ones(4), w=np.zeros(4), y=np.zeros(4))
        result = lasso(inst, DetectorConfig(kind="lasso"))
        np.testing.assert_array_equal(result.raw, np.zeros(4))

    def test_scalar_subgradient_solution(self):
        # min 0.5 (2 - x)^2 + |x|: stationarity at x = 1.
        result = lasso(scalar_instance(y=2.0), DetectorConfig(kind="lasso", lam=0.5))
        assert result.raw[0] == pytest.approx(1.0, abs=1e-6)

    def test_beats_random_probes(self):
        rng = np.random.default_rng(4)
        prior = bpsk_prior(0.8)
        inst = synthesize(prior, gaussian_matrix(7, 10, rng), np.ones(10), 0.05, rng)
        config = DetectorConfig(kind="lasso")
        result = lasso(inst, config)

        def objective(x):
            resid = inst.y - inst.mix @ x
            return config.lam * float(resid @ resid) + float(np.abs(x).sum())

        best_probe = min(
            objective(rng.uniform(-1.5, 1.5, size=10)) for _ in range(10_000)
        )
        assert objective(result.raw) <= best_probe + 1e-9


class TestMapSoav:
    def test_near_exact_recovery_orthonormal(self):
        prior = bpsk_prior(0.8)
        config = DetectorConfig(kind="map_soav")
        for trial in range(100):
            rng = substream(777, trial)
            q, _ = np.linalg.qr(rng.standard_normal((20, 20)))
            inst = synthesize(prior, q, np.ones(20), 1e-6, rng, noiseless=True)
            result = map_soav(inst, prior, config)
            np.testing.assert_array_equal(result.decided, inst.b)

    def test_zero_measurement_symmetric_weights_fixed_point(self):
        prior = bpsk_prior(0.8)
        inst = SystemInstance(S=np.eye(6), gains=np.ones(6), sigma_w2=0.5,
                              b=np.ones(6), w=np.zeros(6), y=np.zeros(6))
        result = map_soav(inst, prior, DetectorConfig(kind="map_soav"))
        np.testing.assert_array_equal(result.raw, np.zeros(6))

    def test_exact_prox_path_matches_closed_form_when_convex(self):
        prior = bpsk_prior(0.8)
        rng = np.random.default_rng(6)
        inst = synthesize(prior, gaussian_matrix(7, 10, rng), np.ones(10), 0.05, rng)
        closed = map_soav(inst, prior, DetectorConfig(kind="map_soav"))
        exact = map_soav(inst, prior, DetectorConfig(kind="map_soav", exact_prox=True))
        np.testing.assert_allclose(exact.raw, closed.raw, atol=1e-9)

    def test_paired_trials_beat_lasso_on_sparse_prior(self):
        # 500 paired realizations at N=10, M=7, rho=0.8, SNR 14 dB.
        prior = bpsk_prior(0.8)
        sigma_w2 = 10 * 0.2 / 7 * 10 ** (-1.4)
        soav_cfg = DetectorConfig(kind="map_soav")
        lasso_cfg = DetectorConfig(kind="lasso")
        soav_errors = lasso_errors = 0
        for trial in range(500):
            rng = substream(4242, trial)
            inst = synthesize(
                prior, gaussian_matrix(7, 10, rng), np.ones(10), sigma_w2, rng
            )
            soav_errors += np.count_nonzero(
                map_soav(inst, prior, soav_cfg).decided != inst.b
            )
            lasso_errors += np.count_nonzero(
                lasso(inst, lasso_cfg).decided != inst.b
            )
        assert soav_errors < lasso_errors

    def test_rejects_non_ternary_prior(self):
        from soavmud.soav import UnsupportedAlphabetError

        inst = scalar_instance(y=0.5)
        with pytest.raises(UnsupportedAlphabetError):
            map_soav(inst, BINARY, DetectorConfig(kind="map_soav"))


class TestExhaustiveMap:
    def test_three_candidate_hand_enumeration(self):
        prior = bpsk_prior(0.8)
        inst = scalar_instance(y=0.9, sigma_w2=0.1)
        logp = np.log(prior.probs)

        def by_hand(x):
            mismatch = sum(lp for r, lp in zip(prior.alphabet, logp) if x != r)
            return (0.9 - x) ** 2 / (2 * 0.1) + mismatch

        values = {x: by_hand(x) for x in (-1.0, 0.0, 1.0)}
        winner = min(values, key=values.get)
        result = exhaustive_map(inst, prior)
        assert result.decided[0] == winner == 1.0

    def test_noiseless_injective_recovers_exactly(self):
        prior = bpsk_prior(0.5)
        rng = np.random.default_rng(8)
        S = gaussian_matrix(8, 8, rng)
        inst = synthesize(prior, S, np.ones(8), 0.01, rng, noiseless=True)
        result = exhaustive_map(inst, prior)
        np.testing.assert_array_equal(result.decided, inst.b)

    def test_minimizes_over_full_lattice(self):
        from itertools import product

        prior = bpsk_prior(0.7)
        rng = np.random.default_rng(9)
        inst = synthesize(prior, gaussian_matrix(5, 6, rng), np.ones(6), 0.2, rng)
        result = exhaustive_map(inst, prior)
        best = map_lattice_objective(result.decided, inst, prior)
        for combo in product(prior.alphabet, repeat=6):
            assert best <= map_lattice_objective(np.array(combo), inst, prior) + 1e-9

    def test_dropping_constant_terms_keeps_argmin(self):
        # The per-candidate prior term differs from -sum_n log p(x_n) by a
        # constant, so both rankings must select the same lattice vector.
        from itertools import product

        prior = bpsk_prior(0.7)
        rng = np.random.default_rng(10)
        inst = synthesize(prior, gaussian_matrix(5, 6, rng), np.ones(6), 0.2, rng)
        logp = dict(zip(prior.alphabet, np.log(prior.probs)))

        def reduced(x):
            resid = inst.y - inst.mix @ np.asarray(x)
            return float(resid @ resid) / (2 * inst.sigma_w2) - sum(
                logp[v] for v in x
            )

        lattice = list(product(prior.alphabet, repeat=6))
        full_argmin = min(lattice, key=lambda x: map_lattice_objective(np.array(x), inst, prior))
        reduced_argmin = min(lattice, key=reduced)
        assert full_argmin == reduced_argmin

    def test_enumeration_bound_guard(self):
        prior = bpsk_prior(0.5)
        rng = np.random.default_rng(11)
        inst = synthesize(prior, gaussian_matrix(4, 16, rng), np.ones(16), 0.1, rng)
        with pytest.raises(EnumerationBoundError):
            exhaustive_map(inst, prior)


class TestCommonContracts:
    def test_all_decisions_live_on_the_alphabet(self):
        prior = bpsk_prior(0.8)
        rng = np.random.default_rng(12)
        inst = synthesize(prior, gaussian_matrix(6, 8, rng), np.ones(8), 0.1, rng)
        for kind in ("lmmse", "lasso", "map_soav", "exhaustive_map"):
            result = run_detector(inst, prior, DetectorConfig(kind=kind))
            assert np.all(np.isin(result.decided, prior.alphabet))

    def test_dispatch_matches_direct_calls(self):
        prior = bpsk_prior(0.8)
        rng = np.random.default_rng(13)
        inst = synthesize(prior, gaussian_matrix(6, 8, rng), np.ones(8), 0.1, rng)
        config = DetectorConfig(kind="lmmse")
        np.testing.assert_array_equal(
            run_detector(inst, prior, config).raw, lmmse(inst, prior).raw
        )

    def test_solver_iterations_respect_budget(self):
        prior = bpsk_prior(0.8)
        rng = np.random.default_rng(14)
        inst = synthesize(prior, gaussian_matrix(6, 8, rng), np.ones(8), 0.1, rng)
        config = DetectorConfig(
            kind="map_soav", solver=SolverConfig(max_iters=37, rel_tol=0.0)
        )
        result = map_soav(inst, prior, config)
        assert result.diagnostics.iterations == 37

    def test_soav_solution_objective_not_worse_than_truth(self):
        prior = bpsk_prior(0.8)
        weights = solve_weights(prior, default_offset(prior))
        rng = np.random.default_rng(15)
        inst = synthesize(prior, gaussian_matrix(14, 20, rng), np.ones(20), 0.05, rng)
        result = map_soav(inst, prior, DetectorConfig(kind="map_soav"))
        assert soav_objective(result.raw, inst, weights, prior) <= soav_objective(
            inst.b, inst, weights, prior
        ) + 1e-6

    def test_config_validation(self):
        with pytest.raises(ValueError):
            DetectorConfig(kind="zf")
        with pytest.raises(ValueError):
            DetectorConfig(kind="lasso", lam=0.0)
        with pytest.raises(ValueError):
            DetectorConfig(kind="lmmse", alpha=1.0)
