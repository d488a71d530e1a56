"""Alternating minimization: cost accounting, both step kinds, train/encode."""

import math
from dataclasses import replace

import numpy as np
import pytest

from cauchycsc import (
    CauchyPenalty,
    ConvergenceConditionError,
    FeatureMaps,
    FilterBank,
    FilterDegenerateError,
    HardPenalty,
    NumericDivergenceError,
    SoftPenalty,
    TrainConfig,
    cauchy_penalty,
    conv_full,
    encode,
    f_step,
    forward,
    prox_cauchy,
    prox_soft,
    reconstruct,
    total_cost,
    train,
    z_step,
)

from oracles import naive_forward


def spike_instance():
    """16x16 image made from a known unit 3x3 filter and a 3-spike map."""
    rng = np.random.default_rng(7)
    f_true = rng.standard_normal((3, 3))
    f_true /= np.linalg.norm(f_true)
    z_true = np.zeros((14, 14))
    z_true[2, 3] = 4.0
    z_true[9, 10] = -3.0
    z_true[6, 6] = 5.0
    return conv_full(f_true, z_true), f_true, z_true


class TestDomainTypes:
    def test_random_filters_are_unit_norm(self):
        bank = FilterBank.random(4, (5, 3), np.random.default_rng(0))
        np.testing.assert_allclose(bank.norms(), np.ones(4), atol=1e-12)
        assert bank.k == 4 and bank.filter_shape == (5, 3)

    def test_zero_maps_constructor(self):
        maps = FeatureMaps.zeros(3, (6, 7))
        assert maps.data.shape == (3, 6, 7)
        assert not maps.data.any()

    def test_wrong_rank_rejected(self):
        with pytest.raises(ValueError):
            FilterBank(np.ones((3, 3)))
        with pytest.raises(ValueError):
            FeatureMaps(np.ones(5))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(k=0)
        with pytest.raises(ValueError):
            TrainConfig(max_outer_iterations=0)
        with pytest.raises(ValueError):
            TrainConfig(eta_z=-0.1)

    def test_step_bound_checked_at_construction(self):
        TrainConfig(penalty=CauchyPenalty(0.5, 1.0), eta_z=2.0)  # == 8*gamma**2
        with pytest.raises(ConvergenceConditionError):
            TrainConfig(penalty=CauchyPenalty(0.5, 1.0), eta_z=2.0 + 1e-9)


class TestTotalCost:
    def test_zero_maps_cauchy(self):
        rng = np.random.default_rng(1)
        y = rng.standard_normal((8, 8))
        filters = FilterBank.random(2, (3, 3), rng)
        maps = FeatureMaps.zeros(2, (6, 6))
        cost, fidelity, penalty = total_cost(y, filters, maps, CauchyPenalty(1.0, 1.0))
        np.testing.assert_allclose(fidelity, float(np.sum(y * y)), rtol=1e-12)
        np.testing.assert_allclose(penalty, 2 * 36 * math.log(math.pi), rtol=1e-12)
        np.testing.assert_allclose(cost, fidelity + penalty, rtol=1e-9)

    def test_zero_maps_hard(self):
        rng = np.random.default_rng(2)
        y = rng.standard_normal((8, 8))
        filters = FilterBank.random(2, (3, 3), rng)
        maps = FeatureMaps.zeros(2, (6, 6))
        _, _, penalty = total_cost(y, filters, maps, HardPenalty(0.7))
        assert penalty == 0.0

    def test_matches_naive_summation(self):
        rng = np.random.default_rng(3)
        y = rng.standard_normal((7, 9))
        filters = rng.standard_normal((2, 3, 4))
        maps = rng.standard_normal((2, 5, 6))
        params = CauchyPenalty(0.6, 1.4)
        cost, fidelity, penalty = total_cost(y, filters, maps, params)

        residual = y - naive_forward(filters, maps)
        expected_fid = math.fsum(v * v for v in residual.ravel())
        expected_pen = math.fsum(
            cauchy_penalty(float(z), params) for z in maps.ravel()
        )
        np.testing.assert_allclose(fidelity, expected_fid, rtol=1e-10)
        np.testing.assert_allclose(penalty, expected_pen, rtol=1e-10)
        np.testing.assert_allclose(cost, expected_fid + expected_pen, rtol=1e-10)


class TestZStep:
    def test_no_commit_raises_cost(self):
        y, f_true, z_true = spike_instance()
        maps, _, trace = z_step(
            y, f_true[None], z_true[None], CauchyPenalty(0.5, 1.0), 2.0, 8
        )
        assert all(b <= a for a, b in zip(trace, trace[1:]))

    def test_identity_filter_matches_scalar_composition(self):
        # with f = [[1]], one inner iteration from zero maps is
        # prox applied to 2*eta*y, with prox weight eta*lam
        rng = np.random.default_rng(4)
        y = 4.0 * rng.standard_normal((2, 2))
        eta = 0.3
        params = CauchyPenalty(0.25, 1.0)
        maps, _, trace = z_step(
            y, np.ones((1, 1, 1)), np.zeros((1, 2, 2)), params, eta, 1
        )
        cost_zero = total_cost(y, np.ones((1, 1, 1)), np.zeros((1, 2, 2)), params)[0]
        assert trace[0] < cost_zero  # the update committed
        stepped = params.with_step(eta)
        for i in range(2):
            for j in range(2):
                expected = prox_cauchy(2.0 * eta * float(y[i, j]), stepped)
                assert maps.data[0, i, j] == expected

    def test_aggressive_hard_threshold_freezes_zero_maps(self):
        y, f_true, _ = spike_instance()
        maps, _, _ = z_step(
            y, f_true[None], np.zeros((1, 14, 14)), HardPenalty(1e6), 1e-2, 5
        )
        assert not maps.data.any()

    def test_rejected_update_restores_state_and_halves(self):
        # away from the fixed point a huge step overshoots and must be rejected
        y, f_true, z_true = spike_instance()
        before = 0.9 * z_true[None]
        maps, eta, _ = z_step(y, f_true[None], before.copy(), SoftPenalty(0.1), 64.0, 1)
        np.testing.assert_array_equal(maps.data, before)  # bit-identical restore
        assert eta == 32.0  # exactly halved

    def test_divergence_carries_trace(self):
        y, f_true, z_true = spike_instance()
        with np.errstate(over="ignore"):
            with pytest.raises(NumericDivergenceError) as info:
                z_step(y, f_true[None], z_true[None], SoftPenalty(0.1), 1e200, 3)
        assert isinstance(info.value.trace, list)


class TestFStep:
    def test_zero_residual_is_fixed_point(self):
        y, f_true, z_true = spike_instance()
        filters, _, trace = f_step(y, f_true[None], z_true[None], 1e-2, 4)
        np.testing.assert_allclose(filters.data, f_true[None], atol=1e-12)
        np.testing.assert_allclose(filters.norms(), [1.0], atol=1e-12)

    def test_converges_to_projected_minimizer(self):
        # y = [[2, 4]], single scalar map z = 2: the constrained minimizer of
        # ||y - 2f||^2 over unit-norm f is y normalized.
        y = np.array([[2.0, 4.0]])
        maps = np.array([[[2.0]]])
        start = FilterBank.random(1, (1, 2), np.random.default_rng(5))
        filters, _, trace = f_step(y, start, maps, 0.05, 400)
        expected = np.array([[1.0, 2.0]]) / math.sqrt(5.0)
        np.testing.assert_allclose(filters.data[0], expected, atol=1e-4)
        assert all(b <= a for a, b in zip(trace, trace[1:]))

    def test_trace_non_increasing(self):
        rng = np.random.default_rng(6)
        y = rng.standard_normal((10, 10))
        filters = FilterBank.random(3, (3, 3), rng)
        maps = rng.standard_normal((3, 8, 8))
        _, _, trace = f_step(y, filters, maps, 1e-2, 10)
        assert all(b <= a for a, b in zip(trace, trace[1:]))

    def test_collapse_to_zero_identified(self):
        y = np.array([[0.0]])
        with pytest.raises(FilterDegenerateError) as info:
            f_step(y, np.ones((1, 1, 1)), np.ones((1, 1, 1)), 0.5, 1)
        assert info.value.k == 0

    def test_unit_norms_after_commits(self):
        rng = np.random.default_rng(8)
        y = rng.standard_normal((9, 9))
        filters = FilterBank.random(2, (4, 4), rng)
        maps = rng.standard_normal((2, 6, 6))
        out, _, _ = f_step(y, filters, maps, 5e-3, 12)
        np.testing.assert_allclose(out.norms(), np.ones(2), atol=1e-12)


class TestTrain:
    def test_zero_image_dataset(self):
        config = TrainConfig(
            penalty=CauchyPenalty(1.0, 1.0), k=2, filter_shape=(3, 3),
            max_outer_iterations=3, seed=11,
        )
        report = train([np.zeros((10, 10))], config)
        init = FilterBank.random(2, (3, 3), np.random.default_rng(11))
        np.testing.assert_allclose(report.filters.data, init.data, atol=1e-12)
        assert not report.maps[0].data.any()
        assert report.final.psnr == 99.0

    def test_cost_non_increasing_and_consistent(self):
        y, _, _ = spike_instance()
        config = TrainConfig(
            penalty=CauchyPenalty(3.0, 1.0), k=1, filter_shape=(3, 3),
            max_outer_iterations=12,
        )
        report = train([y], config)
        costs = [s.cost for s in report.iterations]
        assert all(b <= a for a, b in zip(costs, costs[1:]))
        for s in report.iterations:
            np.testing.assert_allclose(s.cost, s.fidelity + s.penalty, rtol=1e-9)
            assert 0.0 <= s.nonzero_fraction <= 1.0

    def test_fidelity_drops_substantially(self):
        y, _, _ = spike_instance()
        config = TrainConfig(
            penalty=CauchyPenalty(3.0, 1.0), k=1, filter_shape=(3, 3),
            max_outer_iterations=25,
        )
        report = train([y], config)
        assert report.final.fidelity < 0.25 * float(np.sum(y * y))

    def test_deterministic_across_runs(self):
        y, _, _ = spike_instance()
        config = TrainConfig(
            penalty=CauchyPenalty(3.0, 1.0), k=2, filter_shape=(3, 3),
            max_outer_iterations=5, seed=3,
        )
        a = train([y], config)
        b = train([y], config)
        assert [s.cost for s in a.iterations] == [s.cost for s in b.iterations]
        np.testing.assert_array_equal(a.filters.data, b.filters.data)
        np.testing.assert_array_equal(a.maps[0].data, b.maps[0].data)

    def test_multi_image_shares_filters(self):
        rng = np.random.default_rng(9)
        dataset = [rng.standard_normal((10, 10)) for _ in range(3)]
        config = TrainConfig(
            penalty=CauchyPenalty(1.0, 1.0), k=2, filter_shape=(3, 3),
            max_outer_iterations=4,
        )
        report = train(dataset, config)
        assert len(report.maps) == 3
        assert report.filters.data.shape == (2, 3, 3)
        assert not np.array_equal(report.maps[0].data, report.maps[1].data)

    def test_gamma_estimated_when_unset(self):
        rng = np.random.default_rng(10)
        y = rng.standard_normal((12, 12)) * 5
        config = TrainConfig(k=1, filter_shape=(3, 3), max_outer_iterations=2)
        report = train([y], config)
        assert report.gamma_used is not None and report.gamma_used > 0

    def test_gamma_echoed_when_explicit(self):
        y, _, _ = spike_instance()
        config = TrainConfig(
            penalty=CauchyPenalty(0.75, 1.0), k=1, filter_shape=(3, 3),
            max_outer_iterations=2,
        )
        assert train([y], config).gamma_used == 0.75

    def test_no_gamma_for_baselines(self):
        y, _, _ = spike_instance()
        config = TrainConfig(
            penalty=SoftPenalty(0.05), k=1, filter_shape=(3, 3),
            max_outer_iterations=2,
        )
        assert train([y], config).gamma_used is None

    def test_estimated_gamma_step_guard(self):
        # pixels {-3, 3} estimate gamma = 3, so the bound is 72
        y = np.array([[3.0, -3.0], [-3.0, 3.0]])
        config = TrainConfig(
            k=1, filter_shape=(1, 1), max_outer_iterations=1, eta_z=73.0
        )
        with pytest.raises(ConvergenceConditionError):
            train([y], config)

    def test_inconsistent_shapes_rejected(self):
        config = TrainConfig(k=1, filter_shape=(3, 3), max_outer_iterations=1)
        with pytest.raises(ValueError):
            train([np.ones((8, 8)), np.ones((9, 9))], config)

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            train([], TrainConfig())

    def test_cauchy_avoids_exact_zeros_unlike_thresholding(self):
        # coefficients end near zero, not locked on it
        y, _, _ = spike_instance()
        config = TrainConfig(
            penalty=CauchyPenalty(0.5, 1.0), k=1, filter_shape=(3, 3),
            max_outer_iterations=100,
        )
        report = train([y], config)
        filters0 = FilterBank.random(1, (3, 3), np.random.default_rng(config.seed))
        from cauchycsc import corr_valid_bank

        touched = np.abs(-2.0 * corr_valid_bank(y, filters0.data)) > 0.0
        z = report.maps[0].data
        frac_exact_zero_touched = float(np.mean((z == 0.0) & touched))
        frac_near_zero = float(np.mean(np.abs(z) <= 1e-3))
        assert frac_exact_zero_touched < frac_near_zero


class TestEncodeReconstruct:
    def test_reconstruct_delegates_to_forward(self):
        rng = np.random.default_rng(12)
        filters = rng.standard_normal((2, 3, 3))
        maps = rng.standard_normal((2, 6, 6))
        np.testing.assert_array_equal(
            reconstruct(FilterBank(filters), FeatureMaps(maps)),
            forward(filters, maps),
        )

    def test_encode_beats_zero_maps(self):
        y, f_true, z_true = spike_instance()
        config = TrainConfig(
            penalty=CauchyPenalty(1.0, 1.0), k=1, filter_shape=(3, 3),
            max_outer_iterations=10,
        )
        maps = encode(y, f_true[None], config)
        fidelity = float(np.sum((y - forward(f_true[None], maps.data)) ** 2))
        assert fidelity <= float(np.sum(y * y))

    def test_zero_image_encodes_to_zero_maps(self):
        config = TrainConfig(
            penalty=CauchyPenalty(1.0, 1.0), k=2, filter_shape=(3, 3),
            max_outer_iterations=3,
        )
        filters = FilterBank.random(2, (3, 3), np.random.default_rng(0))
        maps = encode(np.zeros((9, 9)), filters, config)
        assert not maps.data.any()

    def test_identity_filter_soft_matches_scalar_iteration(self):
        rng = np.random.default_rng(13)
        y = rng.standard_normal((2, 2))
        lam, eta, iterations = 0.2, 0.1, 20
        config = TrainConfig(
            penalty=SoftPenalty(lam), k=1, filter_shape=(1, 1),
            max_outer_iterations=5, z_inner_iterations=4, eta_z=eta,
        )
        maps = encode(y, np.ones((1, 1, 1)), config)

        # scalar re-implementation of the same committed iteration
        z = np.zeros((2, 2))
        cost = float(np.sum((y - z) ** 2)) + lam * float(np.sum(np.abs(z)))
        step = eta
        for _ in range(iterations):
            candidate = np.empty_like(z)
            for i in range(2):
                for j in range(2):
                    moved = z[i, j] + 2.0 * step * (y[i, j] - z[i, j])
                    candidate[i, j] = prox_soft(float(moved), lam)
            new_cost = float(np.sum((y - candidate) ** 2)) + lam * float(
                np.sum(np.abs(candidate))
            )
            if new_cost > cost:
                step *= 0.5
            else:
                z, cost = candidate, new_cost
        np.testing.assert_allclose(maps.data[0], z, rtol=1e-12, atol=1e-15)
