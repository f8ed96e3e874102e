"""Tests for the active beamformer solvers."""

import math

import numpy as np
import pytest

from ris_noma.beamforming.active import (
    ActiveMethod,
    active_power_min,
    meets_targets,
    quasi_degraded,
    solve_active_power_min,
    wsr_active_step,
)
from ris_noma.beamforming.sinr import BeamformerSet, sic_condition, sic_rate_triple
from ris_noma.errors import DimensionError, DomainError, InfeasibleError
from tests.conftest import gaussian, grid_power_oracle


class TestPowerMinimization:
    """Test cases for minimum-power beamformers."""

    def test_orthogonal_with_sic(self):
        """Orthogonal unit channels cost sigma (2 t_m + t_n + t_m t_n)."""
        t_m, t_n, noise = 1.5, 2.0, 0.5
        solution = solve_active_power_min(np.array([1, 0, 0]), np.array([0, 1, 0]), (t_m, t_n), noise)
        assert solution.power == pytest.approx(noise * (2 * t_m + t_n + t_m * t_n), rel=1e-9)
        assert solution.certified

    def test_orthogonal_without_sic(self):
        """Dropping the cancellation constraint leaves sigma (t_m + t_n)."""
        bfs = active_power_min(np.array([1, 0]), np.array([0, 1]), (1.5, 2.0), 0.5, enforce_sic=False)
        assert bfs.total_power == pytest.approx(0.5 * 3.5, rel=1e-9)

    def test_vanishing_strong_target(self):
        """A tiny target for user n leaves w_n nearly silent."""
        rng = np.random.default_rng(2)
        h_m, h_n = gaussian(rng, 3), gaussian(rng, 3)
        solution = solve_active_power_min(h_m, h_n, (1.0, 1e-9))
        assert np.sum(np.abs(solution.beamformers[1]) ** 2) < 1e-6

    def test_collinear_weaker_n_is_infeasible(self):
        """|h_n| < |h_m| on one direction cannot support SIC at user n."""
        h_m = np.array([1.0 + 1j, 0.5])
        with pytest.raises(InfeasibleError) as excinfo:
            solve_active_power_min(h_m, 0.5 * h_m, (1.0, 1.0))
        assert excinfo.value.report["kappa"] == pytest.approx(0.5)

    def test_collinear_stronger_n_is_certified(self):
        """|h_n| = 2 |h_m| on one direction meets every constraint."""
        h_m = np.array([1.0 + 1j, 0.5])
        solution = solve_active_power_min(h_m, 2 * h_m, (1.0, 2.0), 0.7)
        assert solution.certified
        assert meets_targets(h_m, 2 * h_m, solution.beamformers, (1.0, 2.0), 0.7)

    @pytest.mark.parametrize("seed", range(5))
    def test_structured_beats_direction_grid(self, seed):
        """The structured solution is no worse than a 40 x 40 direction grid."""
        rng = np.random.default_rng(seed)
        h_m, h_n = gaussian(rng, 2), gaussian(rng, 2)
        targets, noise = (1.0, 2.0), 0.5
        solution = solve_active_power_min(h_m, h_n, targets, noise)
        assert solution.certified
        assert solution.power <= grid_power_oracle(h_m, h_n, targets, noise) * 1.001 + 1e-9

    @pytest.mark.parametrize("seed", range(3))
    def test_relaxation_bounds_structured(self, seed):
        """The semidefinite value bounds the structured power from below."""
        rng = np.random.default_rng(10 + seed)
        h_m, h_n = gaussian(rng, 3), gaussian(rng, 3)
        structured = solve_active_power_min(h_m, h_n, (1.0, 1.0))
        relaxed = solve_active_power_min(h_m, h_n, (1.0, 1.0), method=ActiveMethod.RELAXATION, seed=seed)
        assert relaxed.lower_bound <= structured.power * (1 + 1e-3)
        assert relaxed.certified
        assert relaxed.power <= structured.power + 1e-12
        assert relaxed.gap is not None

    def test_sic_holds_on_solution(self):
        """The returned pair lets user n cancel user m."""
        rng = np.random.default_rng(4)
        h_m, h_n = gaussian(rng, 4), gaussian(rng, 4)
        bfs = active_power_min(h_m, h_n, (2.0, 1.0))
        assert sic_condition(sic_rate_triple(h_m, h_n, bfs[0], bfs[1], 1.0), tolerance=1e-6)

    def test_quasi_degraded_is_bool(self):
        """The degradedness check reports a plain bool."""
        rng = np.random.default_rng(5)
        assert isinstance(quasi_degraded(gaussian(rng, 2), gaussian(rng, 2), (1.0, 1.0)), bool)

    def test_invalid_inputs(self):
        """Targets, noise and channel shapes are validated."""
        with pytest.raises(DomainError):
            solve_active_power_min(np.ones(2), np.array([0, 1]), (0.0, 1.0))
        with pytest.raises(DomainError):
            solve_active_power_min(np.ones(2), np.array([0, 1]), (1.0, 1.0), noise=0.0)
        with pytest.raises(DomainError):
            solve_active_power_min(np.zeros(2), np.array([0, 1]), (1.0, 1.0))
        with pytest.raises(DimensionError):
            solve_active_power_min(np.ones(2), np.ones(3), (1.0, 1.0))


class TestWeightedSumRateStep:
    """Test cases for the budgeted weighted-sum-rate beamformers."""

    @pytest.mark.parametrize("seed", range(4))
    def test_value_matches_rates(self, seed):
        """The reported value is the weighted rate of the returned beamformers."""
        rng = np.random.default_rng(seed)
        h_m, h_n = gaussian(rng, 3), gaussian(rng, 3)
        weights, power, noise = (0.6, 0.4), 5.0, 0.8
        bfs, value = wsr_active_step(h_m, h_n, weights, power, noise)
        triple = sic_rate_triple(h_m, h_n, bfs[0], bfs[1], noise)
        assert value == pytest.approx(0.6 * triple.r_mm + 0.4 * triple.r_nn, abs=1e-9)
        assert bfs.within_budget(power)
        assert sic_condition(triple, tolerance=1e-9)

    def test_beats_serving_n_alone(self):
        """Matched filtering toward user n alone is one of the candidates."""
        rng = np.random.default_rng(9)
        h_m, h_n = gaussian(rng, 2), gaussian(rng, 2)
        _, value = wsr_active_step(h_m, h_n, (0.3, 0.7), 4.0)
        baseline = 0.7 * math.log2(1 + 4.0 * float(np.vdot(h_n, h_n).real))
        assert value >= baseline - 1e-9

    def test_zero_budget(self):
        """No power, no rate."""
        bfs, value = wsr_active_step(np.array([1, 0]), np.array([0, 1]), (0.5, 0.5), 0.0)
        assert value == 0.0
        assert isinstance(bfs, BeamformerSet)
        assert bfs.total_power == 0.0

    def test_negative_budget(self):
        """A negative budget is rejected."""
        with pytest.raises(DomainError):
            wsr_active_step(np.array([1, 0]), np.array([0, 1]), (0.5, 0.5), -1.0)
