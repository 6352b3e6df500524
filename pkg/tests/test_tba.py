"""
Tests para el solver TBA: constantes de alta temperatura, iteración de
punto fijo, energía libre, densidades y barrido.
"""

import math

import numpy as np
import pytest

from app.config.settings import RunConfig
from app.core.exceptions import (
    InvalidParameterError,
    NonFiniteStateError,
    TailToleranceError,
    UnconvergedStateError,
)
from app.physics import exact, tba


@pytest.fixture
def solved_afm(small_config):
    """Punto fijo a T = 1, J = −1 sobre la malla reducida."""
    return tba.solve(small_config, beta=1.0, J=-1.0)


class TestHighTemperatureConstants:
    """Tests para η_m = m(m+3)/2 y su recursión."""

    def test_first_values(self):
        assert list(tba.high_t_constants(4)) == [2.0, 5.0, 9.0, 14.0]

    @pytest.mark.parametrize("m_trunc", [0, -3, 2.5])
    def test_invalid_truncation(self, m_trunc):
        with pytest.raises(InvalidParameterError):
            tba.high_t_constants(m_trunc)

    def test_recursion_holds(self):
        assert tba.high_t_recursion_residual(49) < 1e-12

    def test_infinite_temperature_is_fixed_point(self, small_config):
        state = tba.initialize_eta(small_config, beta=0.0, J=1.0)
        assert tba.iterate_once(state).residual < 1e-10

    def test_unreduced_form_at_infinite_temperature(self, small_config):
        """Σ_l min(m, l) ln(1+η_l⁻¹) = ln(1+η_m), incluida la cola l > M."""
        state = tba.initialize_eta(small_config, beta=0.0, J=1.0)
        assert tba.residual_unreduced(state, m_max=3) < 1e-10

    def test_high_t_series(self):
        assert tba.free_energy_high_t_series(0.01, -1.0) == pytest.approx(
            -100.0 * math.log(3.0) + 5.0 / 27.0
        )

    def test_high_t_series_rejects_zero_beta(self):
        with pytest.raises(InvalidParameterError):
            tba.free_energy_high_t_series(0.0, 1.0)


class TestSolverGrid:
    """Tests para la malla dependiente de M."""

    def test_default_grid_grows_with_truncation(self):
        config = RunConfig()
        grid = tba.solver_grid(config, 30)
        assert grid.half_extent == pytest.approx(360.0)
        assert grid.points == 8192
        wide = tba.solver_grid(config, 60)
        assert wide.half_extent == pytest.approx(720.0)
        assert wide.spacing <= config.grid.max_spacing

    def test_configured_grid_is_a_floor(self):
        config = RunConfig.from_dict({"grid": {"half_extent": 50.0, "points": 2048}})
        grid = tba.solver_grid(config, 2)
        assert grid.half_extent == pytest.approx(50.0)
        assert grid.points == 2048


class TestClosure:
    """Tests para el cierre lineal de la escalera de strings."""

    @pytest.mark.parametrize("M", [2, 12, 30, 60])
    def test_zero_mode_is_exact_ratio(self, M):
        assert tba.closure_multiplier(M, 0.0) == pytest.approx(tba._closure_ratio(M), rel=1e-12)

    @pytest.mark.parametrize("k", [0.05, 0.9, 4.0])
    def test_backward_recursion(self, k):
        M = 20
        m = M + 1
        c = (2.0 * math.cosh(k / 2.0) * (m + 1) * (m + 2) - 2.0) / (m * (m + 3))
        expected = 1.0 / (c - tba.closure_multiplier(M + 1, k))
        assert tba.closure_multiplier(M, k) == pytest.approx(expected, rel=1e-10)

    def test_decreasing_in_k(self):
        k = np.linspace(0.0, 40.0, 401)
        values = tba.closure_multiplier(30, k)
        assert np.all(np.diff(values) < 0)
        assert np.all(values > 0)
        assert np.all(np.isfinite(tba.closure_multiplier(30, np.array([1e3, 1e4]))))

    def test_invalid_truncation(self):
        with pytest.raises(InvalidParameterError):
            tba.closure_multiplier(0, 1.0)

    def test_linearized_map_matches_finite_difference(self, solved_afm):
        tba_map = tba._tba_map(solved_afm.grid, solved_afm.m_trunc, solved_afm.beta, solved_afm.J)
        nodes = solved_afm.grid.nodes
        m = np.arange(1, solved_afm.m_trunc + 1)[:, None]
        v = np.exp(-(nodes[None, :] / (2.0 + m)) ** 2) / m
        x = solved_afm.log_eta
        eps = 1e-6
        derivative = (tba_map(x + eps * v) - tba_map(x - eps * v)) / (2.0 * eps)
        linear = v.ravel() - tba_map.linearized(x)(v)
        assert np.max(np.abs(derivative.ravel() - linear)) < 1e-7


class TestFixedPoint:
    """Tests para initialize_eta, iterate_once y solve."""

    def test_initial_state_shape(self, small_config):
        state = tba.initialize_eta(small_config, beta=0.5, J=-1.0)
        assert state.log_eta.shape == (12, 4096)
        assert state.grid.half_extent == pytest.approx(144.0)
        assert state.temperature == pytest.approx(2.0)
        assert not state.converged

    def test_initialize_rejects_negative_beta(self, small_config):
        with pytest.raises(InvalidParameterError):
            tba.initialize_eta(small_config, beta=-1.0, J=1.0)

    def test_truncation_follows_temperature(self):
        config = RunConfig.from_dict({
            "grid": {"half_extent": 10.0, "points": 256},
            "solver": {"m_trunc": 8, "m_trunc_low_t": 16, "low_t_threshold": 0.1},
        })
        assert tba.initialize_eta(config, beta=1.0, J=1.0).m_trunc == 8
        assert tba.initialize_eta(config, beta=50.0, J=1.0).m_trunc == 16

    def test_iterate_once_bookkeeping(self, small_config):
        state = tba.initialize_eta(small_config, beta=1.0, J=-1.0)
        stepped = tba.iterate_once(state, damping=0.3)
        assert stepped.iterations == 1
        assert stepped.damping == 0.3
        assert stepped.residual_history == [stepped.residual]
        assert stepped.residual > 0

    def test_iterate_once_reuses_map(self, small_config):
        tba._tba_map.cache_clear()
        state = tba.initialize_eta(small_config, beta=1.0, J=-1.0)
        tba.iterate_once(tba.iterate_once(state))
        info = tba._tba_map.cache_info()
        assert info.misses == 1
        assert info.hits == 1

    def test_high_temperature_converges_quickly(self, small_config):
        state = tba.solve(small_config, beta=0.01, J=-1.0)
        assert state.converged
        assert state.iterations < 50

    def test_newton_phase_finishes_the_solve(self, solved_afm, small_config):
        history = solved_afm.residual_history
        switch = next(i for i, r in enumerate(history) if r < small_config.solver.newton_switch)
        assert len(history) - switch < 15

    def test_iterate_once_non_finite(self, small_config):
        state = tba.initialize_eta(small_config, beta=1.0, J=-1.0)
        state.log_eta[0, 0] = np.nan
        with pytest.raises(NonFiniteStateError):
            tba.iterate_once(state)

    def test_solve_converges(self, solved_afm, small_config):
        assert solved_afm.converged
        assert solved_afm.residual < small_config.solver.tolerance
        assert solved_afm.iterations == len(solved_afm.residual_history)

    def test_solution_is_even(self, solved_afm):
        assert solved_afm.symmetry_defect() < 1e-10

    def test_tails_reach_constants(self, solved_afm):
        assert solved_afm.tail_defect() < 1e-6

    def test_check_tails(self, solved_afm):
        tba.check_tails(solved_afm, 1e-6)
        with pytest.raises(TailToleranceError):
            tba.check_tails(solved_afm, 1e-30)

    def test_unconverged_state_is_returned(self, small_config):
        config = small_config.with_overrides(solver__max_iter=2)
        state = tba.solve(config, beta=1.0, J=-1.0)
        assert not state.converged
        assert state.iterations == 2


class TestFreeEnergy:
    """Tests para free_energy."""

    def test_requires_convergence(self, small_config):
        state = tba.initialize_eta(small_config, beta=1.0, J=-1.0)
        with pytest.raises(UnconvergedStateError):
            tba.free_energy(state)

    def test_requires_finite_temperature(self, small_config):
        state = tba.initialize_eta(small_config, beta=0.0, J=-1.0)
        state.converged = True
        with pytest.raises(InvalidParameterError):
            tba.free_energy(state)

    def test_between_ground_state_and_entropy_bound(self, solved_afm):
        """e₀ − T ln 3 ≤ f ≤ e₀ para J = −1."""
        f = tba.free_energy(solved_afm)
        e0 = -tba.GROUND_STATE_AFM
        assert e0 - math.log(3.0) < f < e0

    def test_close_to_exact_chain(self, small_config):
        """A T = 2 la cadena de 6 sitios ya está cerca del límite termodinámico."""
        state = tba.solve(small_config, beta=0.5, J=-1.0)
        assert tba.free_energy(state) == pytest.approx(
            exact.free_energy_exact(6, -1.0, 2.0), abs=1e-1
        )


class TestDensities:
    """Tests para la recuperación de densidades y los observables."""

    def test_density_profile_recursion(self):
        """ψ_n + φ_n/2 = (ψ_{n−1} + ψ_{n+1})/2 con ψ_n = η_n φ_n."""
        n = np.arange(1, 22)
        phi = tba._density_profile(n)
        psi = tba.high_t_constants(21) * phi
        lhs = psi[1:-1] + 0.5 * phi[1:-1]
        rhs = 0.5 * (psi[:-2] + psi[2:])
        assert np.allclose(lhs, rhs, rtol=1e-13)

    @pytest.mark.parametrize("M", [5, 12, 30, 60])
    def test_closure_ratio(self, M):
        eta = tba.high_t_constants(M + 1)
        phi = tba._density_profile(np.array([M, M + 1]))
        expected = eta[M] * phi[1] / (eta[M - 1] * phi[0])
        assert tba._closure_ratio(M) == pytest.approx(expected, rel=1e-14)

    def test_densities_are_non_negative(self, solved_afm):
        dens = tba.recover_densities(solved_afm, extent=2)
        minimum, _ = dens.min_value()
        assert minimum > -1e-8
        assert dens.solver_info["info"] == 0

    def test_density_on_state_grid(self, solved_afm):
        dens = tba.recover_densities(solved_afm, extent=2)
        restricted = tba.density_on_state_grid(dens, solved_afm)
        assert restricted.shape == solved_afm.log_eta.shape

    def test_two_routes_agree(self, solved_afm):
        dens = tba.recover_densities(solved_afm, extent=2)
        e, s = tba.thermo_observables(dens, solved_afm)
        f = tba.free_energy(solved_afm)
        assert abs((e - solved_afm.temperature * s) - f) < 5e-3
        assert 0 < s < math.log(3.0)

    def test_entropy_density_is_stable(self):
        log_eta = np.array([-800.0, -5.0, 0.0, 5.0, 800.0])
        values = tba._entropy_density(log_eta)
        assert np.all(np.isfinite(values))
        assert values[2] == pytest.approx(2.0 * math.log(2.0))

    def test_epsilon_low_t(self):
        assert tba.epsilon_low_t(1, 0.0, 1.0) == pytest.approx(4.0)

    def test_epsilon_low_t_requires_ferromagnet(self):
        with pytest.raises(InvalidParameterError):
            tba.epsilon_low_t(1, 0.0, -1.0)


class TestSweep:
    """Tests para solve_row y sweep."""

    def test_consistency_tolerance(self, small_config):
        assert tba.consistency_tolerance(small_config, 0.05) == pytest.approx(1e-2)
        assert tba.consistency_tolerance(RunConfig(), 1.0) == pytest.approx(1e-3)

    def test_failed_row_is_recorded(self, small_config, monkeypatch):
        def explode(*args, **kwargs):
            raise NonFiniteStateError(3)

        monkeypatch.setattr(tba, "solve", explode)
        record = tba.solve_row(1.0, -1.0, small_config)
        assert record.failed
        assert math.isnan(record.f)
        assert record.error

    def test_row_fails_on_tails(self, small_config):
        config = small_config.with_overrides(solver__tail_tolerance=1e-30)
        record = tba.solve_row(1.0, -1.0, config)
        assert record.failed
        assert "extremos" in record.error
        assert math.isfinite(record.f)

    def test_empty_temperature_list(self, small_config):
        with pytest.raises(InvalidParameterError):
            tba.sweep(small_config, temperatures=[])

    def test_worker_count_respects_environment(self, monkeypatch):
        monkeypatch.setenv("OSPTBA_MAX_WORKERS", "1")
        assert tba._worker_count(8, None) == 1
        monkeypatch.delenv("OSPTBA_MAX_WORKERS")
        assert tba._worker_count(1, 4) == 1

    def test_sweep_keeps_order(self, small_config):
        temps = [2.0, 1.0]
        records = tba.sweep(small_config, J=-1.0, temperatures=temps, max_workers=1)
        assert [r.T for r in records] == temps
        assert all(not r.failed for r in records)
        # f decrece con T
        assert records[0].f < records[1].f


@pytest.mark.integration
class TestAcceptance:
    """Soluciones completas sobre la malla por defecto."""

    @pytest.fixture
    def config(self):
        return RunConfig()

    @pytest.mark.parametrize("J", [-1.0, 1.0])
    def test_high_temperature_entropy(self, config, J):
        T = 100.0
        state = tba.solve(config.with_m_trunc(30), 1.0 / T, J)
        f = tba.free_energy(state)
        assert abs(f / T + math.log(3.0) + 5.0 * J / (27.0 * T)) < 5e-4

    def test_antiferromagnetic_ground_state(self, config):
        state = tba.solve(config.with_m_trunc(60), 1.0 / 0.02, -1.0)
        assert state.converged
        assert abs(tba.free_energy(state) + 1.418399152) < 1e-2

    def test_ferromagnetic_ground_state(self, config):
        state = tba.solve(config, 1.0 / 0.02, 1.0)
        assert state.converged
        assert abs(tba.free_energy(state) + 1.0) < 1e-2

    def test_exact_diagonalization_cross_check(self, config):
        state = tba.solve(config, 0.5, -1.0)
        f_tba = tba.free_energy(state)
        exact_values = [exact.free_energy_exact(N, -1.0, 2.0) for N in (4, 6, 8)]
        differences = [abs(value - f_tba) for value in exact_values]
        assert differences[-1] < 2e-2
        assert differences[0] > differences[1] > differences[2]

    @pytest.mark.parametrize("T", [0.5, 1.0, 2.0])
    def test_two_route_thermodynamics(self, config, T):
        state = tba.solve(config, 1.0 / T, -1.0)
        dens = tba.recover_densities(state, extent=config.solver.density_extent)
        e, s = tba.thermo_observables(dens, state)
        assert abs((e - T * s) - tba.free_energy(state)) < 1e-4

    def test_symmetry_and_positivity(self, config):
        state = tba.solve(config, 1.0, -1.0)
        assert state.symmetry_defect() < 1e-10
        dens = tba.recover_densities(state)
        assert dens.min_value()[0] >= -1e-8

    def test_tails_on_default_grid(self, config):
        state = tba.solve(config, 1.0, -1.0)
        assert state.m_trunc == 30
        assert state.converged
        assert state.tail_defect() < 1e-6

    @pytest.mark.parametrize("T,tolerance", [(1.0, 1e-8), (0.2, 1e-6)])
    def test_truncation_robustness(self, config, T, tolerance):
        """Doblar M de 30 a 60 apenas mueve f."""
        states = [tba.solve(config.with_m_trunc(M), 1.0 / T, -1.0) for M in (30, 60)]
        assert all(state.converged for state in states)
        values = [tba.free_energy(state) for state in states]
        assert abs(values[0] - values[1]) < tolerance
