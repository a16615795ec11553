import numpy as np
import pytest

from chflow.fields import initial_condition
from chflow.grid import make_field, make_grid, mean, norm_l2
from chflow.ledger import RunLedger
from chflow.steady import (
    SteadyConfig,
    omega_limit_monitor,
    solve_stationary,
    stationarity_residual,
)
from chflow.stepper import StepperConfig, make_state, run, step
from chflow.thermo import MobilitySpec, PotentialParams, energy

P = PotentialParams(1.0, 2.0)
MOB = MobilitySpec.nondegenerate([1.0, 0.5], 0.5, 1.5)


def growth_rate(lam, m, p, mob):
    """Linearized decay/growth rate of a Neumann mode around phi == m."""
    from chflow.thermo import f_convex_second, mobility_eval
    b, _, _ = mobility_eval(m, mob)
    psi_pp = f_convex_second(m, p) - p.theta0
    return -b * lam * (lam + psi_pp)


class TestResidual:
    def test_constant_state_is_stationary(self):
        g = make_grid(8, 8, 1.0, 1.0)
        phi = make_field(g, np.full(g.shape, 0.4))
        assert stationarity_residual(phi, P) <= 1e-14

    def test_generic_field_is_not(self):
        g = make_grid(8, 8, 1.0, 1.0)
        rng = np.random.default_rng(0)
        phi = make_field(g, 0.5 * np.tanh(rng.standard_normal(g.shape)))
        assert stationarity_residual(phi, P) > 1e-3

    def test_domain_violation(self):
        g = make_grid(8, 8, 1.0, 1.0)
        vals = np.zeros(g.shape)
        vals[0, 0] = 1.0
        with pytest.raises(ValueError):
            stationarity_residual(make_field(g, vals), P)


class TestSolveStationary:
    def test_small_domain_returns_constant(self):
        # on the unit square the smallest positive Neumann eigenvalue
        # exceeds theta0 - theta, so every mode of the uniform state decays
        g = make_grid(32, 32, 1.0, 1.0)
        lam1 = (np.pi / g.lx) ** 2
        assert growth_rate(lam1, 0.0, P, MOB) < 0
        init = initial_condition("constant_noise", g, m=0.0, noise=0.05,
                                 seed=5, band_limit=2)
        cfg = SteadyConfig(max_time=100.0)
        res = solve_stationary(0.0, init, cfg, P, MOB)
        assert res.converged
        assert np.abs(res.phi.values).max() < 1e-6  # the constant state

    def test_large_domain_returns_nonconstant_lower_energy(self):
        # instability needs lam1 < theta0 - theta, so the box must beat
        # pi / sqrt(theta0 - theta); a 4 x 4 box does
        g = make_grid(48, 48, 4.0, 4.0)
        lam1 = (np.pi / g.lx) ** 2
        assert growth_rate(lam1, 0.0, P, MOB) > 0
        init = initial_condition("constant_noise", g, m=0.0, noise=0.2,
                                 seed=3, band_limit=4)
        cfg = SteadyConfig(max_time=400.0, tol_gradmu=1e-8, tol_residual=1e-9)
        res = solve_stationary(0.0, init, cfg, P, MOB)
        assert res.converged
        e_const = energy(make_field(g, np.zeros(g.shape)), P)
        assert energy(res.phi, P) < e_const
        assert np.abs(res.phi.values).std() > 0.1  # genuinely nonconstant

    def test_output_is_fixed_point_of_stepper(self):
        g = make_grid(32, 32, 4.0, 4.0)
        init = initial_condition("constant_noise", g, m=0.0, noise=0.2,
                                 seed=3, band_limit=4)
        res = solve_stationary(0.0, init, SteadyConfig(max_time=400.0), P, MOB)
        assert res.converged
        state = make_state(res.phi, P)
        new = step(state, StepperConfig(dt=1e-3), P, MOB)
        assert norm_l2(make_field(g, new.phi.values - state.phi.values)) <= 1e-8

    def test_mass_and_energy_discipline(self):
        g = make_grid(32, 32, 4.0, 4.0)
        init = initial_condition("constant_noise", g, m=0.1, noise=0.2,
                                 seed=4, band_limit=4)
        m = mean(init)
        res = solve_stationary(m, init, SteadyConfig(max_time=400.0), P, MOB)
        assert abs(mean(res.phi) - m) <= 1e-12
        assert energy(res.phi, P) <= energy(init, P)

    def test_stationary_init_returned_unchanged(self):
        g = make_grid(16, 16, 1.0, 1.0)
        phi = make_field(g, np.full(g.shape, 0.2))
        res = solve_stationary(0.2, phi, SteadyConfig(), P, MOB)
        assert res.converged
        assert np.abs(res.phi.values - 0.2).max() < 1e-9

    def test_mean_mismatch_rejected(self):
        g = make_grid(16, 16, 1.0, 1.0)
        phi = make_field(g, np.full(g.shape, 0.2))
        with pytest.raises(ValueError, match="mean"):
            solve_stationary(0.0, phi, SteadyConfig(), P, MOB)

    def test_newton_polish_tightens_residual(self):
        g = make_grid(32, 32, 4.0, 4.0)
        init = initial_condition("constant_noise", g, m=0.0, noise=0.2,
                                 seed=3, band_limit=4)
        loose = SteadyConfig(max_time=400.0, tol_residual=1e-6, tol_gradmu=1e-5)
        coarse = solve_stationary(0.0, init, loose, P, MOB)
        assert coarse.converged
        polish = SteadyConfig(method="damped_newton", tol_residual=1e-11)
        fine = solve_stationary(mean(coarse.phi), coarse.phi, polish, P, MOB)
        assert fine.converged
        assert fine.residual <= 1e-11
        assert fine.residual < coarse.residual

    def test_non_convergence_is_flagged(self):
        g = make_grid(32, 32, 4.0, 4.0)
        init = initial_condition("constant_noise", g, m=0.0, noise=0.2,
                                 seed=6, band_limit=4)
        res = solve_stationary(0.0, init, SteadyConfig(max_time=0.5), P, MOB)
        assert not res.converged
        assert res.t_reached >= 0.5


class TestOmegaMonitor:
    def test_constant_run_converging(self):
        g = make_grid(8, 8, 1.0, 1.0)
        phi0 = make_field(g, np.full(g.shape, 0.1))
        _, led = run(phi0, 0.2, StepperConfig(dt=1e-2), P, MOB,
                     record_hm1_increments=True)
        assert omega_limit_monitor(led, window=5) == "converging"

    def test_decaying_run_converging(self):
        g = make_grid(24, 24, 4.0, 4.0)
        phi0 = initial_condition("constant_noise", g, m=0.0, noise=0.1,
                                 seed=9, band_limit=3)
        cfg = StepperConfig(dt=1e-3, adaptive=True, dt_min=1e-7, dt_max=0.5,
                            shrink=0.5, grow=1.5)
        _, led = run(phi0, 40.0, cfg, P, MOB, record_hm1_increments=True)
        assert omega_limit_monitor(led, window=10) == "converging"

    def test_short_ledger_rejected(self):
        led = RunLedger()
        for i in range(5):
            led.append(t=float(i + 1) * 0.1, mass=0.0, E=1.0, E0=1.0,
                       grad_mu_sq=1.0, Lambda=1.0, sep=1.0, mu_bar=0.0,
                       cum_dissipation=0.0)
        with pytest.raises(ValueError, match="rows"):
            omega_limit_monitor(led, window=5)

    def test_flat_history_stalls(self):
        led = RunLedger()
        for i in range(20):
            led.append(t=float(i + 1) * 0.1, mass=0.0, E=1.0, E0=1.0,
                       grad_mu_sq=1.0, Lambda=1.0, sep=1.0, mu_bar=0.0,
                       cum_dissipation=0.0, hm1_increment=1.0)
        assert omega_limit_monitor(led, window=5) == "stalled"

    def test_alternating_history_oscillates(self):
        led = RunLedger()
        for i in range(20):
            gm = 1.0 if i % 2 == 0 else 2.0
            led.append(t=float(i + 1) * 0.1, mass=0.0, E=1.0, E0=1.0,
                       grad_mu_sq=gm, Lambda=gm, sep=1.0, mu_bar=0.0,
                       cum_dissipation=0.0, hm1_increment=1.0)
        assert omega_limit_monitor(led, window=5) == "oscillating"
