import numpy as np
import pytest

from chflow.fields import initial_condition
from chflow.grid import make_field, make_grid
from chflow.stepper import (
    StepError,
    StepperConfig,
    adaptive_dt,
    make_state,
    run,
    step,
)
from chflow.stepper import StepInfo
from chflow.thermo import MobilitySpec, PotentialParams, psi_prime

P = PotentialParams(1.0, 2.0)
MOB = MobilitySpec.nondegenerate([1.0, 0.5], 0.5, 1.5)


def spinodal_box(n=32, noise=0.2, seed=20, box=4.0, band=4):
    g = make_grid(n, n, box, box)
    return initial_condition("constant_noise", g, m=0.0, noise=noise,
                             seed=seed, band_limit=band)


class TestSingleStep:
    def test_constant_state_is_fixed_point(self):
        g = make_grid(8, 8, 1.0, 1.0)
        m = 0.25
        state = make_state(make_field(g, np.full(g.shape, m)), P)
        new = step(state, StepperConfig(dt=1e-2), P, MOB)
        assert np.abs(new.phi.values - m).max() < 1e-13
        assert np.abs(new.mu.values - psi_prime(m, P)).max() < 1e-12

    def test_mass_conserved_per_step(self):
        phi0 = spinodal_box()
        state = make_state(phi0, P)
        new = step(state, StepperConfig(dt=1e-3), P, MOB)
        assert abs(new.phi.values.mean() - state.phi.values.mean()) <= 1e-13

    def test_first_order_in_time(self):
        # fixed horizon, halving dt: successive differences shrink by ~2
        phi0 = spinodal_box(n=24, noise=0.1)
        T = 0.08

        def end_state(dt):
            s, _ = run(phi0, T, StepperConfig(dt=dt), P, MOB)
            return s.phi.values

        sols = [end_state(T / k) for k in (8, 16, 32, 64)]
        diffs = [np.abs(sols[i + 1] - sols[i]).max() for i in range(3)]
        ratios = [diffs[i] / diffs[i + 1] for i in range(2)]
        assert all(1.7 <= r <= 2.3 for r in ratios), ratios

    def test_energy_dissipation_every_step(self):
        phi0 = spinodal_box(noise=0.3)
        cfg = StepperConfig(dt=2e-3)
        _, led = run(phi0, 0.2, cfg, P, MOB)
        dE = np.diff(led.column("E"))
        assert dE.max() <= 10 * cfg.newton_tol

    def test_newton_failure_is_hard_error(self):
        phi0 = spinodal_box(noise=0.5, band=6)
        state = make_state(phi0, P)
        with pytest.raises(StepError):
            step(state, StepperConfig(dt=10.0, newton_max=1), P, MOB)


class TestRun:
    def test_zero_horizon_returns_initial(self):
        phi0 = spinodal_box()
        state, led = run(phi0, 0.0, StepperConfig(dt=1e-3), P, MOB)
        assert len(led) == 1
        assert state.step == 0

    def test_energy_column_non_increasing(self):
        phi0 = spinodal_box(noise=0.25)
        _, led = run(phi0, 0.1, StepperConfig(dt=1e-3), P, MOB)
        dE = np.diff(led.column("E"))
        assert dE.max() <= 1e-9

    def test_mass_column_flat(self):
        phi0 = spinodal_box()
        _, led = run(phi0, 0.1, StepperConfig(dt=2e-3), P, MOB)
        mass = led.column("mass")
        assert np.abs(mass - mass[0]).max() <= 1e-12

    def test_balance_defect_first_order(self):
        phi0 = initial_condition("constant_noise", make_grid(32, 32, 1.0, 1.0),
                                 m=0.0, noise=0.05, seed=20, band_limit=1)
        defects = []
        for dt in (4e-4, 2e-4, 1e-4):
            _, led = run(phi0, 0.1, StepperConfig(dt=dt), P, MOB)
            E = led.column("E")
            defects.append(abs(E[-1] + led.column("cum_dissipation")[-1] - E[0]))
        orders = [np.log2(defects[i] / defects[i + 1]) for i in range(2)]
        assert min(orders) >= 0.9

    def test_bitwise_determinism(self):
        phi0 = spinodal_box()
        s1, l1 = run(phi0, 0.05, StepperConfig(dt=1e-3), P, MOB)
        s2, l2 = run(phi0, 0.05, StepperConfig(dt=1e-3), P, MOB)
        assert np.array_equal(s1.phi.values, s2.phi.values)
        assert l1.rows == l2.rows

    def test_hooks_called_every_step(self):
        phi0 = spinodal_box()
        seen = []
        run(phi0, 0.01, StepperConfig(dt=2e-3), P, MOB,
            hooks=[lambda s, led: seen.append(s.step)])
        assert seen == [1, 2, 3, 4, 5]

    def test_extra_stabilization_keeps_structure(self):
        phi0 = spinodal_box(noise=0.3)
        _, led = run(phi0, 0.05, StepperConfig(dt=2e-3, theta_stab=1.0), P, MOB)
        mass = led.column("mass")
        assert np.abs(mass - mass[0]).max() <= 1e-12
        assert np.diff(led.column("E")).max() <= 1e-9

    def test_degenerate_mobility_still_conserves_and_dissipates(self):
        phi0 = spinodal_box(noise=0.3)
        _, led = run(phi0, 0.05, StepperConfig(dt=1e-3), P,
                     MobilitySpec.degenerate(1.0))
        mass = led.column("mass")
        assert np.abs(mass - mass[0]).max() <= 1e-12
        assert np.diff(led.column("E")).max() <= 1e-9

    def test_initial_state_preclamped(self):
        g = make_grid(8, 8, 1.0, 1.0)
        vals = np.full(g.shape, 0.0)
        vals[0, 0] = 1.0  # touches the pure phase
        state = make_state(make_field(g, vals), P)
        assert np.abs(state.phi.values).max() < 1.0

    def test_mean_outside_open_interval_rejected(self):
        g = make_grid(8, 8, 1.0, 1.0)
        with pytest.raises(ValueError):
            make_state(make_field(g, np.ones(g.shape)), P)


class TestAdaptiveDt:
    def mk_info(self, iters, dt):
        return StepInfo(newton_iters=iters, dt_used=dt, dissipation_increment=0.0,
                        energy_after=0.0, clamp_events=0, residual=0.0)

    def cfg(self, dt=1e-3):
        return StepperConfig(dt=dt, adaptive=True, dt_min=1e-6, dt_max=1.0,
                             shrink=0.5, grow=2.0)

    def test_hard_newton_shrinks(self):
        cfg = self.cfg()
        out = adaptive_dt([self.mk_info(30, 1e-3)], cfg)
        assert out == pytest.approx(5e-4)

    def test_ten_easy_steps_grow(self):
        cfg = self.cfg()
        recent = [self.mk_info(3, 1e-3)] * 10
        assert adaptive_dt(recent, cfg) == pytest.approx(2e-3)

    def test_shrink_clamped_at_dt_min(self):
        cfg = StepperConfig(dt=1e-6, adaptive=True, dt_min=1e-6, dt_max=1.0,
                            shrink=0.5, grow=2.0)
        out = adaptive_dt([self.mk_info(30, 1e-6)], cfg)
        assert out == pytest.approx(1e-6)

    def test_growth_capped_at_dt_max(self):
        cfg = StepperConfig(dt=0.9, adaptive=True, dt_min=1e-6, dt_max=1.0,
                            shrink=0.5, grow=2.0)
        recent = [self.mk_info(2, 0.9)] * 10
        assert adaptive_dt(recent, cfg) == pytest.approx(1.0)

    def test_energy_rise_triggers_shrink(self):
        cfg = self.cfg()
        out = adaptive_dt([self.mk_info(3, 1e-3)], cfg, last_energy_increase=1.0)
        assert out == pytest.approx(5e-4)

    def test_adaptive_run_reaches_horizon(self):
        phi0 = spinodal_box(noise=0.2)
        cfg = StepperConfig(dt=1e-3, adaptive=True, dt_min=1e-7, dt_max=0.2,
                            shrink=0.5, grow=1.5)
        state, led = run(phi0, 2.0, cfg, P, MOB)
        assert state.t >= 2.0 - 1e-9
        assert len(led) - 1 < 2.0 / 1e-3  # actually adapted upward
