"""The acceptance suite: one runner per criterion, shared benchmark cache.

Each criterion function returns a CriterionResult with the measured values
in ``details``; ``run_criteria`` executes a subset (default: all) and can
write the ledgers it produces under an output directory.  The `check` CLI
subcommand and the /check service endpoint call into this module, as does
tests/test_acceptance.py.

Benchmark family: theta = 1, theta0 = 2, mean 0, unit square, mobility
b(s) = 1 + s/2 (bounds 0.5 / 1.5), initial datum m + band-limited noise
(sup 0.05, band limit 1, seed 20).  On the unit square the smallest Neumann
eigenvalue pi^2 exceeds theta0 - theta, so the uniform state is linearly
stable and the benchmark dynamics is a clean resolved decay; the band limit
keeps each excited mode's decay rate resolved at the coarsest tested dt,
which the balance-defect order test requires.
"""

from __future__ import annotations

import io
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import (
    continuous_dependence_experiment,
    energy_balance_defect,
    separation_margin,
)
from .elliptic import EllipticWorkspace, hm1_norm, solve_poisson, solve_weighted_poisson
from .fields import RandomFieldSpec, band_limited_field, initial_condition, stream
from .fileio import write_ledger_csv
from .grid import (
    Grid,
    ScalarField,
    make_field,
    mobility_div_grad,
    norm_l2,
)
from .inequalities import gn_inequality_sweep
from .ledger import RunLedger
from .odebounds import (
    blowup_time_scan,
    gronwall_superlinear_bound,
    integrate_envelope_ode,
    integrate_spec_ode,
    sample_ode_specs,
    windowed_bound_check,
)
from .steady import stationarity_residual
from .stepper import SimState, StepperConfig, run, step
from .thermo import MobilitySpec, PotentialParams, mobility_on_faces

__all__ = ["CriterionResult", "run_criteria", "format_table", "CRITERIA"]


@dataclass
class CriterionResult:
    cid: int
    name: str
    passed: bool
    details: str
    ledgers: dict[str, RunLedger] = field(default_factory=dict)


_POTENTIAL = PotentialParams(1.0, 2.0)
_MOBILITY = MobilitySpec.nondegenerate([1.0, 0.5], 0.5, 1.5)
_IC_NOISE = 0.05
_IC_SEED = 20
_IC_BAND = 1

_cache: dict = {}


def _spinodal_ic(n: int) -> ScalarField:
    g = Grid(n, n, 1.0, 1.0)
    return initial_condition("constant_noise", g, m=0.0, noise=_IC_NOISE,
                             seed=_IC_SEED, band_limit=_IC_BAND)


def _benchmark_run(n: int, dt: float, T: float):
    key = ("bench", n, dt, T)
    if key not in _cache:
        cfg = StepperConfig(dt=dt)
        t0 = time.perf_counter()
        state, led = run(_spinodal_ic(n), T, cfg, _POTENTIAL, _MOBILITY)
        _cache[key] = (state, led, time.perf_counter() - t0)
    return _cache[key]


# ---------------------------------------------------------------------------


def criterion_1() -> CriterionResult:
    """Mass conservation on the 128^2 benchmark, 1000 steps of dt = 1e-4."""
    state, led, elapsed = _benchmark_run(128, 1e-4, 0.1)
    drift = float(np.abs(led.column("mass") - 0.0).max())
    passed = drift <= 1e-12 and elapsed < 60.0
    det = f"max |mean(phi) - m| = {drift:.3e} (tol 1e-12), runtime {elapsed:.1f}s (< 60s)"
    return CriterionResult(1, "mass conservation", passed, det,
                           ledgers={"benchmark_dt1e-4": led})


def criterion_2() -> CriterionResult:
    """Per-step dissipation and O(dt) energy-balance defect on the benchmark."""
    _, led, _ = _benchmark_run(128, 1e-4, 0.1)
    dE = np.diff(led.column("E"))
    max_rise = float(dE.max())
    defects = []
    for dt in (4e-4, 2e-4, 1e-4):
        _, led_dt, _ = _benchmark_run(128, dt, 0.1)
        defects.append(energy_balance_defect(led_dt))
    orders = [float(np.log2(defects[i] / defects[i + 1])) for i in range(2)]
    passed = max_rise <= 1e-9 and min(orders) >= 0.9
    det = (f"max energy rise {max_rise:.3e} (tol 1e-9); defects "
           f"{['%.3e' % d for d in defects]} orders {['%.2f' % o for o in orders]} (>= 0.9)")
    return CriterionResult(2, "energy dissipation and balance", passed, det)


def criterion_3() -> CriterionResult:
    """Elliptic correctness: eigenmode, dense LU on 8x8, h-convergence."""
    # (a) eigenmode closed form
    g = Grid(16, 16, 1.0, 1.0)
    X, _ = g.cell_centers()
    mode = make_field(g, np.cos(np.pi * X / g.lx))
    lam1 = (2.0 / g.hx ** 2) * (1.0 - np.cos(np.pi * g.hx / g.lx))
    u = solve_poisson(mode)
    eig_err = float(np.abs(u.values - mode.values / lam1).max())

    # (b) dense LU oracle on 8x8, 20 random pairs
    g8 = Grid(8, 8, 1.0, 1.0)
    ws8 = EllipticWorkspace(g8)
    rng = stream(101, "elliptic_samples")
    lu_err = 0.0
    n = g8.nx * g8.ny
    for _ in range(20):
        qv = 0.9 * np.tanh(rng.standard_normal(g8.shape))
        fv = rng.standard_normal(g8.shape)
        fv -= fv.mean()
        q = make_field(g8, qv)
        f = make_field(g8, fv)
        b_face = mobility_on_faces(q, _MOBILITY)
        A = np.zeros((n, n))
        for j in range(n):
            e = np.zeros(n)
            e[j] = 1.0
            A[:, j] = -mobility_div_grad(b_face, make_field(g8, e)).values_flat
        A_aug = A + np.ones((n, n)) / n  # pin the mean
        u_dense = np.linalg.solve(A_aug, f.values_flat)
        u_dense -= u_dense.mean()
        u_pcg = solve_weighted_poisson(q, f, _MOBILITY, ws8)
        lu_err = max(lu_err, float(np.abs(u_pcg.values_flat - u_dense).max()))

    # (c) manufactured-solution convergence under h-refinement
    import sympy as sym
    x, y = sym.symbols("x y")
    q_expr = sym.Rational(1, 2) * sym.cos(sym.pi * x) * sym.cos(sym.pi * y)
    b_expr = 1 + q_expr / 2
    u_expr = sym.cos(2 * sym.pi * x) * sym.cos(sym.pi * y)
    f_expr = -(sym.diff(b_expr * sym.diff(u_expr, x), x)
               + sym.diff(b_expr * sym.diff(u_expr, y), y))
    fq = sym.lambdify((x, y), q_expr, "numpy")
    ff = sym.lambdify((x, y), f_expr, "numpy")
    fu = sym.lambdify((x, y), u_expr, "numpy")
    errs = []
    for m in (16, 32, 64):
        gm = Grid(m, m, 1.0, 1.0)
        X, Y = gm.cell_centers()
        q = make_field(gm, fq(X, Y))
        fv = ff(X, Y)
        fv = fv - fv.mean()
        f = make_field(gm, fv)
        u_h = solve_weighted_poisson(q, f, _MOBILITY, EllipticWorkspace(gm))
        u_ex = fu(X, Y)
        u_ex = u_ex - u_ex.mean()
        errs.append(norm_l2(make_field(gm, u_h.values - u_ex)))
    orders = [float(np.log2(errs[i] / errs[i + 1])) for i in range(2)]

    passed = eig_err <= 1e-11 and lu_err <= 1e-9 and min(orders) >= 1.9
    det = (f"eigenmode err {eig_err:.2e} (tol 1e-11); dense-LU err {lu_err:.2e} "
           f"(tol 1e-9); L2 orders {['%.2f' % o for o in orders]} (>= 1.9)")
    return CriterionResult(3, "elliptic correctness", passed, det)


def criterion_4() -> CriterionResult:
    """Norm equivalence sandwich on 100 random pairs at 64^2."""
    g = Grid(64, 64, 1.0, 1.0)
    ws = EllipticWorkspace(g)
    b_min, b_max = _MOBILITY.bounds
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(100):
        q = band_limited_field(g, 300, 8, amplitude=0.95, zero_mean=False,
                               purpose="elliptic_samples", index=2 * i)
        f = band_limited_field(g, 300, 8, amplitude=1.0, zero_mean=True,
                               purpose="elliptic_samples", index=2 * i + 1,
                               sup_normalized=False)
        u = solve_weighted_poisson(q, f, _MOBILITY, ws)
        b_face = mobility_on_faces(q, _MOBILITY)
        from .grid import weighted_grad_sq
        w = float(np.sqrt(max(weighted_grad_sq(b_face, u), 0.0)))
        h = hm1_norm(f)
        scale = max(h, 1e-300)
        worst = max(worst,
                    (np.sqrt(b_min) * w - h) / scale,
                    (h - np.sqrt(b_max) * w) / scale)
    elapsed = time.perf_counter() - t0
    passed = worst <= 1e-9 and elapsed < 30.0
    det = f"worst sandwich slack {worst:.3e} (tol 1e-9), runtime {elapsed:.1f}s (< 30s)"
    return CriterionResult(4, "norm equivalence", passed, det)


def _spinodal4_ic(n: int, noise: float = 0.2) -> ScalarField:
    # on the 4x4 box the smallest Neumann eigenvalue (pi/4)^2 < theta0 - theta,
    # so the uniform state is genuinely unstable and decomposition happens
    g = Grid(n, n, 4.0, 4.0)
    return initial_condition("constant_noise", g, m=0.0, noise=noise,
                             seed=_IC_SEED, band_limit=4)


def criterion_5() -> CriterionResult:
    """Continuous dependence: linearity in eps, dt-stability of the constant.

    Runs on the 4x4 box, where the uniform state is spinodally unstable and
    the two-trajectory distance evolves nontrivially over T = 0.5.
    """
    base = _spinodal4_ic(64)
    g = base.grid
    pert = band_limited_field(g, 77, 4, amplitude=1.0, zero_mean=True,
                              purpose="perturbation")

    def experiment(eps: float, dt: float, every: int):
        phi2 = ScalarField(g, base.values + eps * pert.values)
        cfg = StepperConfig(dt=dt)
        return continuous_dependence_experiment(base, phi2, 0.5, cfg,
                                                _POTENTIAL, _MOBILITY,
                                                eval_every=every)

    rep_a = experiment(1e-4, 5e-4, 100)
    rep_b = experiment(5e-5, 5e-4, 100)
    rep_half = experiment(1e-4, 2.5e-4, 200)
    ratio_a = rep_a.d_final / rep_a.d0
    ratio_b = rep_b.d_final / rep_b.d0
    lin_dev = abs(ratio_a - ratio_b) / max(ratio_b, 1e-300)
    c_dev = abs(rep_a.c_emp - rep_half.c_emp) / max(rep_half.c_emp, 1e-300)
    finite = np.isfinite(ratio_a) and np.isfinite(rep_a.c_emp)
    passed = bool(finite and lin_dev <= 0.10 and c_dev <= 0.10)
    det = (f"d(T)/d(0): {ratio_a:.6f} vs {ratio_b:.6f} (dev {lin_dev:.2%}, tol 10%); "
           f"C_emp {rep_a.c_emp:.6f} vs dt/2 {rep_half.c_emp:.6f} (dev {c_dev:.2%}, tol 10%)")
    return CriterionResult(5, "continuous dependence", passed, det)


def criterion_6() -> CriterionResult:
    """Separation margin at T = 5 across 64^2 and 128^2 (4x4 spinodal box)."""
    margins = {}
    leds = {}
    for n in (64, 128):
        key = ("sep", n)
        if key not in _cache:
            cfg = StepperConfig(dt=5e-3)
            state, led = run(_spinodal4_ic(n), 5.0, cfg, _POTENTIAL, _MOBILITY)
            _cache[key] = (separation_margin(state.phi), led)
        margins[n], leds[n] = _cache[key]
    agree = abs(margins[64] - margins[128]) / max(margins[128], 1e-300)
    passed = margins[64] >= 1e-3 and margins[128] >= 1e-3 and agree <= 0.20
    det = (f"margin(T=5): {margins[64]:.4f} @64^2, {margins[128]:.4f} @128^2 "
           f"(>= 1e-3), agreement dev {agree:.2%} (tol 20%)")
    return CriterionResult(6, "separation", passed, det,
                           ledgers={"separation_64": leds[64],
                                    "separation_128": leds[128]})


def criterion_7() -> CriterionResult:
    """Convergence to equilibrium by T = 50 with adaptive steps."""
    key = ("equil", 64)
    if key not in _cache:
        cfg = StepperConfig(dt=1e-3, adaptive=True, dt_min=1e-7, dt_max=0.5,
                            shrink=0.5, grow=1.5)
        _cache[key] = run(_spinodal_ic(64), 50.0, cfg, _POTENTIAL, _MOBILITY)
    state, led = _cache[key]
    grad_mu = float(np.sqrt(led.column("grad_mu_sq")[-1]))
    resid = stationarity_residual(state.phi, _POTENTIAL)
    fixed_cfg = StepperConfig(dt=1e-3)
    state2 = step(SimState(state.phi, state.mu, 0.0, 0, state.mass0),
                  fixed_cfg, _POTENTIAL, _MOBILITY)
    move = norm_l2(make_field(state.phi.grid,
                              state2.phi.values - state.phi.values))
    passed = grad_mu < 1e-8 and resid <= 1e-6 and move <= 1e-8
    det = (f"||grad mu|| = {grad_mu:.3e} (< 1e-8); stationarity residual "
           f"{resid:.3e} (<= 1e-6); fixed-point move {move:.3e} (<= 1e-8)")
    return CriterionResult(7, "convergence to equilibrium", passed, det,
                           ledgers={"equilibrium_64": led})


def criterion_8() -> CriterionResult:
    """Gronwall oracles: 50 superlinear specs, 50 windowed cases, no violations."""
    specs = sample_ode_specs(seed=42, n=50)
    viol_super = 0
    for sp in specs:
        bound = gronwall_superlinear_bound(sp)
        _, y = integrate_spec_ode(sp)
        _, ye = integrate_envelope_ode(sp)
        if float(y.max()) > bound or float(ye.max()) > bound:
            viol_super += 1
    viol_win, worst_margin = windowed_bound_check(seed=43, n=50)
    passed = viol_super == 0 and viol_win == 0
    det = (f"superlinear: {viol_super}/50 violations (incl. envelope ODE); "
           f"windowed: {viol_win}/50 violations, min bound/f margin {worst_margin:.3f}")
    return CriterionResult(8, "gronwall oracles", passed, det)


def criterion_9() -> CriterionResult:
    """Blow-up time shrinks as rho decreases; double-exp bound holds throughout."""
    rep = blowup_time_scan(1.0, [0.2, 0.1, 0.05], 1.0, 1.0)
    times = [r.blowup_time for r in rep.rows]
    decreasing = all(a is not None and b is not None and a > b
                     for a, b in zip(times, times[1:]))
    bounds_ok = all(r.superlinear_bound_ok for r in rep.rows)
    local_ok = all(r.local_bound_ok for r in rep.rows)
    passed = bool(decreasing and bounds_ok and local_ok)
    det = (f"blow-up times {['%.5f' % t for t in times]} strictly decreasing: "
           f"{decreasing}; double-exp bound on windows: {bounds_ok}; "
           f"local algebraic bound: {local_ok}")
    return CriterionResult(9, "corrected-constant scan", passed, det)


def criterion_10() -> CriterionResult:
    """No growth trend of the interpolation ratio across r."""
    rep = gn_inequality_sweep(RandomFieldSpec(seed=11, band_limit=8),
                              [2, 4, 8, 16, 32, 64], n_fields=100,
                              grid=Grid(64, 64, 1.0, 1.0))
    passed = rep.log_slope <= 0.05
    det = (f"max ratios {['%.4f' % v for v in rep.max_ratio]}, "
           f"log-log slope {rep.log_slope:.3f} (tol 0.05)")
    return CriterionResult(10, "interpolation sqrt(r) scaling", passed, det)


def criterion_11() -> CriterionResult:
    """Byte-identical ledgers and lab reports across repeated runs."""
    cfg = StepperConfig(dt=1e-4)
    blobs = []
    for _ in range(2):
        _, led = run(_spinodal_ic(128), 0.1, cfg, _POTENTIAL, _MOBILITY)
        buf = io.StringIO()
        from .ledger import COLUMNS
        buf.write(",".join(COLUMNS) + "\n")
        for row in led.rows:
            buf.write(",".join(format(v, ".17g") for v in row) + "\n")
        blobs.append(buf.getvalue().encode())
    ledger_same = blobs[0] == blobs[1]
    reports = []
    for _ in range(2):
        specs = sample_ode_specs(seed=7, n=10)
        lines = []
        for sp in specs:
            _, y = integrate_spec_ode(sp)
            lines.append(f"{gronwall_superlinear_bound(sp):.17g},{float(y.max()):.17g}")
        reports.append("\n".join(lines).encode())
    lab_same = reports[0] == reports[1]
    passed = ledger_same and lab_same
    det = (f"benchmark ledger bytes identical: {ledger_same}; "
           f"lab report bytes identical: {lab_same}")
    return CriterionResult(11, "determinism", passed, det)


CRITERIA = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4,
    5: criterion_5, 6: criterion_6, 7: criterion_7, 8: criterion_8,
    9: criterion_9, 10: criterion_10, 11: criterion_11,
}


def run_criteria(only=None, out_dir: str | None = None) -> list[CriterionResult]:
    """Run the selected criteria (all by default); write their ledgers when
    ``out_dir`` is given."""
    ids = sorted(CRITERIA) if not only else sorted(set(only))
    results = []
    for cid in ids:
        if cid not in CRITERIA:
            raise ValueError(f"unknown criterion id {cid}")
        res = CRITERIA[cid]()
        if out_dir:
            os.makedirs(out_dir, exist_ok=True)
            for name, led in res.ledgers.items():
                write_ledger_csv(led, os.path.join(out_dir, f"{name}.csv"))
        results.append(res)
    return results


def format_table(results: list[CriterionResult]) -> str:
    lines = []
    for r in results:
        mark = "PASS" if r.passed else "FAIL"
        lines.append(f"[{mark}] criterion {r.cid:2d} ({r.name}): {r.details}")
    n_pass = sum(r.passed for r in results)
    lines.append(f"{n_pass}/{len(results)} criteria passed")
    return "\n".join(lines)
