"""FastAPI service wrapping the solver and its verification harness.

Endpoints mirror the CLI subcommands: /simulate, /steady, /uniqueness,
/lab, /check, plus /health.  Configuration travels as the flat key=value
text; file outputs named by the config are written on the service side
(relative paths resolve against the request's workdir, default the server
process working directory).

Error contract: config violations come back as 400 with the complete
violation list; numerical failures (Newton stall, non-convergence) as 409.
"""

from __future__ import annotations

import os

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from ..acceptance import format_table, run_criteria
from ..config import ConfigError, RunConfig, parse_config
from ..diagnostics import continuous_dependence_experiment, energy_balance_defect
from ..elliptic import ConvergenceError
from ..fields import RandomFieldSpec, band_limited_field
from ..fileio import write_ledger_csv, write_pgm, write_snapshot
from ..grid import Grid, ScalarField, mean as field_mean
from ..inequalities import elliptic_estimate_report, gn_inequality_sweep
from ..ledger import COLUMNS
from ..odebounds import (
    blowup_time_scan,
    gronwall_superlinear_bound,
    integrate_envelope_ode,
    integrate_spec_ode,
    sample_ode_specs,
    windowed_bound_check,
)
from ..steady import SteadyConfig, solve_stationary
from ..stepper import StepError, run
from ..thermo import energy
from .models import (
    CheckCriterion,
    CheckRequest,
    CheckResponse,
    HealthResponse,
    LabRequest,
    LabResponse,
    LedgerPayload,
    SimulateRequest,
    SimulateResponse,
    SimulateSummary,
    SteadyRequest,
    SteadyResponse,
    UniquenessRequest,
    UniquenessResponse,
)

app = FastAPI(title="chflow", version=__version__,
              description="structure-preserving phase-field solver service")


def _parse_or_400(text: str) -> RunConfig:
    try:
        return parse_config(text)
    except ConfigError as exc:
        raise HTTPException(status_code=400, detail={
            "kind": "validation", "violations": exc.violations}) from exc


def _numerical_409(exc: Exception) -> HTTPException:
    return HTTPException(status_code=409, detail={
        "kind": "numerical", "message": str(exc)})


def _resolve(path: str, workdir: str | None) -> str:
    out = os.path.join(workdir, path) if workdir and not os.path.isabs(path) else path
    parent = os.path.dirname(out)
    if parent:
        os.makedirs(parent, exist_ok=True)
    return out


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.post("/simulate", response_model=SimulateResponse)
def simulate(req: SimulateRequest) -> SimulateResponse:
    cfg = _parse_or_400(req.config)
    grid = cfg.build_grid()
    p = cfg.build_potential()
    mob = cfg.build_mobility()
    try:
        phi0 = cfg.build_initial_field(grid)
    except (ValueError, OSError) as exc:
        raise HTTPException(status_code=400, detail={
            "kind": "validation", "violations": [str(exc)]}) from exc
    outputs: list[str] = []
    hooks = []
    if cfg.snapshot_every > 0 and cfg.snapshot_dir:
        snap_dir = _resolve(cfg.snapshot_dir, req.workdir)
        os.makedirs(snap_dir, exist_ok=True)

        def snapshot_hook(state, led):
            if state.step % cfg.snapshot_every == 0:
                path = os.path.join(snap_dir, f"snap_{state.step:08d}.chfld")
                write_snapshot(state.phi, path, t=state.t)
                outputs.append(path)
                if cfg.pgm:
                    img = os.path.join(snap_dir, f"snap_{state.step:08d}.pgm")
                    write_pgm(state.phi, img)
                    outputs.append(img)

        hooks.append(snapshot_hook)
    try:
        state, led = run(phi0, cfg.T, cfg.build_stepper(), p, mob, hooks=hooks)
    except (StepError, ConvergenceError) as exc:
        raise _numerical_409(exc) from exc
    led.meta["seed"] = cfg.init_seed
    if cfg.ledger_path:
        path = _resolve(cfg.ledger_path, req.workdir)
        write_ledger_csv(led, path)
        outputs.append(path)
    E = led.column("E")
    dE = np.diff(E) if len(led) > 1 else np.array([0.0])
    summary = SimulateSummary(
        steps=len(led) - 1,
        t_end=float(led.column("t")[-1]),
        mass_initial=float(led.column("mass")[0]),
        mass_drift_max=float(np.abs(led.column("mass") - led.column("mass")[0]).max()),
        energy_initial=float(E[0]),
        energy_final=float(E[-1]),
        max_energy_rise=float(dE.max()),
        balance_defect=energy_balance_defect(led) if len(led) > 1 else 0.0,
        separation_final=float(led.column("sep")[-1]),
        grad_mu_final=float(np.sqrt(led.column("grad_mu_sq")[-1])),
        seed=cfg.init_seed,
        outputs=outputs,
    )
    payload = None
    if req.include_ledger:
        payload = LedgerPayload(columns=list(COLUMNS),
                                rows=[list(r) for r in led.rows])
    return SimulateResponse(summary=summary, ledger=payload)


@app.post("/steady", response_model=SteadyResponse)
def steady(req: SteadyRequest) -> SteadyResponse:
    cfg = _parse_or_400(req.config)
    grid = cfg.build_grid()
    p = cfg.build_potential()
    mob = cfg.build_mobility()
    phi0 = cfg.build_initial_field(grid)
    stepper = cfg.build_stepper()
    if not stepper.adaptive:
        from ..stepper import StepperConfig
        stepper = StepperConfig(dt=cfg.dt, newton_tol=cfg.newton_tol,
                                newton_max=cfg.newton_max, adaptive=True,
                                dt_min=min(cfg.dt, 1e-9), dt_max=0.5,
                                shrink=0.5, grow=1.5)
    scfg = SteadyConfig(tol_residual=req.tol_residual, tol_gradmu=req.tol_gradmu,
                        max_time=req.max_time, method=req.method, stepper=stepper)
    try:
        result = solve_stationary(cfg.init_mean, phi0, scfg, p, mob)
    except (StepError, ConvergenceError) as exc:
        raise _numerical_409(exc) from exc
    outputs = []
    if req.save_state:
        path = _resolve(req.save_state, req.workdir)
        write_snapshot(result.phi, path, t=result.t_reached)
        outputs.append(path)
    return SteadyResponse(
        converged=result.converged,
        residual=result.residual,
        grad_mu_norm=float(result.grad_mu_norm)
        if np.isfinite(result.grad_mu_norm) else -1.0,
        t_reached=result.t_reached,
        energy=energy(result.phi, p),
        mean=field_mean(result.phi),
        outputs=outputs,
    )


@app.post("/uniqueness", response_model=UniquenessResponse)
def uniqueness(req: UniquenessRequest) -> UniquenessResponse:
    cfg = _parse_or_400(req.config)
    grid = cfg.build_grid()
    p = cfg.build_potential()
    mob = cfg.build_mobility()
    if mob.form == "degenerate":
        raise HTTPException(status_code=400, detail={
            "kind": "validation",
            "violations": ["uniqueness experiment needs a non-degenerate mobility"]})
    phi1 = cfg.build_initial_field(grid)
    pert = band_limited_field(grid, req.perturbation_seed,
                              req.perturbation_band_limit, amplitude=1.0,
                              zero_mean=True, purpose="perturbation")
    phi2 = ScalarField(grid, phi1.values + req.eps * pert.values)
    if float(np.abs(phi2.values).max()) >= 1.0:
        raise HTTPException(status_code=400, detail={
            "kind": "validation",
            "violations": ["perturbed state leaves [-1, 1]; reduce eps"]})
    T = req.T if req.T is not None else cfg.T
    try:
        rep = continuous_dependence_experiment(
            phi1, phi2, T, cfg.build_stepper(), p, mob,
            eval_every=cfg.diag_every)
    except (StepError, ConvergenceError) as exc:
        raise _numerical_409(exc) from exc
    d_sym0 = rep.d_sym[0] if rep.d_sym and rep.d_sym[0] > 0 else 1.0
    return UniquenessResponse(
        d0=rep.d0,
        d_final=rep.d_final,
        ratio=rep.d_final / rep.d0 if rep.d0 > 0 else 0.0,
        c_emp=rep.c_emp,
        c_emp_symmetric=float(max(rep.d_sym) / d_sym0) if rep.d_sym else 0.0,
        sandwich_slack=rep.sandwich_slack(*mob.bounds),
        times=rep.times, d=rep.d, d_symmetric=rep.d_sym, hm1=rep.hm1,
    )


@app.post("/lab", response_model=LabResponse)
def lab(req: LabRequest) -> LabResponse:
    report = _lab_report(req.suite, req.seed, req.samples)
    return LabResponse(suite=req.suite, seed=req.seed, samples=req.samples,
                       report=report)


def _lab_report(suite: str, seed: int, samples: int) -> dict:
    out: dict = {}
    if suite in ("gronwall", "all"):
        rows = []
        violations = 0
        for sp in sample_ode_specs(seed=seed, n=samples):
            bound = gronwall_superlinear_bound(sp)
            _, y = integrate_spec_ode(sp)
            _, ye = integrate_envelope_ode(sp)
            ok = float(y.max()) <= bound and float(ye.max()) <= bound
            violations += 0 if ok else 1
            rows.append({"f0": sp.f0, "M": sp.M, "delta": sp.delta,
                         "sigma": sp.sigma, "g_integral": sp.g_integral,
                         "bound": bound, "max_single_sigma": float(y.max()),
                         "max_envelope": float(ye.max()), "ok": ok})
        out["gronwall"] = {"violations": violations, "rows": rows}
    if suite in ("uniform", "all"):
        viol, margin = windowed_bound_check(seed=seed + 1, n=samples)
        out["uniform"] = {"violations": viol, "min_bound_over_f": margin}
    if suite in ("blowup", "all"):
        rep = blowup_time_scan(1.0, [0.2, 0.1, 0.05], 1.0, 1.0)
        out["blowup"] = {
            "rows": [{"rho": r.rho, "blowup_time": r.blowup_time,
                      "blowup_time_exact": r.blowup_time_exact,
                      "double_exp_bound_ok": r.superlinear_bound_ok,
                      "local_bound_ok": r.local_bound_ok} for r in rep.rows]}
    if suite in ("gn", "all"):
        rep = gn_inequality_sweep(RandomFieldSpec(seed=seed, band_limit=8),
                                  [2, 4, 8, 16, 32, 64],
                                  n_fields=min(samples * 2, 100),
                                  grid=Grid(64, 64, 1.0, 1.0))
        out["gn"] = {"r": list(rep.r_values), "max_ratio": list(rep.max_ratio),
                     "mean_ratio": list(rep.mean_ratio),
                     "dual_ratio_max": list(rep.dual_ratio_max),
                     "log_slope": rep.log_slope}
    if suite in ("elliptic", "all"):
        from ..thermo import MobilitySpec
        mob = MobilitySpec.nondegenerate([1.0, 0.5], 0.5, 1.5)
        g = Grid(32, 32, 1.0, 1.0)
        rep = elliptic_estimate_report(
            g, RandomFieldSpec(seed=seed, band_limit=6), [2.5, 3.0, 4.0, 6.0],
            mob, n_samples=samples, extended=True)
        out["elliptic"] = {"s": list(rep.s_values), "c_star": list(rep.c_star),
                           "c_plain_h2": rep.c_plain_h2, "c_w24": rep.c_w24,
                           "c_h3": rep.c_h3}
    if not out:
        raise HTTPException(status_code=400, detail={
            "kind": "validation", "violations": [f"unknown suite {suite!r}"]})
    return out


@app.post("/check", response_model=CheckResponse)
def check(req: CheckRequest) -> CheckResponse:
    try:
        results = run_criteria(only=req.only, out_dir=req.out_dir)
    except ValueError as exc:
        raise HTTPException(status_code=400, detail={
            "kind": "validation", "violations": [str(exc)]}) from exc
    rows = [CheckCriterion(cid=r.cid, name=r.name, passed=r.passed,
                           details=r.details) for r in results]
    return CheckResponse(results=rows, all_passed=all(r.passed for r in results),
                         table=format_table(results))
