"""Stationary states under the mass constraint, and equilibrium trend monitoring.

A field is stationary when -lap phi + psi'(phi) is constant; the residual
below measures the deviation from that (the constant is the mean, which the
flow cannot change).  The primary path to a stationary state is the flow
itself: long-time integration with adaptive steps until the potential
gradient and the residual are below tolerance.  A damped Newton polish on
the stationary system (mass fixed through a scalar multiplier) is available
for end states that are already close.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy.fft import dctn, idctn

from .grid import ScalarField, mean, neg_laplacian_symbol
from .grid import _lap_values
from .ledger import RunLedger
from .stepper import StepperConfig, run, _gmres
from .thermo import (
    EPS_CLAMP,
    MobilitySpec,
    PotentialParams,
    f_second_values_clamped,
    psi_prime_values_clamped,
)

__all__ = [
    "SteadyConfig",
    "SteadyResult",
    "stationarity_residual",
    "solve_stationary",
    "omega_limit_monitor",
]

logger = logging.getLogger(__name__)

_METHODS = ("long_time_integration", "damped_newton")


@dataclass(frozen=True)
class SteadyConfig:
    tol_residual: float = 1e-9
    tol_gradmu: float = 1e-8
    max_time: float = 500.0
    method: str = "long_time_integration"
    stepper: StepperConfig = StepperConfig(
        dt=1e-3, adaptive=True, dt_min=1e-9, dt_max=0.5, shrink=0.5, grow=1.5)

    def __post_init__(self):
        if self.tol_residual <= 0 or self.tol_gradmu <= 0 or self.max_time <= 0:
            raise ValueError("tolerances and max_time must be positive")
        if self.method not in _METHODS:
            raise ValueError(f"unknown method {self.method!r}")


@dataclass(frozen=True)
class SteadyResult:
    phi: ScalarField
    converged: bool
    residual: float
    grad_mu_norm: float
    t_reached: float
    ledger: RunLedger | None = None


def stationarity_residual(phi: ScalarField, p: PotentialParams) -> float:
    """|| -lap phi + psi'(phi) - mean(psi'(phi)) || / sqrt(|domain|)."""
    if np.any(np.abs(phi.values) >= 1.0):
        raise ValueError("stationarity residual needs |phi| < 1")
    g = phi.grid
    pp, _ = psi_prime_values_clamped(phi.values, p)
    r = -_lap_values(phi.values, g.hx, g.hy) + pp
    r = r - r.mean()
    return float(np.sqrt(np.sum(r * r) * g.cell_area / g.area))


def solve_stationary(m: float, init: ScalarField, cfg: SteadyConfig,
                     p: PotentialParams, spec: MobilitySpec) -> SteadyResult:
    """Stationary field with mean m, from ``init`` (which must have mean m).

    ``long_time_integration`` drives the flow over growing output intervals
    until || grad mu || <= tol_gradmu and the stationarity residual is below
    tol_residual, up to simulation time max_time (non-convergence returns
    the best state, flagged).  ``damped_newton`` polishes ``init`` directly
    on the stationary system.
    """
    if abs(mean(init) - m) > 1e-12 * max(1.0, abs(m)):
        raise ValueError(f"init has mean {mean(init):.6g}, expected {m:.6g}")
    if cfg.method == "damped_newton":
        return _newton_polish(init, cfg, p)

    phi = init
    t_reached = 0.0
    led_all = RunLedger()
    interval = 1.0
    best = None
    while t_reached < cfg.max_time:
        horizon = min(interval, cfg.max_time - t_reached)
        state, led = run(phi, horizon, cfg.stepper, p, spec)
        # stitch ledgers (shift times by what we already covered)
        rows = led.rows if t_reached == 0.0 else led.rows[1:]
        for row in rows:
            led_all.rows.append((row[0] + t_reached,) + row[1:])
        for key in led_all.extras:
            src = led.extras[key] if t_reached == 0.0 else led.extras[key][1:]
            led_all.extras[key].extend(src)
        t_reached += led.column("t")[-1]
        phi = state.phi
        res = stationarity_residual(phi, p)
        gmu = float(np.sqrt(led.column("grad_mu_sq")[-1]))
        best = SteadyResult(phi=phi, converged=False, residual=res,
                            grad_mu_norm=gmu, t_reached=t_reached, ledger=led_all)
        if gmu <= cfg.tol_gradmu and res <= cfg.tol_residual:
            return replace(best, converged=True)
        interval = min(interval * 2.0, 64.0)
    logger.warning("stationary solve hit max_time=%.3g (residual %.3e)",
                   cfg.max_time, best.residual)
    return best


def _newton_polish(phi0: ScalarField, cfg: SteadyConfig, p: PotentialParams,
                   max_iter: int = 60) -> SteadyResult:
    """Damped Newton on -lap phi + psi'(phi) = const, mean(phi) fixed.

    Works on the mean-zero fluctuation; the multiplier is eliminated by
    projecting the residual.  The linearization can be indefinite away from
    equilibria, so steps are damped until the residual decreases; failure to
    converge returns the best iterate, flagged.
    """
    g = phi0.grid
    sym = neg_laplacian_symbol(g)
    hi = 1.0 - EPS_CLAMP
    phi = np.clip(phi0.values.copy(), -hi, hi)
    mass = phi0.values.mean()

    def resid(v: np.ndarray) -> np.ndarray:
        pp, _ = psi_prime_values_clamped(v, p)
        r = -_lap_values(v, g.hx, g.hy) + pp
        return r - r.mean()

    def rnorm(r: np.ndarray) -> float:
        return float(np.sqrt(np.sum(r * r) * g.cell_area / g.area))

    r = resid(phi)
    res = rnorm(r)
    for _ in range(max_iter):
        if res <= cfg.tol_residual:
            break
        fpp, _ = f_second_values_clamped(phi, p)
        psi_pp = fpp - p.theta0
        denom = sym + p.theta
        denom[0, 0] = 1.0

        def apply_j(vflat: np.ndarray) -> np.ndarray:
            v = vflat.reshape(g.shape)
            v = v - v.mean()
            out = -_lap_values(v, g.hx, g.hy) + psi_pp * v
            out -= out.mean()
            return out.reshape(-1)

        def apply_minv(vflat: np.ndarray) -> np.ndarray:
            v = vflat.reshape(g.shape)
            out = idctn(dctn(v, type=2, norm="ortho") / denom, type=2, norm="ortho")
            out -= out.mean()
            return out.reshape(-1)

        delta = _gmres(apply_j, apply_minv, -r.reshape(-1), rtol=1e-8, maxiter=200)
        delta = delta.reshape(g.shape)
        delta -= delta.mean()
        alpha, accepted = 1.0, False
        for _ in range(40):
            trial = phi + alpha * delta
            if np.abs(trial).max() >= hi:
                alpha *= 0.5
                continue
            r_t = resid(trial)
            res_t = rnorm(r_t)
            if res_t < res or res_t <= cfg.tol_residual:
                phi, r, res = trial, r_t, res_t
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
    phi = phi - (phi.mean() - mass)
    out = ScalarField(g, phi)
    res = stationarity_residual(out, p)
    return SteadyResult(phi=out, converged=res <= cfg.tol_residual, residual=res,
                        grad_mu_norm=float("nan"), t_reached=0.0, ledger=None)


def omega_limit_monitor(ledger: RunLedger, window: int) -> str:
    """Trend verdict over the trailing 2*window rows: converging / stalled /
    oscillating.

    Compares the recent half-window of || grad mu || (and, when recorded,
    of the dual-norm increments between consecutive states) against the
    previous half-window; a clear drop is converging, a flat level with
    alternating differences is oscillating, flat otherwise is stalled.
    """
    if window < 2:
        raise ValueError("window must be >= 2")
    if len(ledger) < 2 * window:
        raise ValueError(f"ledger has {len(ledger)} rows, need >= {2 * window}")
    gm = np.sqrt(ledger.column("grad_mu_sq"))[-2 * window:]
    inc = np.asarray(ledger.extras.get("hm1_increment", []), dtype=float)
    older, recent = gm[:window], gm[window:]
    m_old = float(np.median(older))
    m_new = float(np.median(recent))
    if m_old == 0.0 and m_new == 0.0:
        return "converging"
    if m_old == 0.0:
        return "oscillating"
    ratio = m_new / m_old
    if inc.size >= 2 * window and np.isfinite(inc[-2 * window:]).all():
        iold = float(np.median(inc[-2 * window:-window]))
        inew = float(np.median(inc[-window:]))
        inc_falling = inew <= 0.9 * iold or inew == 0.0
    else:
        inc_falling = True
    if ratio < 0.7 and inc_falling:
        return "converging"
    dgm = np.diff(np.log(np.maximum(gm, 1e-300)))
    flips = np.count_nonzero(np.sign(dgm[1:]) * np.sign(dgm[:-1]) < 0)
    if flips > 0.4 * max(len(dgm) - 1, 1):
        return "oscillating"
    return "stalled"
