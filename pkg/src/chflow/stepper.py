"""Semi-implicit convex-splitting time integration of the phase-field flow.

Fully discrete scheme (one step from phi_n):

    (phi_{n+1} - phi_n) / dt = div( b(phi_n) grad mu_{n+1} )
    mu_{n+1} = -lap phi_{n+1} + F'(phi_{n+1}) - theta0 phi_n

The convex entropy part F' is implicit, the concave -theta0 s part explicit,
and the mobility is lagged at t_n.  This yields, unconditionally in dt,

    E(phi_{n+1}) + dt * sum b(phi_n) |grad mu_{n+1}|^2 <= E(phi_n)

up to the Newton residual, and exact mass conservation (the right-hand side
telescopes to zero; the accepted iterate is additionally projected back to
the initial mass, removing the Newton-residual-sized mean drift).  The
logarithmic barrier keeps Newton iterates inside (-1, 1); a damped line
search (halve until inside the clamped domain and the residual decreases)
handles the blow-up of F' near the endpoints.

Each Newton system (I + dt * A_b (-lap + diag F'')) delta = -R is solved by
right-preconditioned GMRES with the cosine-transform-diagonal preconditioner
1 + dt * b_avg (lambda^2 + d_avg lambda); the preconditioned operator is a
bounded perturbation of the identity, so iteration counts stay small and
grid-independent.

State bookkeeping: ``SimState.mu`` always holds the constitutive potential
-lap phi + psi'(phi) recomputed from the accepted phi (so the state
invariant is exact); the scheme's lagged potential is used internally for
the dissipation increment, which is what makes the recorded energy balance
telescope.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .grid import (
    ScalarField,
    dct_helmholtz_solve,
    neg_laplacian_symbol,
    weighted_grad_sq,
)
from .grid import _div_b_grad_values, _lap_values  # raw kernels, hot path
from .ledger import RunLedger
from .thermo import (
    EPS_CLAMP,
    MobilitySpec,
    PotentialParams,
    energy,
    energy_convex,
    f_prime_values_clamped,
    f_second_values_clamped,
    mobility_on_faces,
    psi_prime_values_clamped,
)

try:  # scipy.fft is already a hard dependency via grid
    from scipy.fft import dctn, idctn
except ImportError:  # pragma: no cover
    raise

__all__ = [
    "SimState",
    "StepperConfig",
    "StepError",
    "make_state",
    "step",
    "run",
    "adaptive_dt",
]

logger = logging.getLogger(__name__)

_DEGENERATE_FACE_FLOOR = 1e-12


class StepError(RuntimeError):
    """Newton failed to converge (diagnostics in the message)."""


@dataclass(frozen=True)
class SimState:
    phi: ScalarField
    mu: ScalarField
    t: float
    step: int
    mass0: float


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    newton_tol: float = 1e-10
    newton_max: int = 30
    theta_stab: float = 0.0
    adaptive: bool = False
    dt_min: float = 1e-8
    dt_max: float = 1.0
    shrink: float = 0.5
    grow: float = 1.5

    def __post_init__(self):
        if not (self.dt > 0):
            raise ValueError("dt must be positive")
        if not (self.newton_tol > 0) or self.newton_max < 1:
            raise ValueError("bad Newton parameters")
        if self.theta_stab < 0:
            raise ValueError("theta_stab must be >= 0")
        if self.adaptive:
            if not (0 < self.dt_min <= self.dt <= self.dt_max):
                raise ValueError("need dt_min <= dt <= dt_max for adaptive stepping")
            if not (0 < self.shrink < 1) or not (1 < self.grow <= 2):
                raise ValueError("need shrink in (0,1) and grow in (1,2]")


@dataclass(frozen=True)
class StepInfo:
    newton_iters: int
    dt_used: float
    dissipation_increment: float
    energy_after: float
    clamp_events: int
    residual: float


def make_state(phi0: ScalarField, p: PotentialParams) -> SimState:
    """Initial state: pre-clamp phi0 touching +-1, derive mu constitutively."""
    if np.any(np.abs(phi0.values) > 1.0):
        raise ValueError("initial field must satisfy |phi0| <= 1")
    raw_mean = float(phi0.values.mean())
    if not (-1.0 < raw_mean < 1.0):
        raise ValueError(f"initial mean must lie in (-1, 1), got {raw_mean}")
    vals = np.clip(phi0.values, -1.0 + EPS_CLAMP, 1.0 - EPS_CLAMP)
    mass0 = float(vals.mean())
    phi = ScalarField(phi0.grid, vals)
    return SimState(phi=phi, mu=_constitutive_mu(phi, p), t=0.0, step=0, mass0=mass0)


def _constitutive_mu(phi: ScalarField, p: PotentialParams) -> ScalarField:
    g = phi.grid
    pp, _ = psi_prime_values_clamped(phi.values, p)
    return ScalarField(g, -_lap_values(phi.values, g.hx, g.hy) + pp)


# ---------------------------------------------------------------------------
# inner linear solver
# ---------------------------------------------------------------------------


def _gmres(apply_a: Callable[[np.ndarray], np.ndarray],
           apply_minv: Callable[[np.ndarray], np.ndarray],
           b: np.ndarray, rtol: float, maxiter: int) -> np.ndarray:
    """Right-preconditioned full GMRES on flattened arrays (deterministic)."""
    beta = float(np.linalg.norm(b))
    if beta == 0.0:
        return np.zeros_like(b)
    V = [b / beta]
    H = np.zeros((maxiter + 1, maxiter))
    cs = np.zeros(maxiter)
    sn = np.zeros(maxiter)
    gvec = np.zeros(maxiter + 1)
    gvec[0] = beta
    k_used = 0
    for k in range(maxiter):
        w = apply_a(apply_minv(V[k]))
        for i in range(k + 1):  # modified Gram-Schmidt
            H[i, k] = float(np.dot(V[i], w))
            w -= H[i, k] * V[i]
        h_next = float(np.linalg.norm(w))
        # previously accumulated Givens rotations on the new column
        for i in range(k):
            t = cs[i] * H[i, k] + sn[i] * H[i + 1, k]
            H[i + 1, k] = -sn[i] * H[i, k] + cs[i] * H[i + 1, k]
            H[i, k] = t
        denom = float(np.hypot(H[k, k], h_next))
        if denom == 0.0:
            break
        cs[k] = H[k, k] / denom
        sn[k] = h_next / denom
        H[k, k] = denom
        gvec[k + 1] = -sn[k] * gvec[k]
        gvec[k] = cs[k] * gvec[k]
        k_used = k + 1
        if abs(gvec[k + 1]) <= rtol * beta or h_next == 0.0:
            break
        V.append(w / h_next)
    y = np.linalg.solve(H[:k_used, :k_used], gvec[:k_used])
    x = np.zeros_like(b)
    for j in range(k_used):
        x += y[j] * V[j]
    return apply_minv(x)


# ---------------------------------------------------------------------------
# one step
# ---------------------------------------------------------------------------


def _advance(state: SimState, dt: float, cfg: StepperConfig, p: PotentialParams,
             spec: MobilitySpec) -> tuple[SimState, StepInfo]:
    g = state.phi.grid
    hx, hy = g.hx, g.hy
    phi_n = state.phi.values
    floor = _DEGENERATE_FACE_FLOOR if spec.form == "degenerate" else None
    b_face = mobility_on_faces(state.phi, spec, floor=floor)
    bx, by = b_face.x, b_face.y
    sym = neg_laplacian_symbol(g)
    b_avg = 0.5 * (bx[:, 1:-1].mean() + by[1:-1, :].mean())
    area_w = g.cell_area
    hi = 1.0 - EPS_CLAMP
    ts = cfg.theta_stab

    def residual(phi: np.ndarray) -> np.ndarray:
        fp, _ = f_prime_values_clamped(phi, p)
        mu_s = -_lap_values(phi, hx, hy) + fp - p.theta0 * phi_n + ts * (phi - phi_n)
        return phi - phi_n - dt * _div_b_grad_values(bx, by, mu_s, hx, hy)

    def rnorm(r: np.ndarray) -> float:
        return float(np.sqrt(np.sum(r * r) * area_w))

    phi = phi_n.copy()
    r = residual(phi)
    res = rnorm(r)
    clamp_events = 0
    iters = 0
    while res > cfg.newton_tol and iters < cfg.newton_max:
        fpp, _ = f_second_values_clamped(phi, p)
        d_avg = float(fpp.mean()) + ts
        denom = 1.0 + dt * b_avg * (sym * sym + d_avg * sym)

        def apply_j(vflat: np.ndarray) -> np.ndarray:
            v = vflat.reshape(g.shape)
            sv = -_lap_values(v, hx, hy) + (fpp + ts) * v
            out = v + dt * (-_div_b_grad_values(bx, by, sv, hx, hy))
            return out.reshape(-1)

        def apply_minv(vflat: np.ndarray) -> np.ndarray:
            v = vflat.reshape(g.shape)
            out = idctn(dctn(v, type=2, norm="ortho") / denom, type=2, norm="ortho")
            return out.reshape(-1)

        delta = _gmres(apply_j, apply_minv, -r.reshape(-1), rtol=1e-6, maxiter=200)
        delta = delta.reshape(g.shape)

        alpha = 1.0
        accepted = False
        for _ in range(40):
            trial = phi + alpha * delta
            if np.abs(trial).max() >= hi:
                clamp_events += 1
                alpha *= 0.5
                continue
            r_t = residual(trial)
            res_t = rnorm(r_t)
            if res_t <= (1.0 - 1e-4 * alpha) * res or res_t <= cfg.newton_tol:
                phi, r, res = trial, r_t, res_t
                accepted = True
                break
            alpha *= 0.5
        iters += 1
        if not accepted:
            raise StepError(
                f"Newton line search stalled at t={state.t:.6g}, dt={dt:.3e}, "
                f"iter {iters}, residual {res:.3e}, clamp events {clamp_events}"
            )
    if res > cfg.newton_tol:
        raise StepError(
            f"Newton did not converge in {cfg.newton_max} iterations at "
            f"t={state.t:.6g}, dt={dt:.3e}, final residual {res:.3e}"
        )

    # project the mean back to the conserved mass (removes the Newton-residual
    # sized drift; the shift is a constant far below the dissipation slack)
    phi = phi - (phi.mean() - state.mass0)
    new_phi = ScalarField(g, phi)
    fp, _ = f_prime_values_clamped(phi, p)
    mu_scheme = -_lap_values(phi, hx, hy) + fp - p.theta0 * phi_n + ts * (phi - phi_n)
    diss = dt * weighted_grad_sq(b_face, ScalarField(g, mu_scheme))
    e_after = energy(new_phi, p)
    new_state = SimState(phi=new_phi, mu=_constitutive_mu(new_phi, p),
                         t=state.t + dt, step=state.step + 1, mass0=state.mass0)
    info = StepInfo(newton_iters=iters, dt_used=dt, dissipation_increment=diss,
                    energy_after=e_after, clamp_events=clamp_events, residual=res)
    return new_state, info


def step(state: SimState, cfg: StepperConfig, p: PotentialParams,
         spec: MobilitySpec) -> SimState:
    """Advance one time step (dt from cfg; shrinks toward dt_min if adaptive)."""
    new_state, _ = _step_with_retry(state, cfg.dt, cfg, p, spec)
    return new_state


def _step_with_retry(state: SimState, dt: float, cfg: StepperConfig,
                     p: PotentialParams, spec: MobilitySpec) -> tuple[SimState, StepInfo]:
    while True:
        try:
            return _advance(state, dt, cfg, p, spec)
        except StepError:
            if not cfg.adaptive or dt <= cfg.dt_min:
                raise
            dt = max(dt * cfg.shrink, cfg.dt_min)
            logger.warning("step failed, retrying with dt=%.3e", dt)


def adaptive_dt(recent: Sequence[StepInfo], cfg: StepperConfig,
                last_energy_increase: float = 0.0) -> float:
    """Next dt from the recent step history.

    Shrink when Newton needed more than 2/3 of its budget or the energy rose
    beyond the dissipation slack; grow after 10 consecutive easy steps
    (Newton <= 5).  The result is clamped to [dt_min, dt_max]; a shrink
    request at dt_min leaves dt unchanged with a warning.
    """
    if not recent:
        return cfg.dt
    dt = recent[-1].dt_used
    if not cfg.adaptive:
        return dt
    hard = recent[-1].newton_iters > (2 * cfg.newton_max) // 3
    bad_energy = last_energy_increase > 10.0 * cfg.newton_tol
    if hard or bad_energy:
        if dt <= cfg.dt_min:
            logger.warning("dt already at dt_min=%.3e, cannot shrink", cfg.dt_min)
            return dt
        return max(dt * cfg.shrink, cfg.dt_min)
    if len(recent) >= 10 and all(r.newton_iters <= 5 for r in recent[-10:]):
        return min(dt * cfg.grow, cfg.dt_max)
    return dt


def run(phi0: ScalarField, T: float, cfg: StepperConfig, p: PotentialParams,
        spec: MobilitySpec,
        hooks: Iterable[Callable[[SimState, RunLedger], None]] = (),
        record_hm1_increments: bool = False) -> tuple[SimState, RunLedger]:
    """Advance from phi0 to t >= T, recording the full ledger.

    Hooks are called after every accepted step with (state, ledger).  With
    ``record_hm1_increments`` the dual-norm distance between consecutive
    states is stored in the ledger extras (one constant-coefficient solve
    per step), which the equilibrium trend monitor consumes.
    """
    if T < 0:
        raise ValueError("T must be >= 0")
    state = make_state(phi0, p)
    led = RunLedger()
    cum = 0.0
    _append_row(led, state, p, spec, cum, newton_iters=0, dt=0.0,
                hm1_inc=np.nan)
    hooks = tuple(hooks)
    dt = cfg.dt
    infos: list[StepInfo] = []
    delta_e_last = 0.0
    while state.t < T - 1e-12 * max(T, 1.0):
        if cfg.adaptive and infos:
            dt = adaptive_dt(infos, cfg, last_energy_increase=delta_e_last)
        e_before = led.last("E")
        prev_vals = state.phi.values
        state, info = _step_with_retry(state, dt, cfg, p, spec)
        dt = info.dt_used
        delta_e_last = info.energy_after - e_before
        infos.append(info)
        if len(infos) > 32:
            infos.pop(0)
        cum += info.dissipation_increment
        hm1_inc = np.nan
        if record_hm1_increments:
            diff = ScalarField(state.phi.grid, state.phi.values - prev_vals)
            diff.values -= diff.values.mean()
            u = dct_helmholtz_solve(0.0, 1.0, diff)
            hm1_inc = float(np.sqrt(max(np.vdot(diff.values, u.values).real
                                        * state.phi.grid.cell_area, 0.0)))
        _append_row(led, state, p, spec, cum, newton_iters=info.newton_iters,
                    dt=info.dt_used, hm1_inc=hm1_inc)
        for h in hooks:
            h(state, led)
    return state, led


def _append_row(led: RunLedger, state: SimState, p: PotentialParams,
                spec: MobilitySpec, cum: float, newton_iters: int, dt: float,
                hm1_inc: float) -> None:
    phi, mu = state.phi, state.mu
    g = phi.grid
    floor = _DEGENERATE_FACE_FLOOR if spec.form == "degenerate" else None
    b_face = mobility_on_faces(phi, spec, floor=floor)
    lam = weighted_grad_sq(b_face, mu)
    dxm = (mu.values[:, 1:] - mu.values[:, :-1]) / g.hx
    dym = (mu.values[1:, :] - mu.values[:-1, :]) / g.hy
    grad_mu_sq = float((np.sum(dxm * dxm) + np.sum(dym * dym)) * g.cell_area)
    sep = float(1.0 - np.abs(phi.values).max())
    led.append(t=state.t, mass=float(phi.values.mean()), E=energy(phi, p),
               E0=energy_convex(phi, p), grad_mu_sq=grad_mu_sq, Lambda=lam,
               sep=max(sep, 0.0), mu_bar=float(mu.values.mean()),
               cum_dissipation=cum, newton_iters=newton_iters, dt=dt,
               hm1_increment=hm1_inc)
