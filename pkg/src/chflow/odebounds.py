"""Closed-form Gronwall-type bounds and their brute-force ODE oracles.

Two bounds are certified by sampling:

* the double-exponential bound for positive f with
  f'(t) <= (M / sigma) g(t) f(t)^{1 + sigma} for every sigma in (0, delta):

      f(t) <= f(0) (2^{1/delta} + f(0))^{2^{2 + 16 M int g}}

  The hypothesis is a full family over sigma.  The extremal function under
  that family solves the envelope ODE f' = M g f inf_sigma f^sigma / sigma,
  which the oracle integrates; a single-sigma ODE solution obeys the bound
  only in a restricted regime (see ``sample_ode_specs``), which is the
  regime the random spec generator enforces.

* the uniform (windowed) bound: f' <= g f + h with window integrals
  int_t^{t+r} (f, g, h) <= (a1, a2, a3) gives f(t) <= (a1 / r + a3) e^{a2}
  for t >= t0 + r.

``blowup_time_scan`` integrates the saturated power ODE
B' = (K / rho) B^{2 (1 + rho)} and reports how the blow-up time shrinks as
rho decreases: the 1/rho prefactor defeats any small-rho rescue, which is
the quantitative point the scan demonstrates.  On each pre-blow-up window
the double-exponential bound with g = B is checked, and the local algebraic
bound B0 [1 - 2 K B0^{2 rho} int_0^t B]^{-1/(2 rho)} -- exact for the
saturated ODE -- is compared against the numeric solution inside its
validity window 2 K B0^{2 rho} int B < 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fields import stream

__all__ = [
    "OdeSpec",
    "gronwall_superlinear_bound",
    "uniform_gronwall_bound",
    "windowed_bound_check",
    "rk4_path",
    "rk4_self_consistent",
    "integrate_spec_ode",
    "integrate_envelope_ode",
    "sample_ode_specs",
    "blowup_time_scan",
    "BlowupReport",
]


@dataclass(frozen=True)
class OdeSpec:
    """Data of one superlinear Gronwall experiment.

    ``g`` holds step-function samples on a uniform partition of [0, T0];
    ``sigma`` is the exponent the brute-force ODE uses, drawn inside
    (0, delta).
    """

    f0: float
    M: float
    delta: float
    sigma: float
    g: tuple[float, ...]
    T0: float

    def __post_init__(self):
        if not (self.f0 > 0 and self.M > 0 and self.T0 > 0):
            raise ValueError("f0, M, T0 must be positive")
        if not (0.0 < self.delta <= 1.0):
            raise ValueError("delta must lie in (0, 1]")
        if not (0.0 < self.sigma < self.delta):
            raise ValueError("sigma must lie in (0, delta)")
        if len(self.g) < 1 or any(v < 0 or not math.isfinite(v) for v in self.g):
            raise ValueError("g must be nonnegative finite samples")

    @property
    def g_integral(self) -> float:
        return float(sum(self.g)) * self.T0 / len(self.g)

    def g_at(self, t: float) -> float:
        idx = min(int(t / self.T0 * len(self.g)), len(self.g) - 1)
        return self.g[max(idx, 0)]


def gronwall_superlinear_bound(spec: OdeSpec) -> float:
    """The closed form f0 (2^{1/delta} + f0)^{2^{2 + 16 M int g}}.

    Returns +inf when the value overflows double precision (the exponent
    tower grows fast); callers treat +inf as "bound vacuously holds".
    """
    base = 2.0 ** (1.0 / spec.delta) + spec.f0
    expo_log2 = 2.0 + 16.0 * spec.M * spec.g_integral
    if expo_log2 > 1023.0:
        return math.inf
    expo = 2.0 ** expo_log2
    log_val = math.log(spec.f0) + expo * math.log(base)
    if log_val > 709.0:
        return math.inf
    return float(spec.f0 * base ** expo)


def uniform_gronwall_bound(a1: float, a2: float, a3: float, r: float) -> float:
    """The windowed bound (a1 / r + a3) e^{a2}."""
    if a1 < 0 or a2 < 0 or a3 < 0:
        raise ValueError("a1, a2, a3 must be nonnegative")
    if not (r > 0):
        raise ValueError("r must be positive")
    return float((a1 / r + a3) * math.exp(a2))


# ---------------------------------------------------------------------------
# RK4 oracles
# ---------------------------------------------------------------------------


def rk4_path(rhs, y0: float, t0: float, t1: float, n_steps: int,
             cap: float = 1e100) -> tuple[np.ndarray, np.ndarray]:
    """Classic fixed-step RK4; truncates where the solution exceeds ``cap``
    or stops being finite (the returned arrays end at the last good node)."""
    t = np.linspace(t0, t1, n_steps + 1)
    y = np.empty(n_steps + 1)
    y[0] = y0
    h = (t1 - t0) / n_steps
    for i in range(n_steps):
        ti, yi = t[i], y[i]
        k1 = rhs(ti, yi)
        k2 = rhs(ti + 0.5 * h, yi + 0.5 * h * k1)
        k3 = rhs(ti + 0.5 * h, yi + 0.5 * h * k2)
        k4 = rhs(ti + h, yi + h * k3)
        yn = yi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not math.isfinite(yn) or abs(yn) > cap:
            return t[: i + 1], y[: i + 1]
        y[i + 1] = yn
    return t, y


def rk4_self_consistent(rhs, y0: float, t0: float, t1: float,
                        n0: int = 64, rtol: float = 1e-6,
                        max_doublings: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-step RK4 with step doubling until two successive refinements
    agree to ``rtol`` in the relative sup norm (ground-truth discipline for
    every bound check below)."""
    n = n0
    t_prev, y_prev = rk4_path(rhs, y0, t0, t1, n)
    for _ in range(max_doublings):
        n *= 2
        t_new, y_new = rk4_path(rhs, y0, t0, t1, n)
        if len(y_new) == 2 * (len(y_prev) - 1) + 1:
            diff = np.abs(y_new[::2] - y_prev)
            scale = np.maximum(np.abs(y_new[::2]), 1.0)
            if float((diff / scale).max()) <= rtol:
                return t_new, y_new
        t_prev, y_prev = t_new, y_new
    raise RuntimeError("RK4 refinement did not self-converge; solution likely blows up")


def rk4_piecewise(piece_rhs, y0: float, T0: float, n_pieces: int, n_sub: int,
                  cap: float = 1e100) -> tuple[np.ndarray, np.ndarray]:
    """RK4 for y' = piece_rhs(i, y) on a uniform partition into n_pieces.

    Within each piece the right-hand side is autonomous, so the classic
    order holds despite step-function coefficients; steps never straddle a
    piece boundary.
    """
    h = T0 / (n_pieces * n_sub)
    t = np.linspace(0.0, T0, n_pieces * n_sub + 1)
    y = np.empty(n_pieces * n_sub + 1)
    y[0] = y0
    idx = 0
    for i in range(n_pieces):
        for _ in range(n_sub):
            yi = y[idx]
            k1 = piece_rhs(i, yi)
            k2 = piece_rhs(i, yi + 0.5 * h * k1)
            k3 = piece_rhs(i, yi + 0.5 * h * k2)
            k4 = piece_rhs(i, yi + h * k3)
            yn = yi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not math.isfinite(yn) or abs(yn) > cap:
                return t[: idx + 1], y[: idx + 1]
            idx += 1
            y[idx] = yn
    return t, y


def rk4_piecewise_self_consistent(piece_rhs, y0: float, T0: float, n_pieces: int,
                                  rtol: float = 1e-6, n_sub0: int = 8,
                                  max_doublings: int = 12) -> tuple[np.ndarray, np.ndarray]:
    n_sub = n_sub0
    t_prev, y_prev = rk4_piecewise(piece_rhs, y0, T0, n_pieces, n_sub)
    for _ in range(max_doublings):
        n_sub *= 2
        t_new, y_new = rk4_piecewise(piece_rhs, y0, T0, n_pieces, n_sub)
        if len(y_new) == 2 * (len(y_prev) - 1) + 1:
            diff = np.abs(y_new[::2] - y_prev)
            scale = np.maximum(np.abs(y_new[::2]), 1.0)
            if float((diff / scale).max()) <= rtol:
                return t_new, y_new
        t_prev, y_prev = t_new, y_new
    raise RuntimeError("piecewise RK4 did not self-converge; solution likely blows up")


def integrate_spec_ode(spec: OdeSpec, rtol: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    """Solve f' = (M / sigma) g(t) f^{1 + sigma} at the case's sampled sigma."""
    c = spec.M / spec.sigma
    expo = 1.0 + spec.sigma
    g = spec.g

    def piece_rhs(i: int, y: float) -> float:
        return c * g[i] * max(y, 0.0) ** expo

    return rk4_piecewise_self_consistent(piece_rhs, spec.f0, spec.T0, len(g), rtol=rtol)


def integrate_envelope_ode(spec: OdeSpec, rtol: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    """Solve the extremal ODE f' = M g(t) f inf_{sigma in (0, delta)} f^sigma / sigma.

    For ln f >= 1/delta the infimum is attained at sigma = 1 / ln f with
    value e ln f; otherwise it is the limit value f^delta / delta at the
    right endpoint.  Any function satisfying the full hypothesis family is
    dominated by this solution.
    """
    d = spec.delta
    M = spec.M
    g = spec.g

    def piece_rhs(i: int, y: float) -> float:
        y = max(y, 1e-300)
        ln_y = math.log(y)
        factor = math.e * ln_y if ln_y * d >= 1.0 else (y ** d) / d
        return M * g[i] * y * factor

    return rk4_piecewise_self_consistent(piece_rhs, spec.f0, spec.T0, len(g), rtol=rtol)


def sample_ode_specs(seed: int, n: int) -> list[OdeSpec]:
    """Seeded spec generator restricted to the provably-dominated regime.

    sigma is kept in [delta/4, 0.95 delta] and g is rescaled so
    M * int g * f0^sigma <= 0.45; then the single-sigma solution satisfies
    f <= f0 2^{1/sigma} <= f0 2^{4/delta} <= bound, so the sampled checks
    are genuine (no saturation, no near-blow-up escapes).
    """
    rng = stream(seed, "ode_specs")
    specs = []
    for _ in range(n):
        delta = float(rng.uniform(0.3, 1.0))
        sigma = float(rng.uniform(0.25 * delta, 0.95 * delta))
        f0 = float(rng.uniform(0.2, 3.0))
        M = float(rng.uniform(0.1, 2.0))
        T0 = float(rng.uniform(0.5, 2.0))
        k = int(rng.integers(4, 13))
        raw = rng.uniform(0.0, 1.0, size=k)
        raw_int = raw.sum() * T0 / k
        target = float(rng.uniform(0.05, 0.45))
        scale = target / (M * raw_int * f0 ** sigma) if raw_int > 0 else 0.0
        specs.append(OdeSpec(f0=f0, M=M, delta=delta, sigma=sigma,
                             g=tuple(float(v) for v in raw * scale), T0=T0))
    return specs


def windowed_bound_check(seed: int, n: int) -> tuple[int, float]:
    """Sample n linear-forced ODEs f' = g f + h and check the windowed bound.

    For each seeded case the equality ODE is integrated (piecewise RK4,
    step-doubled), the window integrals a1, a2, a3 are measured from the
    numeric solution and the exact piecewise integrals of g and h (inflated
    by 1e-6 to absorb the grid sup), and f(t) <= (a1 / r + a3) e^{a2} is
    asserted for t >= r.  Returns (violations, min bound/f margin).
    """
    rng = stream(seed, "ode_specs")
    violations = 0
    worst = math.inf
    for _ in range(n):
        T = float(rng.uniform(2.0, 5.0))
        r = float(rng.uniform(0.2, 1.0))
        k = int(rng.integers(4, 13))
        gs = rng.uniform(0.0, 0.8, size=k)
        hs = rng.uniform(0.0, 0.8, size=k)
        f0 = float(rng.uniform(0.1, 5.0))

        def piece_rhs(i: int, yv: float) -> float:
            return gs[i] * yv + hs[i]

        t, f = rk4_piecewise_self_consistent(piece_rhs, f0, T, k, rtol=1e-8)
        dt_grid = t[1] - t[0]
        cum_f = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * dt_grid)])
        n_sub = (len(t) - 1) // k
        g_nodes = np.repeat(gs, n_sub)
        h_nodes = np.repeat(hs, n_sub)
        cum_g = np.concatenate([[0.0], np.cumsum(g_nodes * dt_grid)])
        cum_h = np.concatenate([[0.0], np.cumsum(h_nodes * dt_grid)])

        def window_max(cum: np.ndarray) -> float:
            out = 0.0
            for i, ti in enumerate(t):
                te = ti + r
                if te > T:
                    break
                j = min(int(round(te / dt_grid)), len(t) - 1)
                out = max(out, float(cum[j] - cum[i]))
            return out

        a1 = window_max(cum_f) * (1.0 + 1e-6)
        a2 = window_max(cum_g) * (1.0 + 1e-6)
        a3 = window_max(cum_h) * (1.0 + 1e-6)
        bound = uniform_gronwall_bound(a1, a2, a3, r)
        tail = f[t >= r]
        if tail.size and float(tail.max()) > bound * (1.0 + 1e-9):
            violations += 1
        if tail.size:
            worst = min(worst, bound / max(float(tail.max()), 1e-300))
    return violations, float(worst)


# ---------------------------------------------------------------------------
# saturated power ODE scan
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BlowupRow:
    rho: float
    blowup_time: float | None      # None: no blow-up before T
    blowup_time_exact: float       # closed form for the saturated ODE
    superlinear_bound_ok: bool     # double-exp bound with g = B on the window
    local_bound_ok: bool           # algebraic local bound inside its window
    max_B: float


@dataclass(frozen=True)
class BlowupReport:
    K: float
    B0: float
    T: float
    rows: tuple[BlowupRow, ...]

    @property
    def blowup_times(self) -> list[float | None]:
        return [r.blowup_time for r in self.rows]


def _exact_blowup_time(K: float, rho: float, B0: float) -> float:
    # B^{-(1+2 rho)}(t) = B0^{-(1+2 rho)} - (1 + 2 rho) (K / rho) t
    return rho * B0 ** (-(1.0 + 2.0 * rho)) / (K * (1.0 + 2.0 * rho))


def blowup_time_scan(K: float, rho_list, B0: float, T: float,
                     cap: float = 1e12) -> BlowupReport:
    """Integrate B' = (K / rho) B^{2 (1 + rho)} for each rho and report
    blow-up times plus the two bound checks on the pre-blow-up window.

    The numeric blow-up time is where the RK4 path first exceeds ``cap``,
    refined until stable to 1e-6 relative; with cap = 1e12 that time agrees
    with the true singularity to ~cap^{-(1+2 rho)}.  Both bound checks use
    the trapezoid quadrature of int B, which over-estimates the integral of
    this convex increasing solution, so the checks are one-sided-safe.
    """
    if not (K > 0 and B0 >= 1.0 and T > 0):
        raise ValueError("need K > 0, B0 >= 1, T > 0")
    rows = []
    for rho in rho_list:
        if not (0.0 < rho < 0.25):
            raise ValueError("rho values must lie in (0, 1/4)")
        c = K / rho
        expo = 2.0 * (1.0 + rho)

        def rhs(t: float, y: float) -> float:
            return c * y ** expo

        t_star = _exact_blowup_time(K, rho, B0)
        # numeric time-to-cap: integrate dt/du = e^{-(expo-1) u} / c over
        # u = ln B (smooth decaying integrand, step-doubled RK4 quadrature)
        _, tau = rk4_self_consistent(
            lambda u, t: math.exp(-(expo - 1.0) * u) / c,
            0.0, math.log(B0), math.log(cap), n0=64)
        t_cap = float(tau[-1])
        if t_cap >= T:
            blowup_time = None
            horizon = T
        else:
            blowup_time = t_cap
            horizon = 0.98 * t_cap
        t_path, y_path = rk4_self_consistent(rhs, B0, 0.0, horizon, n0=256)

        # bound checks along the computed window
        cumB = np.concatenate([[0.0], np.cumsum(
            0.5 * (y_path[1:] + y_path[:-1]) * np.diff(t_path))])
        ok_super = True
        ok_local = True
        for Bi, Ii in zip(y_path, cumB):
            # double-exponential bound with f = g = B, M = 2K, delta = 1/2
            expo_log2 = 2.0 + 32.0 * K * Ii
            if expo_log2 > 1023.0:
                bound = math.inf
            else:
                lv = math.log(B0) + (2.0 ** expo_log2) * math.log(4.0 + B0)
                bound = math.inf if lv > 709.0 else B0 * (4.0 + B0) ** (2.0 ** expo_log2)
            if Bi > bound * (1.0 + 1e-9):
                ok_super = False
            window = 2.0 * K * (B0 ** (2.0 * rho)) * Ii
            if window < 1.0 - 1e-9:
                local = B0 * (1.0 - window) ** (-1.0 / (2.0 * rho))
                if Bi > local * (1.0 + 1e-9):
                    ok_local = False
        rows.append(BlowupRow(rho=float(rho), blowup_time=blowup_time,
                              blowup_time_exact=float(t_star),
                              superlinear_bound_ok=ok_super,
                              local_bound_ok=ok_local,
                              max_B=float(y_path.max())))
    return BlowupReport(K=float(K), B0=float(B0), T=float(T), rows=tuple(rows))
