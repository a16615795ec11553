"""Certification-by-sampling of the interpolation and elliptic inequalities.

These reports compute empirical constants and trend assertions on seeded
band-limited samples; they certify nothing beyond the sample, and say so.

Discrete norms (declared once, used everywhere):

    ||f||_{H1}^2 = ||f||^2 + ||grad f||^2            (face gradient)
    ||f||_{H2}^2 = ||f||_{H1}^2 + ||lap f||^2 + ||mixed second diffs||^2
    H3 adds the face gradient of the Laplacian as the third-order seminorm.

The Gagliardo-Nirenberg sweep measures the ratio

    ||f||_{L^r} / ( sqrt(r) ||f||_2^{2/r} ||f||_{H1}^{(r-2)/r} )

across r; boundedness of the max ratio uniformly in r is exactly the
sqrt(r) scaling of the critical interpolation inequality (a factor easy to
lose when chaining estimates, with consequences for the constants story the
ODE scan demonstrates).  The dual-norm column reports
||f - mean|| in the inverse-gradient norm against sqrt(r/(r-1)) ||f||_{L^r}.

The elliptic report finds, per exponent s in (2, 8], the smallest constant
C* such that

    ||G_q f||_{H2} <= (C*^2 s^2 / (s-2))^{s/4} ||grad q||^{(s-2)/2}
                      ||q||_{H2} ||grad G_q f|| + (s C* / 2) ||f||_2

holds across the sample, plus the plain-H2 variant
||G_q f||_{H2} <= C (||grad q|| ||q||_{H2} ||grad G_q f|| + ||f||_2);
extended mode adds the W^{2,4}-style and H3-style empirical constants.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .elliptic import EllipticWorkspace, hm1_norm, solve_weighted_poisson
from .fields import RandomFieldSpec, band_limited_field
from .grid import (
    Grid,
    ScalarField,
    grad_sq,
    inner,
    laplacian_neumann,
    make_field,
    norm_l2,
    norm_lr,
)
from .thermo import MobilitySpec

__all__ = [
    "h1_norm",
    "h2_norm",
    "h3_seminorm",
    "mixed_second_sq",
    "GnReport",
    "gn_inequality_sweep",
    "EllipticEstimateReport",
    "elliptic_estimate_report",
]


def mixed_second_sq(f: ScalarField) -> float:
    """Quadrature of the mixed second difference squared (corner points).

    For a product mode cos(pi k x / lx) cos(pi l y / ly) this evaluates to
    exactly lam_k lam_l ||f||^2, matching the 1D summation-by-parts
    identities on each axis.
    """
    g = f.grid
    v = f.values
    dxy = (v[1:, 1:] - v[1:, :-1] - v[:-1, 1:] + v[:-1, :-1]) / (g.hx * g.hy)
    return float(np.sum(dxy * dxy) * g.cell_area)


def h1_norm(f: ScalarField) -> float:
    return float(np.sqrt(inner(f, f) + grad_sq(f)))


def h2_norm(f: ScalarField) -> float:
    lap = laplacian_neumann(f)
    return float(np.sqrt(inner(f, f) + grad_sq(f) + inner(lap, lap)
                         + mixed_second_sq(f)))


def h3_seminorm(f: ScalarField) -> float:
    """Third-order content: face gradient of the discrete Laplacian."""
    return float(np.sqrt(grad_sq(laplacian_neumann(f))))


# ---------------------------------------------------------------------------
# Gagliardo-Nirenberg sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GnReport:
    r_values: tuple[float, ...]
    max_ratio: tuple[float, ...]
    mean_ratio: tuple[float, ...]
    dual_ratio_max: tuple[float, ...]
    log_slope: float  # least-squares slope of log max_ratio vs log r
    n_fields: int

    def ratios_bounded(self, slope_cap: float = 0.05) -> bool:
        return self.log_slope <= slope_cap


def gn_inequality_sweep(spec: RandomFieldSpec, r_list, n_fields: int = 100,
                        grid: Grid | None = None) -> GnReport:
    """Empirical interpolation ratios over seeded band-limited fields.

    Half the sample is zero-mean, half carries a random constant offset
    (the inequality is not mean-restricted).  The dual-norm column uses the
    mean-free part, since the inverse-gradient norm needs it.
    """
    g = grid if grid is not None else Grid(64, 64, 1.0, 1.0)
    r_values = tuple(float(r) for r in r_list)
    if any(r < 2.0 for r in r_values):
        raise ValueError("r values must be >= 2")
    max_ratio, mean_ratio, dual_max = [], [], []
    fields = []
    for i in range(n_fields):
        f = band_limited_field(g, spec.seed, spec.band_limit,
                               amplitude=spec.amplitude, zero_mean=(i % 2 == 0),
                               purpose="gn_fields", index=i, sup_normalized=False)
        fields.append(f)
    for r in r_values:
        ratios = np.empty(len(fields))
        duals = np.empty(len(fields))
        for i, f in enumerate(fields):
            l2 = norm_l2(f)
            h1 = h1_norm(f)
            lr = norm_lr(f, r)
            denom = np.sqrt(r) * l2 ** (2.0 / r) * h1 ** ((r - 2.0) / r)
            ratios[i] = lr / denom if denom > 0 else 0.0
            f0 = make_field(g, f.values - f.values.mean())
            dual_denom = np.sqrt(r / (r - 1.0)) * lr
            duals[i] = hm1_norm(f0) / dual_denom if dual_denom > 0 else 0.0
        max_ratio.append(float(ratios.max()))
        mean_ratio.append(float(ratios.mean()))
        dual_max.append(float(duals.max()))
    logs = np.log(np.asarray(max_ratio))
    slope = float(np.polyfit(np.log(r_values), logs, 1)[0])
    return GnReport(r_values=r_values, max_ratio=tuple(max_ratio),
                    mean_ratio=tuple(mean_ratio), dual_ratio_max=tuple(dual_max),
                    log_slope=slope, n_fields=n_fields)


# ---------------------------------------------------------------------------
# elliptic estimate report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EllipticEstimateReport:
    s_values: tuple[float, ...]
    c_star: tuple[float, ...]        # smallest admissible constant per s
    c_plain_h2: float                # plain-H2 variant constant
    c_w24: float | None              # extended: W^{2,4}-style constant
    c_h3: float | None               # extended: H3-style constant
    n_samples: int


def _sample_pairs(grid: Grid, spec: RandomFieldSpec, n_samples: int,
                  ws: EllipticWorkspace, mob: MobilitySpec):
    rows = []
    for i in range(n_samples):
        q = band_limited_field(grid, spec.seed, spec.band_limit, amplitude=0.9,
                               zero_mean=False, purpose="elliptic_samples",
                               index=2 * i, sup_normalized=True)
        f = band_limited_field(grid, spec.seed, spec.band_limit, amplitude=1.0,
                               zero_mean=True, purpose="elliptic_samples",
                               index=2 * i + 1, sup_normalized=False)
        u = solve_weighted_poisson(q, f, mob, ws)
        rows.append((q, f, u))
    return rows


def elliptic_estimate_report(grid: Grid, spec: RandomFieldSpec, s_list,
                             mob: MobilitySpec, n_samples: int = 50,
                             ws: EllipticWorkspace | None = None,
                             extended: bool = False) -> EllipticEstimateReport:
    """Empirical constants for the weighted-solve regularity estimates."""
    s_values = tuple(float(s) for s in s_list)
    if any(not (2.0 < s <= 8.0) for s in s_values):
        raise ValueError("s values must lie in (2, 8]")
    ws = ws if ws is not None else EllipticWorkspace(grid)
    rows = _sample_pairs(grid, spec, n_samples, ws, mob)

    data = []
    for q, f, u in rows:
        data.append({
            "lhs": h2_norm(u),
            "gq": float(np.sqrt(grad_sq(q))),
            "qh2": h2_norm(q),
            "gu": float(np.sqrt(grad_sq(u))),
            "fl2": norm_l2(f),
            "fl4": norm_lr(f, 4.0),
            "q": q, "f": f, "u": u,
        })

    def holds(C: float, s: float) -> bool:
        a_fac = (C * C * s * s / (s - 2.0)) ** (s / 4.0)
        for d in data:
            rhs = a_fac * d["gq"] ** ((s - 2.0) / 2.0) * d["qh2"] * d["gu"] \
                + 0.5 * s * C * d["fl2"]
            if d["lhs"] > rhs:
                return False
        return True

    c_star = []
    for s in s_values:
        lo, hi = 0.0, 1.0
        for _ in range(200):
            if holds(hi, s):
                break
            hi *= 2.0
        else:
            c_star.append(float("inf"))
            continue
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if holds(mid, s):
                hi = mid
            else:
                lo = mid
        c_star.append(hi)

    c_plain = 0.0
    for d in data:
        denom = d["gq"] * d["qh2"] * d["gu"] + d["fl2"]
        if denom > 0:
            c_plain = max(c_plain, d["lhs"] / denom)

    c_w24 = c_h3 = None
    if extended:
        c_w24 = 0.0
        c_h3 = 0.0
        for d in data:
            q, f, u = d["q"], d["f"], d["u"]
            # W^{2,4}-style content of u: L4 norms of Laplacian and mixed part
            lap_u = laplacian_neumann(u)
            w24_lhs = float(norm_lr(u, 4.0) + norm_lr(lap_u, 4.0))
            denom = d["gq"] ** 0.25 * d["qh2"] ** 0.75 * d["gu"] ** 0.25 \
                * h2_norm(u) ** 0.75 + d["fl4"]
            if denom > 0:
                c_w24 = max(c_w24, w24_lhs / denom)
            # H3-style: third-order seminorm of u against the divergence-form data
            from .thermo import mobility_eval
            b, bp, _ = mobility_eval(np.clip(q.values, -1, 1), mob)
            ratio = ScalarField(grid, np.asarray(bp) / np.asarray(b))
            gx_q, gy_q = _cell_gradient(q)
            gx_u, gy_u = _cell_gradient(u)
            advect = ScalarField(grid, ratio.values * (gx_q * gx_u + gy_q * gy_u))
            src = ScalarField(grid, f.values / np.asarray(b))
            h3_lhs = h3_seminorm(u)
            denom3 = h1_norm(advect) + h1_norm(src)
            if denom3 > 0:
                c_h3 = max(c_h3, h3_lhs / denom3)
    return EllipticEstimateReport(s_values=s_values, c_star=tuple(c_star),
                                  c_plain_h2=float(c_plain),
                                  c_w24=c_w24, c_h3=c_h3, n_samples=n_samples)


def _cell_gradient(f: ScalarField) -> tuple[np.ndarray, np.ndarray]:
    """Cell-centered gradient (central differences, reflected at the boundary)."""
    g = f.grid
    v = f.values
    gx = np.empty_like(v)
    gy = np.empty_like(v)
    gx[:, 1:-1] = (v[:, 2:] - v[:, :-2]) / (2.0 * g.hx)
    gx[:, 0] = (v[:, 1] - v[:, 0]) / (2.0 * g.hx)
    gx[:, -1] = (v[:, -1] - v[:, -2]) / (2.0 * g.hx)
    gy[1:-1, :] = (v[2:, :] - v[:-2, :]) / (2.0 * g.hy)
    gy[0, :] = (v[1, :] - v[0, :]) / (2.0 * g.hy)
    gy[-1, :] = (v[-1, :] - v[-2, :]) / (2.0 * g.hy)
    return gx, gy
