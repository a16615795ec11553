"""Trajectory diagnostics: the quantities the flow structure constrains.

Includes the energy-balance defect, the separation margin, the mean-potential
bound ratio, the Lambda / B regularity series, and the two-trajectory
continuous-dependence experiment measured in the mobility-weighted dual
norm d(t) = || sqrt(b(phi1)) grad G_{phi1} (phi1 - phi2) ||.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .elliptic import EllipticWorkspace, hm1_norm, solve_weighted_poisson
from .grid import ScalarField, mean, weighted_grad_sq
from .ledger import RunLedger
from .stepper import SimState, StepperConfig, make_state, _step_with_retry
from .thermo import (
    MobilitySpec,
    PotentialParams,
    mobility_on_faces,
    psi_prime_values_clamped,
)

__all__ = [
    "energy_balance_defect",
    "separation_margin",
    "mu_mean_check",
    "lambda_b_series",
    "LambdaSeries",
    "continuous_dependence_experiment",
    "UniquenessReport",
]


def energy_balance_defect(ledger: RunLedger) -> float:
    """|E(end) + cumulative dissipation - E(start)| over the whole ledger."""
    if len(ledger) < 2:
        raise ValueError("need at least two ledger rows")
    E = ledger.column("E")
    cum = ledger.column("cum_dissipation")
    return float(abs(E[-1] + cum[-1] - E[0]))


def separation_margin(phi: ScalarField) -> float:
    """min over cells of 1 - |phi|: distance from the potential singularities."""
    return float(1.0 - np.abs(phi.values).max())


def mu_mean_check(state: SimState, p: PotentialParams) -> tuple[float, float]:
    """(mean potential, |mean| / (1 + ||grad mu||)): the boundedness ratio.

    The mean of the constitutive potential equals the mean of psi'(phi)
    because the discrete Laplacian integrates to zero.
    """
    pp, _ = psi_prime_values_clamped(state.phi.values, p)
    mu_bar = float(pp.mean())
    g = state.phi.grid
    mu = state.mu.values
    dx = (mu[:, 1:] - mu[:, :-1]) / g.hx
    dy = (mu[1:, :] - mu[:-1, :]) / g.hy
    grad_mu = float(np.sqrt((np.sum(dx * dx) + np.sum(dy * dy)) * g.cell_area))
    return mu_bar, abs(mu_bar) / (1.0 + grad_mu)


@dataclass(frozen=True)
class LambdaSeries:
    t: np.ndarray
    Lambda: np.ndarray
    B: np.ndarray
    sup_from: dict[float, float]  # tau -> sup_{t >= tau} Lambda


def lambda_b_series(ledger: RunLedger, taus: tuple[float, ...] = (0.1, 0.5, 1.0)) -> LambdaSeries:
    """Extract (t, Lambda, B) and the tails sup_{t >= tau} Lambda."""
    t = ledger.column("t")
    lam = ledger.column("Lambda")
    B = ledger.column("B")
    sup_from = {}
    for tau in taus:
        mask = t >= tau
        sup_from[float(tau)] = float(lam[mask].max()) if mask.any() else float("nan")
    return LambdaSeries(t=t, Lambda=lam, B=B, sup_from=sup_from)


@dataclass
class UniquenessReport:
    """Two-trajectory distance history in the weighted dual metric.

    ``d`` carries phi1 as the weight (the asymmetric choice of the
    contraction estimate); ``d_sym`` uses phi2; ``hm1`` is the unweighted
    dual norm, sandwiched between sqrt(b_m) d and sqrt(b_M) d.
    ``c_emp`` is max_t d(t) / d(0), the empirical contraction constant.
    """

    times: list[float] = field(default_factory=list)
    d: list[float] = field(default_factory=list)
    d_sym: list[float] = field(default_factory=list)
    hm1: list[float] = field(default_factory=list)

    @property
    def c_emp(self) -> float:
        if not self.d or self.d[0] == 0.0:
            return 0.0
        return float(max(self.d) / self.d[0])

    @property
    def d0(self) -> float:
        return self.d[0] if self.d else 0.0

    @property
    def d_final(self) -> float:
        return self.d[-1] if self.d else 0.0

    def sandwich_slack(self, b_min: float, b_max: float) -> float:
        """Worst relative violation of sqrt(b_m) d <= hm1 <= sqrt(b_M) d."""
        worst = 0.0
        for dk, hk in zip(self.d, self.hm1):
            scale = max(hk, 1e-300)
            worst = max(worst,
                        (np.sqrt(b_min) * dk - hk) / scale,
                        (hk - np.sqrt(b_max) * dk) / scale)
        return float(worst)


def continuous_dependence_experiment(phi1_0: ScalarField, phi2_0: ScalarField,
                                     T: float, cfg: StepperConfig,
                                     p: PotentialParams, spec: MobilitySpec,
                                     eval_every: int = 10) -> UniquenessReport:
    """Evolve two trajectories with identical config; record d(t) at matching
    times (every ``eval_every``-th step, plus t = 0 and the final time).

    The initial means must agree (the metric is only defined for mean-zero
    differences).
    """
    m1, m2 = mean(phi1_0), mean(phi2_0)
    if abs(m1 - m2) > 1e-12:
        raise ValueError(f"initial means differ by {m1 - m2:.3e}; the dual metric "
                         "needs equal masses")
    if spec.form == "degenerate":
        raise ValueError("experiment needs a coercive (non-degenerate) mobility")
    g = phi1_0.grid
    ws = EllipticWorkspace(g)
    s1 = make_state(phi1_0, p)
    s2 = make_state(phi2_0, p)
    report = UniquenessReport()

    def record(a: SimState, b: SimState) -> None:
        diff_vals = a.phi.values - b.phi.values
        diff_vals = diff_vals - diff_vals.mean()
        diff = ScalarField(g, diff_vals)
        if float(np.abs(diff_vals).max()) == 0.0:
            d = d_sym = h = 0.0
        else:
            u1 = solve_weighted_poisson(a.phi, diff, spec, ws)
            d = float(np.sqrt(max(weighted_grad_sq(mobility_on_faces(a.phi, spec), u1), 0.0)))
            u2 = solve_weighted_poisson(b.phi, diff, spec, ws)
            d_sym = float(np.sqrt(max(weighted_grad_sq(mobility_on_faces(b.phi, spec), u2), 0.0)))
            h = hm1_norm(diff)
        report.times.append(a.t)
        report.d.append(d)
        report.d_sym.append(d_sym)
        report.hm1.append(h)

    record(s1, s2)
    k = 0
    while s1.t < T - 1e-12 * max(T, 1.0):
        s1, _ = _step_with_retry(s1, cfg.dt, cfg, p, spec)
        s2, _ = _step_with_retry(s2, cfg.dt, cfg, p, spec)
        k += 1
        if k % eval_every == 0 or s1.t >= T - 1e-12 * max(T, 1.0):
            record(s1, s2)
    return report
