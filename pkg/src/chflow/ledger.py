"""Time series of the conserved / dissipated quantities along a run.

One row per accepted time step (plus the initial row): time, mass, both
energies, the squared gradient of the chemical potential, the weighted
dissipation density Lambda = integral b(phi) |grad mu|^2 and B = 1 + Lambda,
the separation margin min(1 - |phi|), the mean chemical potential, and the
running dissipation integral.  These columns are the raw material for every
structural check (energy balance, mass conservation, separation, trend
monitoring).

Extra per-step bookkeeping that is not part of the on-disk CSV schema
(Newton iteration counts, dt actually used, dual-norm increments between
consecutive states, the seed) lives in ``extras`` / ``meta``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

COLUMNS = ("t", "mass", "E", "E0", "grad_mu_sq", "Lambda", "B", "sep",
           "mu_bar", "cum_dissipation")


@dataclass
class RunLedger:
    rows: list[tuple[float, ...]] = field(default_factory=list)
    extras: dict[str, list] = field(default_factory=lambda: {
        "newton_iters": [], "dt": [], "hm1_increment": []})
    meta: dict = field(default_factory=dict)

    def append(self, t: float, mass: float, E: float, E0: float, grad_mu_sq: float,
               Lambda: float, sep: float, mu_bar: float, cum_dissipation: float,
               newton_iters: int = 0, dt: float = 0.0,
               hm1_increment: float = np.nan) -> None:
        if self.rows and not t > self.rows[-1][0]:
            raise ValueError("ledger times must be strictly increasing")
        if not (0.0 <= sep <= 1.0):
            raise ValueError(f"separation margin {sep} outside [0, 1]")
        self.rows.append((float(t), float(mass), float(E), float(E0),
                          float(grad_mu_sq), float(Lambda), 1.0 + float(Lambda),
                          float(sep), float(mu_bar), float(cum_dissipation)))
        self.extras["newton_iters"].append(int(newton_iters))
        self.extras["dt"].append(float(dt))
        self.extras["hm1_increment"].append(float(hm1_increment))

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        try:
            idx = COLUMNS.index(name)
        except ValueError:
            raise KeyError(f"unknown ledger column {name!r}") from None
        return np.array([r[idx] for r in self.rows])

    def last(self, name: str) -> float:
        return float(self.column(name)[-1]) if self.rows else float("nan")
