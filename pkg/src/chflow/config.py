"""Flat key=value run configuration: parsing, validation, builders.

The format is one ``section.key = value`` pair per line; ``#`` starts a
comment; blank lines are ignored; unknown keys are rejected.  Validation is
total and reports every violation, not just the first, so a config either
fully builds or the caller gets the complete defect list.

Example::

    grid.nx = 64
    grid.ny = 64
    grid.lx = 1.0
    grid.ly = 1.0
    potential.theta = 1.0
    potential.theta0 = 2.0
    mobility.form = nondegenerate
    mobility.coeffs = 1.0, 0.5
    mobility.b_min = 0.5
    mobility.b_max = 1.5
    init.kind = constant_noise
    init.mean = 0.0
    init.noise = 0.05
    init.seed = 1234
    stepper.dt = 1e-4
    run.T = 0.1
    output.ledger = out/ledger.csv
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import initial_condition
from .grid import Grid, ScalarField
from .stepper import StepperConfig
from .thermo import MobilitySpec, PotentialParams

__all__ = ["ConfigError", "RunConfig", "parse_config", "default_config_text"]


class ConfigError(ValueError):
    """Carries the full list of violations found while parsing/validating."""

    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("; ".join(violations))


_DEFAULTS = {
    "grid.nx": "64",
    "grid.ny": "64",
    "grid.lx": "1.0",
    "grid.ly": "1.0",
    "potential.theta": "1.0",
    "potential.theta0": "2.0",
    "mobility.form": "constant",
    "mobility.m0": "1.0",
    "mobility.coeffs": "1.0",
    "mobility.b_min": "0.0",
    "mobility.b_max": "0.0",
    "init.kind": "constant_noise",
    "init.mean": "0.0",
    "init.noise": "0.01",
    "init.seed": "1234",
    "init.band_limit": "8",
    "init.width": "0.0",
    "init.path": "",
    "stepper.dt": "1e-4",
    "stepper.newton_tol": "1e-10",
    "stepper.newton_max": "30",
    "stepper.theta_stab": "0.0",
    "stepper.adaptive": "false",
    "stepper.dt_min": "1e-9",
    "stepper.dt_max": "0.5",
    "stepper.shrink": "0.5",
    "stepper.grow": "1.5",
    "run.T": "1.0",
    "run.diag_every": "10",
    "output.ledger": "",
    "output.snapshot_every": "0",
    "output.snapshot_dir": "",
    "output.pgm": "false",
}

_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration; build_* methods produce solver objects."""

    nx: int
    ny: int
    lx: float
    ly: float
    theta: float
    theta0: float
    mobility_form: str
    m0: float
    mobility_coeffs: tuple[float, ...]
    b_min: float
    b_max: float
    init_kind: str
    init_mean: float
    init_noise: float
    init_seed: int
    init_band_limit: int
    init_width: float
    init_path: str
    dt: float
    newton_tol: float
    newton_max: int
    theta_stab: float
    adaptive: bool
    dt_min: float
    dt_max: float
    shrink: float
    grow: float
    T: float
    diag_every: int
    ledger_path: str
    snapshot_every: int
    snapshot_dir: str
    pgm: bool

    def build_grid(self) -> Grid:
        return Grid(self.nx, self.ny, self.lx, self.ly)

    def build_potential(self) -> PotentialParams:
        return PotentialParams(self.theta, self.theta0)

    def build_mobility(self) -> MobilitySpec:
        if self.mobility_form == "constant":
            return MobilitySpec.constant(self.m0)
        if self.mobility_form == "degenerate":
            return MobilitySpec.degenerate(self.m0)
        return MobilitySpec.nondegenerate(self.mobility_coeffs, self.b_min, self.b_max)

    def build_stepper(self) -> StepperConfig:
        return StepperConfig(dt=self.dt, newton_tol=self.newton_tol,
                             newton_max=self.newton_max, theta_stab=self.theta_stab,
                             adaptive=self.adaptive, dt_min=self.dt_min,
                             dt_max=self.dt_max, shrink=self.shrink, grow=self.grow)

    def build_initial_field(self, grid: Grid | None = None) -> ScalarField:
        g = grid if grid is not None else self.build_grid()
        return initial_condition(self.init_kind, g, m=self.init_mean,
                                 noise=self.init_noise, seed=self.init_seed,
                                 band_limit=self.init_band_limit,
                                 width=self.init_width or None,
                                 path=self.init_path or None)


def default_config_text() -> str:
    return "\n".join(f"{k} = {v}" for k, v in _DEFAULTS.items() if v != "") + "\n"


def parse_config(text: str) -> RunConfig:
    """Parse and fully validate a flat key=value config."""
    violations: list[str] = []
    raw = dict(_DEFAULTS)
    seen = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            violations.append(f"line {lineno}: expected key = value, got {body!r}")
            continue
        key, _, value = body.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _DEFAULTS:
            violations.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in seen:
            violations.append(f"line {lineno}: duplicate key {key!r}")
            continue
        seen.add(key)
        raw[key] = value

    def geti(key: str, cond=None, what: str = "") -> int:
        try:
            v = int(raw[key])
        except ValueError:
            violations.append(f"{key}: not an integer ({raw[key]!r})")
            return 0
        if cond is not None and not cond(v):
            violations.append(f"{key}: {what} (got {v})")
        return v

    def getf(key: str, cond=None, what: str = "") -> float:
        try:
            v = float(raw[key])
        except ValueError:
            violations.append(f"{key}: not a number ({raw[key]!r})")
            return 0.0
        if cond is not None and not cond(v):
            violations.append(f"{key}: {what} (got {v})")
        return v

    def getb(key: str) -> bool:
        v = raw[key].lower()
        if v in _BOOL_TRUE:
            return True
        if v in _BOOL_FALSE:
            return False
        violations.append(f"{key}: not a boolean ({raw[key]!r})")
        return False

    nx = geti("grid.nx", lambda v: v >= 4, "needs at least 4 cells")
    ny = geti("grid.ny", lambda v: v >= 4, "needs at least 4 cells")
    lx = getf("grid.lx", lambda v: v > 0, "must be positive")
    ly = getf("grid.ly", lambda v: v > 0, "must be positive")
    theta = getf("potential.theta", lambda v: v > 0, "must be positive")
    theta0 = getf("potential.theta0", lambda v: v > 0, "must be positive")
    if theta > 0 and theta0 > 0 and not theta0 > theta:
        violations.append("potential.theta0: theta0 must exceed theta")

    form = raw["mobility.form"]
    if form not in ("constant", "nondegenerate", "degenerate"):
        violations.append(f"mobility.form: unknown form {form!r}")
    m0 = getf("mobility.m0", lambda v: v > 0, "must be positive")
    try:
        coeffs = tuple(float(tok) for tok in raw["mobility.coeffs"].replace(",", " ").split())
        if not coeffs:
            raise ValueError
    except ValueError:
        violations.append(f"mobility.coeffs: not a coefficient list ({raw['mobility.coeffs']!r})")
        coeffs = (1.0,)
    b_min = getf("mobility.b_min")
    b_max = getf("mobility.b_max")
    if form == "nondegenerate":
        if not (0.0 < b_min <= b_max):
            violations.append("mobility.b_min: nondegenerate form needs 0 < b_min <= b_max")
        else:
            s = np.linspace(-1.0, 1.0, 10001)
            bvals = np.polynomial.polynomial.polyval(s, np.asarray(coeffs))
            tol = 1e-9 * max(1.0, b_max)
            if bvals.min() < b_min - tol or bvals.max() > b_max + tol:
                violations.append(
                    f"mobility.coeffs: sampled range [{bvals.min():.6g}, {bvals.max():.6g}] "
                    f"violates declared bounds [{b_min}, {b_max}]")

    kind = raw["init.kind"]
    if kind not in ("constant_noise", "tanh_stripe", "checkerboard", "file"):
        violations.append(f"init.kind: unknown kind {kind!r}")
    init_mean = getf("init.mean", lambda v: -1.0 < v < 1.0, "mean must be interior to (-1, 1)")
    init_noise = getf("init.noise", lambda v: v >= 0, "must be nonnegative")
    if kind == "constant_noise" and abs(init_mean) + init_noise > 1.0:
        violations.append("init.noise: |mean| + noise must not exceed 1")
    init_seed = geti("init.seed")
    init_band = geti("init.band_limit", lambda v: v >= 1, "must be >= 1")
    init_width = getf("init.width", lambda v: v >= 0, "must be nonnegative")
    init_path = raw["init.path"]
    if kind == "file" and not init_path:
        violations.append("init.path: required for init.kind = file")

    dt = getf("stepper.dt", lambda v: v > 0, "must be positive")
    newton_tol = getf("stepper.newton_tol", lambda v: v > 0, "must be positive")
    newton_max = geti("stepper.newton_max", lambda v: v >= 1, "must be >= 1")
    theta_stab = getf("stepper.theta_stab", lambda v: v >= 0, "must be >= 0")
    adaptive = getb("stepper.adaptive")
    dt_min = getf("stepper.dt_min", lambda v: v > 0, "must be positive")
    dt_max = getf("stepper.dt_max", lambda v: v > 0, "must be positive")
    shrink = getf("stepper.shrink", lambda v: 0 < v < 1, "must lie in (0, 1)")
    grow = getf("stepper.grow", lambda v: 1 < v <= 2, "must lie in (1, 2]")
    if adaptive and dt > 0 and dt_min > 0 and dt_max > 0 and not (dt_min <= dt <= dt_max):
        violations.append("stepper.dt: adaptive stepping needs dt_min <= dt <= dt_max")

    T = getf("run.T", lambda v: v >= 0, "must be >= 0")
    diag_every = geti("run.diag_every", lambda v: v >= 1, "must be >= 1")
    snapshot_every = geti("output.snapshot_every", lambda v: v >= 0, "must be >= 0")
    pgm = getb("output.pgm")

    if violations:
        raise ConfigError(violations)
    return RunConfig(
        nx=nx, ny=ny, lx=lx, ly=ly, theta=theta, theta0=theta0,
        mobility_form=form, m0=m0, mobility_coeffs=coeffs, b_min=b_min, b_max=b_max,
        init_kind=kind, init_mean=init_mean, init_noise=init_noise,
        init_seed=init_seed, init_band_limit=init_band, init_width=init_width,
        init_path=init_path, dt=dt, newton_tol=newton_tol, newton_max=newton_max,
        theta_stab=theta_stab, adaptive=adaptive, dt_min=dt_min, dt_max=dt_max,
        shrink=shrink, grow=grow, T=T, diag_every=diag_every,
        ledger_path=raw["output.ledger"], snapshot_every=snapshot_every,
        snapshot_dir=raw["output.snapshot_dir"], pgm=pgm,
    )
