"""Logarithmic double-well thermodynamics and mobility families.

The potential is psi(s) = F(s) - (theta0/2) s^2 on [-1, 1], where

    F(s) = (theta/2) [ (1+s) ln(1+s) + (1-s) ln(1-s) ]

is the convex entropy part.  F'' = theta / (1 - s^2) >= theta, F' blows up
at the endpoints, which is what keeps the order parameter strictly inside
(-1, 1).  The splitting psi = F - (theta0/2) s^2 with theta0 > theta is the
convex/concave decomposition the time stepper builds on.

Evaluations that may touch the endpoints go through a hard clamp at
1 - EPS_CLAMP; the clamped variants report whether clamping happened so the
caller can flag transient excursions of solver iterates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import ScalarField, FaceCoeffs, face_average, grad_sq

__all__ = [
    "EPS_CLAMP",
    "DomainError",
    "PotentialParams",
    "MobilitySpec",
    "psi",
    "psi_prime",
    "f_convex",
    "f_convex_prime",
    "f_convex_second",
    "psi_values_clamped",
    "psi_prime_values_clamped",
    "f_prime_values_clamped",
    "f_second_values_clamped",
    "energy",
    "energy_convex",
    "mobility_eval",
    "mobility_on_faces",
]

EPS_CLAMP = 1e-13


class DomainError(ValueError):
    """Argument outside the admissible concentration range."""


@dataclass(frozen=True)
class PotentialParams:
    """Temperatures (theta, theta0) of the double well; theta0 > theta > 0."""

    theta: float
    theta0: float

    def __post_init__(self):
        if not (self.theta > 0):
            raise ValueError("theta must be positive")
        if not (self.theta0 - self.theta > 0):
            raise ValueError("theta0 must exceed theta")


def _check_open_interval(s) -> np.ndarray:
    a = np.asarray(s, dtype=np.float64)
    if np.any(np.abs(a) >= 1.0) or not np.isfinite(a).all():
        raise DomainError("argument must satisfy |s| < 1")
    return a


def _ret(a: np.ndarray, s):
    return float(a) if np.isscalar(s) or np.ndim(s) == 0 else a


def f_convex(s, p: PotentialParams):
    """Convex entropy part F(s)."""
    a = _check_open_interval(s)
    val = 0.5 * p.theta * ((1.0 + a) * np.log1p(a) + (1.0 - a) * np.log1p(-a))
    return _ret(val, s)


def psi(s, p: PotentialParams):
    """Double-well potential psi(s) = F(s) - (theta0/2) s^2."""
    a = _check_open_interval(s)
    val = 0.5 * p.theta * ((1.0 + a) * np.log1p(a) + (1.0 - a) * np.log1p(-a)) \
        - 0.5 * p.theta0 * a * a
    return _ret(val, s)


def psi_prime(s, p: PotentialParams):
    """psi'(s) = (theta/2) ln((1+s)/(1-s)) - theta0 s."""
    a = _check_open_interval(s)
    val = 0.5 * p.theta * (np.log1p(a) - np.log1p(-a)) - p.theta0 * a
    return _ret(val, s)


def f_convex_prime(s, p: PotentialParams):
    """F'(s) = psi'(s) + theta0 s."""
    a = _check_open_interval(s)
    val = 0.5 * p.theta * (np.log1p(a) - np.log1p(-a))
    return _ret(val, s)


def f_convex_second(s, p: PotentialParams):
    """F''(s) = theta / (1 - s^2), bounded below by theta."""
    a = _check_open_interval(s)
    val = p.theta / ((1.0 + a) * (1.0 - a))
    return _ret(val, s)


def _clamp(values: np.ndarray) -> tuple[np.ndarray, bool]:
    hi = 1.0 - EPS_CLAMP
    clipped = np.clip(values, -hi, hi)
    return clipped, bool(np.any(np.abs(values) > hi))


def psi_values_clamped(values: np.ndarray, p: PotentialParams) -> tuple[np.ndarray, bool]:
    """psi evaluated with the domain clamp; second item flags clamping."""
    a, flag = _clamp(np.asarray(values, dtype=np.float64))
    val = 0.5 * p.theta * ((1.0 + a) * np.log1p(a) + (1.0 - a) * np.log1p(-a)) \
        - 0.5 * p.theta0 * a * a
    return val, flag


def psi_prime_values_clamped(values: np.ndarray, p: PotentialParams) -> tuple[np.ndarray, bool]:
    a, flag = _clamp(np.asarray(values, dtype=np.float64))
    return 0.5 * p.theta * (np.log1p(a) - np.log1p(-a)) - p.theta0 * a, flag


def f_prime_values_clamped(values: np.ndarray, p: PotentialParams) -> tuple[np.ndarray, bool]:
    a, flag = _clamp(np.asarray(values, dtype=np.float64))
    return 0.5 * p.theta * (np.log1p(a) - np.log1p(-a)), flag


def f_second_values_clamped(values: np.ndarray, p: PotentialParams) -> tuple[np.ndarray, bool]:
    a, flag = _clamp(np.asarray(values, dtype=np.float64))
    return p.theta / ((1.0 + a) * (1.0 - a)), flag


def _f_values_clamped(values: np.ndarray, p: PotentialParams) -> tuple[np.ndarray, bool]:
    a, flag = _clamp(np.asarray(values, dtype=np.float64))
    return 0.5 * p.theta * ((1.0 + a) * np.log1p(a) + (1.0 - a) * np.log1p(-a)), flag


def energy(phi: ScalarField, p: PotentialParams) -> float:
    """Ginzburg-Landau free energy: integral of |grad phi|^2 / 2 + psi(phi).

    Midpoint quadrature for the potential, face quadrature for the gradient
    (consistent with the discrete Laplacian, so summation by parts is exact).
    Values outside the open interval are clamped at 1 - EPS_CLAMP.
    """
    vals, _ = psi_values_clamped(phi.values, p)
    e = 0.5 * grad_sq(phi) + float(vals.sum()) * phi.grid.cell_area
    if not np.isfinite(e):
        raise ValueError("non-finite energy")
    return e


def energy_convex(phi: ScalarField, p: PotentialParams) -> float:
    """Convex energy: integral of |grad phi|^2 / 2 + F(phi).

    Satisfies energy(phi) == energy_convex(phi) - (theta0/2) ||phi||^2.
    """
    vals, _ = _f_values_clamped(phi.values, p)
    e = 0.5 * grad_sq(phi) + float(vals.sum()) * phi.grid.cell_area
    if not np.isfinite(e):
        raise ValueError("non-finite energy")
    return e


# ---------------------------------------------------------------------------
# mobility
# ---------------------------------------------------------------------------

_FORMS = ("constant", "nondegenerate", "degenerate")


@dataclass(frozen=True)
class MobilitySpec:
    """Mobility b on [-1, 1]: constant, polynomial nondegenerate, or degenerate.

    Nondegenerate mobilities are polynomial coefficient tables (ascending
    powers of s) with declared bounds 0 < b_min <= b(s) <= b_max that the
    constructor verifies by dense sampling.  The degenerate form
    b(s) = m0 (1 - s^2) carries no solver guarantee.
    """

    form: str
    m0: float = 1.0
    coeffs: tuple[float, ...] = field(default=())
    b_min: float = 0.0
    b_max: float = 0.0

    def __post_init__(self):
        if self.form not in _FORMS:
            raise ValueError(f"unknown mobility form {self.form!r}")
        if self.form in ("constant", "degenerate") and not (self.m0 > 0):
            raise ValueError("m0 must be positive")
        if self.form == "nondegenerate":
            if not self.coeffs:
                raise ValueError("nondegenerate mobility needs polynomial coefficients")
            if not (0.0 < self.b_min <= self.b_max):
                raise ValueError("need 0 < b_min <= b_max")
            s = np.linspace(-1.0, 1.0, 10001)
            b = np.polynomial.polynomial.polyval(s, np.asarray(self.coeffs))
            tol = 1e-9 * max(1.0, self.b_max)
            if b.min() < self.b_min - tol or b.max() > self.b_max + tol:
                raise ValueError(
                    f"declared bounds [{self.b_min}, {self.b_max}] violated: "
                    f"sampled range [{b.min():.6g}, {b.max():.6g}]"
                )

    @classmethod
    def constant(cls, m0: float) -> "MobilitySpec":
        return cls("constant", m0=float(m0), b_min=float(m0), b_max=float(m0))

    @classmethod
    def nondegenerate(cls, coeffs, b_min: float, b_max: float) -> "MobilitySpec":
        return cls("nondegenerate", coeffs=tuple(float(c) for c in coeffs),
                   b_min=float(b_min), b_max=float(b_max))

    @classmethod
    def degenerate(cls, m0: float) -> "MobilitySpec":
        return cls("degenerate", m0=float(m0), b_min=0.0, b_max=float(m0))

    @property
    def bounds(self) -> tuple[float, float]:
        return (self.b_min, self.b_max)


def mobility_eval(s, spec: MobilitySpec):
    """Evaluate (b, b', b'') at s, for |s| <= 1."""
    a = np.asarray(s, dtype=np.float64)
    if np.any(np.abs(a) > 1.0) or not np.isfinite(a).all():
        raise DomainError("mobility argument must satisfy |s| <= 1")
    if spec.form == "constant":
        b = np.full_like(a, spec.m0)
        bp = np.zeros_like(a)
        bpp = np.zeros_like(a)
    elif spec.form == "degenerate":
        b = spec.m0 * (1.0 - a * a)
        bp = -2.0 * spec.m0 * a
        bpp = np.full_like(a, -2.0 * spec.m0)
    else:
        c = np.asarray(spec.coeffs)
        pv = np.polynomial.polynomial
        b = pv.polyval(a, c)
        bp = pv.polyval(a, pv.polyder(c)) if len(c) > 1 else np.zeros_like(a)
        bpp = pv.polyval(a, pv.polyder(c, 2)) if len(c) > 2 else np.zeros_like(a)
    if np.isscalar(s) or np.ndim(s) == 0:
        return float(b), float(bp), float(bpp)
    return b, bp, bpp


def mobility_on_faces(phi: ScalarField, spec: MobilitySpec, mode: str = "harmonic",
                      floor: float | None = None) -> FaceCoeffs:
    """Evaluate b(phi) at cells and average onto faces.

    ``floor`` clamps the face values from below (used to make the degenerate
    form runnable); for degenerate mobility the cell values can vanish, so
    the harmonic average degenerates to an arithmetic one there.
    """
    b, _, _ = mobility_eval(np.clip(phi.values, -1.0, 1.0), spec)
    cell = ScalarField(phi.grid, np.asarray(b))
    if mode == "harmonic" and np.any(cell.values <= 0.0):
        mode = "arithmetic"
    faces = face_average(cell, mode)
    if floor is not None:
        np.maximum(faces.x[:, 1:-1], floor, out=faces.x[:, 1:-1])
        np.maximum(faces.y[1:-1, :], floor, out=faces.y[1:-1, :])
    return faces
