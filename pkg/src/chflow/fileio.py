"""On-disk formats: CHFLD v1 snapshots, ledger CSV, PGM images.

CHFLD v1: one ASCII header line ``CHFLD v1 nx ny lx ly t`` terminated by a
newline, followed by nx * ny little-endian float64 cell values in row-major
order.  Floats in the header are written with %.17g so write/read
round-trips are bit-exact.

Ledger CSV: fixed header ``t,mass,E,E0,grad_mu_sq,Lambda,B,sep,mu_bar,
cum_dissipation``, one row per ledger entry, every value at full double
precision (17 significant digits).

PGM: binary P5; phi in [-1, 1] is mapped to gray floor(127.5 + 127.5 phi),
clamped to 0..255.
"""

from __future__ import annotations

import os

import numpy as np

from .grid import Grid, ScalarField, make_field
from .ledger import COLUMNS, RunLedger

__all__ = [
    "SnapshotError",
    "write_snapshot",
    "read_snapshot",
    "write_ledger_csv",
    "read_ledger_csv",
    "write_pgm",
]

_MAGIC = "CHFLD"
_VERSION = "v1"


class SnapshotError(ValueError):
    """Malformed or inconsistent snapshot file."""


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_snapshot(phi: ScalarField, path: str | os.PathLike, t: float = 0.0) -> None:
    """Write a field (and its time stamp) in CHFLD v1 format."""
    g = phi.grid
    header = f"{_MAGIC} {_VERSION} {g.nx} {g.ny} {_fmt(g.lx)} {_fmt(g.ly)} {_fmt(t)}\n"
    payload = np.ascontiguousarray(phi.values, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(payload.tobytes())


def read_snapshot(path: str | os.PathLike) -> tuple[ScalarField, float]:
    """Read a CHFLD v1 file; returns (field, time stamp)."""
    with open(path, "rb") as fh:
        header = fh.readline()
        blob = fh.read()
    try:
        parts = header.decode("ascii").split()
    except UnicodeDecodeError as exc:
        raise SnapshotError("malformed header (not ASCII)") from exc
    if len(parts) != 7 or parts[0] != _MAGIC or parts[1] != _VERSION:
        raise SnapshotError(f"malformed header {header!r}")
    try:
        nx, ny = int(parts[2]), int(parts[3])
        lx, ly, t = float(parts[4]), float(parts[5]), float(parts[6])
    except ValueError as exc:
        raise SnapshotError(f"malformed header fields {parts[2:]!r}") from exc
    expected = nx * ny * 8
    if len(blob) != expected:
        raise SnapshotError(
            f"size mismatch: header promises {expected} payload bytes, file has {len(blob)}"
        )
    vals = np.frombuffer(blob, dtype="<f8").reshape(ny, nx)
    if not np.isfinite(vals).all():
        raise SnapshotError("non-finite values in snapshot payload")
    grid = Grid(nx, ny, lx, ly)
    return make_field(grid, vals.astype(np.float64)), t


def write_ledger_csv(ledger: RunLedger, path: str | os.PathLike) -> None:
    """Write the ledger with the fixed 10-column schema, full double precision."""
    lines = [",".join(COLUMNS)]
    for row in ledger.rows:
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_ledger_csv(path: str | os.PathLike) -> RunLedger:
    """Parse a ledger CSV written by ``write_ledger_csv`` (round-trip exact)."""
    with open(path, "r") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or lines[0] != ",".join(COLUMNS):
        raise ValueError(f"unexpected ledger header in {path}")
    led = RunLedger()
    for ln in lines[1:]:
        vals = [float(tok) for tok in ln.split(",")]
        if len(vals) != len(COLUMNS):
            raise ValueError(f"row with {len(vals)} values in {path}")
        led.append(t=vals[0], mass=vals[1], E=vals[2], E0=vals[3], grad_mu_sq=vals[4],
                   Lambda=vals[5], sep=vals[7], mu_bar=vals[8], cum_dissipation=vals[9])
    return led


def write_pgm(phi: ScalarField, path: str | os.PathLike) -> None:
    """Render phi in [-1, 1] as a binary PGM (P5) gray image."""
    g = phi.grid
    gray = np.floor(127.5 + 127.5 * phi.values)
    gray = np.clip(gray, 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{g.nx} {g.ny}\n255\n".encode("ascii"))
        fh.write(gray.tobytes())
