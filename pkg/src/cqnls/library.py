"""Plain-text persistence for profiles, fields, branches and trajectories.

Profiles and fields are stored as ``# key = value`` header lines followed by
one node value per line written with 17 significant digits, which makes the
round trip through text bit-exact.  Series go to CSV with a fixed header and
``%.16e`` values.  Every write goes to a temporary file in the destination
directory that is then renamed over the target.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, observables
from .evolution import Trajectory, WaveField
from .groundstate import Branch, BranchPoint, GroundStateProfile, profile_ref
from .spectral import build_grid

LIBRARY_ENV = "CQNLS_LIBRARY"
DEFAULT_LIBRARY = "cqnls-library"

BRANCH_COLUMNS = ("omega", "mass", "energy", "linf")
TRAJECTORY_COLUMNS = ("t", "linf", "mass", "energy", "delta_E")

_INT_KEYS = {"d", "N", "newton_iters"}
_FLOAT_KEYS = {"omega", "alpha", "s0", "mass", "energy", "linf", "residual_norm", "time"}


def library_dir(path: str | os.PathLike | None = None) -> Path:
    """``path`` if given, else ``$CQNLS_LIBRARY``, else ``./cqnls-library``."""
    if path is not None:
        return Path(path)
    return Path(os.environ.get(LIBRARY_ENV, DEFAULT_LIBRARY))


def atomic_write(path: str | os.PathLike, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise
    return path


def _fmt(x) -> str:
    return format(float(x), ".17g")


# -- node-value records ----------------------------------------------------------


@dataclass
class LibraryRecord:
    """Header dictionary plus node values (real or complex)."""

    header: dict
    values: np.ndarray = field(repr=False)

    def dumps(self) -> str:
        out = io.StringIO()
        for key, val in self.header.items():
            text = _fmt(val) if isinstance(val, (float, np.floating)) else str(val)
            out.write(f"# {key} = {text}\n")
        v = np.asarray(self.values)
        if np.iscomplexobj(v):
            for z in v:
                out.write(f"{_fmt(z.real)} {_fmt(z.imag)}\n")
        else:
            for x in v:
                out.write(_fmt(x) + "\n")
        return out.getvalue()

    @classmethod
    def loads(cls, text: str) -> "LibraryRecord":
        header, rows = {}, []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].partition("=")
                header[key.strip()] = _parse_value(key.strip(), val.strip())
            else:
                rows.append([float(x) for x in line.split()])
        arr = np.array(rows, dtype=float)
        if arr.ndim == 2 and arr.shape[1] == 2:
            values = arr[:, 0] + 1j * arr[:, 1]
        else:
            values = arr.reshape(-1)
        return cls(header, values)

    def save(self, path) -> Path:
        return atomic_write(path, self.dumps())

    @classmethod
    def load(cls, path) -> "LibraryRecord":
        return cls.loads(Path(path).read_text())


def _parse_value(key: str, text: str):
    if key in _INT_KEYS:
        return int(text)
    if key in _FLOAT_KEYS:
        return float(text)
    return text


def profile_record(profile: GroundStateProfile) -> LibraryRecord:
    diag = profile.diagnostics()
    header = {
        "kind": "groundstate",
        "d": profile.d,
        "omega": float(profile.omega),
        "alpha": float(profile.alpha),
        "N": profile.grid.N,
        "s0": float(profile.grid.s0),
        "mass": diag.mass,
        "energy": diag.energy,
        "linf": diag.linf,
        "residual_norm": float(profile.residual_norm),
        "newton_iters": profile.newton_iters,
        "version": __version__,
    }
    return LibraryRecord(header, np.asarray(profile.values, dtype=float))


def save_profile(profile: GroundStateProfile, path) -> Path:
    return profile_record(profile).save(path)


def load_profile(path) -> GroundStateProfile:
    """Rebuild the grid from the header and wrap the stored node values."""
    rec = LibraryRecord.load(path)
    h = rec.header
    grid = build_grid(h["d"], h["N"], h["s0"], min_degree=2)
    values = np.real(rec.values).astype(float)
    values.setflags(write=False)
    return GroundStateProfile(
        d=h["d"],
        omega=h["omega"],
        alpha=h.get("alpha", 1.0),
        grid=grid,
        values=values,
        residual_norm=h.get("residual_norm", float("nan")),
        newton_iters=h.get("newton_iters", 0),
    )


def save_field(wave: WaveField, path, **extra) -> Path:
    g = wave.grid
    header = {
        "kind": "field",
        "d": g.d,
        "N": g.N,
        "s0": float(g.s0),
        "time": float(wave.time),
        "mass": observables.mass(g, wave.values),
        "energy": observables.energy(g, wave.values),
        "linf": observables.linf(wave.values),
        "version": __version__,
    }
    header.update(extra)
    return LibraryRecord(header, np.asarray(wave.values, dtype=complex)).save(path)


def load_field(path) -> WaveField:
    rec = LibraryRecord.load(path)
    h = rec.header
    grid = build_grid(h["d"], h["N"], h["s0"], min_degree=2)
    return WaveField(grid, np.asarray(rec.values, dtype=complex), h.get("time", 0.0))


def profile_filename(d: int, omega: float, alpha: float = 1.0) -> str:
    return f"Q_{profile_ref(d, omega, alpha)}.txt"


# -- CSV series ------------------------------------------------------------------


def _csv_text(columns, rows) -> str:
    out = io.StringIO()
    out.write(",".join(columns) + "\n")
    for row in rows:
        out.write(",".join(f"{float(x):.16e}" for x in row) + "\n")
    return out.getvalue()


def write_branch_csv(branch: Branch, path) -> Path:
    rows = ((p.omega, p.mass, p.energy, p.linf) for p in branch.points)
    return atomic_write(path, _csv_text(BRANCH_COLUMNS, rows))


def read_branch_csv(path, d: int) -> Branch:
    """Branch of bare diagnostics (no stored profiles)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != BRANCH_COLUMNS:
            raise ValueError(f"unexpected branch CSV header {reader.fieldnames}")
        points = [
            BranchPoint(
                omega=float(r["omega"]),
                mass=float(r["mass"]),
                energy=float(r["energy"]),
                linf=float(r["linf"]),
                profile_ref=profile_ref(d, float(r["omega"])),
            )
            for r in reader
        ]
    return Branch(d=d, points=points)


def write_trajectory_csv(traj: Trajectory, path) -> Path:
    return atomic_write(path, _csv_text(TRAJECTORY_COLUMNS, traj.rows()))


def read_trajectory_csv(path) -> dict:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {name: data[:, k] for k, name in enumerate(TRAJECTORY_COLUMNS)}


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def write_json(obj, path) -> Path:
    return atomic_write(path, json.dumps(obj, indent=2, default=_json_default) + "\n")
