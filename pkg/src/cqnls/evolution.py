"""Time integration of the radial cubic-quintic NLS.

In ``s = r**2`` the radial equation reads

    i u_t + 2 s u_ss + d u_s + |u|**2 u - |u|**4 u = 0,   u(s0, t) = 0.

It is split into the nonlinear phase flow, which is solved exactly, and the
linear flow ``u' = i L u``, which is advanced by the two-stage Gauss-Legendre
Runge-Kutta method.  The two are composed symmetrically (Strang).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import observables
from .errors import AccuracyLost, FactorizationFailure, NonFiniteField, ShapeMismatch
from .spectral import RadialGrid

log = logging.getLogger(__name__)

DELTA_E_CEILING = 1e-3
DELTA_E_WARNING = 1e-5

# Butcher tableau of the two-stage Gauss-Legendre method
_SQRT3 = np.sqrt(3.0)
GL2_A = np.array([[0.25, 0.25 - _SQRT3 / 6.0], [0.25 + _SQRT3 / 6.0, 0.25]])
GL2_B = np.array([0.5, 0.5])


@dataclass(frozen=True, eq=False)
class WaveField:
    """Complex node samples of ``u(s, t)`` at a single time."""

    grid: RadialGrid = field(repr=False)
    values: np.ndarray = field(repr=False)
    time: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        if v.shape != (self.grid.N + 1,):
            raise ShapeMismatch(f"expected {self.grid.N + 1} samples, got shape {v.shape}")
        v[0] = 0.0
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def modulus(self) -> np.ndarray:
        return np.abs(self.values)

    def with_values(self, values, time: float) -> "WaveField":
        return WaveField(self.grid, values, time)


@dataclass(frozen=True)
class EvolutionConfig:
    """Time-stepping parameters; ``dt = t_final / n_steps``."""

    t_final: float
    n_steps: int
    record_stride: int = 1
    snapshot_times: tuple = ()
    delta_e_ceiling: float = DELTA_E_CEILING
    delta_e_warning: float = DELTA_E_WARNING

    def __post_init__(self):
        if not self.t_final > 0:
            raise ValueError(f"t_final must be positive, got {self.t_final}")
        if int(self.n_steps) < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")
        if int(self.record_stride) < 1:
            raise ValueError(f"record_stride must be >= 1, got {self.record_stride}")
        object.__setattr__(self, "snapshot_times", tuple(float(t) for t in self.snapshot_times))

    @property
    def dt(self) -> float:
        return self.t_final / self.n_steps


@dataclass
class Trajectory:
    """Diagnostic series of one run plus stored fields."""

    times: np.ndarray
    linf_series: np.ndarray
    mass_series: np.ndarray
    energy_series: np.ndarray
    delta_E_series: np.ndarray
    snapshots: list
    final_field: WaveField
    config: EvolutionConfig | None = None

    def __post_init__(self):
        n = len(self.times)
        for name in ("linf_series", "mass_series", "energy_series", "delta_E_series"):
            if len(getattr(self, name)) != n:
                raise ShapeMismatch(f"{name} has length {len(getattr(self, name))}, expected {n}")

    @property
    def max_delta_E(self) -> float:
        return float(np.max(self.delta_E_series)) if len(self.delta_E_series) else 0.0

    @property
    def relative_mass_drift(self) -> float:
        m0 = self.mass_series[0]
        if m0 == 0.0:
            return 0.0
        return float(np.max(np.abs(self.mass_series / m0 - 1.0)))

    def rows(self):
        """Records as ``(t, linf, mass, energy, delta_E)`` tuples."""
        return zip(
            self.times, self.linf_series, self.mass_series, self.energy_series, self.delta_E_series
        )


# -- sub-flows ---------------------------------------------------------------


def nonlinear_phase_step(field: WaveField, tau: float) -> WaveField:
    """Exact flow of ``i u_t = -|u|**2 u + |u|**4 u`` over ``tau``.

    The modulus is invariant, so the flow is a pointwise phase rotation.
    The time stamp is left unchanged; :func:`strang_step` owns the clock.
    """
    u = field.values
    a2 = np.abs(u) ** 2
    return WaveField(field.grid, u * np.exp(1j * tau * (a2 - a2 * a2)), field.time)


class LinearPropagator:
    """Gauss-Legendre-2 step for ``u' = i L u`` with a fixed step ``tau``.

    ``L`` is the radial operator with the ``s = s0`` row and column removed.
    Diagonalising the Butcher matrix ``A = T diag(lam) T^-1`` decouples the
    stage equations into two complex systems ``(I - tau lam_k J) W_k =
    c_k J u`` with ``J = i L``; both matrices are LU-factorised here once.
    On each eigenvector of ``L`` the step is the (2,2)-Pade approximant of
    ``exp(i tau lambda)``.
    """

    def __init__(self, grid: RadialGrid, tau: float):
        if tau == 0.0 or not np.isfinite(tau):
            raise ValueError(f"tau must be finite and nonzero, got {tau}")
        self.grid = grid
        self.tau = float(tau)
        self._J = 1j * np.asarray(grid.radial_operator[1:, 1:])
        lam, T = np.linalg.eig(GL2_A)
        c = np.linalg.solve(T, np.ones(2))
        self._weights = self.tau * (GL2_B @ T) * c
        eye = np.eye(grid.N)
        self._lus = []
        for lam_k in lam:
            M = eye - self.tau * lam_k * self._J
            lu, piv = sla.lu_factor(M, check_finite=True)
            diag = np.abs(np.diag(lu))
            if diag.min() <= np.finfo(float).eps * diag.max():
                raise FactorizationFailure(
                    f"stage matrix is numerically singular (tau={tau}, N={grid.N})"
                )
            self._lus.append((lu, piv))

    def apply_interior(self, u: np.ndarray) -> np.ndarray:
        Ju = self._J @ u
        out = np.array(u, dtype=complex)
        for w, lu in zip(self._weights, self._lus):
            out += w * sla.lu_solve(lu, Ju, check_finite=False)
        return out

    def apply(self, field: WaveField) -> WaveField:
        """Advance the linear flow by ``tau`` (the time stamp is unchanged)."""
        if field.grid is not self.grid:
            raise ShapeMismatch("field and propagator live on different grids")
        out = np.zeros(self.grid.N + 1, dtype=complex)
        out[1:] = self.apply_interior(field.values[1:])
        return WaveField(self.grid, out, field.time)

    __call__ = apply


def build_linear_propagator(grid: RadialGrid, tau: float) -> LinearPropagator:
    """Factorise the Gauss-Legendre stage systems for step ``tau``."""
    return LinearPropagator(grid, tau)


def pade22(z):
    """Diagonal (2,2)-Pade approximant of ``exp(z)``."""
    z = np.asarray(z)
    return (1.0 + z / 2.0 + z**2 / 12.0) / (1.0 - z / 2.0 + z**2 / 12.0)


def strang_step(field: WaveField, dt: float, prop: LinearPropagator) -> WaveField:
    """Half nonlinear step, full linear step, half nonlinear step."""
    if not np.isclose(prop.tau, dt, rtol=1e-14, atol=0.0):
        raise ValueError(f"propagator built for tau={prop.tau}, step requested dt={dt}")
    half = 0.5 * dt
    out = nonlinear_phase_step(prop.apply(nonlinear_phase_step(field, half)), half)
    return out.with_values(out.values, field.time + dt)


# -- driver ------------------------------------------------------------------


def relative_energy_deviation(E: np.ndarray | float, E0: float):
    """``|E/E0 - 1|``, or the absolute deviation ``|E - E0|`` when ``E0 = 0``."""
    if E0 == 0.0:
        return np.abs(np.asarray(E) - E0)
    return np.abs(np.asarray(E) / E0 - 1.0)


def evolve(
    u0: WaveField, config: EvolutionConfig, prop: LinearPropagator | None = None
) -> Trajectory:
    """Run ``config.n_steps`` Strang steps from ``u0``.

    Diagnostics are recorded at the start, every ``record_stride`` steps and
    at the final step.  Fields are stored at the steps closest to each of
    ``config.snapshot_times``.

    Raises
    ------
    AccuracyLost
        The relative energy deviation at a record exceeded
        ``config.delta_e_ceiling``.
    NonFiniteField
        The field overflowed or produced NaN.
    """
    grid = u0.grid
    dt = config.dt
    n_steps = int(config.n_steps)
    stride = int(config.record_stride)
    prop = build_linear_propagator(grid, dt) if prop is None else prop
    snap_steps = {}
    for t in config.snapshot_times:
        snap_steps.setdefault(int(round((t - u0.time) / dt)), t)

    times, linfs, masses, energies = [], [], [], []
    snapshots = []

    def record(f: WaveField):
        times.append(f.time)
        linfs.append(observables.linf(f.values))
        masses.append(observables.mass(grid, f.values))
        energies.append(observables.energy(grid, f.values))

    field = u0
    record(field)
    E0 = energies[0]
    if 0 in snap_steps:
        snapshots.append(field)
    warned = False
    for k in range(1, n_steps + 1):
        field = strang_step(field, dt, prop)
        if k % stride == 0 or k == n_steps:
            if not np.all(np.isfinite(field.values)):
                raise NonFiniteField(f"non-finite field at t={field.time:.6g}")
            record(field)
            dE = float(relative_energy_deviation(energies[-1], E0))
            if dE > config.delta_e_ceiling:
                raise AccuracyLost(
                    f"energy deviation {dE:.3e} exceeds {config.delta_e_ceiling:.1e} "
                    f"at t={field.time:.6g}",
                    time=field.time,
                    delta_e=dE,
                )
            if dE > config.delta_e_warning and not warned:
                log.warning("energy deviation %.2e at t=%.4g", dE, field.time)
                warned = True
        if k in snap_steps:
            snapshots.append(field)

    energies_arr = np.array(energies)
    return Trajectory(
        times=np.array(times),
        linf_series=np.array(linfs),
        mass_series=np.array(masses),
        energy_series=energies_arr,
        delta_E_series=relative_energy_deviation(energies_arr, E0),
        snapshots=snapshots,
        final_field=field,
        config=config,
    )
