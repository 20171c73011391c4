"""Perturbed ground-state experiments.

A ground state ``Q_omega`` is perturbed, evolved, and the long-time behaviour
of the ``L^inf`` norm is classified as stable, dispersive or settled onto a
different ground state.  Settled final states are matched against a branch
of precomputed ground states by comparing modulus profiles.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import observables
from .errors import EmptyBranch, NoInteriorExtremum
from .evolution import EvolutionConfig, Trajectory, WaveField, evolve
from .groundstate import (
    Branch,
    GroundStateProfile,
    compute_branch,
    find_critical_omega,
    quadratic_vertex,
    solve_ground_state,
    transfer_profile,
)
from .spectral import RadialGrid, build_grid

log = logging.getLogger(__name__)


# -- perturbations -------------------------------------------------------------


@dataclass(frozen=True)
class PerturbationSpec:
    """Initial-data perturbation of a ground state.

    ``kind="mult"`` gives ``lam * Q``; ``kind="gauss"`` gives
    ``Q + sign * lam * exp(-(r - r0)**2 / width**2)``.
    """

    kind: str
    lam: float
    sign: int = 1
    r0: float = 0.0
    width: float = 1.0

    def __post_init__(self):
        if self.kind not in ("mult", "gauss"):
            raise ValueError(f"unknown perturbation kind {self.kind!r}")
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if self.sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign}")
        if self.r0 < 0:
            raise ValueError(f"r0 must be nonnegative, got {self.r0}")
        if not self.width > 0:
            raise ValueError(f"width must be positive, got {self.width}")

    @classmethod
    def multiplicative(cls, lam: float) -> "PerturbationSpec":
        return cls("mult", lam)

    @classmethod
    def gaussian(cls, sign: int, lam: float, r0: float = 0.0, width: float = 1.0):
        return cls("gauss", lam, sign, r0, width)

    @classmethod
    def parse(cls, text: str) -> "PerturbationSpec":
        """Parse ``mult:LAMBDA`` or ``gauss:SIGN:LAMBDA[:R0[:WIDTH]]``."""
        parts = text.strip().split(":")
        try:
            if parts[0] == "mult" and len(parts) == 2:
                return cls.multiplicative(float(parts[1]))
            if parts[0] == "gauss" and 3 <= len(parts) <= 5:
                signs = {"+": 1, "-": -1, "plus": 1, "minus": -1}
                if parts[1] not in signs:
                    raise ValueError(f"bad sign {parts[1]!r}")
                nums = [float(p) for p in parts[2:]]
                return cls.gaussian(signs[parts[1]], *nums)
        except ValueError as exc:
            raise ValueError(f"invalid perturbation {text!r}: {exc}") from exc
        raise ValueError(
            f"invalid perturbation {text!r}; expected mult:LAMBDA or gauss:SIGN:LAMBDA[:R0[:WIDTH]]"
        )

    def __str__(self) -> str:
        if self.kind == "mult":
            return f"mult:{self.lam:g}"
        sign = "+" if self.sign > 0 else "-"
        return f"gauss:{sign}:{self.lam:g}:{self.r0:g}:{self.width:g}"


def build_initial(
    profile: GroundStateProfile, spec: PerturbationSpec, grid: RadialGrid | None = None
) -> WaveField:
    """Perturbed ground state sampled on ``grid`` (default: the profile's)."""
    grid = profile.grid if grid is None else grid
    Q = transfer_profile(profile, grid)
    if spec.kind == "mult":
        u = spec.lam * Q
    else:
        r = np.sqrt(grid.s_nodes)
        u = Q + spec.sign * spec.lam * np.exp(-((r - spec.r0) ** 2) / spec.width**2)
    u = np.asarray(u, dtype=complex)
    u[0] = 0.0
    return WaveField(grid, u, 0.0)


# -- classification ------------------------------------------------------------


class Verdict(str, enum.Enum):
    STABLE = "stable"
    DISPERSIVE = "dispersive"
    SETTLED = "settled"
    UNDECIDED = "undecided"


@dataclass(frozen=True)
class ClassifierConfig:
    """Thresholds of :func:`classify`, all relative to ``L^inf`` values."""

    dispersion_ratio: float = 0.2
    rebound_ratio: float = 0.3
    stable_band: float = 0.01
    settle_amplitude: float = 0.05
    trailing_fraction: float = 0.2


@dataclass
class Outcome:
    verdict: Verdict
    omega_hat: float | None = None
    omega_hat_linf: float | None = None
    match_residual: float | None = None
    mass_radiated: float | None = None
    evidence: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = asdict(self)
        out["verdict"] = self.verdict.value
        return out


def trailing_window(trajectory: Trajectory, fraction: float) -> slice:
    n = len(trajectory.times)
    k = max(1, int(np.ceil(fraction * n)))
    return slice(n - k, n)


def _reference_linf(branch: Branch, omega: float) -> float:
    if branch.profiles:
        try:
            return observables.linf(branch.profile(omega).values)
        except KeyError:
            pass
    return float(np.interp(omega, branch.omegas, branch.linfs))


def classify(
    trajectory: Trajectory,
    branch: Branch,
    omega: float,
    config: ClassifierConfig = ClassifierConfig(),
) -> Outcome:
    """Classify a run from its ``L^inf`` series.

    Parameters
    ----------
    trajectory : Trajectory
        Completed run.
    branch : Branch
        Ground states of the same dimension, used for the reference
        amplitude at ``omega`` and for matching a settled final state.
    omega : float
        Frequency of the unperturbed ground state.

    The rules are applied in order: dispersive, stable, settled; a run that
    satisfies none of them is undecided.
    """
    linf = np.asarray(trajectory.linf_series)
    window = linf[trailing_window(trajectory, config.trailing_fraction)]
    initial = float(linf[0])
    reference = _reference_linf(branch, omega)
    mean = float(window.mean())
    amplitude = float(window.std() / mean) if mean > 0 else 0.0
    evidence = {
        "initial_linf": initial,
        "reference_linf": reference,
        "final_linf": float(linf[-1]),
        "trailing_start_time": float(trajectory.times[trailing_window(trajectory, config.trailing_fraction).start]),
        "trailing_mean": mean,
        "trailing_min": float(window.min()),
        "trailing_max": float(window.max()),
        "trailing_rel_amplitude": amplitude,
    }

    if initial == 0.0:
        return Outcome(Verdict.STABLE, evidence=evidence)

    if linf[-1] < config.dispersion_ratio * initial and window.max() < config.rebound_ratio * initial:
        return Outcome(Verdict.DISPERSIVE, evidence=evidence)

    band = config.stable_band * reference
    if np.all(np.abs(window - reference) <= band):
        return Outcome(Verdict.STABLE, evidence=evidence)

    lo, hi = float(branch.linfs.min()), float(branch.linfs.max())
    if amplitude < config.settle_amplitude and lo <= mean <= hi and abs(mean - reference) > band:
        match = match_final_state(trajectory.final_field, branch)
        evidence["match"] = match
        omega_hat = match["omega_hat"]
        if branch.d == 3:
            try:
                omega_crit = find_critical_omega(branch)
            except NoInteriorExtremum:
                omega_crit = None
            evidence["omega_crit"] = omega_crit
            if omega_crit is not None and omega_hat <= omega_crit:
                return Outcome(Verdict.UNDECIDED, evidence=evidence)
        return Outcome(
            Verdict.SETTLED,
            omega_hat=omega_hat,
            omega_hat_linf=match["omega_hat_linf"],
            match_residual=match["match_residual"],
            evidence=evidence,
        )
    return Outcome(Verdict.UNDECIDED, evidence=evidence)


# -- matching against the branch ----------------------------------------------

BULK_LEVEL = 1e-3
RADIATION_LEVEL = 1e-6


def _support_radius(grid: RadialGrid, Q: np.ndarray, level: float) -> float:
    """Smallest node ``s`` beyond which ``|Q| < level * max|Q|`` everywhere."""
    a = np.abs(Q)
    above = a >= level * a.max()
    return float(np.max(grid.s_nodes[above]))


def _profile_on(grid: RadialGrid, profile: GroundStateProfile) -> np.ndarray:
    return np.asarray(profile.values) if profile.grid is grid else transfer_profile(profile, grid)


def linf_match(branch: Branch, value: float, near: float | None = None) -> float | None:
    """Frequency whose ground-state ``L^inf`` equals ``value``.

    The ``L^inf`` curve need not be monotone; among all crossings (found by
    linear interpolation between branch points) the one closest to ``near``
    is returned, or the lowest one if ``near`` is None.
    """
    om, li = branch.omegas, branch.linfs
    roots = []
    for k in range(len(om) - 1):
        a, b = li[k] - value, li[k + 1] - value
        if a == 0.0:
            roots.append(om[k])
        elif a * b < 0:
            roots.append(om[k] + (om[k + 1] - om[k]) * a / (a - b))
    if len(om) and li[-1] == value:
        roots.append(om[-1])
    if not roots:
        return None
    roots = np.array(roots)
    if near is None:
        return float(roots.min())
    return float(roots[np.argmin(np.abs(roots - near))])


def match_final_state(field: WaveField, branch: Branch) -> dict:
    """Match ``|u|`` against the branch profiles.

    For each branch point the distance is the relative ``L^2`` difference
    between ``|u|`` and ``Q_omega``, both restricted to the bulk of
    ``Q_omega`` (``s`` where ``Q_omega >= 1e-3 max Q_omega``) so that
    radiation far from the origin does not enter.  The minimiser is refined
    by a parabola through the squared distances at it and its neighbours.

    Returns
    -------
    dict
        ``omega_hat``, ``match_residual`` (smallest sampled distance),
        ``omega_hat_linf`` (the ``L^inf``-matched frequency, as evidence),
        and the full residual landscape ``omegas``/``residuals``.
    """
    if len(branch) == 0:
        raise EmptyBranch("cannot match against an empty branch")
    grid = field.grid
    a = np.abs(field.values)
    w = grid.radial_weights
    omegas = branch.omegas
    if branch.profiles:
        residuals = np.empty(len(omegas))
        for k, pt in enumerate(branch.points):
            Q = _profile_on(grid, branch.profiles[pt.profile_ref])
            bulk = grid.s_nodes <= _support_radius(grid, Q, BULK_LEVEL)
            num = w[bulk] @ (a[bulk] - Q[bulk]) ** 2
            den = w[bulk] @ Q[bulk] ** 2
            residuals[k] = np.sqrt(max(num, 0.0) / den)
        i = int(np.argmin(residuals))
        omega_hat = float(omegas[i])
        if 0 < i < len(omegas) - 1 and residuals[i] > 1e-12:
            try:
                v = quadratic_vertex(omegas[i - 1 : i + 2], residuals[i - 1 : i + 2] ** 2)
                if omegas[i - 1] <= v <= omegas[i + 1]:
                    omega_hat = float(v)
            except NoInteriorExtremum:
                pass
        match_residual = float(residuals[i])
    else:
        log.info("branch carries no profiles; matching by L^inf only")
        residuals = np.full(len(omegas), np.nan)
        omega_hat = None
        match_residual = float("nan")
    omega_hat_linf = linf_match(branch, float(a.max()), near=omega_hat)
    if omega_hat is None:
        omega_hat = omega_hat_linf
    return {
        "omega_hat": omega_hat,
        "omega_hat_linf": omega_hat_linf,
        "match_residual": match_residual,
        "omegas": omegas.tolist(),
        "residuals": residuals.tolist(),
    }


def mass_budget(
    u0: WaveField, final: WaveField, profile_values: np.ndarray, linf_level: float = RADIATION_LEVEL
) -> dict:
    """Split the final mass into a bulk part near the origin and the rest.

    The bulk is ``s <= s_bulk`` with ``s_bulk`` the smallest node beyond which
    the matched profile stays below ``linf_level`` times its maximum.  The
    radiated mass is ``M(u0) - M_bulk``.
    """
    grid = final.grid
    s_bulk = _support_radius(grid, profile_values, linf_level)
    inside = grid.s_nodes <= s_bulk
    dens = np.abs(final.values) ** 2
    w = grid.radial_weights
    bulk = float(w[inside] @ dens[inside])
    outer = float(w[~inside] @ dens[~inside])
    m0 = observables.mass(u0.grid, u0.values)
    return {
        "initial_mass": m0,
        "final_mass": bulk + outer,
        "bulk_mass": bulk,
        "outer_mass": outer,
        "s_bulk": s_bulk,
        "mass_radiated": m0 - bulk,
        "closure": m0 - (bulk + outer),
    }


# -- scenarios -------------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioRun:
    """One evolution of a registered experiment."""

    label: str
    d: int
    omega: float
    perturbation: PerturbationSpec
    t_final: float
    n_steps: int
    expect: tuple
    N: int = 300
    s0: float = 1e3
    record_stride: int = 10

    def config(self, **overrides) -> EvolutionConfig:
        kw = {"t_final": self.t_final, "n_steps": self.n_steps, "record_stride": self.record_stride}
        kw.update(overrides)
        return EvolutionConfig(**kw)


def _stable(label, d, spec, t_final):
    return ScenarioRun(label, d, 0.1, spec, t_final, 10_000, ("stable",))


_UNSTABLE = {"N": 400, "s0": 1e4, "record_stride": 50}

SCENARIOS = {
    "2d-stable-down": (_stable("2d-stable-down", 2, PerturbationSpec.multiplicative(0.99), 20.0),),
    "2d-stable-up": (_stable("2d-stable-up", 2, PerturbationSpec.multiplicative(1.001), 20.0),),
    "2d-gauss-pm": (
        _stable("2d-gauss-plus", 2, PerturbationSpec.gaussian(+1, 0.001), 20.0),
        _stable("2d-gauss-minus", 2, PerturbationSpec.gaussian(-1, 0.001), 20.0),
    ),
    "2d-slow-0.05": tuple(
        ScenarioRun(
            f"2d-slow-0.05-{name}", 2, 0.05, PerturbationSpec.gaussian(sign, 0.001),
            400.0, 40_000, ("stable", "undecided"), record_stride=40,
        )
        for name, sign in (("plus", 1), ("minus", -1))
    ),
    "3d-stable-down": (_stable("3d-stable-down", 3, PerturbationSpec.multiplicative(0.99), 15.0),),
    "3d-stable-up": (_stable("3d-stable-up", 3, PerturbationSpec.multiplicative(1.001), 15.0),),
    "3d-unstable-down": (
        ScenarioRun("3d-unstable-down", 3, 0.01, PerturbationSpec.multiplicative(0.999),
                    500.0, 50_000, ("dispersive",), **_UNSTABLE),
    ),
    "3d-unstable-up": (
        ScenarioRun("3d-unstable-up", 3, 0.01, PerturbationSpec.multiplicative(1.001),
                    500.0, 50_000, ("settled",), **_UNSTABLE),
    ),
    "3d-gauss-suite": (
        ScenarioRun("3d-gauss-minus-r0", 3, 0.01, PerturbationSpec.gaussian(-1, 0.001, 0.0),
                    500.0, 50_000, ("dispersive",), **_UNSTABLE),
        ScenarioRun("3d-gauss-minus-r1", 3, 0.01, PerturbationSpec.gaussian(-1, 0.001, 1.0),
                    500.0, 50_000, ("dispersive",), **_UNSTABLE),
        ScenarioRun("3d-gauss-plus-r1", 3, 0.01, PerturbationSpec.gaussian(+1, 0.001, 1.0),
                    600.0, 60_000, ("settled",), **_UNSTABLE),
    ),
    "3d-omega-0.007": (
        ScenarioRun("3d-omega-0.007", 3, 0.007, PerturbationSpec.gaussian(+1, 0.001, 0.0),
                    800.0, 80_000, ("settled",), **_UNSTABLE),
    ),
}


def default_branch_omegas(d: int) -> np.ndarray:
    """Frequencies of the matching library: 0.005 to 0.16 in steps of 0.001."""
    return np.round(np.arange(0.005, 0.16 + 1e-9, 0.001), 6)


def branch_for(d: int, N: int, s0: float, omegas=None, grid: RadialGrid | None = None) -> Branch:
    """Matching library on the grid ``(d, N, s0)``."""
    omegas = default_branch_omegas(d) if omegas is None else omegas
    return compute_branch(d, omegas, N=N, s0=s0, grid=grid)


@dataclass
class ScenarioReport:
    """Everything produced by one run: parameters, outcome and series."""

    parameters: dict
    outcome: Outcome
    mass: dict
    final_deviation: float
    trajectory: Trajectory = field(repr=False)
    initial: WaveField = field(repr=False)

    @property
    def verdict(self) -> Verdict:
        return self.outcome.verdict

    def as_dict(self) -> dict:
        return {
            "parameters": self.parameters,
            "verdict": self.outcome.verdict.value,
            "omega_hat": self.outcome.omega_hat,
            "omega_hat_linf": self.outcome.omega_hat_linf,
            "match_residual": self.outcome.match_residual,
            "mass_budget": self.mass,
            "final_deviation_from_reference": self.final_deviation,
            "max_delta_E": self.trajectory.max_delta_E,
            "relative_mass_drift": self.trajectory.relative_mass_drift,
            "evidence": self.outcome.evidence,
        }


def run_scenario(
    d: int,
    omega: float,
    spec: PerturbationSpec,
    config: EvolutionConfig,
    branch: Branch,
    profile: GroundStateProfile | None = None,
    grid: RadialGrid | None = None,
    classifier: ClassifierConfig = ClassifierConfig(),
    label: str = "",
) -> ScenarioReport:
    """Perturb, evolve, classify, and budget the mass of one experiment.

    ``profile`` defaults to the branch profile at ``omega`` (or a fresh
    solve), and ``grid`` to the profile's grid.
    """
    if profile is None:
        try:
            profile = branch.profile(omega)
            if abs(profile.omega - omega) > 1e-12:
                raise KeyError(omega)
        except KeyError:
            profile = solve_ground_state(d, omega, grid=grid) if grid else solve_ground_state(d, omega)
    grid = profile.grid if grid is None else grid
    u0 = build_initial(profile, spec, grid)
    traj = evolve(u0, config)
    outcome = classify(traj, branch, omega, classifier)

    Q_ref = transfer_profile(profile, grid)
    if outcome.verdict is Verdict.SETTLED:
        Q_match = _profile_on(grid, branch.profile(outcome.omega_hat))
    else:
        Q_match = Q_ref
    budget = mass_budget(u0, traj.final_field, Q_match)
    if outcome.verdict is Verdict.SETTLED:
        outcome.mass_radiated = budget["mass_radiated"]
    deviation = float(np.max(np.abs(np.abs(traj.final_field.values) - Q_ref)))
    params = {
        "label": label,
        "d": d,
        "omega": omega,
        "perturbation": str(spec),
        "t_final": config.t_final,
        "n_steps": config.n_steps,
        "dt": config.dt,
        "record_stride": config.record_stride,
        "N": grid.N,
        "s0": grid.s0,
    }
    return ScenarioReport(params, outcome, budget, deviation, traj, u0)


def _branch_grid(branch: Branch) -> RadialGrid | None:
    for p in branch.profiles.values():
        return p.grid
    return None


def run_registered(run: ScenarioRun, branch: Branch | None = None, **overrides) -> ScenarioReport:
    """Execute a :class:`ScenarioRun`, computing its branch if not given."""
    if branch is None:
        grid = build_grid(run.d, run.N, run.s0)
        branch = branch_for(run.d, run.N, run.s0, grid=grid)
    else:
        grid = _branch_grid(branch)
        if grid is None or (grid.N, grid.s0) != (run.N, run.s0):
            grid = build_grid(run.d, run.N, run.s0)
    cfg = run.config(**overrides)
    return run_scenario(run.d, run.omega, run.perturbation, cfg, branch, grid=grid, label=run.label)
