"""Ground states of the cubic-quintic stationary equation.

In ``s = r**2`` the radial ground state ``Q`` solves

    2 s Q'' + d Q' - omega Q + Q**3 - alpha Q**5 = 0,   Q(s0) = 0,

with ``alpha = 1`` the cubic-quintic problem and ``alpha = 0`` the cubic one.
The discrete system drops the ``s = s0`` row and column (Dirichlet
elimination) and is solved by damped Newton iteration.  Nontrivial solutions
are reached by homotopy in ``alpha`` starting from a Gaussian seed, and whole
branches by continuation in ``omega``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import observables
from .errors import (
    AdaptiveFail,
    AlphaOutOfRange,
    BranchGap,
    NoConvergence,
    NoInteriorExtremum,
    OmegaOutOfRange,
    ShapeMismatch,
    SingularJacobian,
    TrivialCollapse,
)
from .spectral import RadialGrid, build_grid, interpolate

log = logging.getLogger(__name__)

OMEGA_MAX = 3.0 / 16.0

#: Gaussian seed ``a sqrt(omega) exp(-b omega s)`` per dimension.  The heights
#: are the peak values of the omega = 1 cubic ground states (2.2062 in 2D,
#: 4.3374 in 3D); the widths were picked so that Newton converges at alpha = 0.
SEED_CONSTANTS = {2: (2.2062, 1.0), 3: (4.34, 3.0)}

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 50
TRIVIAL_THRESHOLD = 1e-3
MAX_HALVINGS = 10
DEFAULT_ALPHA_STEPS = 11
MIN_ALPHA_STEP = 1.0 / 320.0
DEFAULT_OMEGA_STEP = 0.0025


def check_omega(omega: float) -> None:
    if not 0.0 < omega < OMEGA_MAX:
        raise OmegaOutOfRange(f"omega must lie in (0, 3/16), got {omega}")


def check_alpha(alpha: float) -> None:
    if not 0.0 <= alpha <= 1.0:
        raise AlphaOutOfRange(f"alpha must lie in [0, 1], got {alpha}")


@dataclass(frozen=True, eq=False)
class GroundStateProfile:
    """A converged real solution on a grid, with convergence metadata."""

    d: int
    omega: float
    alpha: float
    grid: RadialGrid = field(repr=False)
    values: np.ndarray = field(repr=False)
    residual_norm: float
    newton_iters: int

    @property
    def ref(self) -> str:
        return profile_ref(self.d, self.omega, self.alpha)

    def diagnostics(self) -> observables.Diagnostics:
        return observables.diagnostics(self.grid, self.values, self.omega)


def profile_ref(d: int, omega: float, alpha: float = 1.0) -> str:
    ref = f"d{d}_w{omega:.6f}"
    return ref if alpha == 1.0 else f"{ref}_a{alpha:.4f}"


@dataclass(frozen=True)
class BranchPoint:
    omega: float
    mass: float
    energy: float
    linf: float
    profile_ref: str


@dataclass
class Branch:
    """Ground states of one dimension ordered by increasing ``omega``.

    ``profiles`` maps ``BranchPoint.profile_ref`` to the converged profile
    when the branch was computed in-process; it is empty for branches loaded
    from CSV.  ``gaps`` lists frequencies that continuation could not reach.
    """

    d: int
    points: list = field(default_factory=list)
    profiles: dict = field(default_factory=dict, repr=False)
    gaps: list = field(default_factory=list)

    def __post_init__(self):
        self.points = sorted(self.points, key=lambda p: p.omega)
        om = self.omegas
        if np.any(np.diff(om) <= 0):
            raise ValueError("branch frequencies must be strictly increasing")

    def __len__(self):
        return len(self.points)

    @property
    def omegas(self) -> np.ndarray:
        return np.array([p.omega for p in self.points])

    @property
    def masses(self) -> np.ndarray:
        return np.array([p.mass for p in self.points])

    @property
    def energies(self) -> np.ndarray:
        return np.array([p.energy for p in self.points])

    @property
    def linfs(self) -> np.ndarray:
        return np.array([p.linf for p in self.points])

    def nearest(self, omega: float) -> BranchPoint:
        return self.points[int(np.argmin(np.abs(self.omegas - omega)))]

    def profile(self, omega: float) -> GroundStateProfile:
        """Stored profile of the branch point closest to ``omega``."""
        return self.profiles[self.nearest(omega).profile_ref]


def branch_point(profile: GroundStateProfile) -> BranchPoint:
    diag = profile.diagnostics()
    return BranchPoint(
        omega=profile.omega,
        mass=diag.mass,
        energy=diag.energy,
        linf=diag.linf,
        profile_ref=profile.ref,
    )


# -- discrete stationary problem ---------------------------------------------


def stationary_residual(grid: RadialGrid, Q, omega: float, alpha: float) -> np.ndarray:
    """Residual of the stationary equation at the ``N`` retained nodes.

    ``Q`` holds all ``N + 1`` node values; the ``s = s0`` row is dropped.
    The ``s = 0`` row is kept since its ``2 s`` coefficient vanishes there.
    """
    check_omega(omega)
    check_alpha(alpha)
    Q = np.asarray(Q, dtype=float)
    if Q.shape != (grid.N + 1,):
        raise ShapeMismatch(f"expected {grid.N + 1} samples, got shape {Q.shape}")
    q = Q[1:]
    return grid.radial_operator[1:] @ Q - omega * q + q**3 - alpha * q**5


def stationary_jacobian(grid: RadialGrid, Q, omega: float, alpha: float) -> np.ndarray:
    """Jacobian of :func:`stationary_residual` w.r.t. the retained unknowns."""
    check_omega(omega)
    check_alpha(alpha)
    Q = np.asarray(Q, dtype=float)
    if Q.shape != (grid.N + 1,):
        raise ShapeMismatch(f"expected {grid.N + 1} samples, got shape {Q.shape}")
    q2 = Q[1:] ** 2
    J = np.array(grid.radial_operator[1:, 1:])
    J[np.diag_indices_from(J)] += -omega + 3.0 * q2 - 5.0 * alpha * q2**2
    return J


def newton_solve(
    grid: RadialGrid,
    Q0,
    omega: float,
    alpha: float = 1.0,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> GroundStateProfile:
    """Damped Newton iteration for the discrete stationary equation.

    A step that does not lower the residual max-norm is halved, at most
    ``MAX_HALVINGS`` times; the halvings count as one iteration.

    Raises
    ------
    NoConvergence
        Residual still above ``tol`` after ``max_iter`` iterations.
    TrivialCollapse
        The iterate's max-norm dropped below ``TRIVIAL_THRESHOLD``.
    SingularJacobian
        The linear solve failed or produced non-finite values.
    """
    check_omega(omega)
    check_alpha(alpha)
    Q = np.array(Q0, dtype=float)
    if Q.shape != (grid.N + 1,):
        raise ShapeMismatch(f"expected {grid.N + 1} samples, got shape {Q.shape}")
    Q[0] = 0.0

    def failure(cls, msg, res):
        return cls(msg, omega=omega, alpha=alpha, residual=res)

    F = stationary_residual(grid, Q, omega, alpha)
    res = float(np.max(np.abs(F)))
    it = 0
    while res > tol:
        if it >= max_iter:
            raise failure(
                NoConvergence,
                f"Newton did not converge in {max_iter} iterations "
                f"(omega={omega}, alpha={alpha}, residual={res:.3e})",
                res,
            )
        J = stationary_jacobian(grid, Q, omega, alpha)
        try:
            dq = sla.solve(J, F, check_finite=True)
        except (sla.LinAlgError, ValueError) as exc:
            raise failure(SingularJacobian, f"linear solve failed: {exc}", res) from exc
        if not np.all(np.isfinite(dq)):
            raise failure(SingularJacobian, "non-finite Newton update", res)

        step = 1.0
        full = None
        for _ in range(MAX_HALVINGS + 1):
            trial = Q.copy()
            trial[1:] -= step * dq
            F_trial = stationary_residual(grid, trial, omega, alpha)
            res_trial = float(np.max(np.abs(F_trial)))
            if full is None:
                full = (trial, F_trial, res_trial)
            if res_trial < res:
                break
            step *= 0.5
        else:
            # no halving helped: at the round-off floor, so keep the plain
            # Newton step and let max_iter decide
            trial, F_trial, res_trial = full
        Q, F, res = trial, F_trial, res_trial
        it += 1
        if not np.isfinite(res):
            raise failure(NoConvergence, "residual became non-finite", res)
        if np.max(np.abs(Q)) < TRIVIAL_THRESHOLD:
            raise failure(
                TrivialCollapse,
                f"iterate collapsed to the trivial solution (omega={omega}, alpha={alpha})",
                res,
            )

    Q.setflags(write=False)
    return GroundStateProfile(
        d=grid.d,
        omega=float(omega),
        alpha=float(alpha),
        grid=grid,
        values=Q,
        residual_norm=res,
        newton_iters=it,
    )


def cubic_seed(grid: RadialGrid, d: int | None = None, omega: float = 0.1) -> np.ndarray:
    """Gaussian initial iterate ``a sqrt(omega) exp(-b omega s)`` for alpha = 0."""
    d = grid.d if d is None else d
    check_omega(omega)
    a, b = SEED_CONSTANTS[d]
    seed = a * np.sqrt(omega) * np.exp(-b * omega * grid.s_nodes)
    seed[0] = 0.0
    return seed


def _default_alpha_schedule(steps: int = DEFAULT_ALPHA_STEPS) -> np.ndarray:
    return np.linspace(0.0, 1.0, steps)


def trace_alpha(
    grid: RadialGrid,
    d: int | None = None,
    omega: float = 0.1,
    alpha_steps=None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    min_step: float = MIN_ALPHA_STEP,
) -> GroundStateProfile:
    """Homotopy from the cubic ground state (alpha = 0) to alpha = 1.

    Each converged profile seeds the next value of ``alpha``.  When a solve
    fails, the alpha step is halved until it falls below ``min_step``.

    Parameters
    ----------
    alpha_steps : sequence of float, optional
        Schedule ``0 = a_0 < ... < a_K = 1``; defaults to eleven uniform values.
    """
    d = grid.d if d is None else d
    check_omega(omega)
    schedule = _default_alpha_schedule() if alpha_steps is None else np.asarray(alpha_steps, float)
    if schedule[0] != 0.0 or schedule[-1] != 1.0 or np.any(np.diff(schedule) <= 0):
        raise ValueError("alpha schedule must rise strictly from 0 to 1")

    current = newton_solve(grid, cubic_seed(grid, d, omega), omega, 0.0, tol, max_iter)
    for target in schedule[1:]:
        h = target - current.alpha
        while current.alpha < target:
            a_try = min(current.alpha + h, target)
            try:
                current = newton_solve(grid, current.values, omega, a_try, tol, max_iter)
            except NoConvergence as exc:
                h *= 0.5
                log.debug("alpha step failed at %.5f (%s); halving to %.5f", a_try, exc, h)
                if h < min_step:
                    raise AdaptiveFail(
                        f"alpha continuation stalled at alpha={current.alpha:.5f} "
                        f"(omega={omega})",
                        omega=omega,
                        alpha=a_try,
                        residual=exc.residual,
                    ) from exc
    return current


def solve_ground_state(
    d: int,
    omega: float,
    N: int = 400,
    s0: float = 1e3,
    alpha_steps: int | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    grid: RadialGrid | None = None,
) -> GroundStateProfile:
    """Build a grid (unless given) and trace the alpha = 1 ground state."""
    check_omega(omega)
    grid = build_grid(d, N, s0) if grid is None else grid
    schedule = None if alpha_steps is None else _default_alpha_schedule(alpha_steps)
    return trace_alpha(grid, d, omega, schedule, tol=tol, max_iter=max_iter)


def transfer_profile(profile: GroundStateProfile, grid: RadialGrid) -> np.ndarray:
    """Node values of ``profile`` on another grid (zero beyond its ``s0``)."""
    if profile.grid is grid:
        return np.array(profile.values)
    s = np.asarray(grid.s_nodes)
    inside = s <= profile.grid.s0
    out = np.zeros(grid.N + 1)
    out[inside] = interpolate(profile.grid, profile.values, s[inside])
    out[0] = 0.0
    return out


# -- continuation in omega ---------------------------------------------------


def _max_omega_step(omega: float, step: float) -> float:
    # both ends of the branch steepen; take half steps there
    return 0.5 * step if omega < 0.01 or omega > 0.16 else step


def _walk(grid, start, target, step, min_step, tol, max_iter):
    """Continue from ``start`` to ``target`` with adaptive sub-steps."""
    current = start
    direction = np.sign(target - start.omega)
    h = _max_omega_step(start.omega, step)
    while current.omega != target:
        h = min(h, _max_omega_step(current.omega, step))
        om = current.omega + direction * h
        if (om - target) * direction >= 0:
            om = target
        try:
            current = newton_solve(grid, current.values, om, 1.0, tol, max_iter)
            h = min(2.0 * h, step)
        except NoConvergence:
            h *= 0.5
            if h < min_step:
                return current, False
    return current, True


def continue_branch(
    grid: RadialGrid,
    d: int | None,
    omega_list,
    seed: GroundStateProfile,
    step: float = DEFAULT_OMEGA_STEP,
    min_step: float | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    raise_on_gap: bool = True,
) -> Branch:
    """Trace the alpha = 1 branch through ``omega_list`` starting at ``seed``.

    The walk runs outward from ``seed.omega`` in both directions, each solve
    starting from the nearest converged neighbour.  Consecutive targets
    further apart than ``step`` get intermediate solves.

    Raises
    ------
    BranchGap
        Some targets were unreachable even with ``min_step``; the exception
        carries the partial branch.  With ``raise_on_gap=False`` the partial
        branch is returned with its ``gaps`` filled instead.
    """
    d = grid.d if d is None else d
    if seed.alpha != 1.0:
        raise AlphaOutOfRange("continuation needs an alpha = 1 seed")
    omegas = np.unique(np.asarray(omega_list, dtype=float))
    for om in omegas:
        check_omega(om)
    min_step = step / 64.0 if min_step is None else min_step

    if seed.grid is not grid:
        seed = newton_solve(grid, transfer_profile(seed, grid), seed.omega, 1.0, tol, max_iter)

    profiles = {}
    if np.any(omegas == seed.omega):
        profiles[seed.omega] = seed
    gaps = []
    below = omegas[omegas < seed.omega][::-1]
    above = omegas[omegas > seed.omega]
    for direction in (below, above):
        current = seed
        for k, target in enumerate(direction):
            current, ok = _walk(grid, current, float(target), step, min_step, tol, max_iter)
            if not ok:
                gaps.extend(float(x) for x in direction[k:])
                log.warning("branch gap: could not reach omega=%.5f from %.5f",
                            target, current.omega)
                break
            profiles[float(target)] = current

    branch = Branch(
        d=d,
        points=[branch_point(p) for p in profiles.values()],
        profiles={p.ref: p for p in profiles.values()},
        gaps=sorted(gaps),
    )
    if gaps and raise_on_gap:
        raise BranchGap(f"{len(gaps)} frequencies unreachable", branch=branch, missing=gaps)
    return branch


def compute_branch(
    d: int,
    omega_list,
    N: int = 400,
    s0: float = 1e3,
    seed_omega: float = 0.1,
    grid: RadialGrid | None = None,
    **kwargs,
) -> Branch:
    """Seed by alpha homotopy at ``seed_omega``, then continue in omega."""
    grid = build_grid(d, N, s0) if grid is None else grid
    seed = trace_alpha(grid, d, seed_omega)
    return continue_branch(grid, d, omega_list, seed, **kwargs)


# -- a posteriori checks -------------------------------------------------------


def pohozaev_residuals(profile: GroundStateProfile) -> tuple:
    """Normalised residuals of the two Pohozaev identities.

    Each identity is divided by the largest absolute value among its terms,
    so a genuine solution gives values at discretisation accuracy and a
    non-solution gives O(1).
    """
    if profile.alpha != 1.0:
        raise AlphaOutOfRange("Pohozaev identities hold for alpha = 1 only")
    g, u, d, om = profile.grid, profile.values, profile.d, profile.omega
    G = observables.grad_sq(g, u)
    L4 = observables.lp_norm(g, u, 4)
    L6 = observables.lp_norm(g, u, 6)
    M = observables.mass(g, u)
    terms1 = np.array([0.5 * G, -L4, L6, om * M])
    terms2 = np.array([(d - 2) / 2.0 * G, -d / 2.0 * L4, d / 3.0 * L6, om * d * M])

    def normalised(terms):
        scale = np.max(np.abs(terms))
        return 0.0 if scale == 0.0 else float(abs(terms.sum()) / scale)

    return normalised(terms1), normalised(terms2)


def quadratic_vertex(x, y) -> float:
    """Abscissa of the vertex of the parabola through three points."""
    x0, x1, x2 = map(float, x)
    y0, y1, y2 = map(float, y)
    # Newton divided differences
    f01 = (y1 - y0) / (x1 - x0)
    f12 = (y2 - y1) / (x2 - x1)
    f012 = (f12 - f01) / (x2 - x0)
    if f012 == 0.0:
        raise NoInteriorExtremum("collinear points have no vertex")
    return 0.5 * (x0 + x1) - 0.5 * f01 / f012


def locate_extremum(x, y, kind: str = "min") -> float:
    """Interior extremum of sampled ``y(x)`` refined by a three-point fit."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if len(x) < 3:
        raise NoInteriorExtremum("need at least three points")
    i = int(np.argmin(y) if kind == "min" else np.argmax(y))
    if i == 0 or i == len(x) - 1:
        raise NoInteriorExtremum(f"the {kind} lies at an endpoint of the sampled range")
    return quadratic_vertex(x[i - 1 : i + 2], y[i - 1 : i + 2])


def find_critical_omega(branch: Branch) -> float:
    """Frequency of the interior mass minimum along the branch."""
    if len(branch) < 5:
        raise NoInteriorExtremum("need at least 5 branch points")
    return locate_extremum(branch.omegas, branch.masses, "min")
