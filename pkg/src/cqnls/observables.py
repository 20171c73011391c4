"""Conserved quantities and norms of radial fields.

All integrals are over R^d and go through :func:`cqnls.spectral.radial_integral`.
Fields are node samples ``u(s_n)`` on a :class:`~cqnls.spectral.RadialGrid`,
real or complex.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ShapeMismatch, UnsupportedExponent
from .spectral import RadialGrid, radial_integral


def _field(grid: RadialGrid, u) -> np.ndarray:
    u = np.asarray(u)
    if u.shape != (grid.N + 1,):
        raise ShapeMismatch(f"expected {grid.N + 1} samples, got shape {u.shape}")
    return u


def _real_integral(grid: RadialGrid, samples) -> float:
    return float(np.real(radial_integral(grid, samples)))


def mass(grid: RadialGrid, u) -> float:
    """``M(u) = ||u||_2^2``."""
    u = _field(grid, u)
    return _real_integral(grid, np.abs(u) ** 2)


def lp_norm(grid: RadialGrid, u, p: int) -> float:
    """``||u||_p^p`` for ``p`` in {2, 4, 6}.

    Note the p-th power: this is the integral that enters the energy.
    """
    if p not in (2, 4, 6):
        raise UnsupportedExponent(f"p must be 2, 4 or 6, got {p}")
    u = _field(grid, u)
    return _real_integral(grid, np.abs(u) ** p)


def linf(u) -> float:
    """Node maximum of ``|u|``.

    Ground states peak at ``s = 0``, which is a node, so this is exact there.
    """
    u = np.asarray(u)
    return float(np.max(np.abs(u))) if u.size else 0.0


def grad_sq(grid: RadialGrid, u) -> float:
    """``||grad u||_2^2`` via ``|grad u|^2 = 4 s |du/ds|^2``."""
    u = _field(grid, u)
    du = grid.D_s @ u
    return _real_integral(grid, 4.0 * grid.s_nodes * np.abs(du) ** 2)


def energy(grid: RadialGrid, u) -> float:
    """``E(u) = 1/2 ||grad u||^2 - 1/2 ||u||_4^4 + 1/3 ||u||_6^6``."""
    u = _field(grid, u)
    a2 = np.abs(u) ** 2
    du = grid.D_s @ u
    integrand = 2.0 * grid.s_nodes * np.abs(du) ** 2 - 0.5 * a2**2 + a2**3 / 3.0
    return _real_integral(grid, integrand)


def action(grid: RadialGrid, u, omega: float) -> float:
    """``S_omega(u) = E(u) + omega M(u)``."""
    return energy(grid, u) + omega * mass(grid, u)


def momentum(grid: RadialGrid, u) -> np.ndarray:
    """``P(u) = Im int conj(u) grad u dx`` for a radial field.

    For ``u(x) = f(|x|)`` the integrand is ``Im(conj f f') x/|x|`` and the
    angular integral of ``x/|x|`` vanishes, so ``P = 0`` exactly.  Zeros are
    returned rather than a numerically integrated zero so that conservation
    reports do not show quadrature noise.
    """
    _field(grid, u)
    return np.zeros(grid.d)


def holder_gap(grid: RadialGrid, u) -> float:
    """``||u||_2 ||u||_6^3 - ||u||_4^4``; nonnegative by Holder's inequality."""
    return np.sqrt(mass(grid, u)) * np.sqrt(lp_norm(grid, u, 6)) - lp_norm(grid, u, 4)


@dataclass(frozen=True)
class Diagnostics:
    mass: float
    energy: float
    action_omega: float | None
    l4: float
    l6: float
    linf: float
    grad_sq: float
    momentum: tuple

    def as_dict(self) -> dict:
        return asdict(self)


def diagnostics(grid: RadialGrid, u, omega: float | None = None) -> Diagnostics:
    """Compute all observables of ``u`` in one pass."""
    u = _field(grid, u)
    M = mass(grid, u)
    G = grad_sq(grid, u)
    l4 = lp_norm(grid, u, 4)
    l6 = lp_norm(grid, u, 6)
    E = 0.5 * G - 0.5 * l4 + l6 / 3.0
    return Diagnostics(
        mass=M,
        energy=E,
        action_omega=None if omega is None else E + omega * M,
        l4=l4,
        l6=l6,
        linf=linf(u),
        grad_sq=G,
        momentum=tuple(momentum(grid, u)),
    )
