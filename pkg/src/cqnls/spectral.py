"""Chebyshev collocation on the truncated half-line ``s in [0, s0]``.

The radial variable is ``s = r**2``.  The interval is mapped affinely onto
``l in [-1, 1]`` through ``s = s0 (1 + l) / 2`` and discretised at the
Chebyshev extreme points ``l_n = cos(n pi / N)``.  Node ordering follows the
classical convention: index 0 is ``l = 1`` (``s = s0``) and index ``N`` is
``l = -1`` (``s = 0``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import roots_jacobi

from .errors import DegenerateGrid, InvalidDimension, OutOfDomain, ShapeMismatch

#: Surface area of the unit sphere in R^d.
SPHERE_AREA = {2: 2.0 * np.pi, 3: 4.0 * np.pi}

MIN_DEGREE = 8


def chebyshev_nodes(N: int) -> np.ndarray:
    """Chebyshev extreme points ``cos(n pi / N)``, ``n = 0..N``."""
    if N < 1:
        raise DegenerateGrid(f"need N >= 1, got {N}")
    # sin form is exactly antisymmetric, so the middle node is exactly 0
    return np.sin(np.pi * (N - 2.0 * np.arange(N + 1)) / (2.0 * N))


def differentiation_matrix(N: int) -> np.ndarray:
    """First-derivative collocation matrix at the Chebyshev extreme points.

    Off-diagonal entries use the closed form
    ``c_i / c_j * (-1)**(i+j) / (l_i - l_j)``; the diagonal is set by the
    negative-sum trick so that every row annihilates constants.

    Parameters
    ----------
    N : int
        Polynomial degree, the matrix is ``(N+1, N+1)``.
    """
    if N < 1:
        raise DegenerateGrid(f"need N >= 1, got {N}")
    x = chebyshev_nodes(N)
    c = np.ones(N + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(N + 1)
    dx = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (dx + np.eye(N + 1))
    D -= np.diag(D.sum(axis=1))
    return D


def clenshaw_curtis_weights(N: int) -> np.ndarray:
    """Clenshaw-Curtis weights on ``[-1, 1]`` at the Chebyshev extreme points.

    The rule integrates every polynomial of degree ``<= N`` exactly.
    """
    if N < 2:
        raise DegenerateGrid(f"need N >= 2, got {N}")
    theta = np.pi * np.arange(N + 1) / N
    w = np.zeros(N + 1)
    inner = theta[1:-1]
    v = np.ones(N - 1)
    if N % 2 == 0:
        w[0] = w[N] = 1.0 / (N**2 - 1)
        for k in range(1, N // 2):
            v -= 2.0 * np.cos(2 * k * inner) / (4 * k**2 - 1)
        v -= np.cos(N * inner) / (N**2 - 1)
    else:
        w[0] = w[N] = 1.0 / N**2
        for k in range(1, (N - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * inner) / (4 * k**2 - 1)
    w[1:-1] = 2.0 * v / N
    return w


def _barycentric_weights(N: int) -> np.ndarray:
    w = (-1.0) ** np.arange(N + 1)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def jacobi_product_weights(N: int, beta: float) -> np.ndarray:
    """Weights ``w`` with ``w @ p(l_n) == int_{-1}^{1} p(l) (1+l)**beta dl``.

    Exact for every polynomial ``p`` of degree ``<= N`` sampled at the
    Chebyshev extreme points.  For ``beta = 0`` these are the Clenshaw-Curtis
    weights.  The moments of the Lagrange basis are taken with a Gauss-Jacobi
    rule of sufficient degree.
    """
    if beta == 0.0:
        return clenshaw_curtis_weights(N)
    m = N // 2 + 2
    xq, wq = roots_jacobi(m, 0.0, beta)
    nodes = chebyshev_nodes(N)
    bw = _barycentric_weights(N)
    kernel = bw / (xq[:, None] - nodes[None, :])
    L = kernel / kernel.sum(axis=1, keepdims=True)
    return wq @ L


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Collocation geometry for radial fields in dimension ``d``.

    Instances are immutable; build them with :func:`build_grid`.
    """

    d: int
    N: int
    s0: float
    ell_nodes: np.ndarray = field(repr=False)
    s_nodes: np.ndarray = field(repr=False)
    D_ell: np.ndarray = field(repr=False)
    D_s: np.ndarray = field(repr=False)
    D2_s: np.ndarray = field(repr=False)
    quad_weights: np.ndarray = field(repr=False)
    radial_weights: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.N + 1

    @property
    def r_nodes(self) -> np.ndarray:
        return np.sqrt(self.s_nodes)

    @cached_property
    def bary_weights(self) -> np.ndarray:
        return _frozen(_barycentric_weights(self.N))

    @cached_property
    def radial_operator(self) -> np.ndarray:
        """``2 s d^2/ds^2 + d d/ds``, i.e. half the radial Laplacian in ``s``."""
        return _frozen(2.0 * self.s_nodes[:, None] * self.D2_s + self.d * self.D_s)

    def params(self) -> dict:
        return {"d": self.d, "N": self.N, "s0": self.s0}


def build_grid(d: int, N: int, s0: float, *, min_degree: int = MIN_DEGREE) -> RadialGrid:
    """Build the radial collocation grid for dimension ``d``.

    Parameters
    ----------
    d : int
        Spatial dimension, 2 or 3.
    N : int
        Polynomial degree (even, ``>= 8``); the grid has ``N + 1`` nodes.
    s0 : float
        Truncation radius in ``s = r**2``.
    min_degree : int
        Lower bound on ``N``.  Only lowered by tests that exercise tiny grids.
    """
    if d not in SPHERE_AREA:
        raise InvalidDimension(f"dimension must be 2 or 3, got {d}")
    if N < min_degree:
        raise DegenerateGrid(f"need N >= {min_degree}, got {N}")
    if N % 2:
        raise DegenerateGrid(f"N must be even, got {N}")
    s0 = float(s0)
    if not s0 > 0:
        raise DegenerateGrid(f"s0 must be positive, got {s0}")

    ell = chebyshev_nodes(N)
    s = 0.5 * s0 * (1.0 + ell)
    s[0], s[-1] = s0, 0.0
    D_ell = differentiation_matrix(N)
    D_s = (2.0 / s0) * D_ell
    D2_s = D_s @ D_s
    w_ell = clenshaw_curtis_weights(N)
    # dx = (sigma_d / 2) s^((d-2)/2) ds with s = (s0/2)(1+l); the algebraic
    # factor is integrated exactly against the interpolant, not sampled
    beta = (d - 2) / 2.0
    radial = (
        0.5 * SPHERE_AREA[d] * (0.5 * s0) ** (1.0 + beta) * jacobi_product_weights(N, beta)
    )
    return RadialGrid(
        d=d,
        N=N,
        s0=s0,
        ell_nodes=_frozen(ell),
        s_nodes=_frozen(s),
        D_ell=_frozen(D_ell),
        D_s=_frozen(D_s),
        D2_s=_frozen(D2_s),
        quad_weights=_frozen(w_ell),
        radial_weights=_frozen(radial),
    )


def _check_samples(grid: RadialGrid, samples) -> np.ndarray:
    samples = np.asarray(samples)
    if samples.shape != (grid.N + 1,):
        raise ShapeMismatch(f"expected {grid.N + 1} samples, got shape {samples.shape}")
    return samples


def radial_integral(grid: RadialGrid, samples):
    """Approximate ``int_{R^d} g(|x|) dx`` from node samples of ``g(s)``."""
    samples = _check_samples(grid, samples)
    return grid.radial_weights @ samples


def interpolation_matrix(grid: RadialGrid, s_targets) -> np.ndarray:
    """Matrix ``P`` with ``P @ samples`` the interpolant at ``s_targets``.

    Rows come from the second (true) barycentric formula with Chebyshev
    weights; a target that coincides with a node gets a unit row.
    """
    s_arr = np.atleast_1d(np.asarray(s_targets, dtype=float))
    if np.any(s_arr < 0.0) or np.any(s_arr > grid.s0):
        raise OutOfDomain(f"s_star must lie in [0, {grid.s0}]")
    x = 2.0 * s_arr / grid.s0 - 1.0
    diff = x[:, None] - grid.ell_nodes[None, :]
    hit = (diff == 0.0) | (s_arr[:, None] == grid.s_nodes[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        kernel = grid.bary_weights / diff
        P = kernel / kernel.sum(axis=1, keepdims=True)
    rows = np.nonzero(hit.any(axis=1))[0]
    P[rows] = 0.0
    P[rows, hit[rows].argmax(axis=1)] = 1.0
    return P


def interpolate(grid: RadialGrid, samples, s_star):
    """Evaluate the degree-N interpolant of ``samples`` at ``s_star``.

    ``s_star`` may be a scalar or an array of points in ``[0, s0]``.
    """
    samples = _check_samples(grid, samples)
    out = interpolation_matrix(grid, s_star) @ samples
    if np.ndim(s_star) == 0:
        return out[0]
    return out
