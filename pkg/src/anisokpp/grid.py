"""Structured grids on intervals and axis-aligned rectangles.

Nodal P1/Q1 fields with per-piece Dirichlet/Neumann boundary labels, lumped
(trapezoid/tensor-trapezoid) node weights, anisotropic Dirichlet energy and
its assembled gradient.

Quadrature: 1-D cells carry the exact constant gradient of the linear
interpolant.  2-D cells use the 2x2 Gauss rule on the bilinear gradient;
a single center-point rule would leave the checkerboard mode with zero
energy, which destabilizes every eigenvalue computation downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .anisotropy import AnisotropyNorm
from .errors import InvalidDomainError

DIRICHLET = "dirichlet"
NEUMANN = "neumann"

PIECES = {1: ("left", "right"), 2: ("left", "right", "bottom", "top")}


@dataclass(eq=False)
class Grid:
    """Uniform grid on (0, Lx) or (0, Lx) x (0, Ly) with labelled boundary.

    Immutable by convention after :func:`build_grid`.  Derived arrays:

    coords : node coordinates, shape (n,) in 1-D and (n, 2) in 2-D,
    weights : lumped node weights (trapezoid / tensor product),
    conn : cell-to-node connectivity, shape (ncells, 2 or 4),
    ref_grads : physical shape-function gradients at the quadrature points,
        shape (ngp, nloc, dim),
    quad_w : physical quadrature weight of each point (uniform cells).
    """

    dim: int
    cells: Tuple[int, ...]
    extent: Tuple[float, ...]
    labels: Dict[str, str]
    node_count: int
    dirichlet_mask: np.ndarray
    coords: np.ndarray
    weights: np.ndarray
    conn: np.ndarray
    ref_grads: np.ndarray
    quad_w: np.ndarray
    h: Tuple[float, ...]

    @property
    def measure(self) -> float:
        return float(np.prod(self.extent))

    def same_layout(self, other: "Grid") -> bool:
        return (self.dim == other.dim and self.cells == other.cells
                and self.extent == other.extent and self.labels == other.labels)


@dataclass(eq=False)
class GridFunction:
    """Nodal scalar field over a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=float)
        if v.shape != (self.grid.node_count,):
            raise ValueError(
                f"values have shape {v.shape}, expected ({self.grid.node_count},)")
        self.values = v

    @classmethod
    def zeros(cls, grid: Grid) -> "GridFunction":
        return cls(grid, np.zeros(grid.node_count))

    @classmethod
    def full(cls, grid: Grid, value: float) -> "GridFunction":
        return cls(grid, np.full(grid.node_count, float(value)))

    @classmethod
    def from_callable(cls, grid: Grid, fn: Callable) -> "GridFunction":
        """Nodal interpolant of ``fn(x)`` (1-D) or ``fn(x, y)`` (2-D)."""
        if grid.dim == 1:
            vals = np.asarray(fn(grid.coords), dtype=float)
        else:
            vals = np.asarray(fn(grid.coords[:, 0], grid.coords[:, 1]), dtype=float)
        return cls(grid, np.broadcast_to(vals, (grid.node_count,)).copy())

    def copy(self) -> "GridFunction":
        return GridFunction(self.grid, self.values.copy())

    def l2_norm(self) -> float:
        """Lumped L2 norm."""
        return float(np.sqrt(np.dot(self.grid.weights, self.values ** 2)))

    def zero_dirichlet(self) -> "GridFunction":
        out = self.copy()
        out.values[self.grid.dirichlet_mask] = 0.0
        return out


def _normalize_labels(dim: int, labels) -> Dict[str, str]:
    pieces = PIECES[dim]
    if labels is None:
        raise InvalidDomainError("boundary labels are required")
    out = {}
    for key, val in dict(labels).items():
        k = str(key).lower()
        v = str(val).lower()
        if k not in pieces:
            raise InvalidDomainError(f"unknown boundary piece {key!r} for dim={dim}")
        if v not in (DIRICHLET, NEUMANN):
            raise InvalidDomainError(f"unknown boundary condition {val!r}")
        if k in out:
            raise InvalidDomainError(f"boundary piece {key!r} labelled twice")
        out[k] = v
    missing = [p for p in pieces if p not in out]
    if missing:
        raise InvalidDomainError(f"boundary pieces without a label: {missing}")
    if DIRICHLET not in out.values():
        raise InvalidDomainError(
            "at least one boundary piece must be Dirichlet; an all-Neumann "
            "labelling has no trace constraint and no Poincare inequality")
    return out


# 2x2 tensor Gauss points on the unit reference cell
_GP = (0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0))


def build_grid(dim: int, cells, labels, extent=None) -> Grid:
    """Build a uniform grid with labelled boundary pieces.

    Parameters
    ----------
    dim : 1 or 2
    cells : int or pair of ints, at least 2 per axis
    labels : mapping piece -> condition; 1-D pieces are left/right, 2-D
        adds bottom/top; every piece exactly once, at least one Dirichlet
    extent : axis lengths, default unit
    """
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    cells_t = tuple(int(c) for c in np.atleast_1d(cells))
    if len(cells_t) != dim:
        raise ValueError(f"expected {dim} cell counts, got {cells_t}")
    if any(c < 2 for c in cells_t):
        raise ValueError(f"need at least 2 cells per axis, got {cells_t}")
    extent_t = (tuple(float(e) for e in np.atleast_1d(extent))
                if extent is not None else (1.0,) * dim)
    if len(extent_t) != dim or any(e <= 0.0 for e in extent_t):
        raise ValueError(f"invalid extent {extent_t}")
    lab = _normalize_labels(dim, labels)
    h = tuple(extent_t[i] / cells_t[i] for i in range(dim))

    if dim == 1:
        n = cells_t[0]
        node_count = n + 1
        coords = np.linspace(0.0, extent_t[0], node_count)
        weights = np.full(node_count, h[0])
        weights[0] *= 0.5
        weights[-1] *= 0.5
        mask = np.zeros(node_count, dtype=bool)
        if lab["left"] == DIRICHLET:
            mask[0] = True
        if lab["right"] == DIRICHLET:
            mask[-1] = True
        idx = np.arange(n)
        conn = np.stack([idx, idx + 1], axis=1)
        ref_grads = np.array([[[-1.0 / h[0]], [1.0 / h[0]]]])
        quad_w = np.array([h[0]])
    else:
        nx, ny = cells_t
        hx, hy = h
        stride = nx + 1
        node_count = (nx + 1) * (ny + 1)
        ix, iy = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1))
        coords = np.stack([(ix * hx).ravel(), (iy * hy).ravel()], axis=1)
        wx = np.full(nx + 1, hx)
        wx[0] *= 0.5
        wx[-1] *= 0.5
        wy = np.full(ny + 1, hy)
        wy[0] *= 0.5
        wy[-1] *= 0.5
        weights = np.outer(wy, wx).ravel()
        mask = np.zeros(node_count, dtype=bool)
        ixf, iyf = ix.ravel(), iy.ravel()
        if lab["left"] == DIRICHLET:
            mask |= ixf == 0
        if lab["right"] == DIRICHLET:
            mask |= ixf == nx
        if lab["bottom"] == DIRICHLET:
            mask |= iyf == 0
        if lab["top"] == DIRICHLET:
            mask |= iyf == ny
        cx, cy = np.meshgrid(np.arange(nx), np.arange(ny))
        base = (cy * stride + cx).ravel()
        conn = np.stack([base, base + 1, base + stride, base + stride + 1], axis=1)
        # local node order (0,0), (1,0), (0,1), (1,1); bilinear gradients at
        # the 2x2 Gauss points, mapped to physical coordinates
        gps = [(s, t) for t in _GP for s in _GP]
        ref_grads = np.empty((4, 4, 2))
        for g, (s, t) in enumerate(gps):
            ref_grads[g, :, 0] = np.array([-(1 - t), (1 - t), -t, t]) / hx
            ref_grads[g, :, 1] = np.array([-(1 - s), -s, (1 - s), s]) / hy
        quad_w = np.full(4, hx * hy / 4.0)

    return Grid(dim=dim, cells=cells_t, extent=extent_t, labels=lab,
                node_count=node_count, dirichlet_mask=mask, coords=coords,
                weights=weights, conn=conn, ref_grads=ref_grads, quad_w=quad_w,
                h=h)


def cell_gradients(u: GridFunction) -> np.ndarray:
    """Gradient of the nodal interpolant at the quadrature points,
    shape (ncells, ngp, dim)."""
    g = u.grid
    return np.einsum("gld,cl->cgd", g.ref_grads, u.values[g.conn])


def energy(norm: AnisotropyNorm, u: GridFunction) -> float:
    """Anisotropic Dirichlet energy sum_cells sum_gp w_gp * H(grad u)^2."""
    _check_norm_dim(norm, u.grid)
    grads = cell_gradients(u)
    hvals = norm.h(grads)
    return float(np.einsum("g,cg->", u.grid.quad_w, hvals ** 2))


def energy_and_gradient(norm: AnisotropyNorm, u: GridFunction):
    """Energy together with its assembled nodal gradient.

    The gradient g satisfies g . phi = 2 * sum_cells,gp w_gp *
    flux(grad u) . grad phi for every nodal test function phi; entries at
    Dirichlet nodes are zeroed.  Returns ``(energy, gradient_vector)``.
    """
    _check_norm_dim(norm, u.grid)
    g = u.grid
    grads = cell_gradients(u)
    hvals = norm.h(grads)
    e = float(np.einsum("g,cg->", g.quad_w, hvals ** 2))
    fl = norm.flux(grads)
    loc = 2.0 * np.einsum("g,cgd,gld->cl", g.quad_w, fl, g.ref_grads)
    out = np.zeros(g.node_count)
    np.add.at(out, g.conn, loc)
    out[g.dirichlet_mask] = 0.0
    return e, out


def energy_gradient(norm: AnisotropyNorm, u: GridFunction) -> GridFunction:
    """Assembled gradient of :func:`energy`; see :func:`energy_and_gradient`."""
    _, vec = energy_and_gradient(norm, u)
    return GridFunction(u.grid, vec)


def flux_form(norm: AnisotropyNorm, u: GridFunction) -> np.ndarray:
    """Nodal assembly of the flux form A(u), with A(u) . phi =
    sum w_gp * flux(grad u) . grad phi.  Equals half the energy gradient;
    the weak form of the diffusion operator reads d*A(u) = load."""
    _, vec = energy_and_gradient(norm, u)
    return 0.5 * vec


def mass_integral(m: GridFunction, u: GridFunction, power: int) -> float:
    """Lumped quadrature of m * u**power with the grid node weights."""
    if power not in (1, 2):
        raise ValueError(f"power must be 1 or 2, got {power}")
    if m.grid is not u.grid and not m.grid.same_layout(u.grid):
        raise ValueError("weight and field live on different grids")
    return float(np.dot(m.grid.weights, m.values * u.values ** power))


def tangent_stiffness(norm: AnisotropyNorm, grid: Grid,
                      u: Optional[GridFunction] = None) -> sp.csr_matrix:
    """Stiffness matrix of the linearized flux form at u.

    For Euclidean/ellipse gauges the flux is linear and u is ignored.  For
    the two-slope and custom gauges the per-point Hessian of the flux
    potential is evaluated at the current gradient.
    """
    _check_norm_dim(norm, grid)
    if u is None:
        if not norm.is_linear_flux:
            raise ValueError("nonlinear gauge needs a linearization point")
        grads = np.zeros((grid.conn.shape[0], grid.quad_w.shape[0], grid.dim))
    else:
        grads = cell_gradients(u)
    hess = norm.flux_jacobian(grads)
    loc = np.einsum("g,gli,cgij,gmj->clm", grid.quad_w, grid.ref_grads, hess,
                    grid.ref_grads)
    nloc = grid.conn.shape[1]
    rows = np.repeat(grid.conn, nloc, axis=1).ravel()
    cols = np.tile(grid.conn, (1, nloc)).ravel()
    mat = sp.coo_matrix((loc.ravel(), (rows, cols)),
                        shape=(grid.node_count, grid.node_count))
    return mat.tocsr()


def poincare_constant(grid: Grid, opts=None) -> float:
    """Constant c with ||u||_2 <= c ||grad u||_2 on the discrete space with
    zero Dirichlet trace; computed as 1/sqrt of the smallest Rayleigh
    quotient of the Euclidean energy."""
    from . import eigen as _eigen
    from .anisotropy import euclidean as _euclidean

    zero = GridFunction.zeros(grid)
    res = _eigen.minimize_mu(_euclidean(grid.dim), 1.0, zero, grid, opts)
    if res.value <= 0.0:
        raise InvalidDomainError(
            f"nonpositive Rayleigh minimum {res.value:.3e}; Dirichlet part missing?")
    return 1.0 / float(np.sqrt(res.value))


def distance_to_dirichlet(grid: Grid) -> GridFunction:
    """Nodal interpolant of the distance to the Dirichlet-labelled pieces.

    Strictly positive away from those pieces; used as the default initial
    iterate of the eigenvalue solvers.
    """
    lab = grid.labels
    if grid.dim == 1:
        x = grid.coords
        lx = grid.extent[0]
        d = np.full(grid.node_count, np.inf)
        if lab["left"] == DIRICHLET:
            d = np.minimum(d, x)
        if lab["right"] == DIRICHLET:
            d = np.minimum(d, lx - x)
    else:
        x, y = grid.coords[:, 0], grid.coords[:, 1]
        lx, ly = grid.extent
        d = np.full(grid.node_count, np.inf)
        if lab["left"] == DIRICHLET:
            d = np.minimum(d, x)
        if lab["right"] == DIRICHLET:
            d = np.minimum(d, lx - x)
        if lab["bottom"] == DIRICHLET:
            d = np.minimum(d, y)
        if lab["top"] == DIRICHLET:
            d = np.minimum(d, ly - y)
    return GridFunction(grid, d)


def _check_norm_dim(norm: AnisotropyNorm, grid: Grid) -> None:
    if norm.dim != grid.dim:
        raise ValueError(f"gauge dimension {norm.dim} != grid dimension {grid.dim}")
