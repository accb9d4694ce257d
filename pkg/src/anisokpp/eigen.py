"""Principal eigenvalues of the anisotropic diffusion operator.

Two Rayleigh quotients are minimized over the nonnegative cone of the
discrete space with zero Dirichlet trace:

* the shifted quotient (d * energy(u) - int m u^2) / int u^2, whose sign
  decides existence of a positive steady state, and
* the weighted quotient energy(u) / int m u^2 over int m u^2 > 0, whose
  minimum is the positive principal eigenvalue of the weighted problem.

The minimizer is a projected gradient iteration with spectral
(Barzilai-Borwein) steps, per-iterate projection onto the cone and
renormalization.  The assembled quotient gradient is preconditioned with
the inverse of a fixed Euclidean stiffness-plus-mass operator (the Riesz
map of the discrete H1 inner product); without it the iteration count
grows like 1/h^2 and fine grids never reach the residual target.  A 1-D
piecewise-constant shooting solver provides an independent oracle for
bang-bang weights with a monotone principal mode.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .anisotropy import AnisotropyNorm, euclidean as _euclidean_norm
from .errors import DegenerateInputError, InfeasibleWeightError, OracleFailureError
from .grid import (Grid, GridFunction, distance_to_dirichlet, energy,
                   energy_and_gradient, tangent_stiffness)


@dataclass
class EigenOptions:
    """Stopping and initialization knobs for the projected-gradient solver."""

    tol: float = 1e-8            # KKT residual target
    max_iter: int = 20000
    value_tol: float = 1e-12     # relative quotient change counted as a stall
    stall_iters: int = 80        # consecutive stalled iterations before giving up
    history: int = 10            # nonmonotone line-search window
    init: str = "distance"       # "distance" or "random"
    seed: Optional[int] = None
    warm_start: Optional[np.ndarray] = None


@dataclass
class EigenResult:
    """Converged eigenpair: quotient value, nonnegative normalized
    eigenfunction, KKT residual, iteration count, convergence flag."""

    value: float
    eigenfunction: GridFunction
    residual: float
    iterations: int
    converged: bool


def rayleigh_mu(norm: AnisotropyNorm, d: float, m: GridFunction,
                u: GridFunction) -> float:
    """Shifted Rayleigh quotient (d*energy(u) - int m u^2) / int u^2."""
    if d <= 0.0:
        raise ValueError(f"diffusion coefficient must be positive, got {d}")
    w = u.grid.weights
    denom = float(np.dot(w, u.values ** 2))
    if denom <= 0.0:
        raise DegenerateInputError("quotient undefined for the zero function")
    num = d * energy(norm, u) - float(np.dot(w, m.values * u.values ** 2))
    return num / denom


_riesz_cache: "weakref.WeakKeyDictionary[Grid, object]" = weakref.WeakKeyDictionary()


def _riesz_solver(grid: Grid):
    """LU factorization of (Euclidean stiffness + lumped mass) on the free
    nodes; shared across solves on the same grid."""
    solver = _riesz_cache.get(grid)
    if solver is None:
        free = ~grid.dirichlet_mask
        k = tangent_stiffness(_euclidean_norm(grid.dim), grid)
        mat = (k + sp.diags(grid.weights)).tocsc()[free][:, free]
        solver = spla.splu(mat)
        _riesz_cache[grid] = solver
    return solver


def _initial_vector(grid: Grid, m_vals: Optional[np.ndarray], mode: str,
                    opts: EigenOptions) -> np.ndarray:
    free = ~grid.dirichlet_mask
    dist = distance_to_dirichlet(grid).values
    if opts.warm_start is not None:
        u = np.array(opts.warm_start, dtype=float)
        if u.shape != (grid.node_count,):
            raise ValueError("warm start has the wrong number of nodes")
        u = np.maximum(u, 0.0)
        u[~free] = 0.0
        if u.max() > 0.0:
            if mode == "mu" or float(np.dot(grid.weights, m_vals * u * u)) > 0.0:
                return u
    if opts.init == "random":
        rng = np.random.default_rng(opts.seed)
        u = dist * (0.2 + np.abs(rng.standard_normal(grid.node_count)))
    elif opts.init == "distance":
        u = dist.copy()
    else:
        raise ValueError(f"unknown init {opts.init!r}")
    u[~free] = 0.0
    if mode == "lambda":
        b = float(np.dot(grid.weights, m_vals * u * u))
        if b <= 0.0:
            # concentrate on the positive part of the weight
            u = dist * (0.05 + (m_vals > 0.0))
            u[~free] = 0.0
            b = float(np.dot(grid.weights, m_vals * u * u))
            if b <= 0.0:
                u = dist * (m_vals > 0.0)
                u[~free] = 0.0
                b = float(np.dot(grid.weights, m_vals * u * u))
                if b <= 0.0:
                    raise InfeasibleWeightError(
                        "no admissible start: the positive part of the weight "
                        "carries no mass away from the Dirichlet boundary")
    return u


def _pg_minimize(norm: AnisotropyNorm, grid: Grid, m_vals: np.ndarray,
                 d: float, mode: str, opts: EigenOptions) -> EigenResult:
    """Projected-gradient minimization of the selected quotient.

    mode "mu": minimize (d*E(u) - B(u)) / D(u) with D(u) = int u^2 and the
    iterate kept on D = 1.  mode "lambda": minimize E(u) / B(u) with
    B(u) = int m u^2 kept on B = 1.  In both cases the gradient of the
    quotient at the normalized iterate coincides with the Euler-Lagrange
    defect, so the KKT residual is free.
    """
    w = grid.weights
    free = ~grid.dirichlet_mask
    wm = w * m_vals
    riesz = _riesz_solver(grid)

    def precondition(g: np.ndarray) -> np.ndarray:
        out = np.zeros_like(g)
        out[free] = riesz.solve(g[free])
        return out

    def normalize(v: np.ndarray) -> Optional[np.ndarray]:
        s = float(np.dot(wm, v * v)) if mode == "lambda" else float(np.dot(w, v * v))
        if s <= 0.0 or not math.isfinite(s):
            return None
        return v / math.sqrt(s)

    def quotient(e: float, v: np.ndarray) -> float:
        if mode == "lambda":
            return e / float(np.dot(wm, v * v))
        return (d * e - float(np.dot(wm, v * v))) / float(np.dot(w, v * v))

    def grad_and_residual(e: float, ge: np.ndarray, v: np.ndarray):
        if mode == "lambda":
            val = e  # B = 1
            g = ge - 2.0 * val * wm * v
        else:
            b = float(np.dot(wm, v * v))
            val = d * e - b  # D = 1
            g = d * ge - 2.0 * wm * v - 2.0 * val * w * v
        g[~free] = 0.0
        kkt = np.where(v > 0.0, g, np.minimum(g, 0.0))
        kkt[~free] = 0.0
        l2 = math.sqrt(float(np.dot(w, v * v)))
        return val, g, float(np.linalg.norm(kkt)) / l2

    u = normalize(_initial_vector(grid, m_vals, mode, opts))
    if u is None:
        raise InfeasibleWeightError("initial iterate is infeasible")
    gf = GridFunction(grid, u)
    e, ge = energy_and_gradient(norm, gf)
    value, g, residual = grad_and_residual(e, ge, u)
    pg = precondition(g)

    hist = [value]
    best_res = residual
    tau = 1.0 / max(float(np.abs(pg).max()), 1e-30)
    prev_u = None
    prev_pg = None
    stalled = 0
    converged = residual <= opts.tol
    it = 0

    while not converged and it < opts.max_iter:
        it += 1
        if prev_u is not None:
            s = u - prev_u
            y = pg - prev_pg
            sy = float(np.dot(s, y))
            if sy > 1e-300:
                tau = float(np.dot(s, s)) / sy
            else:
                tau = min(tau * 10.0, 1e18)
        tau = min(max(tau, 1e-18), 1e18)

        ref = max(hist[-opts.history:])
        accepted = False
        new_u = None
        for bt in range(60):
            trial = u - tau * pg
            trial[~free] = 0.0
            np.maximum(trial, 0.0, out=trial)
            v = normalize(trial)
            if v is None:
                tau *= 0.5
                continue
            if bt == 0:
                ev, gev = energy_and_gradient(norm, GridFunction(grid, v))
            else:
                ev = energy(norm, GridFunction(grid, v))
                gev = None
            qv = quotient(ev, v)
            step_sq = float(np.dot(v - u, v - u))
            if qv <= ref - 1e-4 * step_sq / max(tau, 1e-30) or step_sq == 0.0:
                accepted = True
                new_u, new_e, new_ge = v, ev, gev
                break
            tau *= 0.5
        if not accepted:
            # keep the last trial; the stall counter decides when to give up
            new_u, new_e, new_ge = v, ev, gev

        if new_ge is None:
            new_e, new_ge = energy_and_gradient(norm, GridFunction(grid, new_u))
        prev_u, prev_pg = u, pg
        u = new_u
        new_value, g, residual = grad_and_residual(new_e, new_ge, u)
        pg = precondition(g)
        if abs(new_value - value) <= opts.value_tol * max(1.0, abs(new_value)) \
                and residual > opts.tol:
            stalled += 1
        else:
            stalled = 0
        value = new_value
        hist.append(value)
        best_res = min(best_res, residual)
        if residual <= opts.tol:
            converged = True
            break
        if stalled >= opts.stall_iters:
            break

    return EigenResult(value=value, eigenfunction=GridFunction(grid, u),
                       residual=residual, iterations=it, converged=converged)


def minimize_mu(norm: AnisotropyNorm, d: float, m: GridFunction, grid: Grid,
                opts: Optional[EigenOptions] = None) -> EigenResult:
    """Minimize the shifted quotient over the nonnegative cone.

    Returns the quotient minimum (whose sign separates persistence from
    extinction) and its minimizer normalized to unit lumped L2 norm.  The
    weight may be arbitrary bounded data, including zero.
    """
    if d <= 0.0:
        raise ValueError(f"diffusion coefficient must be positive, got {d}")
    if m.grid is not grid and not m.grid.same_layout(grid):
        raise ValueError("weight lives on a different grid")
    return _pg_minimize(norm, grid, m.values, d, "mu", opts or EigenOptions())


def minimize_lambda(norm: AnisotropyNorm, m: GridFunction, grid: Grid,
                    opts: Optional[EigenOptions] = None) -> EigenResult:
    """Minimize energy(u) / int m u^2 over the cone with int m u^2 = 1.

    The weight needs a positive part carrying lumped mass away from the
    Dirichlet nodes, otherwise the constraint set is empty.
    """
    if m.grid is not grid and not m.grid.same_layout(grid):
        raise ValueError("weight lives on a different grid")
    free = ~grid.dirichlet_mask
    if not np.any((m.values > 0.0) & free):
        raise InfeasibleWeightError(
            "weight has no positive part on the non-Dirichlet nodes")
    return _pg_minimize(norm, grid, m.values, 0.0, "lambda", opts or EigenOptions())


def survival_threshold(norm: AnisotropyNorm, m: GridFunction, grid: Grid,
                       opts: Optional[EigenOptions] = None) -> float:
    """Diffusion threshold 1 / lambda(m) separating persistence (below)
    from extinction (at and above)."""
    res = minimize_lambda(norm, m, grid, opts)
    if not res.converged:
        raise OracleFailureError(
            f"eigenvalue solve did not converge (residual {res.residual:.3e})")
    return 1.0 / res.value


def _shooting_dn(a: float, beta: float, c: float, tol: float) -> float:
    """Smallest eigenvalue for the monotone increasing mode on (0, 1) with
    Dirichlet at 0, Neumann at 1, weight 1 on (c, 1) and -beta on (0, c).

    Increasing modes see the constant coefficient a^2, so the problem is a
    piecewise sinh/cos matching; the interface condition reduces to
    q*tan(q*(1-c)) = p*coth(p*c) with q = sqrt(lam)/a, p = sqrt(lam*beta)/a.
    """
    if c <= 0.0:
        return (a * np.pi / 2.0) ** 2

    def mismatch(lam: float) -> float:
        q = math.sqrt(lam) / a
        p = math.sqrt(lam * beta) / a
        return q * math.tan(q * (1.0 - c)) - p / math.tanh(p * c)

    lam_cap = (a * np.pi / (2.0 * (1.0 - c))) ** 2
    grid = np.linspace(lam_cap * 1e-8, lam_cap * (1.0 - 1e-10), 2000)
    vals = np.array([mismatch(x) for x in grid])
    sign_change = np.nonzero((vals[:-1] < 0.0) & (vals[1:] >= 0.0))[0]
    if sign_change.size == 0:
        raise OracleFailureError(
            f"no root bracket for the interface equation (c={c}, a={a}, beta={beta})")
    lo, hi = grid[sign_change[0]], grid[sign_change[0] + 1]
    flo = mismatch(lo)
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        fmid = mismatch(mid)
        if (flo < 0.0) == (fmid < 0.0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def shooting_eigenvalue_1d(a: float, b: float, beta: float, omega,
                           boundary: str, tol: float = 1e-10) -> float:
    """Independent 1-D eigenvalue oracle for a bang-bang weight on an
    interval touching the Neumann end.

    The weight is 1 on ``omega`` and -beta elsewhere on (0, 1).  "DN"
    (Dirichlet left) requires omega = (c, 1) and uses the increasing mode
    with coefficient a^2; "ND" requires omega = (0, c) and reduces to the
    reflected problem with the roles of a and b swapped.  The transcendental
    interface equation is bisected for its smallest positive root.
    """
    a = float(a)
    b = float(b)
    beta = float(beta)
    if a <= 0.0 or b <= 0.0 or beta <= 0.0:
        raise ValueError("a, b and beta must be positive")
    lo, hi = (float(omega[0]), float(omega[1]))
    if boundary == "DN":
        if not (abs(hi - 1.0) <= 1e-12 and 0.0 <= lo < 1.0):
            raise ValueError(
                f"DN oracle needs omega = (c, 1) adjacent to the Neumann end, got {omega}")
        return _shooting_dn(a, beta, lo, tol)
    if boundary == "ND":
        if not (abs(lo) <= 1e-12 and 0.0 < hi <= 1.0):
            raise ValueError(
                f"ND oracle needs omega = (0, c) adjacent to the Neumann end, got {omega}")
        # reflect x -> 1 - x: decreasing modes become increasing with slope b
        return _shooting_dn(b, beta, 1.0 - hi, tol)
    raise ValueError(f"boundary must be 'DN' or 'ND', got {boundary!r}")


def with_warm_start(opts: Optional[EigenOptions], phi: np.ndarray) -> EigenOptions:
    """Copy of the options seeded with a previous eigenfunction."""
    base = opts or EigenOptions()
    return replace(base, warm_start=np.asarray(phi, dtype=float))
