"""Semilinear elliptic and parabolic solvers for the anisotropic problem.

The elliptic equation -d div(flux(grad u)) = f(x, u) is solved by a damped
Picard iteration shifted with the reaction Lipschitz constant: each stage
solves the convex system d*A(u) + L*M*u = M*(f(u_prev) + L*u_prev), which
keeps iterates ordered between a small multiple of the principal
eigenfunction and the constant saturation bound.  The parabolic problem
marches implicit Euler steps; inside each step the reaction is lagged with
the same shift until the stage fixed point is reached.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, List, Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .anisotropy import AnisotropyNorm
from .eigen import EigenOptions, EigenResult, minimize_mu, with_warm_start
from .errors import DegenerateBracketError, SolverError
from .grid import (Grid, GridFunction, energy, energy_and_gradient, flux_form,
                   mass_integral, tangent_stiffness)


@dataclass
class Reaction:
    """Nonlinearity f(x, s) with its structural bounds.

    m : nodal linearization weight, the limit of f(x, s)/s as s -> 0+;
    saturation : bound M with f(x, s) < 0 for all s >= M;
    lipschitz : bound L on |d_s f| over the working range;
    evaluate : vectorized nodal evaluator, values -> f(x_i, values_i).
    """

    kind: str
    m: GridFunction
    saturation: float
    lipschitz: float
    evaluate: Callable[[np.ndarray], np.ndarray]


def logistic_reaction(m: GridFunction, margin: float = 1e-6) -> Reaction:
    """Logistic nonlinearity f(x, s) = m(x) s - s^2 with certified bounds."""
    mv = m.values

    def f(s: np.ndarray) -> np.ndarray:
        return mv * s - s * s

    saturation = max(float(mv.max()), 0.0) + margin
    lipschitz = float(np.abs(mv).max()) + 2.0 * (saturation + 1.0)
    return Reaction("logistic", m, saturation, lipschitz, f)


def custom_reaction(m: GridFunction, saturation: float, lipschitz: float,
                    evaluate) -> Reaction:
    return Reaction("custom", m, float(saturation), float(lipschitz), evaluate)


def validate_reaction(reaction: Reaction, ladder: int = 10) -> dict:
    """Sampled check of the structural hypotheses: f(x, 0) = 0, negativity
    past the saturation bound, strict decrease of f(x, s)/s, and the
    Lipschitz bound on [0, M + 1].  Returns a clause -> bool report."""
    n = reaction.m.grid.node_count
    ms = reaction.saturation
    zero_ok = bool(np.all(reaction.evaluate(np.zeros(n)) == 0.0))
    negative_ok = True
    for s in (ms, ms + 0.5, ms + 1.0, 2.0 * ms + 1.0):
        negative_ok &= bool(np.all(reaction.evaluate(np.full(n, s)) < 0.0))
    svals = np.linspace(0.1, ms, ladder)
    ratios = np.stack([reaction.evaluate(np.full(n, s)) / s for s in svals])
    decreasing_ok = bool(np.all(np.diff(ratios, axis=0) < 0.0))
    lipschitz_ok = True
    probe = np.linspace(0.0, ms + 1.0, 24)
    for s1, s2 in zip(probe[:-1], probe[1:]):
        gap = np.abs(reaction.evaluate(np.full(n, s2))
                     - reaction.evaluate(np.full(n, s1)))
        lipschitz_ok &= bool(np.all(gap <= reaction.lipschitz * (s2 - s1) + 1e-12))
    report = {"zero_at_origin": zero_ok, "negative_past_saturation": negative_ok,
              "ratio_strictly_decreasing": decreasing_ok,
              "lipschitz_bound": lipschitz_ok}
    report["ok"] = all(report.values())
    return report


class Outcome(str, Enum):
    POSITIVE = "converged_to_positive"
    ZERO = "converged_to_zero"
    UNDECIDED = "undecided"


@dataclass
class Trajectory:
    """Recorded time evolution: snapshot fields at requested times, a
    coarser (time, l2, max) trace, the terminal lumped L2 norm and the
    outcome classification against the elliptic steady state."""

    times: List[float]
    snapshots: List[GridFunction]
    trace: List[tuple]
    terminal_norm: float
    outcome: Outcome
    steady_state: Optional[GridFunction] = None


@dataclass
class PdeOptions:
    tol: float = 1e-8              # elliptic residual target
    picard_tol: float = 1e-14      # fixed-point increment (sup norm, relative)
    max_picard: int = 5000
    inner_tol: float = 1e-10       # lagged-stage increment inside a time step
    max_inner: int = 400
    max_halvings: int = 20
    dt: float = 1e-2
    steady_tol: float = 1e-3
    zero_tol: float = 1e-6
    start: str = "sub"             # elliptic start: "sub" or "super"
    trace_every: int = 10
    run_parabolic: bool = True     # sweep only
    horizon_survival: float = 200.0
    horizon_extinction: float = 50.0
    eigen: EigenOptions = field(default_factory=EigenOptions)


class FluxSystemSolver:
    """Solver for c0 * M u + d * A(u) = rhs with zero Dirichlet trace.

    A is the assembled flux form and M the lumped mass.  Linear gauges are
    factorized once; the two-slope and custom gauges use a damped Newton
    iteration on the strictly convex potential.
    """

    def __init__(self, norm: AnisotropyNorm, grid: Grid, d: float, c0: float):
        self.norm = norm
        self.grid = grid
        self.d = float(d)
        self.c0 = float(c0)
        self.free = ~grid.dirichlet_mask
        self.wfree = grid.weights[self.free]
        self._lu = None
        if norm.is_linear_flux:
            self._lu = self._factorize(tangent_stiffness(norm, grid))

    def _factorize(self, stiffness):
        mat = (self.d * stiffness + self.c0 * sp.diags(self.grid.weights)).tocsc()
        return spla.splu(mat[self.free][:, self.free])

    def solve(self, rhs: np.ndarray, u0: Optional[np.ndarray] = None) -> np.ndarray:
        """Solve for the full nodal vector; rhs is an assembled load."""
        out = np.zeros(self.grid.node_count)
        if self._lu is not None:
            out[self.free] = self._lu.solve(rhs[self.free])
            return out
        return self._newton(rhs, u0)

    def _newton(self, rhs, u0):
        grid, free = self.grid, self.free
        u = np.zeros(grid.node_count) if u0 is None else u0.copy()
        u[~free] = 0.0
        scale = float(np.linalg.norm(rhs[free])) + 1e-300

        def potential(v):
            quad = 0.5 * self.c0 * float(np.dot(grid.weights, v * v))
            return 0.5 * self.d * energy(self.norm, GridFunction(grid, v)) \
                + quad - float(np.dot(rhs, v))

        for _ in range(60):
            resid = self.c0 * grid.weights * u \
                + self.d * flux_form(self.norm, GridFunction(grid, u)) - rhs
            resid[~free] = 0.0
            if np.linalg.norm(resid) <= 1e-13 * scale:
                return u
            jac = (self.d * tangent_stiffness(self.norm, grid, GridFunction(grid, u))
                   + self.c0 * sp.diags(grid.weights)).tocsc()
            step = np.zeros(grid.node_count)
            step[free] = spla.spsolve(jac[free][:, free], -resid[free])
            slope = float(np.dot(resid, step))
            ref = potential(u)
            alpha = 1.0
            for _ in range(50):
                cand = u + alpha * step
                if potential(cand) <= ref + 1e-4 * alpha * slope:
                    break
                alpha *= 0.5
            u = u + alpha * step
        raise SolverError("inner Newton solve for the flux system stalled")


def elliptic_residual(norm: AnisotropyNorm, d: float, reaction: Reaction,
                      u: GridFunction) -> float:
    """Algebraic defect norm of the semilinear system on the free nodes."""
    grid = u.grid
    r = d * flux_form(norm, u) - grid.weights * reaction.evaluate(u.values)
    r[grid.dirichlet_mask] = 0.0
    return float(np.linalg.norm(r))


def _subsolution_scale(reaction: Reaction, mu: float, phi: np.ndarray) -> float:
    """Largest eps in [1e-12, 1] with f(x, eps*phi) >= (m + mu) * eps * phi
    nodewise, located by bisection; phi is sup-normalized."""
    mv = reaction.m.values

    def feasible(eps: float) -> bool:
        v = eps * phi
        slack = 1e-14 * eps * (abs(mu) + 1.0)
        return bool(np.all(reaction.evaluate(v) >= (mv + mu) * v - slack))

    if feasible(1.0):
        return 1.0
    lo = 1e-12
    if not feasible(lo):
        raise DegenerateBracketError(
            "no sub-solution scale in [1e-12, 1]; the bracket is degenerate")
    hi = 1.0
    for _ in range(60):
        mid = math.sqrt(lo * hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo


def elliptic_solve(norm: AnisotropyNorm, d: float, reaction: Reaction,
                   grid: Grid, opts: Optional[PdeOptions] = None,
                   _mu_result: Optional[EigenResult] = None) -> GridFunction:
    """Nonnegative steady state of the semilinear problem.

    When the shifted principal value is negative the unique positive
    solution is computed by the shifted Picard iteration, started from the
    sub-solution eps*phi (or from the constant super-solution with
    ``opts.start = "super"``); otherwise the zero function is returned.
    """
    opts = opts or PdeOptions()
    if d <= 0.0:
        raise ValueError(f"diffusion coefficient must be positive, got {d}")
    mu_res = _mu_result if _mu_result is not None else minimize_mu(
        norm, d, reaction.m, grid, opts.eigen)
    if mu_res.value >= 0.0:
        return GridFunction.zeros(grid)

    phi = mu_res.eigenfunction.values
    phi = phi / phi.max()
    big = reaction.saturation + 1.0
    if opts.start == "sub":
        try:
            scale = _subsolution_scale(reaction, mu_res.value, phi)
        except DegenerateBracketError:
            # the positive branch only supports states below the smallest
            # admissible sub-solution: zero at working precision
            if -mu_res.value <= 1e-10:
                return GridFunction.zeros(grid)
            raise
        u = scale * phi
    elif opts.start == "super":
        u = np.full(grid.node_count, big)
    else:
        raise ValueError(f"unknown start {opts.start!r}")

    lip = reaction.lipschitz
    solver = FluxSystemSolver(norm, grid, d, c0=lip)
    w = grid.weights
    for _ in range(opts.max_picard):
        rhs = w * (reaction.evaluate(u) + lip * u)
        new = solver.solve(rhs, u0=u)
        delta = float(np.abs(new - u).max())
        u = new
        if delta <= opts.picard_tol * (1.0 + float(np.abs(u).max())):
            break
    result = GridFunction(grid, u)
    resid = elliptic_residual(norm, d, reaction, result)
    if resid > opts.tol:
        raise SolverError(
            f"stationary iteration left residual {resid:.3e} above {opts.tol:.1e}")
    return result


def parabolic_step(norm: AnisotropyNorm, d: float, reaction: Reaction,
                   v: GridFunction, dt: float,
                   opts: Optional[PdeOptions] = None,
                   _solvers: Optional[dict] = None) -> GridFunction:
    """One implicit Euler step of length dt.

    The stage system (w - v)/dt - d div flux(grad w) + sigma w =
    f(x, w~) + sigma w~ is iterated on the lagged value w~ with sigma equal
    to the reaction Lipschitz constant until the stage increment drops
    below ``inner_tol``.  A stalled stage is retried on two half steps,
    recursively, up to ``max_halvings``.
    """
    opts = opts or PdeOptions()
    if dt <= 0.0:
        raise ValueError(f"time step must be positive, got {dt}")
    solvers = _solvers if _solvers is not None else {}
    vals = _advance(norm, d, reaction, v.values, dt, opts, solvers, 0)
    return GridFunction(v.grid, vals)


def _advance(norm, d, reaction, v, dt, opts, solvers, depth):
    grid = reaction.m.grid
    sigma = reaction.lipschitz
    solver = solvers.get(dt)
    if solver is None:
        solver = FluxSystemSolver(norm, grid, d, c0=1.0 / dt + sigma)
        solvers[dt] = solver
    w = grid.weights
    lagged = v.copy()
    for _ in range(opts.max_inner):
        rhs = w * (reaction.evaluate(lagged) + sigma * lagged + v / dt)
        new = solver.solve(rhs, u0=lagged)
        if float(np.abs(new - lagged).max()) <= opts.inner_tol * (1.0 + float(np.abs(new).max())):
            return new
        lagged = new
    if depth >= opts.max_halvings:
        raise SolverError(
            f"time step rejected after {opts.max_halvings} halvings (dt={dt:.3e})")
    half = _advance(norm, d, reaction, v, dt / 2.0, opts, solvers, depth + 1)
    return _advance(norm, d, reaction, half, dt / 2.0, opts, solvers, depth + 1)


def parabolic_solve(norm: AnisotropyNorm, d: float, reaction: Reaction,
                    v0: GridFunction, horizon: float,
                    opts: Optional[PdeOptions] = None,
                    snapshot_times: Optional[Sequence[float]] = None) -> Trajectory:
    """March the parabolic problem to the given horizon with fixed dt.

    Snapshots are recorded at the step boundaries nearest to the requested
    times; the outcome compares the terminal state against the elliptic
    steady state at the same diffusion coefficient.
    """
    opts = opts or PdeOptions()
    grid = v0.grid
    if np.any(v0.values < 0.0):
        raise ValueError("initial datum must be nonnegative")
    if np.any(np.abs(v0.values[grid.dirichlet_mask]) > 0.0):
        raise ValueError("initial datum must vanish on the Dirichlet nodes")
    dt = opts.dt
    nsteps = max(1, int(round(horizon / dt)))
    wanted = sorted(set(snapshot_times or [0.0, horizon]))
    snap_steps = {min(nsteps, max(0, int(round(t / dt)))) for t in wanted}

    solvers: dict = {}
    v = v0.values.copy()
    times: List[float] = []
    snapshots: List[GridFunction] = []
    trace: List[tuple] = []

    def record(step: int, vec: np.ndarray):
        t = step * dt
        if step in snap_steps:
            times.append(t)
            snapshots.append(GridFunction(grid, vec.copy()))
        if step % opts.trace_every == 0 or step == nsteps:
            l2 = float(np.sqrt(np.dot(grid.weights, vec ** 2)))
            trace.append((t, l2, float(vec.max())))

    record(0, v)
    for step in range(1, nsteps + 1):
        v = _advance(norm, d, reaction, v, dt, opts, solvers, 0)
        record(step, v)

    mu_res = minimize_mu(norm, d, reaction.m, grid, opts.eigen)
    steady = elliptic_solve(norm, d, reaction, grid, opts, _mu_result=mu_res)
    terminal = float(np.sqrt(np.dot(grid.weights, v ** 2)))
    steady_norm = steady.l2_norm()
    gap = float(np.sqrt(np.dot(grid.weights, (v - steady.values) ** 2)))
    if steady_norm > 0.0 and gap <= opts.steady_tol * steady_norm:
        outcome = Outcome.POSITIVE
    elif terminal <= opts.zero_tol:
        outcome = Outcome.ZERO
    else:
        outcome = Outcome.UNDECIDED
    return Trajectory(times=times, snapshots=snapshots, trace=trace,
                      terminal_norm=terminal, outcome=outcome,
                      steady_state=steady)


def dissipation_energy(norm: AnisotropyNorm, d: float, reaction: Reaction,
                       v: GridFunction) -> float:
    """Lyapunov functional of the logistic flow, nonincreasing along the
    implicit time discretization: (d/2) energy(v) - sum w (m v^2/2 - v^3/3)."""
    if reaction.kind != "logistic":
        raise ValueError("dissipation energy is defined for the logistic reaction")
    w = v.grid.weights
    mv = reaction.m.values
    bulk = float(np.dot(w, mv * v.values ** 2 / 2.0 - v.values ** 3 / 3.0))
    return 0.5 * d * energy(norm, v) - bulk


@dataclass
class SweepRow:
    d: float
    mu: float
    u_max: float
    outcome: str


@dataclass
class SweepResult:
    rows: List[SweepRow]
    threshold_bracket: Optional[tuple]
    sign_changes: int


def sweep_diffusion(norm: AnisotropyNorm, reaction: Reaction, grid: Grid,
                    d_values: Sequence[float],
                    opts: Optional[PdeOptions] = None) -> SweepResult:
    """Tabulate the persistence/extinction dichotomy over a diffusion ladder.

    For each d the shifted principal value, the sup of the steady state and
    (optionally) the parabolic outcome are recorded; the bracket where the
    principal value changes sign is the empirical survival threshold.
    """
    opts = opts or PdeOptions()
    ds = [float(x) for x in d_values]
    if any(x <= 0.0 for x in ds) or sorted(ds) != ds:
        raise ValueError("d_values must be positive and sorted ascending")
    rows: List[SweepRow] = []
    warm = opts.eigen
    for d in ds:
        mu_res = minimize_mu(norm, d, reaction.m, grid, warm)
        warm = with_warm_start(opts.eigen, mu_res.eigenfunction.values)
        steady = elliptic_solve(norm, d, reaction, grid, opts, _mu_result=mu_res)
        if opts.run_parabolic:
            horizon = (opts.horizon_extinction if mu_res.value >= 0.0
                       else opts.horizon_survival)
            scale = 0.5 if steady.values.max() == 0.0 else 0.5 * steady.values.max()
            from .grid import distance_to_dirichlet
            v0 = distance_to_dirichlet(grid)
            v0 = GridFunction(grid, scale * v0.values / max(v0.values.max(), 1e-30))
            traj = parabolic_solve(norm, d, reaction, v0, horizon, opts)
            outcome = traj.outcome.value
        else:
            outcome = Outcome.UNDECIDED.value
        rows.append(SweepRow(d=d, mu=mu_res.value,
                             u_max=float(steady.values.max()), outcome=outcome))
    signs = [r.mu >= 0.0 for r in rows]
    changes = [i for i in range(len(rows) - 1) if signs[i] != signs[i + 1]]
    bracket = (rows[changes[0]].d, rows[changes[0] + 1].d) if changes else None
    return SweepResult(rows=rows, threshold_bracket=bracket,
                       sign_changes=len(changes))
