"""Least-energy search on the Nehari set by projected Sobolev gradient descent.

Each step moves along the eps-Sobolev gradient, re-imposes equivariance,
and projects back onto the Nehari set along rays.  Steps are accepted by an
Armijo test on the projected energy.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .energy import residual_array
from .errors import CftViolated, InvalidParams, Issue, NoConvergence, SaddleDetected
from .model import Grid, SystemParams, SystemState, gaussian_bump
from .nehari import coefficients_from_arrays, maximize_ray
from .operators import norm_sq, pairing, riesz_solver
from .symmetry import SymmetrySpec, preset_symmetry, projector

CONVERGED = "Converged"
MAX_ITERS = "MaxIters"
DEGENERATE = "DegenerateComponent"


@dataclass(frozen=True)
class SolveOptions:
    max_iters: int = 2000
    grad_tol: float = 1e-6
    step0: float = 1.0
    armijo: float = 1e-4
    seed: int = 0
    min_component_norm: float = 1e-6
    proj_tol: float = 1e-12
    linear: str = "auto"
    method: str = "cg"
    step_max: float = 64.0

    def __post_init__(self):
        issues = []
        if self.method not in ("cg", "sd"):
            issues.append(Issue("UnknownMethod", "method must be 'cg' or 'sd'"))
        if not self.grad_tol > 0:
            issues.append(Issue("NonPositiveTolerance", "grad_tol must be positive"))
        if not 0 < self.armijo < 1:
            issues.append(Issue("ArmijoOutOfRange", "armijo must lie in (0, 1)"))
        if not self.step0 > 0:
            issues.append(Issue("NonPositiveStep", "step0 must be positive"))
        if self.max_iters < 0:
            issues.append(Issue("NegativeIterations", "max_iters must be >= 0"))
        if not self.min_component_norm > 0:
            issues.append(Issue("NonPositiveNorm", "min_component_norm must be positive"))
        if issues:
            raise InvalidParams(issues)


@dataclass(frozen=True, eq=False)
class SolveResult:
    """``grad_norm`` is relative: ||grad J||_eps / (1 + |energy|)."""

    state: SystemState
    energy: float
    grad_norm: float
    nehari_resid: np.ndarray
    iters: int
    status: str
    step: float = 1.0
    history: list = field(default_factory=list, repr=False)
    symmetry: SymmetrySpec | None = field(default=None, repr=False)
    options: SolveOptions | None = field(default=None, repr=False)


def trivial_symmetry(d: int, ell: int) -> SymmetrySpec:
    return preset_symmetry("trivial", d, [[] for _ in range(ell)])


def _nonnegative(spec: SymmetrySpec, i: int) -> bool:
    return not spec.is_surjective(i)


def initial_state(
    grid: Grid,
    symmetry: SymmetrySpec | None,
    seeds: Sequence,
    params: SystemParams,
    seed: int = 0,
    noise: float = 0.0,
    proj_tol: float = 1e-12,
) -> SystemState:
    """Sum of Gaussian bumps per component, symmetrised and put on the Nehari set.

    After symmetrisation each component is rescaled to the peak height of its
    raw bump sum, so the requested amplitudes survive the group average.

    ``seeds`` holds (component, center, width, amplitude) tuples.  ``noise``
    adds a seeded uniform perturbation of that amplitude before projecting.
    """
    ell = params.ell
    spec = symmetry or trivial_symmetry(grid.d, ell)
    arrays = [np.zeros(grid.shape) for _ in range(ell)]
    for comp, center, width, amp in seeds:
        arrays[comp] = arrays[comp] + gaussian_bump(grid, center, width, amp).values
    if noise:
        rng = np.random.default_rng(seed)
        for i in range(ell):
            arrays[i] = arrays[i] + noise * rng.uniform(-1.0, 1.0, grid.shape) * grid.mask
    proj = projector(grid, spec)
    for i in range(ell):
        if _nonnegative(spec, i):
            arrays[i] = np.abs(arrays[i])
        top = np.max(np.abs(arrays[i]))
        arrays[i] = proj.project(arrays[i], i)
        # group averaging spreads a bump over its orbit; restore the requested height
        peak = np.max(np.abs(arrays[i]))
        if peak > 0:
            arrays[i] *= top / peak
    coef = coefficients_from_arrays(arrays, grid, params, params.epsilon)
    if not np.all(coef.cft()):
        bad = [i + 1 for i in np.flatnonzero(~coef.cft())]
        raise CftViolated(f"initial layout is degenerate for component(s) {bad}")
    t = maximize_ray(coef, proj_tol).t
    return SystemState.from_arrays(grid, [a * ti for a, ti in zip(arrays, t)])


class _Descent:
    def __init__(self, params: SystemParams, grid: Grid, spec: SymmetrySpec, opts: SolveOptions):
        self.params, self.grid, self.spec, self.opts = params, grid, spec, opts
        self.eps = params.epsilon
        self.proj = projector(grid, spec)
        self.solver = riesz_solver(grid, self.eps, opts.linear)

    def gradients(self, arrays):
        """Residuals, Sobolev gradients and sum_i ||g_i||_eps^2."""
        res, grads, total = [], [], 0.0
        for i in range(self.params.ell):
            r = residual_array(arrays, i, self.grid, self.params, self.eps)
            g = self.solver.solve(r)
            if self.grid.mask_kind != "box":
                g[~self.grid.mask] = 0.0
            res.append(r)
            grads.append(g)
            total += pairing(r, g, self.grid, self.eps)
        return res, grads, max(total, 0.0)

    def dot(self, res, vecs) -> float:
        return sum(pairing(r, v, self.grid, self.eps) for r, v in zip(res, vecs))

    def project(self, arrays):
        """Equivariant cleanup then ray projection; returns (arrays, energy) or None."""
        sym = [self.proj.project(a, i) for i, a in enumerate(arrays)]
        coef = coefficients_from_arrays(sym, self.grid, self.params, self.eps)
        try:
            res = maximize_ray(coef, self.opts.proj_tol)
        except (CftViolated, NoConvergence, SaddleDetected):
            return None
        return [a * ti for a, ti in zip(sym, res.t)], coef.value(res.t)

    def energy(self, arrays):
        coef = coefficients_from_arrays(arrays, self.grid, self.params, self.eps)
        return coef.value(np.ones(self.params.ell)), coef

    def run(self, arrays, tol: float, start_iter: int = 0, eta: float | None = None, log=None) -> SolveResult:
        opts = self.opts
        eta = opts.step0 if eta is None else eta
        eta_max = opts.step0 * (opts.step_max if opts.method == "cg" else 1.0)
        energy, coef = self.energy(arrays)
        history = []
        it = start_iter
        status = MAX_ITERS
        res, grads, gn2 = self.gradients(arrays)
        dirs = [-g for g in grads]
        slope = -gn2
        while True:
            rel = math.sqrt(gn2) / (1.0 + abs(energy))
            row = (it, energy, rel, eta)
            history.append(row)
            if log is not None:
                log(row)
            norms = [norm_sq(a, self.grid, self.eps) for a in arrays]
            if min(norms) < opts.min_component_norm:
                status = DEGENERATE
                break
            if rel <= tol:
                status = CONVERGED
                break
            if it - start_iter >= opts.max_iters:
                break
            accepted = False
            while eta >= 1e-14 * opts.step0:
                trial = self.project([a + eta * dv for a, dv in zip(arrays, dirs)])
                if trial is not None and trial[1] <= energy + opts.armijo * eta * slope:
                    accepted = True
                    break
                eta *= 0.5
            if accepted and opts.method == "cg":
                # one parabolic refinement along the direction; conjugacy needs near-exact steps
                curv = (trial[1] - energy - eta * slope) / (eta * eta)
                if curv > 0:
                    best = min(-slope / (2 * curv), 8 * eta, eta_max)
                    if abs(best - eta) > 0.05 * eta:
                        alt = self.project([a + best * dv for a, dv in zip(arrays, dirs)])
                        if alt is not None and alt[1] < trial[1] and alt[1] <= energy + opts.armijo * best * slope:
                            trial, eta = alt, best
            if not accepted and slope != -gn2:
                # conjugate direction failed: retry along the plain gradient
                dirs, slope, eta = [-g for g in grads], -gn2, opts.step0
                continue
            if not accepted:
                # no step gives a measurable decrease: the tolerance is below the rounding floor
                break
            arrays, energy = trial
            it += 1
            if opts.method != "cg":
                eta = min(2.0 * eta, eta_max)
            old_grads, old_gn2 = grads, gn2
            res, grads, gn2 = self.gradients(arrays)
            beta = 0.0
            if opts.method == "cg" and old_gn2 > 0:
                beta = max(0.0, (gn2 - self.dot(res, old_grads)) / old_gn2)
            dirs = [-g + beta * dv for g, dv in zip(grads, dirs)]
            slope = self.dot(res, dirs)
            if not slope < 0:
                dirs, slope = [-g for g in grads], -gn2
        energy, coef = self.energy(arrays)
        resid = 2 * coef.a - coef.p * coef.b + 2 * np.sum(coef.beta * coef.dmat, axis=1)
        state = SystemState.from_arrays(self.grid, arrays)
        return SolveResult(state, energy, math.sqrt(gn2) / (1.0 + abs(energy)), resid, it, status, eta, history, self.spec, opts)


def minimize(
    params: SystemParams,
    grid: Grid,
    symmetry: SymmetrySpec | None,
    init: SystemState,
    opts: SolveOptions | None = None,
    log=None,
) -> SolveResult:
    """Descend from ``init``; ``log`` is called with (iter, energy, grad_norm, step)."""
    opts = opts or SolveOptions()
    spec = symmetry or trivial_symmetry(grid.d, params.ell)
    if init.grid != grid:
        init = SystemState.from_arrays(grid, init.arrays())
    run = _Descent(params, grid, spec, opts)
    return run.run([np.array(a) for a in init.arrays()], opts.grad_tol, 0, None, log)


def polish(result: SolveResult, params: SystemParams, tight_tol: float, opts: SolveOptions | None = None, log=None) -> SolveResult:
    """Continue a run at a tighter tolerance (0 runs until the budget is spent)."""
    opts = opts or result.options or SolveOptions()
    grid = result.state.grid
    spec = result.symmetry or trivial_symmetry(grid.d, params.ell)
    if result.grad_norm <= tight_tol:
        return replace(result)
    run = _Descent(params, grid, spec, opts)
    out = run.run([np.array(a) for a in result.state.arrays()], tight_tol, result.iters, opts.step0, log)
    return replace(out, history=result.history + out.history[1:])


def write_log(path, history) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "energy", "grad_norm", "step"])
        for it, e, g, s in history:
            w.writerow([it, repr(float(e)), repr(float(g)), repr(float(s))])
