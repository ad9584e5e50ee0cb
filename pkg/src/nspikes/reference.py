"""Single-equation reference levels: closed-form 1-D soliton, a radial
finite-volume ground state, and equivariant ground states on the full grid."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solveh_banded

from .errors import NoConvergence
from .model import Field, Grid, validate_params, write_field
from .minimizer import CONVERGED, SolveOptions, initial_state, minimize
from .symmetry import SymmetrySpec, check_A1


def soliton_1d(p: float, mu: float, x):
    """Positive even solution of -u'' + u = mu |u|^(p-2) u on the line."""
    if not p > 2 or not mu > 0:
        raise ValueError("need p > 2 and mu > 0")
    q = p - 2.0
    amp = mu ** (-1.0 / q) * (p / 2.0) ** (1.0 / q)
    return amp / np.cosh(q * np.asarray(x, dtype=float) / 2.0) ** (2.0 / q)


def sphere_area(N: int) -> float:
    """Surface measure of the unit sphere in R^N (2 for N = 1)."""
    return 2.0 * math.pi ** (N / 2.0) / math.gamma(N / 2.0)


@dataclass(frozen=True, eq=False)
class RadialProfile:
    N: int
    spacing: float
    values: np.ndarray  # at r_k = k h, k = 0..M; the last entry is the Dirichlet zero
    energy: float
    iters: int = 0

    @property
    def radii(self):
        return self.spacing * np.arange(self.values.size)

    @property
    def R_max(self):
        return self.spacing * (self.values.size - 1)

    def __call__(self, r):
        """Linear interpolation, zero beyond R_max."""
        return np.interp(np.abs(np.asarray(r, dtype=float)), self.radii, self.values, right=0.0)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["r", "u"])
            for r, u in zip(self.radii, self.values):
                w.writerow([repr(float(r)), repr(float(u))])

    def write_nsf1(self, path) -> None:
        """Even extension to a 1-D field on [-R_max, R_max]."""
        m = self.values.size - 1
        grid = Grid(1, self.R_max, self.spacing)
        vals = np.concatenate([self.values[m - 1 : 0 : -1], self.values[:m]])
        write_field(path, Field(grid, vals))


class _RadialOperator:
    """Finite-volume stiffness + mass on the nodes r_k = k h, k < M."""

    def __init__(self, N: int, M: int, h: float):
        w = sphere_area(N)
        r = h * np.arange(M)
        self.vol = w * ((r + h / 2) ** N - np.maximum(r - h / 2, 0.0) ** N) / N
        self.vol[0] = w * (h / 2) ** N / N
        surf = w * (r + h / 2) ** (N - 1) / h  # face k+1/2, divided by h
        diag = self.vol.copy()
        diag += surf
        diag[1:] += surf[:-1]
        self.diag, self.off = diag, -surf[:-1]
        self.banded = np.zeros((2, M))
        self.banded[0, 1:] = self.off
        self.banded[1] = diag

    def apply(self, u):
        out = self.diag * u
        out[:-1] += self.off * u[1:]
        out[1:] += self.off * u[:-1]
        return out

    def solve(self, f):
        return solveh_banded(self.banded, f)


def radial_ground_state(
    N: int, p: float, mu: float, R_max: float, h: float, tol: float = 1e-10, max_iters: int = 5000
) -> RadialProfile:
    """Least-energy radial solution of -Lap u + u = mu |u|^(p-2) u on the ball of radius R_max."""
    validate_params({"ell": 1, "p": p, "mu": [mu], "lambda": [[0.0]], "alpha": [[p / 2]], "epsilon": 1.0}, dim=N)
    M = int(round(R_max / h))
    if M < 4:
        raise ValueError("R_max / h is too small")
    op = _RadialOperator(N, M, h)
    r = h * np.arange(M)

    def quad(u):
        return float(u @ op.apply(u))

    def nonlin(u):
        return float(mu * np.sum(op.vol * np.abs(u) ** p))

    def onto(u):
        q, s = quad(u), nonlin(u)
        return u * (q / s) ** (1.0 / (p - 2.0))

    u = onto(np.exp(-r * r / 2.0))
    energy = (p - 2) / (2 * p) * quad(u)
    step = 1.0
    flat = 0
    for it in range(max_iters):
        grad = op.apply(u) - mu * op.vol * np.abs(u) ** (p - 2) * u
        g = op.solve(grad)
        gn2 = float(grad @ g)
        if math.sqrt(max(gn2, 0.0)) <= tol * (1 + abs(energy)):
            vals = np.append(u, 0.0)
            return RadialProfile(N, h, vals, energy, it)
        while True:
            trial = onto(u - step * g)
            e = (p - 2) / (2 * p) * quad(trial)
            if e <= energy - 1e-4 * step * gn2:
                break
            step *= 0.5
            if step < 1e-14:
                # rounding floor reached
                return RadialProfile(N, h, np.append(u, 0.0), energy, it)
        # count steps whose decrease is lost in rounding
        flat = flat + 1 if energy - e <= 1e-15 * abs(energy) else 0
        u, energy = trial, e
        if flat >= 20:
            return RadialProfile(N, h, np.append(u, 0.0), energy, it)
        step = min(2 * step, 1.0)
    raise NoConvergence(f"radial solver did not converge in {max_iters} iterations")


def _default_seed(grid: Grid, spec: SymmetrySpec, eps: float):
    """Bump centred at the origin, or off the fixed set when phi is onto."""
    holds, witness = check_A1(spec, 0, grid)
    if not holds:
        raise NoConvergence("no point with a free orbit: every equivariant field vanishes")
    if witness is None:
        return (0, np.zeros(grid.d), eps, 1.0)
    dist = min(4.0 * eps, grid.L / 3.0)
    return (0, witness / np.linalg.norm(witness) * dist, eps, 1.0)


def equivariant_single_ground_state(
    grid: Grid,
    symmetry: SymmetrySpec,
    i: int,
    p: float,
    mu: float,
    eps: float = 1.0,
    seeds=None,
    opts: SolveOptions | None = None,
):
    """Least-energy phi_i-equivariant solution of the single equation; returns (Field, level)."""
    spec = symmetry.component(i)
    params = validate_params({"ell": 1, "p": p, "mu": [mu], "lambda": [[0.0]], "alpha": [[p / 2]], "epsilon": eps}, dim=grid.d)
    seeds = seeds or [_default_seed(grid, spec, eps)]
    init = initial_state(grid, spec, seeds, params)
    res = minimize(params, grid, spec, init, opts or SolveOptions(grad_tol=1e-7))
    if res.status != CONVERGED:
        raise NoConvergence(f"equivariant reference ended with status {res.status}")
    return res.state[0], res.energy
