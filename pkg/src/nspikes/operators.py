"""Discrete Laplacian, quadratures, eps-norms and the Helmholtz (Riesz) solve.

The discrete energy is built from an edge sum for the gradient term and a
rectangle rule for the potentials; ``laplacian`` is exactly the first
variation of ``dirichlet``, so derivative checks hold to rounding.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
import scipy.fft
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import GridMismatch, NoConvergence
from .model import Field, Grid

# ---------------------------------------------------------------------------
# array kernels (values on grid.shape, zero outside the mask)


def power_sum(values: np.ndarray, q: float) -> float:
    if q == 2:
        return float(np.vdot(values, values))
    return float(np.sum(np.abs(values) ** q))


def mixed_sum(u: np.ndarray, v: np.ndarray, a: float, b: float) -> float:
    """sum |v|^a |u|^b"""
    return float(np.sum(np.abs(v) ** a * np.abs(u) ** b))


def dirichlet(values: np.ndarray, h: float) -> float:
    """Sum over grid edges of (u_a - u_b)^2 h^(d-2), Dirichlet ghosts included."""
    padded = np.pad(values, 1)
    total = 0.0
    for ax in range(values.ndim):
        diff = np.diff(padded, axis=ax)
        # drop the padding layers of the other axes
        sl = tuple(slice(None) if k == ax else slice(1, -1) for k in range(values.ndim))
        diff = diff[sl]
        total += float(np.vdot(diff, diff))
    return total * h ** (values.ndim - 2)


def laplacian(values: np.ndarray, h: float, mask: np.ndarray | None = None) -> np.ndarray:
    """(2d+1)-point Laplacian with zero neighbours outside the mask."""
    d = values.ndim
    out = -2.0 * d * values
    for ax in range(d):
        lo = [slice(None)] * d
        hi = [slice(None)] * d
        lo[ax] = slice(0, -1)
        hi[ax] = slice(1, None)
        out[tuple(lo)] += values[tuple(hi)]
        out[tuple(hi)] += values[tuple(lo)]
    out /= h * h
    if mask is not None:
        out[~mask] = 0.0
    return out


def helmholtz(values: np.ndarray, grid: Grid, eps: float) -> np.ndarray:
    """(-eps^2 Lap_h + I) u"""
    mask = None if grid.mask_kind == "box" else grid.mask
    out = values - eps * eps * laplacian(values, grid.h, mask)
    return out


def norm_sq(values: np.ndarray, grid: Grid, eps: float) -> float:
    """||u||_eps^2 = eps^-d (eps^2 D(u) + int u^2)"""
    return (eps * eps * dirichlet(values, grid.h) + grid.cell_volume * power_sum(values, 2)) / eps**grid.d


def pairing(r: np.ndarray, v: np.ndarray, grid: Grid, eps: float) -> float:
    """eps^-d h^d sum r v: the action of a nodewise residual on a direction."""
    return (grid.h / eps) ** grid.d * float(np.vdot(r, v))


# ---------------------------------------------------------------------------
# public Field-level operations


def _check(u: Field, v: Field):
    if u.grid != v.grid:
        raise GridMismatch(f"fields live on different grids: {u.grid} vs {v.grid}")


def integrate_power(u: Field, q: float) -> float:
    """h^d sum |u|^q"""
    return u.grid.cell_volume * power_sum(u.values, q)


def mixed_integral(u: Field, v: Field, a: float, b: float) -> float:
    """h^d sum |v|^a |u|^b"""
    _check(u, v)
    return u.grid.cell_volume * mixed_sum(u.values, v.values, a, b)


def dirichlet_energy(u: Field) -> float:
    return dirichlet(u.values, u.grid.h)


def laplacian_apply(u: Field) -> Field:
    g = u.grid
    return Field(g, laplacian(u.values, g.h, None if g.mask_kind == "box" else g.mask))


def eps_norm_sq(u: Field, eps: float) -> float:
    return norm_sq(u.values, u.grid, eps)


def helmholtz_apply(u: Field, eps: float) -> Field:
    return Field(u.grid, helmholtz(u.values, u.grid, eps))


def cg_solve(f: np.ndarray, grid: Grid, eps: float, tol: float, max_iter: int | None = None) -> np.ndarray:
    """Plain conjugate gradients for (-eps^2 Lap_h + I) u = f.

    Stops once ||A u - f||_2 <= tol ||f||_2 (checked on the true residual).
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    fnorm = math.sqrt(power_sum(f, 2))
    if fnorm == 0.0:
        return np.zeros_like(f)
    if max_iter is None:
        max_iter = 10 * grid.size + 100
    x = np.zeros_like(f)
    r = f.copy()
    p = r.copy()
    rr = float(np.vdot(r, r))
    target = (tol * fnorm) ** 2
    for k in range(max_iter):
        if rr <= target:
            true_r = f - helmholtz(x, grid, eps)
            rr = float(np.vdot(true_r, true_r))
            if rr <= target:
                return x
            r = true_r
            p = r.copy()
        ap = helmholtz(p, grid, eps)
        step = rr / float(np.vdot(p, ap))
        x += step * p
        r -= step * ap
        rr_new = float(np.vdot(r, r))
        p *= rr_new / rr
        p += r
        rr = rr_new
    raise NoConvergence(f"CG did not reach tol {tol:g} in {max_iter} iterations")


def helmholtz_solve(f: Field, eps: float, tol: float = 1e-10, max_iter: int | None = None) -> Field:
    """Solve (-eps^2 Lap_h + I) u = f by conjugate gradients."""
    return Field(f.grid, cg_solve(f.values, f.grid, eps, tol, max_iter))


# ---------------------------------------------------------------------------
# direct Riesz solvers used inside the descent loop


class RieszSolver:
    """Factorised inverse of (-eps^2 Lap_h + I) for one (grid, eps).

    Box masks diagonalise in the type-I sine basis; disk masks use a sparse
    LU factorisation restricted to the mask nodes.  ``method='cg'`` falls
    back to :func:`cg_solve`.
    """

    def __init__(self, grid: Grid, eps: float, method: str = "auto", cg_tol: float = 1e-12):
        if method == "auto":
            method = "dst" if grid.mask_kind == "box" else "lu"
        if method == "dst" and grid.mask_kind != "box":
            raise ValueError("the sine-transform solver needs a box mask")
        self.grid, self.eps, self.method, self.cg_tol = grid, eps, method, cg_tol
        if method == "dst":
            self._inv = _dst_symbol(grid.n, grid.d, grid.h, eps)
        elif method == "lu":
            self._lu, self._idx = _lu_factor(grid, eps)
        elif method != "cg":
            raise ValueError(f"unknown linear solver {method!r}")

    def solve(self, f: np.ndarray) -> np.ndarray:
        if self.method == "dst":
            return scipy.fft.idstn(scipy.fft.dstn(f, type=1) * self._inv, type=1)
        if self.method == "lu":
            out = np.zeros(self.grid.shape)
            out[self._idx] = self._lu.solve(f[self._idx])
            return out
        return cg_solve(f, self.grid, self.eps, self.cg_tol)


def _dst_symbol(n, d, h, eps):
    k = np.arange(1, n + 1)
    lam1 = (4.0 / h**2) * np.sin(np.pi * k / (2 * (n + 1))) ** 2
    total = sum(np.ix_(*([lam1] * d)))
    return 1.0 / (1.0 + eps * eps * total)


def helmholtz_matrix(grid: Grid, eps: float):
    """Sparse matrix of (-eps^2 Lap_h + I) on the mask nodes, plus their indices."""
    mask = grid.mask
    idx = np.nonzero(mask)
    number = -np.ones(grid.shape, dtype=np.int64)
    number[idx] = np.arange(idx[0].size)
    m = idx[0].size
    c = eps * eps / grid.h**2
    rows = [np.arange(m)]
    cols = [np.arange(m)]
    vals = [np.full(m, 1.0 + 2 * grid.d * c)]
    for ax in range(grid.d):
        for shift in (-1, 1):
            nb = [a.copy() for a in idx]
            nb[ax] = nb[ax] + shift
            ok = (nb[ax] >= 0) & (nb[ax] < grid.n)
            src = np.arange(m)[ok]
            nbnum = number[tuple(a[ok] for a in nb)]
            inside = nbnum >= 0
            rows.append(src[inside])
            cols.append(nbnum[inside])
            vals.append(np.full(int(inside.sum()), -c))
    mat = sp.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m, m)
    )
    return mat, idx


@lru_cache(maxsize=8)
def _lu_factor(grid: Grid, eps: float):
    mat, idx = helmholtz_matrix(grid, eps)
    return spla.splu(mat), idx


@lru_cache(maxsize=16)
def riesz_solver(grid: Grid, eps: float, method: str = "auto") -> RieszSolver:
    return RieszSolver(grid, eps, method)
