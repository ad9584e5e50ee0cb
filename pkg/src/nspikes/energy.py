"""The discrete energy of the coupled system, its exact partial gradients,
Nehari residuals and Sobolev gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch
from .model import Field, SystemParams, SystemState
from .operators import dirichlet, helmholtz, helmholtz_solve, mixed_sum, norm_sq, pairing, power_sum


@dataclass(frozen=True, eq=False)
class EnergyBreakdown:
    """total = sum(quadratic) - sum(self_) - sum(coupling); coupling is signed (<= 0)."""

    total: float
    quadratic: np.ndarray
    self_: np.ndarray
    coupling: np.ndarray


def _check_state(state: SystemState, params: SystemParams):
    if state.ell != params.ell:
        raise GridMismatch(f"state has {state.ell} components, parameters expect {params.ell}")


def signed_power(u: np.ndarray, q: float) -> np.ndarray:
    """|u|^(q-2) u, continuous at 0 for q > 1."""
    if q == 2:
        return u.copy()
    if q == 4:
        return u * u * u
    return np.sign(u) * np.abs(u) ** (q - 1)


def integrals(arrays, grid, params: SystemParams, eps: float):
    """The ray coefficients (a, b, dmat) of a state.

    a_i = ||u_i||_eps^2 / 2, b_i = eps^-d mu_i int |u_i|^p / p and
    dmat_ij = eps^-d |lambda_ij| int |u_j|^alpha_ij |u_i|^beta_ij / 2, so that
    J(t u) = sum a t^2 - sum b t^p + sum_{i != j} dmat_ij t_j^alpha_ij t_i^beta_ij.
    """
    ell = params.ell
    w = (grid.h / eps) ** grid.d
    a = np.array([0.5 * norm_sq(u, grid, eps) for u in arrays])
    b = np.array([w * params.mu[i] * power_sum(arrays[i], params.p) / params.p for i in range(ell)])
    dmat = np.zeros((ell, ell))
    for i in range(ell):
        for j in range(i + 1, ell):
            # int |u_j|^alpha_ij |u_i|^beta_ij is the same integral as its (j, i) mirror
            m = mixed_sum(arrays[i], arrays[j], params.alpha[i, j], params.beta[i, j])
            dmat[i, j] = 0.5 * w * abs(params.lam[i, j]) * m
            dmat[j, i] = 0.5 * w * abs(params.lam[j, i]) * m
    return a, b, dmat


def energy(state: SystemState, params: SystemParams, eps: float) -> EnergyBreakdown:
    _check_state(state, params)
    a, b, dmat = integrals(state.arrays(), state.grid, params, eps)
    coupling = -dmat
    total = float(a.sum() - b.sum() + dmat.sum())
    return EnergyBreakdown(total, a, b, coupling)


def residual_array(arrays, i, grid, params: SystemParams, eps: float) -> np.ndarray:
    """Nodewise r_i with d_i J(u) v = eps^-d h^d sum r_i v."""
    u = arrays[i]
    r = helmholtz(u, grid, eps) - params.mu[i] * signed_power(u, params.p)
    for j in range(params.ell):
        if j == i:
            continue
        coef = params.lam[i, j] * params.beta[i, j]
        r -= coef * np.abs(arrays[j]) ** params.alpha[i, j] * signed_power(u, params.beta[i, j])
    if grid.mask_kind != "box":
        r[~grid.mask] = 0.0
    return r


def euler_lagrange_residual(state: SystemState, params: SystemParams, eps: float, i: int) -> Field:
    _check_state(state, params)
    return Field(state.grid, residual_array(state.arrays(), i, state.grid, params, eps))


def sobolev_gradient(state: SystemState, params: SystemParams, eps: float, i: int, tol: float = 1e-10) -> Field:
    """Riesz representative of d_i J in the eps-inner product (CG solve)."""
    return helmholtz_solve(euler_lagrange_residual(state, params, eps, i), eps, tol)


def nehari_from_integrals(a, b, dmat, params: SystemParams) -> np.ndarray:
    """d_i J(u) u_i = 2 a_i - p b_i + 2 sum_j beta_ij dmat_ij."""
    return 2 * a - params.p * b + 2 * np.sum(params.beta * dmat, axis=1)


def nehari_residuals(state: SystemState, params: SystemParams, eps: float) -> np.ndarray:
    _check_state(state, params)
    a, b, dmat = integrals(state.arrays(), state.grid, params, eps)
    return nehari_from_integrals(a, b, dmat, params)


def directional_derivative(state: SystemState, params: SystemParams, eps: float, i: int, v: Field) -> float:
    """d_i J(u) v through the residual pairing."""
    r = residual_array(state.arrays(), i, state.grid, params, eps)
    return pairing(r, v.values, state.grid, eps)


__all__ = [
    "EnergyBreakdown",
    "energy",
    "euler_lagrange_residual",
    "sobolev_gradient",
    "nehari_residuals",
    "integrals",
    "residual_array",
    "signed_power",
    "directional_derivative",
    "dirichlet",
]
