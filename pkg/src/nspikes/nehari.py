"""Projection of a state onto the Nehari-type set along componentwise rays.

For a fixed state u the map t -> J(t u) on (0, inf)^ell is a polynomial in
the t_i; its unique critical point t_u gives the Nehari point t_u u.  We
maximise it with Newton's method in s = log t.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energy import integrals
from .errors import CftViolated, NoConvergence, SaddleDetected
from .model import SystemParams, SystemState

CFT_MARGIN = 1e-14


@dataclass(frozen=True, eq=False)
class RayCoefficients:
    a: np.ndarray
    b: np.ndarray
    dmat: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    p: float

    @property
    def ell(self):
        return self.a.size

    def _pair_terms(self, t):
        """W_ij = dmat_ij t_j^alpha_ij t_i^beta_ij (zero on the diagonal)."""
        w = np.zeros((self.ell, self.ell))
        for i in range(self.ell):
            for j in range(self.ell):
                if i != j and self.dmat[i, j] != 0.0:
                    w[i, j] = self.dmat[i, j] * t[j] ** self.alpha[i, j] * t[i] ** self.beta[i, j]
        return w

    def value(self, t) -> float:
        t = np.asarray(t, dtype=float)
        return float(np.sum(self.a * t**2) - np.sum(self.b * t**self.p) + self._pair_terms(t).sum())

    def grad_s(self, t) -> np.ndarray:
        """t_i dJ/dt_i, i.e. the gradient in log coordinates."""
        t = np.asarray(t, dtype=float)
        w = self._pair_terms(t)
        return 2 * self.a * t**2 - self.p * self.b * t**self.p + np.sum(self.beta * w, axis=1) + np.sum(self.alpha * w, axis=0)

    def grad_t(self, t) -> np.ndarray:
        return self.grad_s(t) / np.asarray(t, dtype=float)

    def hess_s(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        w = self._pair_terms(t)
        h = np.diag(4 * self.a * t**2 - self.p**2 * self.b * t**self.p)
        for k in range(self.ell):
            for j in range(self.ell):
                if k == j or w[k, j] == 0.0:
                    continue
                e = np.zeros(self.ell)
                e[k] += self.beta[k, j]
                e[j] += self.alpha[k, j]
                h += w[k, j] * np.outer(e, e)
        return h

    def cft_lhs(self) -> np.ndarray:
        """eps^-d int mu_i |u_i|^p + sum_j eps^-d int lambda_ij beta_ij |u_j|^alpha |u_i|^beta."""
        return self.p * self.b - 2 * np.sum(self.beta * self.dmat, axis=1)

    def cft(self) -> np.ndarray:
        scale = self.p * self.b + 2 * np.sum(self.beta * self.dmat, axis=1)
        return (self.b > 0) & (self.cft_lhs() > CFT_MARGIN * scale)


def ray_coefficients(state: SystemState, params: SystemParams, eps: float) -> RayCoefficients:
    return coefficients_from_arrays(state.arrays(), state.grid, params, eps)


def coefficients_from_arrays(arrays, grid, params: SystemParams, eps: float) -> RayCoefficients:
    a, b, dmat = integrals(arrays, grid, params, eps)
    return RayCoefficients(a, b, dmat, np.asarray(params.alpha), np.asarray(params.beta), params.p)


def cft_holds(state: SystemState, params: SystemParams, eps: float) -> np.ndarray:
    return ray_coefficients(state, params, eps).cft()


@dataclass(frozen=True, eq=False)
class RayMax:
    t: np.ndarray
    stationarity: float
    hessian_negdef: bool
    iters: int


def _negdef(h) -> bool:
    try:
        np.linalg.cholesky(-h)
        return True
    except np.linalg.LinAlgError:
        return False


def ascend(coef: RayCoefficients, t0=None, tol: float = 1e-12, max_iter: int = 200) -> RayMax:
    """Damped Newton ascent of J(e^s) from t0 (default all ones).

    Converged once ||grad_t J|| <= tol ||a * t||; the scale is ||a|| at t = 1
    and follows the size of the gradient terms when t is far from 1.
    """
    ell = coef.ell
    s = np.zeros(ell) if t0 is None else np.log(np.asarray(t0, dtype=float))
    f = coef.value(np.exp(s))
    for it in range(max_iter):
        t = np.exp(s)
        scale = float(np.linalg.norm(coef.a * t))
        g = coef.grad_s(t)
        stat = float(np.linalg.norm(g / t))
        if stat <= tol * scale:
            return RayMax(t, stat, _negdef(coef.hess_s(t)), it)
        h = coef.hess_s(t)
        newton = _negdef(h)
        if newton:
            step = np.linalg.solve(-h, g)
        else:
            step = g / np.maximum(np.abs(np.diag(h)), 1e-300)
        # keep a single step from moving t by more than a factor e^4
        big = np.max(np.abs(step))
        if big > 4.0:
            step *= 4.0 / big
        slope = float(g @ step)
        if newton and stat <= 1e-6 * scale:
            s = s + step
            f = coef.value(np.exp(s))
            continue
        eta = 1.0
        while True:
            trial = s + eta * step
            ft = coef.value(np.exp(trial))
            if ft >= f + 1e-4 * eta * slope:
                break
            eta *= 0.5
            if eta < 1e-14:
                break
        if eta < 1e-14:
            # no measurable ascent left: accept if we are at the rounding floor
            if stat <= 1e-9 * scale:
                return RayMax(t, stat, _negdef(h), it)
            raise NoConvergence(f"ray ascent stalled at stationarity {stat:.3e}")
        s, f = trial, ft
    t = np.exp(s)
    stat = float(np.linalg.norm(coef.grad_t(t)))
    if stat <= tol * float(np.linalg.norm(coef.a * t)):
        return RayMax(t, stat, _negdef(coef.hess_s(t)), max_iter)
    raise NoConvergence(f"ray ascent did not converge in {max_iter} iterations (stationarity {stat:.3e})")


def multistart(coef: RayCoefficients, n_starts: int = 64, seed: int = 0, tol: float = 1e-12) -> list[RayMax]:
    """Ascents from log-uniform random starts in [1/8, 8]^ell; failures are skipped."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_starts):
        t0 = np.exp(rng.uniform(np.log(1 / 8), np.log(8), size=coef.ell))
        try:
            out.append(ascend(coef, t0, tol))
        except NoConvergence:
            continue
    return out


def maximize_ray(coef: RayCoefficients, tol: float = 1e-12) -> RayMax:
    """The maximiser t_u, with a multistart fallback when Newton from t = 1 fails."""
    ok = coef.cft()
    if not np.all(ok):
        bad = [i + 1 for i in np.flatnonzero(~ok)]
        raise CftViolated(f"condition (cft) fails for component(s) {bad}")
    try:
        res = ascend(coef, None, tol)
        if res.hessian_negdef:
            return res
    except NoConvergence:
        res = None
    cands = [r for r in multistart(coef, 64, 0, tol) if r.hessian_negdef]
    if not cands:
        if res is not None:
            raise SaddleDetected(f"stationary point t={res.t} has a Hessian that is not negative definite")
        raise NoConvergence("ray maximisation failed from every start")
    return max(cands, key=lambda r: coef.value(r.t))


@dataclass(frozen=True, eq=False)
class NehariProjection:
    t: np.ndarray
    scaled_state: SystemState
    stationarity: float
    hessian_negdef: bool
    coefficients: RayCoefficients


def project_to_nehari(state: SystemState, params: SystemParams, eps: float, tol: float = 1e-12) -> NehariProjection:
    coef = ray_coefficients(state, params, eps)
    res = maximize_ray(coef, tol)
    return NehariProjection(res.t, state.scaled(res.t), res.stationarity, res.hessian_negdef, coef)


def scaled_coefficients(coef: RayCoefficients, t) -> RayCoefficients:
    """Coefficients of the state t u, without touching the fields."""
    t = np.asarray(t, dtype=float)
    tt = np.outer(np.ones_like(t), t) ** coef.alpha * np.outer(t, np.ones_like(t)) ** coef.beta
    return RayCoefficients(coef.a * t**2, coef.b * t**coef.p, coef.dmat * tt, coef.alpha, coef.beta, coef.p)
