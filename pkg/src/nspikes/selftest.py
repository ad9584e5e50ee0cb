"""Fast invariant checks behind ``nspikes selftest``."""

from __future__ import annotations

import numpy as np

from .energy import energy, residual_array
from .model import Grid, SystemState, validate_params
from .nehari import project_to_nehari
from .operators import norm_sq, pairing
from .reference import soliton_1d
from .symmetry import preset_symmetry, projector


def _params():
    return validate_params({"ell": 2, "p": 4.0, "mu": [1.0, 1.5], "lambda": [[0, -0.7], [-0.7, 0]], "alpha": [[0, 2.0], [2.0, 0]], "epsilon": 0.5}, dim=2)


def _random_state(grid, rng):
    x, y = grid.coords()
    arrays = []
    for _ in range(2):
        c = rng.uniform(-0.4, 0.4, 2)
        arrays.append(np.exp(-((x - c[0]) ** 2 + (y - c[1]) ** 2) / 0.08) * (1 + 0.2 * rng.standard_normal(grid.shape)))
    return SystemState.from_arrays(grid, arrays)


def check_gradient(rng) -> float:
    grid, params = Grid(2, 1.0, 1 / 16), _params()
    eps = params.epsilon
    st = _random_state(grid, rng)
    arrays = st.arrays()
    v = [rng.standard_normal(grid.shape) for _ in range(2)]
    exact = sum(pairing(residual_array(arrays, i, grid, params, eps), v[i], grid, eps) for i in range(2))
    step = 1e-5
    plus = energy(SystemState.from_arrays(grid, [a + step * d for a, d in zip(arrays, v)]), params, eps).total
    minus = energy(SystemState.from_arrays(grid, [a - step * d for a, d in zip(arrays, v)]), params, eps).total
    return abs((plus - minus) / (2 * step) - exact) / abs(exact)


def check_nehari(rng) -> float:
    grid, params = Grid(2, 1.0, 1 / 16), _params()
    eps = params.epsilon
    proj = project_to_nehari(_random_state(grid, rng), params, eps)
    j = energy(proj.scaled_state, params, eps).total
    ident = (params.p - 2) / (2 * params.p) * sum(norm_sq(a, grid, eps) for a in proj.scaled_state.arrays())
    return abs(j - ident) / abs(j)


def check_projection(rng) -> float:
    grid = Grid(2, 1.0, 1 / 16)
    spec = preset_symmetry("d4", 2, [[1, 1], [-1, 1]], grid)
    proj = projector(grid, spec)
    worst = 0.0
    for i in range(2):
        once = proj.project(rng.standard_normal(grid.shape), i)
        worst = max(worst, float(np.max(np.abs(proj.project(once, i) - once))), proj.violation(once, i))
    return worst


def check_soliton() -> float:
    x = np.linspace(-3, 3, 61)
    h = 1e-3
    u = soliton_1d(4.0, 1.0, x)
    upp = (soliton_1d(4.0, 1.0, x + h) - 2 * u + soliton_1d(4.0, 1.0, x - h)) / h**2
    return float(np.max(np.abs(-upp + u - u**3)))


def run(echo=print) -> bool:
    from .cli import RNG_FINGERPRINT, rng_fingerprint

    rng = np.random.default_rng(12345)
    checks = [
        ("gradient vs central differences", check_gradient(rng), 1e-6),
        ("Nehari energy identity", check_nehari(rng), 1e-9),
        ("equivariant projection idempotent and exact", check_projection(rng), 1e-14),
        ("1-D soliton residual", check_soliton(), 1e-5),
        ("PCG64 seed-0 fingerprint", 0.0 if rng_fingerprint(0) == RNG_FINGERPRINT else 1.0, 0.5),
    ]
    ok = True
    for name, value, tol in checks:
        passed = value <= tol
        ok &= passed
        echo(f"{'PASS' if passed else 'FAIL'}  {name}: {value:.3e} (tol {tol:g})")
    return ok
