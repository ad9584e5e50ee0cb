import numpy as np
import pytest
from hypothesis import given, strategies as st

from nspikes.errors import NoConvergence
from nspikes.model import Field, Grid
from nspikes.operators import (
    cg_solve,
    dirichlet,
    eps_norm_sq,
    helmholtz,
    helmholtz_matrix,
    helmholtz_solve,
    integrate_power,
    laplacian,
    mixed_integral,
    norm_sq,
    pairing,
    riesz_solver,
)


def sine_mode(grid, k):
    """Product of sin(k_a pi (x_a + L) / 2L); a Dirichlet eigenvector of Lap_h."""
    out = 1.0
    for xa, ka in zip(grid.coords(), k):
        out = out * np.sin(ka * np.pi * (xa + grid.L) / (2 * grid.L))
    return out


def discrete_eigenvalue(grid, k):
    return sum(4 / grid.h**2 * np.sin(ka * np.pi / (2 * grid.cells)) ** 2 for ka in k)


@pytest.mark.parametrize("d, k", [(1, (3,)), (2, (1, 2)), (3, (2, 1, 1))])
def test_laplacian_eigenvectors(d, k):
    g = Grid.from_cells(d, 1.0, 12)
    v = sine_mode(g, k)
    np.testing.assert_allclose(-laplacian(v, g.h), discrete_eigenvalue(g, k) * v, atol=1e-10)


def test_dirichlet_of_eigenvector():
    # D(v) = <-Lap_h v, v> h^d for Dirichlet data
    g = Grid.from_cells(2, 1.0, 16)
    v = sine_mode(g, (2, 3))
    lam = discrete_eigenvalue(g, (2, 3))
    assert dirichlet(v, g.h) == pytest.approx(lam * g.h**2 * np.sum(v * v), rel=1e-13)


def test_one_dimensional_dirichlet_by_hand():
    # u = (1, 2) on nodes with zero ghosts: edges 1, 1, 2 -> (1 + 1 + 4) / h
    assert dirichlet(np.array([1.0, 2.0]), 0.5) == pytest.approx(12.0)


@given(st.integers(0, 2**32 - 1), st.sampled_from(["box", "disk"]))
def test_laplacian_is_gradient_of_dirichlet(seed, mask):
    g = Grid.from_cells(2, 1.0, 10, mask)
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(g.shape) * g.mask
    v = rng.standard_normal(g.shape) * g.mask
    step = 1e-6
    fd = (dirichlet(u + step * v, g.h) - dirichlet(u - step * v, g.h)) / (2 * step)
    exact = -2 * g.h**2 * np.sum(laplacian(u, g.h, g.mask) * v)
    assert fd == pytest.approx(exact, rel=1e-7, abs=1e-9)


def test_norm_and_pairing_consistent():
    g = Grid.from_cells(2, 2.0, 20, "disk")
    rng = np.random.default_rng(1)
    u = rng.standard_normal(g.shape) * g.mask
    eps = 0.3
    assert norm_sq(u, g, eps) == pytest.approx(pairing(helmholtz(u, g, eps), u, g, eps), rel=1e-12)
    assert eps_norm_sq(Field(g, u), eps) == norm_sq(u, g, eps)


def test_quadratures():
    g = Grid(1, 1.0, 0.5)
    u = Field(g, np.array([1.0, -2.0, 3.0]))
    assert integrate_power(u, 2) == pytest.approx(0.5 * 14)
    assert integrate_power(u, 3) == pytest.approx(0.5 * 36)
    v = Field(g, np.array([2.0, 1.0, 0.0]))
    # h sum |v|^1 |u|^2
    assert mixed_integral(u, v, 1.0, 2.0) == pytest.approx(0.5 * (2 + 4))


@pytest.mark.parametrize("mask", ["box", "disk"])
def test_riesz_solvers_agree(mask):
    g = Grid.from_cells(2, 1.0, 24, mask)
    eps = 0.2
    rng = np.random.default_rng(7)
    f = rng.standard_normal(g.shape) * g.mask
    ref = cg_solve(f, g, eps, 1e-13)
    methods = ["lu", "cg"] + (["dst"] if mask == "box" else [])
    for m in methods:
        u = riesz_solver(g, eps, m).solve(f)
        np.testing.assert_allclose(helmholtz(u, g, eps), f, atol=1e-10)
        np.testing.assert_allclose(u, ref, atol=1e-11)


def test_dst_needs_box():
    with pytest.raises(ValueError):
        riesz_solver(Grid.from_cells(2, 1.0, 8, "disk"), 1.0, "dst")


def test_helmholtz_matrix_matches_operator():
    g = Grid.from_cells(2, 1.0, 9, "disk")
    mat, idx = helmholtz_matrix(g, 0.4)
    u = np.random.default_rng(3).standard_normal(g.shape) * g.mask
    np.testing.assert_allclose(mat @ u[idx], helmholtz(u, g, 0.4)[idx], atol=1e-12)
    assert abs(mat - mat.T).max() == 0


def test_helmholtz_solve_field_and_failure():
    g = Grid.from_cells(1, 1.0, 32)
    f = Field(g, sine_mode(g, (5,)))
    eps = 0.5
    u = helmholtz_solve(f, eps)
    np.testing.assert_allclose(u.values, f.values / (1 + eps**2 * discrete_eigenvalue(g, (5,))), atol=1e-11)
    with pytest.raises(NoConvergence):
        cg_solve(np.random.default_rng(0).standard_normal(g.shape), g, eps, 1e-14, max_iter=2)
    np.testing.assert_array_equal(cg_solve(np.zeros(g.shape), g, eps, 1e-10), 0.0)
