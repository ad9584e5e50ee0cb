"""Parameters, grids, fields and the epsilon-rescaling between scales."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np
from scipy import ndimage

from .errors import CenterOutsideDomain, GridMismatch, InvalidParams, Issue

MASKS = ("box", "disk")


# ---------------------------------------------------------------------------
# parameters


@dataclass(frozen=True, eq=False)
class SystemParams:
    """Coefficients of the coupled system.

    ``lam``, ``alpha`` and ``beta`` are ell x ell arrays whose diagonals are
    ignored.  Instances should come from :func:`validate_params`.
    """

    ell: int
    p: float
    mu: np.ndarray
    lam: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    epsilon: float = 1.0

    def with_epsilon(self, eps: float) -> "SystemParams":
        return SystemParams(self.ell, self.p, self.mu, self.lam, self.alpha, self.beta, float(eps))

    def single(self, i: int) -> "SystemParams":
        """The decoupled one-component problem for component ``i``."""
        one = np.zeros((1, 1))
        return SystemParams(1, self.p, self.mu[i : i + 1].copy(), one, one + self.p / 2, one + self.p / 2, self.epsilon)

    def pairs(self):
        """Ordered pairs (i, j), i != j."""
        return [(i, j) for i in range(self.ell) for j in range(self.ell) if i != j]

    def as_raw(self) -> dict:
        return {
            "ell": self.ell,
            "p": self.p,
            "mu": self.mu.tolist(),
            "lambda": self.lam.tolist(),
            "alpha": self.alpha.tolist(),
            "beta": self.beta.tolist(),
            "epsilon": self.epsilon,
        }


def critical_exponent(d: int) -> float:
    return math.inf if d <= 2 else 2.0 * d / (d - 2)


def validate_params(raw: Mapping, dim: int | None = None) -> SystemParams:
    """Check a raw parameter record and build a :class:`SystemParams`.

    ``raw`` needs ``ell``, ``p``, ``mu``, ``lambda`` and ``alpha``; ``beta``
    defaults to the transpose of ``alpha`` and ``epsilon`` to 1.  ``dim`` is
    the grid dimension used for the subcritical bound on ``p``.

    Raises InvalidParams listing every violated constraint.
    """
    issues: list[Issue] = []
    ell = int(raw.get("ell", 0))
    if ell < 1:
        raise InvalidParams([Issue("ShapeMismatch", f"ell must be >= 1, got {ell}")])
    p = float(raw["p"])
    eps = float(raw.get("epsilon", 1.0))

    def matrix(name, default=None):
        val = raw.get(name, default)
        if val is None:
            return np.full((ell, ell), np.nan)
        arr = np.asarray(val, dtype=float)
        if arr.ndim == 0 and ell == 1:
            arr = arr.reshape(1, 1)
        if arr.shape != (ell, ell):
            issues.append(Issue("ShapeMismatch", f"{name} must be {ell}x{ell}, got shape {arr.shape}"))
            return np.full((ell, ell), np.nan)
        return arr.copy()

    mu = np.atleast_1d(np.asarray(raw.get("mu", []), dtype=float)).copy()
    if mu.shape != (ell,):
        issues.append(Issue("ShapeMismatch", f"mu must have {ell} entries, got {mu.size}"))
        mu = np.ones(ell)
    lam = matrix("lambda", np.zeros((ell, ell)) if ell == 1 else None)
    alpha = matrix("alpha", np.full((ell, ell), p / 2))
    beta = matrix("beta", alpha.T.copy())

    for i, m in enumerate(mu):
        if not m > 0:
            issues.append(Issue("NonPositiveMu", f"mu_{i + 1} = {m} must be > 0"))
    if not p > 2:
        issues.append(Issue("SubquadraticP", f"p = {p} must exceed 2"))
    if dim is not None and not p < critical_exponent(dim):
        issues.append(
            Issue("SupercriticalP", f"p = {p} must be below 2d/(d-2) = {critical_exponent(dim):g} for d = {dim}")
        )
    if not eps > 0:
        issues.append(Issue("NonPositiveEpsilon", f"epsilon = {eps} must be > 0"))

    for i in range(ell):
        for j in range(ell):
            if i == j:
                continue
            tag = f"{i + 1}{j + 1}"
            if i < j and lam[i, j] != lam[j, i]:
                issues.append(Issue("NonSymmetricLambda", f"lambda_{tag} = {lam[i, j]} != lambda_{j + 1}{i + 1} = {lam[j, i]}"))
            if not lam[i, j] < 0:
                issues.append(Issue("NonCompetitiveLambda", f"lambda_{tag} = {lam[i, j]} must be < 0"))
            if not (alpha[i, j] > 1 and beta[i, j] > 1):
                issues.append(Issue("ExponentTooSmall", f"alpha_{tag}, beta_{tag} must exceed 1"))
            if not math.isclose(alpha[i, j] + beta[i, j], p, rel_tol=0, abs_tol=1e-12):
                issues.append(Issue("ExponentMismatch", f"alpha_{tag} + beta_{tag} = {alpha[i, j] + beta[i, j]} != p = {p}"))
            if alpha[i, j] != beta[j, i]:
                issues.append(Issue("ExponentMismatch", f"alpha_{tag} = {alpha[i, j]} != beta_{j + 1}{i + 1} = {beta[j, i]}"))
    if issues:
        raise InvalidParams(issues)
    for arr in (lam, alpha, beta):
        np.fill_diagonal(arr, 0.0)
    for arr in (mu, lam, alpha, beta):
        arr.flags.writeable = False
    return SystemParams(ell, p, mu, lam, alpha, beta, eps)


# ---------------------------------------------------------------------------
# grids and fields


@dataclass(frozen=True)
class Grid:
    """Uniform Dirichlet grid on the box [-L, L]^d.

    Nodes sit at -L + k*h; values live on the nodes strictly inside the box
    (``n = 2L/h - 1`` per axis) and inside the optional centered disk of
    radius L.  Everything outside is zero.
    """

    d: int
    L: float
    h: float
    mask_kind: str = "box"

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"grid dimension must be 1, 2 or 3, got {self.d}")
        if not (self.L > 0 and self.h > 0):
            raise ValueError("L and h must be positive")
        cells = 2 * self.L / self.h
        if abs(cells - round(cells)) > 1e-8 * max(1.0, cells) or round(cells) < 2:
            raise ValueError(f"2L/h = {cells} must be an integer >= 2")
        if self.mask_kind not in MASKS:
            raise ValueError(f"mask must be one of {MASKS}, got {self.mask_kind!r}")

    @classmethod
    def from_cells(cls, d, L, cells, mask_kind="box"):
        return cls(d, float(L), 2.0 * L / cells, mask_kind)

    @property
    def cells(self) -> int:
        return int(round(2 * self.L / self.h))

    @property
    def n(self) -> int:
        return self.cells - 1

    @property
    def shape(self):
        return (self.n,) * self.d

    @property
    def size(self):
        return self.n**self.d

    @property
    def cell_volume(self):
        return self.h**self.d

    @cached_property
    def offsets(self) -> np.ndarray:
        """Node positions in units of h, exactly symmetric about 0."""
        return np.arange(1, self.cells) - self.cells / 2.0

    @cached_property
    def axis(self) -> np.ndarray:
        return self.offsets * self.h

    def coords(self) -> list[np.ndarray]:
        """Open meshgrid of node coordinates, one array per axis."""
        return list(np.ix_(*([self.axis] * self.d)))

    def radius_sq(self) -> np.ndarray:
        return sum(c**2 for c in self.coords())

    @cached_property
    def mask(self) -> np.ndarray:
        if self.mask_kind == "box":
            m = np.ones(self.shape, dtype=bool)
        else:
            off = list(np.ix_(*([self.offsets] * self.d)))
            m = sum(o**2 for o in off) < (self.cells / 2.0) ** 2
        m.flags.writeable = False
        return m

    def node_coord(self, index) -> np.ndarray:
        return np.array([self.axis[k] for k in index])

    def contains(self, point) -> bool:
        x = np.asarray(point, dtype=float)
        if x.shape != (self.d,) or np.any(np.abs(x) >= self.L):
            return False
        if self.mask_kind == "disk":
            return float(x @ x) < self.L**2
        return True

    @cached_property
    def boundary_distance(self) -> np.ndarray:
        """Distance from every node to the nearest node outside the mask."""
        padded = np.pad(self.mask, 1, constant_values=False)
        dist = ndimage.distance_transform_edt(padded, sampling=self.h)
        dist = dist[(slice(1, -1),) * self.d]
        dist.flags.writeable = False
        return dist

    def scaled(self, factor: float) -> "Grid":
        """Same node lattice with all lengths multiplied by ``factor``."""
        return Grid(self.d, self.L * factor, self.h * factor, self.mask_kind)


@dataclass(frozen=True, eq=False)
class Field:
    """Node values on a grid; zero outside the mask."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise GridMismatch(f"values of shape {v.shape} do not fit grid shape {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        if self.grid.mask_kind != "box":
            v[~self.grid.mask] = 0.0
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape))

    def __add__(self, other):
        _same_grid(self, other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other):
        _same_grid(self, other)
        return Field(self.grid, self.values - other.values)

    def __mul__(self, c):
        return Field(self.grid, self.values * float(c))

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.grid, -self.values)

    def max_abs(self):
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


def _same_grid(u, v):
    if u.grid != v.grid:
        raise GridMismatch(f"fields live on different grids: {u.grid} vs {v.grid}")


@dataclass(frozen=True, eq=False)
class SystemState:
    """ell fields on one common grid."""

    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("a state needs at least one component")
        for c in comps[1:]:
            _same_grid(comps[0], c)
        object.__setattr__(self, "components", comps)

    @classmethod
    def from_arrays(cls, grid, arrays):
        return cls(tuple(Field(grid, a) for a in arrays))

    @property
    def grid(self):
        return self.components[0].grid

    @property
    def ell(self):
        return len(self.components)

    def arrays(self):
        return [c.values for c in self.components]

    def __getitem__(self, i):
        return self.components[i]

    def __len__(self):
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    def scaled(self, t):
        return SystemState(tuple(Field(c.grid, c.values * float(ti)) for c, ti in zip(self.components, t)))


# ---------------------------------------------------------------------------
# rescaling and initial data


def rescale_field(u: Field, eps: float) -> Field:
    """Return z -> u(eps z): identical node values on a grid with spacing h/eps."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    if eps == 1:
        return u
    return Field(u.grid.scaled(1.0 / eps), u.values)


def sample_scaled(u: Field, grid: Grid, factor: float) -> np.ndarray:
    """Values of x -> u(factor * x) at the nodes of ``grid``.

    Linear interpolation on u's node lattice (Dirichlet zero beyond it).  When
    the sample points coincide with nodes the copy is exact.
    """
    src = u.grid
    if src.d != grid.d:
        raise GridMismatch("dimension mismatch")
    padded = np.pad(u.values, 1)
    # padded index of position x is x/h + cells/2
    idx = grid.axis * factor / src.h + src.cells / 2.0
    coords = np.meshgrid(*([idx] * grid.d), indexing="ij")
    out = ndimage.map_coordinates(padded, coords, order=1, mode="constant", cval=0.0)
    out[~grid.mask] = 0.0
    return out


def gaussian_bump(grid: Grid, center: Sequence[float], width: float, amplitude: float) -> Field:
    """amplitude * exp(-|x - center|^2 / (2 width^2)) on the interior nodes."""
    c = np.asarray(center, dtype=float)
    if not grid.contains(c):
        raise CenterOutsideDomain(f"center {tuple(c)} lies outside the {grid.mask_kind} domain of half-width {grid.L}")
    r2 = sum((x - ci) ** 2 for x, ci in zip(grid.coords(), c))
    return Field(grid, amplitude * np.exp(-r2 / (2.0 * width**2)))


# ---------------------------------------------------------------------------
# NSF1 field files


def format_float(x: float) -> str:
    """17 significant digits: re-parsing gives back the same double."""
    return f"{x:.17g}"


def write_field(path, u: Field) -> None:
    g = u.grid
    lines = [f"NSF1 {g.d} {format_float(g.L)} {format_float(g.h)}", " ".join([str(g.n)] * g.d)]
    lines.extend(format_float(v) for v in u.values.ravel(order="C"))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_field(path, mask_kind: str = "box") -> Field:
    with open(path, encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != "NSF1":
            raise ValueError(f"{path}: not an NSF1 file")
        d, L, h = int(header[1]), float(header[2]), float(header[3])
        counts = [int(s) for s in fh.readline().split()]
        values = np.array([float(line) for line in fh if line.strip()])
    grid = Grid(d, L, h, mask_kind)
    if counts != [grid.n] * d or values.size != grid.size:
        raise ValueError(f"{path}: node counts {counts} inconsistent with header")
    return Field(grid, values.reshape(grid.shape))


__all__ = [
    "SystemParams",
    "validate_params",
    "critical_exponent",
    "Grid",
    "Field",
    "SystemState",
    "rescale_field",
    "sample_scaled",
    "gaussian_bump",
    "write_field",
    "read_field",
    "format_float",
]
