"""Finite groups of signed axis permutations acting on grids.

A group element maps x to y with ``y[k] = signs[k] * x[perm[k]]``.  These
are exactly the isometries that carry a centred Cartesian node set onto
itself, so equivariance is enforced by index arithmetic, never by
interpolation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.linalg import null_space

from .errors import MaskNotInvariant, NotClosed, NotHomomorphism
from .model import Field, Grid


@dataclass(frozen=True)
class GroupElement:
    perm: tuple
    signs: tuple

    @classmethod
    def identity(cls, d):
        return cls(tuple(range(d)), (1,) * d)

    @classmethod
    def from_matrix(cls, m):
        m = np.asarray(m)
        perm = tuple(int(np.flatnonzero(row)[0]) for row in m)
        signs = tuple(int(m[k, perm[k]]) for k in range(m.shape[0]))
        return cls(perm, signs)

    @property
    def d(self):
        return len(self.perm)

    def matrix(self) -> np.ndarray:
        m = np.zeros((self.d, self.d), dtype=int)
        for k, (j, s) in enumerate(zip(self.perm, self.signs)):
            m[k, j] = s
        return m

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        """Composition: (self @ other)(x) = self(other(x))."""
        return GroupElement.from_matrix(self.matrix() @ other.matrix())

    def inverse(self) -> "GroupElement":
        return GroupElement.from_matrix(self.matrix().T)

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        return np.array([s * x[j] for j, s in zip(self.perm, self.signs)])

    def act(self, values: np.ndarray) -> np.ndarray:
        """The array of x -> values(g^-1 x) on a centred grid."""
        out = np.transpose(values, self.perm)
        flips = tuple(k for k, s in enumerate(self.signs) if s < 0)
        return np.flip(out, axis=flips) if flips else out

    def is_identity(self):
        return self.perm == tuple(range(self.d)) and all(s == 1 for s in self.signs)


def closure(generators: Sequence[GroupElement], d: int) -> list[GroupElement]:
    """All products of the generators, identity first, in BFS order."""
    ident = GroupElement.identity(d)
    out = [ident]
    seen = {ident}
    frontier = [ident]
    while frontier:
        nxt = []
        for g in frontier:
            for s in generators:
                h = s @ g
                if h not in seen:
                    seen.add(h)
                    out.append(h)
                    nxt.append(h)
        frontier = nxt
    return out


@dataclass(frozen=True)
class SymmetrySpec:
    """A verified finite group with one +-1 homomorphism per component.

    ``phi[i][k]`` is the value of the i-th homomorphism on ``elements[k]``.
    """

    elements: tuple
    phi: tuple
    name: str = "custom"

    @property
    def d(self):
        return self.elements[0].d

    @property
    def order(self):
        return len(self.elements)

    @property
    def ell(self):
        return len(self.phi)

    def index(self, g: GroupElement) -> int:
        return self.elements.index(g)

    def phi_of(self, i, g):
        return self.phi[i][self.index(g)]

    def is_surjective(self, i) -> bool:
        return any(s == -1 for s in self.phi[i])

    def kernel(self, i) -> list[GroupElement]:
        return [g for g, s in zip(self.elements, self.phi[i]) if s == 1]

    def component(self, i) -> "SymmetrySpec":
        """The same group carrying only the i-th homomorphism."""
        return SymmetrySpec(self.elements, (self.phi[i],), self.name)

    def with_phi(self, phi) -> "SymmetrySpec":
        return SymmetrySpec(self.elements, tuple(tuple(int(s) for s in row) for row in phi), self.name)

    def conjugate(self, c: GroupElement) -> "SymmetrySpec":
        ci = c.inverse()
        return SymmetrySpec(tuple(c @ g @ ci for g in self.elements), self.phi, self.name)


def verify_group(elements: Sequence[GroupElement], phi, grid: Grid | None = None, name="custom") -> SymmetrySpec:
    """Validate group axioms, the homomorphism property and mask invariance.

    ``phi`` is a list (one entry per component) of sign lists aligned with
    ``elements``.
    """
    elements = tuple(elements)
    if not elements:
        raise NotClosed("empty element list")
    d = elements[0].d
    if any(g.d != d for g in elements):
        raise NotClosed("elements act on different dimensions")
    if len(set(elements)) != len(elements):
        raise NotClosed("duplicate group elements")
    members = set(elements)
    ident = GroupElement.identity(d)
    if ident not in members:
        raise NotClosed("identity missing")
    pos = {g: k for k, g in enumerate(elements)}
    for g in elements:
        if g.inverse() not in members:
            raise NotClosed(f"inverse of {g} missing")
        for h in elements:
            if g @ h not in members:
                raise NotClosed(f"product {g} @ {h} not in the set")
    phi = tuple(tuple(int(s) for s in row) for row in phi)
    for i, row in enumerate(phi):
        if len(row) != len(elements) or any(s not in (-1, 1) for s in row):
            raise NotHomomorphism(f"phi_{i + 1} must assign +-1 to each of the {len(elements)} elements")
        for g in elements:
            for h in elements:
                if row[pos[g @ h]] != row[pos[g]] * row[pos[h]]:
                    raise NotHomomorphism(f"phi_{i + 1}(gh) != phi_{i + 1}(g) phi_{i + 1}(h) for g={g}, h={h}")
    spec = SymmetrySpec(elements, phi, name)
    if grid is not None:
        check_mask(spec, grid)
    return spec


def check_mask(spec: SymmetrySpec, grid: Grid) -> None:
    if spec.d != grid.d:
        raise MaskNotInvariant(f"group acts in dimension {spec.d} but grid has d={grid.d}")
    for g in spec.elements:
        if not np.array_equal(g.act(grid.mask), grid.mask):
            raise MaskNotInvariant(f"mask is not invariant under {g}")


# ---------------------------------------------------------------------------
# named presets


def _swap(d):
    perm = list(range(d))
    perm[0], perm[1] = 1, 0
    return GroupElement(tuple(perm), (1,) * d)


def _rot(d):
    # (x1, x2) -> (-x2, x1)
    perm = list(range(d))
    perm[0], perm[1] = 1, 0
    signs = [1] * d
    signs[0] = -1
    return GroupElement(tuple(perm), tuple(signs))


def _reflect(d):
    return GroupElement(tuple(range(d)), (-1,) + (1,) * (d - 1))


PRESETS = {
    "trivial": (0, lambda d: []),
    "swap": (2, lambda d: [_swap(d)]),
    "c4": (2, lambda d: [_rot(d)]),
    "d4": (2, lambda d: [_rot(d), _swap(d)]),
    "reflect-x": (1, lambda d: [_reflect(d)]),
}


def generators(name: str, d: int) -> list[GroupElement]:
    if name not in PRESETS:
        raise KeyError(f"unknown symmetry preset {name!r}; choose from {sorted(PRESETS)}")
    min_d, gen = PRESETS[name]
    if d < max(min_d, 1):
        raise ValueError(f"preset {name!r} needs d >= {min_d}")
    return gen(d)


def preset_symmetry(name: str, d: int, phi_generators, grid: Grid | None = None) -> SymmetrySpec:
    """Build a named group with homomorphisms given by their values on the generators.

    ``phi_generators[i]`` lists +-1 per generator for component i (empty for
    ``trivial``).  Conflicting assignments raise NotHomomorphism.
    """
    gens = generators(name, d)
    elements = closure(gens, d)
    phi = []
    for i, signs in enumerate(phi_generators):
        signs = list(signs)
        if len(signs) != len(gens):
            raise NotHomomorphism(f"phi_{i + 1}: preset {name!r} has {len(gens)} generator(s), got {len(signs)} sign(s)")
        value = {elements[0]: 1}
        for _ in range(len(elements)):
            for g in list(value):
                for s, sg in zip(gens, signs):
                    h = s @ g
                    v = sg * value[g]
                    if h in value and value[h] != v:
                        raise NotHomomorphism(f"phi_{i + 1}: generator signs {signs} do not define a homomorphism on {name}")
                    value.setdefault(h, v)
        phi.append([value[g] for g in elements])
    return verify_group(elements, phi, grid, name=name)


# ---------------------------------------------------------------------------
# (A1), fixed points, projection


def orbit(elements, x) -> set:
    return {tuple(np.round(g.apply(x), 12)) for g in elements}


def check_A1(spec: SymmetrySpec, i: int, grid: Grid | None = None):
    """Return (holds, witness).

    If phi_i is not surjective (A1) holds vacuously and the witness is None.
    Otherwise search grid nodes (nearest to the origin first) for x0 whose
    kernel orbit differs from its full orbit.
    """
    if not spec.is_surjective(i):
        return True, None
    kernel = spec.kernel(i)
    if grid is not None:
        pts = [grid.axis[list(idx)] for idx in np.argwhere(grid.mask)]
    else:
        pts = [np.array(c, dtype=float) for c in itertools.product(range(-2, 3), repeat=spec.d)]
    pts.sort(key=lambda x: (float(x @ x), tuple(-x)))
    for x in pts:
        if orbit(kernel, x) != orbit(spec.elements, x):
            return True, x
    return False, None


@dataclass(frozen=True, eq=False)
class FixedSpace:
    dimension: int
    basis: np.ndarray  # shape (d, dimension), orthonormal columns


def fixed_subspace(spec: SymmetrySpec) -> FixedSpace:
    d = spec.d
    stack = np.vstack([g.matrix() - np.eye(d) for g in spec.elements])
    basis = null_space(stack)
    # fix the sign convention: first nonzero entry positive
    for k in range(basis.shape[1]):
        col = basis[:, k]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size and col[nz[0]] < 0:
            basis[:, k] = -col
    return FixedSpace(basis.shape[1], basis)


class Projector:
    """Group averaging onto phi_i-equivariant fields, exact on every orbit.

    The average is formed once per orbit representative and copied to the
    other orbit points with the sign phi_i(g), so u(gx) = phi_i(g) u(x) holds
    bit for bit.
    """

    def __init__(self, grid: Grid, spec: SymmetrySpec):
        check_mask(spec, grid)
        self.grid, self.spec = grid, spec
        flat = np.arange(grid.size, dtype=np.int64).reshape(grid.shape)
        images = [g.act(flat) for g in spec.elements]  # flat index of g^-1 x
        rep = np.minimum.reduce(images)
        self.rep = rep
        self.signs = []
        for row in spec.phi:
            sign = np.zeros(grid.shape)
            conflict = np.zeros(grid.shape, dtype=bool)
            for img, s in zip(images, row):
                hit = img == rep
                unset = hit & (sign == 0)
                sign[unset] = s
                conflict |= hit & (sign != s)
            sign[conflict] = 0.0
            self.signs.append(sign)

    def project(self, values: np.ndarray, i: int) -> np.ndarray:
        row = self.spec.phi[i]
        if self.spec.order == 1:
            return np.array(values, dtype=float)
        acc = np.zeros(self.grid.shape)
        for g, s in zip(self.spec.elements, row):
            if s > 0:
                acc += g.act(values)
            else:
                acc -= g.act(values)
        acc /= self.spec.order
        return self.signs[i] * acc.ravel()[self.rep]

    def violation(self, values: np.ndarray, i: int) -> float:
        """max |u(g^-1 x) phi(g) - u(x)| over nodes and group elements."""
        worst = 0.0
        for g, s in zip(self.spec.elements, self.spec.phi[i]):
            worst = max(worst, float(np.max(np.abs(s * g.act(values) - values))))
        return worst


@lru_cache(maxsize=32)
def projector(grid: Grid, spec: SymmetrySpec) -> Projector:
    return Projector(grid, spec)


def equivariant_project(u: Field, spec: SymmetrySpec, i: int) -> Field:
    """Pu(x) = |G|^-1 sum_g phi_i(g) u(g^-1 x)."""
    return Field(u.grid, projector(u.grid, spec).project(u.values, i))


def equivariance_violation(u: Field, spec: SymmetrySpec, i: int) -> float:
    return projector(u.grid, spec).violation(u.values, i)
