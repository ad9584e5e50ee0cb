"""Observables of small-epsilon solutions and the epsilon-continuation sweep."""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import ndimage

from .errors import CftViolated, NoSpikes, NspikesError, WindowExceedsReference
from .minimizer import SolveResult, initial_state, minimize
from .model import Field, Grid, SystemParams, SystemState, format_float, sample_scaled
from .nehari import coefficients_from_arrays, maximize_ray
from .operators import norm_sq
from .reference import RadialProfile, equivariant_single_ground_state, radial_ground_state
from .symmetry import SymmetrySpec, projector


@dataclass(frozen=True)
class Spike:
    center: tuple
    height: float
    component: int = 0
    index: tuple = field(default=(), compare=False)


def detect_spikes(u: Field, threshold_frac: float = 0.5, suppress_radius: float = 0.0, component: int = 0) -> list[Spike]:
    """Local maxima of |u| above threshold_frac * max|u|, thinned by greedy suppression."""
    if not 0 < threshold_frac < 1:
        raise ValueError("threshold_frac must lie in (0, 1)")
    a = np.abs(u.values)
    top = float(a.max()) if a.size else 0.0
    if top == 0.0:
        return []
    peaks = (a == ndimage.maximum_filter(a, size=3, mode="constant", cval=0.0)) & (a >= threshold_frac * top)
    axis = u.grid.axis
    cands = []
    for idx in map(tuple, np.argwhere(peaks)):
        center = tuple(float(axis[k]) for k in idx)
        cands.append((-a[idx], center, idx))
    cands.sort()
    kept: list[Spike] = []
    r2 = suppress_radius * suppress_radius
    for _, center, idx in cands:
        c = np.array(center)
        if any(float(np.sum((c - np.array(s.center)) ** 2)) <= r2 for s in kept):
            continue
        kept.append(Spike(center, float(u.values[idx]), component, idx))
    return kept


@dataclass(frozen=True)
class SegregationMetrics:
    min_pair_sep_over_eps: float
    min_boundary_dist_over_eps: float
    max_center_norm_over_eps: float


def segregation_metrics(state: SystemState | None, spikes, eps: float, grid: Grid) -> SegregationMetrics:
    """``spikes`` is one list per component.

    Pair separations are taken between spikes of different components; with a
    single component they are taken between its distinct spikes (NaN if it
    has only one).
    """
    if not spikes or any(len(s) == 0 for s in spikes):
        raise NoSpikes("every component needs at least one spike")
    pts = [[np.array(s.center) for s in comp] for comp in spikes]
    best = math.inf
    if len(pts) == 1:
        for a in range(len(pts[0])):
            for b in range(a + 1, len(pts[0])):
                best = min(best, float(np.linalg.norm(pts[0][a] - pts[0][b])))
    else:
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                for x in pts[i]:
                    for y in pts[j]:
                        best = min(best, float(np.linalg.norm(x - y)))
    sep = best / eps if math.isfinite(best) else math.nan
    dist = grid.boundary_distance
    bd = min(float(dist[s.index]) if s.index else _boundary_distance(grid, s.center) for comp in spikes for s in comp)
    cn = max(float(np.linalg.norm(s.center)) for comp in spikes for s in comp)
    return SegregationMetrics(sep, bd / eps, cn / eps)


def _boundary_distance(grid: Grid, center) -> float:
    idx = tuple(int(round(c / grid.h + grid.cells / 2)) - 1 for c in center)
    return float(grid.boundary_distance[idx])


# ---------------------------------------------------------------------------
# rescaled profiles


def _sample_reference(reference, grid: Grid, centers, signs, eps: float) -> np.ndarray:
    """sum_k s_k v((x - c_k) / eps) on the nodes of ``grid``."""
    out = np.zeros(grid.shape)
    coords = grid.coords()
    for c, s in zip(centers, signs):
        if isinstance(reference, RadialProfile):
            r = np.sqrt(sum((x - ck) ** 2 for x, ck in zip(coords, c))) / eps
            out += s * reference(r)
        else:
            ref = reference.grid
            edge = _edge_level(reference)
            if edge > 1e-3:
                raise WindowExceedsReference(
                    f"reference is {edge:.2e} of its maximum at its own boundary; enlarge it to cover the window"
                )
            shifted = np.broadcast_arrays(*[(x - ck) / eps / ref.h + ref.cells / 2.0 for x, ck in zip(coords, c)])
            padded = np.pad(reference.values, 1)
            out += s * ndimage.map_coordinates(padded, shifted, order=1, mode="constant", cval=0.0)
    if grid.mask_kind != "box":
        out[~grid.mask] = 0.0
    return out


def _edge_level(reference: Field) -> float:
    """max |v| on the outermost node layer relative to max |v|."""
    v = np.abs(reference.values)
    top = v.max()
    if top == 0:
        return 0.0
    border = np.ones(v.shape, dtype=bool)
    border[(slice(1, -1),) * v.ndim] = False
    if reference.grid.mask_kind != "box":
        border = reference.grid.mask & ~ndimage.binary_erosion(reference.grid.mask)
    return float(v[border].max() / top)


def profile_distance(u: Field, reference, center, eps: float) -> float:
    """||u - v((. - center)/eps)||_eps with v sampled by interpolation."""
    return profile_distance_multi(u, reference, [center], [1.0], eps)


def profile_distance_multi(u: Field, reference, centers, signs, eps: float) -> float:
    v = _sample_reference(reference, u.grid, [np.asarray(c, float) for c in centers], signs, eps)
    return math.sqrt(norm_sq(u.values - v, u.grid, eps))


def smoothstep_cutoff(grid: Grid, r: float) -> np.ndarray:
    """1 on |x| <= r/2, 0 on |x| >= r, C^2 quintic ramp in between."""
    rad = np.sqrt(grid.radius_sq())
    s = np.clip((r - rad) / (r / 2.0), 0.0, 1.0)
    return s**3 * (10 - 15 * s + 6 * s * s)


def competitor_energy(
    references,
    chi_radius: float,
    eps: float,
    params: SystemParams,
    grid: Grid,
    symmetry: SymmetrySpec | None = None,
    centers=None,
) -> float:
    """Energy of the ray projection of w_i(x) = v_i((x - c_i)/eps) chi(x).

    ``references`` are RadialProfiles or Fields at unit scale (use
    rescale_field to turn a solution at eps back into one).
    """
    ell = params.ell
    centers = centers if centers is not None else [np.zeros(grid.d)] * ell
    chi = smoothstep_cutoff(grid, chi_radius)
    arrays = []
    for i in range(ell):
        ref = references[i]
        c = np.asarray(centers[i], dtype=float)
        if isinstance(ref, RadialProfile):
            w = _sample_reference(ref, grid, [c], [1.0], eps)
        else:
            w = sample_scaled(ref, grid, 1.0 / eps) if not c.any() else _sample_reference(ref, grid, [c], [1.0], eps)
        arrays.append(w * chi)
    if symmetry is not None:
        proj = projector(grid, symmetry)
        arrays = [proj.project(a, i) for i, a in enumerate(arrays)]
    coef = coefficients_from_arrays(arrays, grid, params.with_epsilon(eps), eps)
    if not np.all(coef.cft()):
        raise CftViolated("competitor does not admit a ray projection")
    t = maximize_ray(coef).t
    return coef.value(t)


# ---------------------------------------------------------------------------
# sweep


@dataclass(frozen=True, eq=False)
class SweepRow:
    eps: float
    energy: float
    sum_ci: float
    min_pair_sep_over_eps: float
    min_boundary_dist_over_eps: float
    max_center_norm_over_eps: float
    profile_dists: tuple
    iters: int
    status: str
    result: SolveResult | None = field(default=None, repr=False)
    spikes: tuple = field(default=(), repr=False)


def sweep_header(ell: int) -> list[str]:
    return (
        ["eps", "energy", "sum_ci", "min_pair_sep_over_eps", "min_boundary_dist_over_eps", "max_center_norm_over_eps"]
        + [f"profile_dist_{i + 1}" for i in range(ell)]
        + ["iters", "status"]
    )


@dataclass(eq=False)
class SweepTable:
    ell: int
    rows: list

    @property
    def header(self):
        return sweep_header(self.ell)

    def column(self, name):
        if name.startswith("profile_dist_"):
            k = int(name.rsplit("_", 1)[1]) - 1
            return [r.profile_dists[k] for r in self.rows]
        return [getattr(r, name) for r in self.rows]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header)
            for r in self.rows:
                nums = [r.eps, r.energy, r.sum_ci, r.min_pair_sep_over_eps, r.min_boundary_dist_over_eps, r.max_center_norm_over_eps]
                w.writerow([format_float(x) for x in nums + list(r.profile_dists)] + [r.iters, r.status])


def read_sweep_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        for k, v in r.items():
            if k != "status":
                r[k] = int(v) if k == "iters" else float(v)
    return rows


@lru_cache(maxsize=64)
def _equivariant_level(d: int, ref_L: float, cells: int, spec: SymmetrySpec, p: float, mu: float):
    grid = Grid.from_cells(d, ref_L, cells, "box")
    return equivariant_single_ground_state(grid, spec, 0, p, mu, 1.0)


@lru_cache(maxsize=16)
def _radial_level(N: int, p: float, mu: float, h: float):
    return radial_ground_state(N, p, mu, 16.0, h)


def reference_levels(cfg, eps: float) -> tuple:
    """Single-equation levels c_i^phi at the resolution h/eps of the sweep grid.

    Each level is the phi_i-equivariant ground state at unit scale on the box
    of half-width ``sweep.ref_L``.  Returns (levels, fields).
    """
    grid = cfg.grid(eps)
    ratio = grid.h / eps
    ref_L = cfg["sweep.ref_L"]
    cells = max(4, int(round(2 * ref_L / ratio)))
    ref_grid = Grid.from_cells(grid.d, ref_L, cells, "box")
    spec = cfg.symmetry(ref_grid)
    params = cfg.system_params(eps)
    levels, fields = [], []
    for i in range(params.ell):
        f, c = _equivariant_level(grid.d, ref_L, cells, spec.component(i), params.p, float(params.mu[i]))
        levels.append(c)
        fields.append(f)
    return levels, fields


def _row(cfg, eps, init_state=None, log=None) -> tuple[SweepRow, SystemState | None]:
    params = cfg.system_params(eps)
    grid = cfg.grid(eps)
    spec = cfg.symmetry(grid)
    opts = cfg.solve_options()
    ell = params.ell
    nan = math.nan
    try:
        levels, _ = reference_levels(cfg, eps)
        sum_ci = float(sum(levels))
    except NspikesError:
        sum_ci = nan
    try:
        if init_state is None:
            init = initial_state(grid, spec, cfg.seeds(eps), params, opts.seed, cfg["seeds.noise"], opts.proj_tol)
        else:
            init = init_state
        res = minimize(params, grid, spec, init, opts, log)
    except NspikesError as exc:
        return SweepRow(eps, nan, sum_ci, nan, nan, nan, (nan,) * ell, 0, exc.code), None
    radius = cfg["sweep.suppress"] * eps
    spikes = tuple(tuple(detect_spikes(res.state[i], cfg["sweep.threshold"], radius, i)) for i in range(ell))
    try:
        m = segregation_metrics(res.state, spikes, eps, grid)
        mets = (m.min_pair_sep_over_eps, m.min_boundary_dist_over_eps, m.max_center_norm_over_eps)
    except NoSpikes:
        mets = (nan, nan, nan)
    dists = []
    for i in range(ell):
        if not spikes[i]:
            dists.append(nan)
            continue
        prof = _radial_level(grid.d, params.p, float(params.mu[i]), min(grid.h / eps, 1 / 16))
        cs = [s.center for s in spikes[i]]
        sg = [math.copysign(1.0, s.height) for s in spikes[i]]
        dists.append(profile_distance_multi(res.state[i], prof, cs, sg, eps))
    row = SweepRow(eps, res.energy, sum_ci, *mets, tuple(dists), res.iters, res.status, res, spikes)
    return row, res.state


def warm_start(prev: SystemState, prev_eps: float, cfg, eps: float) -> SystemState:
    """Exact rescaling x -> u(x prev_eps / eps), symmetrised and reprojected."""
    params = cfg.system_params(eps)
    grid = cfg.grid(eps)
    spec = cfg.symmetry(grid)
    proj = projector(grid, spec)
    arrays = [proj.project(sample_scaled(u, grid, prev_eps / eps), i) for i, u in enumerate(prev)]
    coef = coefficients_from_arrays(arrays, grid, params, eps)
    t = maximize_ray(coef, cfg["solver.proj_tol"]).t
    return SystemState.from_arrays(grid, [a * ti for a, ti in zip(arrays, t)])


def epsilon_sweep(cfg, eps_list=None, warm: bool | None = None, threads: int | None = None, progress=None) -> SweepTable:
    """One row per epsilon, in input order.  Solver failures are recorded in the row's status."""
    eps_list = list(cfg.eps_list if eps_list is None else eps_list)
    warm = cfg["sweep.warm_start"] if warm is None else warm
    if threads is None:
        threads = int(os.environ.get("NSPIKES_THREADS", "1") or 1)
    rows: list[SweepRow] = []
    if not warm and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = [r for r, _ in pool.map(lambda e: _row(cfg, e), eps_list)]
        return SweepTable(cfg.ell, rows)
    prev, prev_eps = None, None
    for eps in eps_list:
        init = None
        if warm and prev is not None:
            try:
                init = warm_start(prev, prev_eps, cfg, eps)
            except NspikesError:
                init = None
        row, state = _row(cfg, eps, init)
        rows.append(row)
        if progress is not None:
            progress(row)
        if state is not None:
            prev, prev_eps = state, eps
    return SweepTable(cfg.ell, rows)
