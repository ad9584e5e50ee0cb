"""Flat ``section.key = value`` run configuration.

Lines are ``key = value``; ``#`` starts a comment.  Indexed keys carry
1-based component numbers: ``params.lambda12``, ``params.alpha12``,
``symmetry.phi2``, ``seeds.u1``.  Seeds are ``cx,cy,width,amp`` groups
separated by ``;``; widths are in units of epsilon and centres are absolute
unless ``seeds.center_units = eps``.

Defaults (everything except params.ell, grid.d, grid.L, grid.h):

=====================  ==========================================
params.p               4
params.mu              1 for every component
params.epsilon         1
params.lambdaIJ        -1 (setting one of IJ / JI sets both)
params.alphaIJ         p/2 (beta is the transpose of alpha)
grid.mask              box
grid.h_over_eps        0 (fixed spacing grid.h)
symmetry.preset        trivial
symmetry.phiI          +1 on every generator
solver.*               the SolveOptions defaults
sweep.eps              params.epsilon
sweep.warm_start       true
sweep.ref_L            10
sweep.threshold        0.5
sweep.suppress         2 (in units of epsilon)
sweep.chi_radius       0.99 L
seeds.uI               one bump at the origin, width 1, amplitude 1
seeds.center_units     abs
seeds.noise            0
output.dir             out
output.fields / log    true
output.pgm             false
=====================  ==========================================
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InvalidParams, Issue, NspikesError
from .minimizer import SolveOptions
from .model import MASKS, Grid, SystemParams, validate_params
from .symmetry import PRESETS, SymmetrySpec, generators, preset_symmetry


def _bool(s):
    v = s.strip().lower()
    if v in ("true", "yes", "1", "on"):
        return True
    if v in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s):
    return tuple(float(x) for x in s.split(",") if x.strip())


def _ints(s):
    return tuple(int(x) for x in s.split(",") if x.strip())


def _seeds(s):
    out = []
    for group in s.split(";"):
        if not group.strip():
            continue
        vals = _floats(group)
        if len(vals) < 3:
            raise ValueError(f"seed {group!r} needs center coordinates, width and amplitude")
        out.append(vals)
    return tuple(out)


def _choice(*options):
    def parse(s):
        v = s.strip()
        if v not in options:
            raise ValueError(f"expected one of {options}, got {v!r}")
        return v

    return parse


SCALARS = {
    "params.ell": int,
    "params.p": float,
    "params.mu": _floats,
    "params.epsilon": float,
    "grid.d": int,
    "grid.L": float,
    "grid.h": float,
    "grid.mask": _choice(*MASKS),
    "grid.h_over_eps": float,
    "symmetry.preset": _choice(*sorted(PRESETS)),
    "solver.max_iters": int,
    "solver.grad_tol": float,
    "solver.step0": float,
    "solver.armijo": float,
    "solver.seed": int,
    "solver.min_component_norm": float,
    "solver.proj_tol": float,
    "solver.linear": _choice("auto", "dst", "lu", "cg"),
    "solver.method": _choice("cg", "sd"),
    "sweep.eps": _floats,
    "sweep.warm_start": _bool,
    "sweep.ref_L": float,
    "sweep.threshold": float,
    "sweep.suppress": float,
    "sweep.chi_radius": float,
    "seeds.center_units": _choice("abs", "eps"),
    "seeds.noise": float,
    "output.dir": str,
    "output.fields": _bool,
    "output.log": _bool,
    "output.pgm": _bool,
}
INDEXED = {
    "params.lambda": (2, float),
    "params.alpha": (2, float),
    "symmetry.phi": (1, _ints),
    "seeds.u": (1, _seeds),
}
REQUIRED = ("params.ell", "grid.d", "grid.L", "grid.h")
_INDEX_RE = re.compile(r"^(params\.lambda|params\.alpha|symmetry\.phi|seeds\.u)(\d+)$")


def _classify(key):
    if key in SCALARS:
        return SCALARS[key], None
    m = _INDEX_RE.match(key)
    if m:
        n, parse = INDEXED[m.group(1)]
        digits = m.group(2)
        if len(digits) == n and "0" not in digits:
            return parse, tuple(int(c) - 1 for c in digits)
    return None, None


@dataclass(frozen=True)
class RunConfig:
    """Canonical key -> value map with every default filled in.

    Build with :func:`parse_config`; :func:`format_config` prints it back.
    """

    values: tuple
    warnings: tuple = field(default=(), compare=False)

    def __getitem__(self, key):
        return dict(self.values)[key]

    def get(self, key, default=None):
        return dict(self.values).get(key, default)

    @property
    def ell(self) -> int:
        return self["params.ell"]

    @property
    def d(self) -> int:
        return self["grid.d"]

    def system_params(self, eps: float | None = None) -> SystemParams:
        return validate_params(self.raw_params(eps), dim=self.d)

    def raw_params(self, eps=None) -> dict:
        ell = self.ell
        lam = np.zeros((ell, ell))
        alpha = np.zeros((ell, ell))
        for i in range(ell):
            for j in range(ell):
                if i != j:
                    lam[i, j] = self[f"params.lambda{i + 1}{j + 1}"]
                    alpha[i, j] = self[f"params.alpha{i + 1}{j + 1}"]
        return {
            "ell": ell,
            "p": self["params.p"],
            "mu": list(self["params.mu"]),
            "lambda": lam,
            "alpha": alpha,
            "beta": alpha.T.copy(),
            "epsilon": self["params.epsilon"] if eps is None else eps,
        }

    def grid(self, eps: float | None = None) -> Grid:
        """The grid at ``eps``: fixed spacing, or cells ~ 2L/(h_over_eps eps)."""
        d, L, mask = self.d, self["grid.L"], self["grid.mask"]
        ratio = self["grid.h_over_eps"]
        if ratio > 0:
            eps = self["params.epsilon"] if eps is None else eps
            cells = max(4, int(round(2 * L / (ratio * eps))))
            return Grid.from_cells(d, L, cells, mask)
        return Grid(d, L, self["grid.h"], mask)

    def symmetry(self, grid: Grid | None = None) -> SymmetrySpec:
        phis = [self[f"symmetry.phi{i + 1}"] for i in range(self.ell)]
        return preset_symmetry(self["symmetry.preset"], self.d, phis, grid)

    def solve_options(self) -> SolveOptions:
        names = ("max_iters", "grad_tol", "step0", "armijo", "seed", "min_component_norm", "proj_tol", "linear", "method")
        return SolveOptions(**{n: self[f"solver.{n}"] for n in names})

    def seeds(self, eps: float):
        """(component, center, width, amplitude) tuples at this epsilon."""
        scale = eps if self["seeds.center_units"] == "eps" else 1.0
        out = []
        for i in range(self.ell):
            for vals in self[f"seeds.u{i + 1}"]:
                center = np.array(vals[: self.d]) * scale
                width, amp = vals[self.d] * eps, vals[self.d + 1] if len(vals) > self.d + 1 else 1.0
                out.append((i, center, width, amp))
        return out

    @property
    def eps_list(self):
        return self["sweep.eps"]


def _defaults(vals: dict, ell: int, d: int):
    p = vals.get("params.p", 4.0)
    base = {
        "params.p": 4.0,
        "params.mu": (1.0,) * ell,
        "params.epsilon": 1.0,
        "grid.mask": "box",
        "grid.h_over_eps": 0.0,
        "symmetry.preset": "trivial",
        "sweep.warm_start": True,
        "sweep.ref_L": 10.0,
        "sweep.threshold": 0.5,
        "sweep.suppress": 2.0,
        "seeds.center_units": "abs",
        "seeds.noise": 0.0,
        "output.dir": "out",
        "output.fields": True,
        "output.log": True,
        "output.pgm": False,
    }
    opts = SolveOptions()
    for n in ("max_iters", "grad_tol", "step0", "armijo", "seed", "min_component_norm", "proj_tol", "linear", "method"):
        base[f"solver.{n}"] = getattr(opts, n)
    for k, v in base.items():
        vals.setdefault(k, v)
    vals.setdefault("sweep.eps", (vals["params.epsilon"],))
    vals.setdefault("sweep.chi_radius", 0.99 * vals.get("grid.L", 1.0))
    for i in range(ell):
        for j in range(ell):
            if i == j:
                continue
            for name, default in (("lambda", -1.0), ("alpha", p / 2)):
                key, mirror = f"params.{name}{i + 1}{j + 1}", f"params.{name}{j + 1}{i + 1}"
                if key not in vals:
                    if name == "lambda" and mirror in vals:
                        vals[key] = vals[mirror]
                    elif name == "alpha" and mirror in vals:
                        vals[key] = p - vals[mirror]
                    else:
                        vals[key] = default
        vals.setdefault(f"seeds.u{i + 1}", ((0.0,) * d + (1.0, 1.0),))
    return vals


def parse_config(text: str) -> RunConfig:
    """Parse, fill defaults and validate; raises ConfigError listing every problem."""
    vals, issues, warnings = {}, [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            issues.append(Issue("TypeError", f"line {lineno}: expected 'key = value'"))
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        parse, _ = _classify(key)
        if parse is None:
            issues.append(Issue("UnknownKey", f"line {lineno}: unknown key {key!r}"))
            continue
        try:
            parsed = parse(value)
        except ValueError as exc:
            issues.append(Issue("TypeError", f"line {lineno}: {key}: {exc}"))
            continue
        if key in vals:
            warnings.append(f"line {lineno}: duplicate key {key!r}, last value wins")
        vals[key] = parsed
    for key in REQUIRED:
        if key not in vals:
            issues.append(Issue("MissingRequired", f"missing required key {key!r}"))
    if issues:
        raise ConfigError(issues)

    ell, d = vals["params.ell"], vals["grid.d"]
    if ell < 1 or d < 1:
        raise ConfigError([Issue("TypeError", "params.ell and grid.d must be >= 1")])
    for key in list(vals):
        _, idx = _classify(key)
        if idx is not None and max(idx) >= ell:
            issues.append(Issue("UnknownKey", f"{key!r} refers to a component beyond ell = {ell}"))
        if idx is not None and len(idx) == 2 and idx[0] == idx[1]:
            issues.append(Issue("UnknownKey", f"{key!r}: diagonal coupling entries are not parameters"))
    if issues:
        raise ConfigError(issues)
    vals = _defaults(vals, ell, d)
    try:
        ngen = len(generators(vals["symmetry.preset"], d))
    except (KeyError, ValueError) as exc:
        raise ConfigError([Issue("TypeError", str(exc))]) from None
    for i in range(ell):
        vals.setdefault(f"symmetry.phi{i + 1}", (1,) * ngen)
    for i in range(ell):
        for s in vals[f"seeds.u{i + 1}"]:
            if len(s) not in (d + 1, d + 2):
                issues.append(Issue("TypeError", f"seeds.u{i + 1}: each seed needs {d} coordinates, width and amplitude"))
    if issues:
        raise ConfigError(issues)
    cfg = RunConfig(tuple(sorted(vals.items())), tuple(warnings))
    # cross-field checks are delegated to the model and symmetry layers
    try:
        cfg.system_params()
        eps = cfg.eps_list
        if any(not e > 0 for e in eps):
            raise InvalidParams([Issue("NonPositiveEpsilon", "sweep.eps entries must be > 0")])
        cfg.symmetry(cfg.grid())
        cfg.solve_options()
    except InvalidParams as exc:
        raise ConfigError(exc.issues) from None
    except NspikesError as exc:
        raise ConfigError([Issue(exc.code, str(exc))]) from None
    except ValueError as exc:
        raise ConfigError([Issue("TypeError", str(exc))]) from None
    return cfg


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return "; ".join(_format_value(x) for x in v)
        return ",".join(_format_value(x) for x in v)
    return str(v)


def format_config(cfg: RunConfig) -> str:
    return "".join(f"{k} = {_format_value(v)}\n" for k, v in cfg.values)
