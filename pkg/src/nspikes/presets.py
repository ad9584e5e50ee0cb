"""Canned sweep configurations and their expected-observable manifest.

Observables and bounds in ``expectations.csv`` are arithmetic expressions
over sweep-table columns; ``first_<column>`` names the value in the first
row.  Comparators:

* ``>=`` / ``<=``            per row
* ``strictly-increasing``    across rows
* ``strictly-decreasing``    across rows
* ``shrinks-by``             previous / current >= bound for consecutive rows
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from importlib import resources

from .config import RunConfig, parse_config
from .errors import UnknownPreset

NAMES = ("radial-ell2", "segregate-swap", "concentrate-c4", "decoupled-check")
COMPARATORS = (">=", "<=", "strictly-increasing", "strictly-decreasing", "shrinks-by")


@dataclass(frozen=True)
class Expectation:
    observable: str
    comparator: str
    bound: str = ""


@dataclass(frozen=True)
class Preset:
    name: str
    config: RunConfig
    expectations: tuple
    text: str


def _read(name: str) -> str:
    return resources.files("nspikes").joinpath("presets", name).read_text(encoding="ascii")


def _manifest():
    rows = list(csv.DictReader(io.StringIO(_read("expectations.csv"))))
    out = {}
    for r in rows:
        if r["comparator"] not in COMPARATORS:
            raise ValueError(f"unknown comparator {r['comparator']!r} in expectations manifest")
        out.setdefault(r["preset"], []).append(Expectation(r["observable"], r["comparator"], r["bound"] or ""))
    return out


def preset(name: str) -> Preset:
    if name not in NAMES:
        raise UnknownPreset(f"unknown preset {name!r}; choose from {', '.join(NAMES)}")
    text = _read(f"{name}.cfg")
    return Preset(name, parse_config(text), tuple(_manifest().get(name, ())), text)


# ---------------------------------------------------------------------------
# checking


def _evaluate(expr: str, row: dict, first: dict) -> float:
    names = dict(row)
    names.update({f"first_{k}": v for k, v in first.items()})
    # the manifest ships with the package; expressions see only row values and abs
    return float(eval(expr, {"__builtins__": {}, "abs": abs}, names))


@dataclass(frozen=True)
class Check:
    expectation: Expectation
    passed: bool
    detail: str


def _numeric(row) -> dict:
    return {k: v for k, v in row.items() if isinstance(v, (int, float))}


def check_expectations(expectations, rows) -> list[Check]:
    """``rows`` are dicts keyed by sweep-table column (see read_sweep_csv)."""
    rows = list(rows)
    out = []
    if not rows:
        return [Check(e, False, "no rows") for e in expectations]
    bad = [r.get("eps") for r in rows if r.get("status") != "Converged"]
    first = _numeric(rows[0])
    for e in expectations:
        if bad:
            out.append(Check(e, False, f"rows not converged at eps={bad}"))
            continue
        vals = [_evaluate(e.observable, _numeric(r), first) for r in rows]
        if e.comparator in (">=", "<="):
            bounds = [_evaluate(e.bound, _numeric(r), first) for r in rows]
            if e.comparator == ">=":
                ok = [v >= b for v, b in zip(vals, bounds)]
            else:
                ok = [v <= b for v, b in zip(vals, bounds)]
            detail = "; ".join(f"{v:.6g} {e.comparator} {b:.6g}" for v, b in zip(vals, bounds))
            passed = all(ok)
        elif e.comparator == "strictly-increasing":
            passed = all(b > a for a, b in zip(vals, vals[1:]))
            detail = " < ".join(f"{v:.6g}" for v in vals)
        elif e.comparator == "strictly-decreasing":
            passed = all(b < a for a, b in zip(vals, vals[1:]))
            detail = " > ".join(f"{v:.6g}" for v in vals)
        else:
            factor = _evaluate(e.bound, {}, {})
            ratios = [a / b if b else math.inf for a, b in zip(vals, vals[1:])]
            passed = all(r >= factor for r in ratios)
            detail = "ratios " + ", ".join(f"{r:.4g}" for r in ratios) + f" vs {factor:g}"
        if any(math.isnan(v) for v in vals):
            passed = False
        out.append(Check(e, passed, detail))
    return out


def table_rows(table) -> list[dict]:
    """SweepTable -> list of column dicts, as read back from its CSV."""
    header = table.header
    rows = []
    for r in table.rows:
        vals = [r.eps, r.energy, r.sum_ci, r.min_pair_sep_over_eps, r.min_boundary_dist_over_eps, r.max_center_norm_over_eps]
        vals += list(r.profile_dists) + [r.iters, r.status]
        rows.append(dict(zip(header, vals)))
    return rows
