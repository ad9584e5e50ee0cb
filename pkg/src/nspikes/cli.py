"""``nspikes`` command line: validate, solve, sweep, reference, render, selftest.

Exit status: 0 success, 1 invalid configuration or input, 2 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np

from .asymptotics import epsilon_sweep
from .config import format_config, parse_config
from .errors import ConfigError, InvalidParams, NotTwoDimensional, NspikesError
from .minimizer import CONVERGED, initial_state, minimize, write_log
from .model import format_float, read_field, write_field
from .operators import norm_sq
from .presets import check_expectations, preset, table_rows

EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 1, 2

# first ten raw 64-bit outputs of PCG64 seeded with 0 (numpy.random.default_rng(0))
RNG_FINGERPRINT = (
    0xA30FEBCFD9C2825F,
    0x4510BDF882D9D721,
    0x0A7D3DA94ECDE8B8,
    0x043B27B61342F01D,
    0xD0327A782CDE513B,
    0xE9AA5979A6401C4E,
    0x9B4C7B7180EDB27F,
    0xBAC0495FF8829A45,
    0x8B2B01E7A1DC7FBF,
    0xEF60E8078F56BFED,
)


def render_pgm(field_path, out_path) -> None:
    """Write a 2-D NSF1 field as an ASCII P2 image.

    Pixels are floor(255 (v + M) / (2M) + 1/2) with M = max|v| (M = 1 for the
    zero field), i.e. rounding half away from zero: 0 maps to 128.  Rows run
    from the largest second coordinate down, columns along the first.
    """
    u = read_field(field_path)
    if u.grid.d != 2:
        raise NotTwoDimensional(f"{field_path}: can only render d = 2 fields, got d = {u.grid.d}")
    pix = pgm_pixels(u.values)
    n = u.grid.n
    lines = ["P2", f"{n} {n}", "255"]
    lines.extend(" ".join(str(int(v)) for v in row) for row in pix)
    Path(out_path).write_text("\n".join(lines) + "\n", encoding="ascii")


def pgm_pixels(values: np.ndarray) -> np.ndarray:
    m = float(np.max(np.abs(values)))
    if m == 0.0:
        m = 1.0
    scaled = np.floor(255.0 * (values + m) / (2.0 * m) + 0.5)
    img = np.clip(scaled, 0, 255).astype(np.int64)
    return img.T[::-1]


def rng_fingerprint(seed: int = 0, n: int = 10) -> tuple:
    return tuple(int(x) for x in np.random.default_rng(seed).bit_generator.random_raw(n))


# ---------------------------------------------------------------------------


def _load(args):
    if args.preset:
        return preset(args.preset).config
    if not args.config:
        raise ConfigError([])
    return parse_config(Path(args.config).read_text(encoding="ascii"))


def _outdir(args, cfg) -> Path:
    out = Path(args.out or cfg["output.dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_validate(args) -> int:
    cfg = _load(args)
    for w in cfg.warnings:
        print(f"warning: {w}", file=sys.stderr)
    sys.stdout.write(format_config(cfg))
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg = _load(args)
    eps = args.eps if args.eps is not None else cfg.eps_list[-1]
    params = cfg.system_params(eps)
    grid = cfg.grid(eps)
    spec = cfg.symmetry(grid)
    opts = cfg.solve_options()
    init = initial_state(grid, spec, cfg.seeds(eps), params, opts.seed, cfg["seeds.noise"], opts.proj_tol)
    res = minimize(params, grid, spec, init, opts)
    out = _outdir(args, cfg)
    for i, u in enumerate(res.state):
        if cfg["output.fields"]:
            write_field(out / f"u{i + 1}.nsf", u)
            if cfg["output.pgm"] and grid.d == 2:
                render_pgm(out / f"u{i + 1}.nsf", out / f"u{i + 1}.pgm")
    if cfg["output.log"]:
        write_log(out / "log.csv", res.history)
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        ell = params.ell
        w.writerow(["eps", "energy", "grad_norm", "iters", "status"] + [f"nehari_resid_{i + 1}" for i in range(ell)] + [f"norm_sq_{i + 1}" for i in range(ell)])
        norms = [norm_sq(u.values, grid, eps) for u in res.state]
        w.writerow([format_float(eps), format_float(res.energy), format_float(res.grad_norm), res.iters, res.status] + [format_float(x) for x in res.nehari_resid] + [format_float(x) for x in norms])
    print(f"eps={eps:g} energy={res.energy:.12g} grad_norm={res.grad_norm:.3e} iters={res.iters} status={res.status}")
    return EXIT_OK if res.status == CONVERGED else EXIT_SOLVER


def cmd_sweep(args) -> int:
    cfg = _load(args)
    warm = False if args.cold else None
    threads = 1
    if args.parallel:
        if not args.cold:
            print("error: --parallel needs --cold (warm starts are sequential)", file=sys.stderr)
            return EXIT_INVALID
        threads = int(os.environ.get("NSPIKES_THREADS", "0") or 0) or (os.cpu_count() or 1)

    def progress(row):
        print(f"eps={row.eps:g} energy={row.energy:.12g} iters={row.iters} status={row.status}", flush=True)

    table = epsilon_sweep(cfg, warm=warm, threads=threads, progress=progress)
    out = _outdir(args, cfg)
    table.write_csv(out / "sweep.csv")
    if cfg["output.fields"]:
        for r in table.rows:
            if r.result is None:
                continue
            for i, u in enumerate(r.result.state):
                write_field(out / f"eps{r.eps:g}_u{i + 1}.nsf", u)
    if args.preset:
        for c in check_expectations(preset(args.preset).expectations, table_rows(table)):
            print(f"{'PASS' if c.passed else 'FAIL'}  {c.expectation.observable} {c.expectation.comparator} {c.expectation.bound}  [{c.detail}]")
    return EXIT_OK if all(r.status == CONVERGED for r in table.rows) else EXIT_SOLVER


def cmd_reference(args) -> int:
    from .reference import radial_ground_state

    cfg = _load(args)
    params = cfg.system_params()
    out = _outdir(args, cfg)
    with open(out / "levels.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["component", "mu", "N", "h", "c_R", "c_R_minus_4", "truncation_diff"])
        for i, mu in enumerate(params.mu):
            prof = radial_ground_state(cfg.d, params.p, float(mu), args.rmax, args.h)
            short = radial_ground_state(cfg.d, params.p, float(mu), args.rmax - 4.0, args.h)
            prof.write_csv(out / f"radial_u{i + 1}.csv")
            prof.write_nsf1(out / f"radial_u{i + 1}.nsf")
            w.writerow([i + 1, format_float(float(mu)), cfg.d, format_float(args.h), format_float(prof.energy), format_float(short.energy), format_float(short.energy - prof.energy)])
            print(f"c_{i + 1} = {prof.energy:.12g}  (R_max={args.rmax:g}, h={args.h:g})")
    return EXIT_OK


def cmd_render(args) -> int:
    render_pgm(args.field, args.output)
    return EXIT_OK


def cmd_selftest(args) -> int:
    from . import selftest

    ok = selftest.run(print)
    return EXIT_OK if ok else EXIT_SOLVER


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nspikes", description="Least-energy solutions of competitive elliptic systems with symmetry.")
    sub = ap.add_subparsers(dest="command", required=True)

    def with_config(p):
        g = p.add_mutually_exclusive_group()
        g.add_argument("--config", help="configuration file (key = value lines)")
        g.add_argument("--preset", help="shipped preset name")
        p.add_argument("--out", help="output directory (overrides output.dir)")
        return p

    with_config(sub.add_parser("validate", help="parse and print the full configuration"))
    p = with_config(sub.add_parser("solve", help="minimise at one epsilon"))
    p.add_argument("--eps", type=float, help="epsilon (default: last sweep.eps entry)")
    p = with_config(sub.add_parser("sweep", help="epsilon sweep"))
    p.add_argument("--cold", action="store_true", help="cold start every row")
    p.add_argument("--parallel", action="store_true", help="run cold rows on NSPIKES_THREADS threads")
    p = with_config(sub.add_parser("reference", help="radial single-equation levels"))
    p.add_argument("--h", type=float, default=1 / 32)
    p.add_argument("--rmax", type=float, default=16.0)
    p = sub.add_parser("render", help="NSF1 field to PGM")
    p.add_argument("field")
    p.add_argument("output")
    sub.add_parser("selftest", help="run the built-in invariant checks")
    return ap


COMMANDS = {
    "validate": cmd_validate,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "reference": cmd_reference,
    "render": cmd_render,
    "selftest": cmd_selftest,
}


def run(command: str, argv: list[str]) -> int:
    return main([command, *argv])


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        msg = "; ".join(str(i) for i in exc.issues) or "need --config or --preset"
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_INVALID
    except InvalidParams as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (OSError, ValueError, NotTwoDimensional) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NspikesError as exc:
        if exc.code in ("UnknownPreset",):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INVALID
        print(f"solver failure ({exc.code}): {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
