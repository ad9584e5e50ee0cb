import numpy as np
import pytest
from hypothesis import given, strategies as st

from nspikes.config import format_config, parse_config
from nspikes.errors import ConfigError

MINIMAL = "params.ell = 2\ngrid.d = 2\ngrid.L = 1\ngrid.h = 0.125\n"


def codes(text):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    return {i.code for i in exc.value.issues}


def test_defaults_filled():
    cfg = parse_config(MINIMAL)
    assert cfg["params.p"] == 4.0
    assert cfg["params.mu"] == (1.0, 1.0)
    assert cfg["params.lambda12"] == cfg["params.lambda21"] == -1.0
    assert cfg["params.alpha12"] == 2.0
    assert cfg["symmetry.preset"] == "trivial"
    assert cfg["sweep.eps"] == (1.0,)
    assert cfg["sweep.chi_radius"] == pytest.approx(0.99)
    assert cfg["solver.grad_tol"] == 1e-6
    assert cfg["seeds.u1"] == ((0.0, 0.0, 1.0, 1.0),)


def test_mirrored_entries():
    cfg = parse_config(MINIMAL + "params.lambda21 = -3\nparams.alpha12 = 1.5\n")
    assert cfg["params.lambda12"] == -3.0
    assert cfg["params.alpha21"] == 2.5
    sp = cfg.system_params()
    assert sp.beta[0, 1] == 2.5 and sp.alpha[1, 0] == 2.5


def test_comments_blank_lines_and_duplicates():
    cfg = parse_config("# header\n\n" + MINIMAL + "grid.h = 0.25  # coarser\n")
    assert cfg["grid.h"] == 0.25
    assert len(cfg.warnings) == 1 and "duplicate" in cfg.warnings[0]


@pytest.mark.parametrize(
    "extra, code",
    [
        ("grid.hh = 1\n", "UnknownKey"),
        ("params.lambda13 = -1\n", "UnknownKey"),
        ("params.lambda11 = -1\n", "UnknownKey"),
        ("grid.L = one\n", "TypeError"),
        ("no equals sign\n", "TypeError"),
        ("grid.mask = hexagon\n", "TypeError"),
        ("params.lambda12 = 1\n", "NonCompetitiveLambda"),
        ("params.mu = 1,-1\n", "NonPositiveMu"),
        ("sweep.eps = 0.1,0\n", "NonPositiveEpsilon"),
        ("solver.armijo = 2\n", "ArmijoOutOfRange"),
        ("symmetry.preset = c4\nsymmetry.phi1 = 1,1\n", "NotHomomorphism"),
        ("seeds.u1 = 0,0\n", "TypeError"),
    ],
)
def test_errors(extra, code):
    assert code in codes(MINIMAL + extra)


def test_missing_required():
    assert codes("params.ell = 1\n") == {"MissingRequired"}


def test_all_errors_reported_together():
    c = codes("grid.hh = 1\nparams.p = x\n")
    assert c == {"UnknownKey", "TypeError", "MissingRequired"}


def test_grid_follows_eps():
    cfg = parse_config(MINIMAL + "grid.h_over_eps = 0.1\ngrid.mask = disk\n")
    g = cfg.grid(0.2)
    assert g.cells == 100 and g.mask_kind == "disk"
    assert cfg.grid(0.05).h == pytest.approx(0.005)


def test_seeds_in_eps_units():
    cfg = parse_config(MINIMAL + "seeds.center_units = eps\nseeds.u2 = 1.5,0,1,2; 0,1,0.5\n")
    seeds = cfg.seeds(0.2)
    comp, center, width, amp = seeds[1]
    assert comp == 1 and np.allclose(center, [0.3, 0.0]) and width == pytest.approx(0.2) and amp == 2.0
    assert seeds[2][3] == 1.0 and seeds[2][2] == pytest.approx(0.1)


@given(
    st.floats(2.1, 10, allow_nan=False),
    st.lists(st.floats(0.01, 5), min_size=1, max_size=4),
    st.floats(-9, -0.01),
    st.sampled_from(["box", "disk"]),
    st.booleans(),
)
def test_round_trip(p, eps, lam, mask, warm):
    text = MINIMAL + f"params.p = {p!r}\nsweep.eps = {','.join(repr(e) for e in eps)}\nparams.lambda12 = {lam!r}\ngrid.mask = {mask}\nsweep.warm_start = {warm}\n"
    cfg = parse_config(text)
    again = parse_config(format_config(cfg))
    assert again == cfg
    assert format_config(again) == format_config(cfg)
