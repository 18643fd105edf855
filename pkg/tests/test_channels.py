import math

import numpy as np
import pytest
from scipy.optimize import brentq

from satde.channels import (BEC, BIAWGN, BSC, ChannelFamily, GridTooNarrowError,
                            battacharyya_closed_form, channel_density, channel_entropy,
                            param_for_entropy, parse_channel)
from satde.density import GridSpec, battacharyya, degradation_gap, is_degraded, is_symmetric

GRID = GridSpec.build(1 / 16, 24)


def h2(p):
    return 0.0 if p in (0, 1) else -(p * math.log2(p) + (1 - p) * math.log2(1 - p))


def test_bsc_atoms_on_matching_grid():
    L = math.log(9)
    g = GridSpec.build(L / 16, 12)
    a = channel_density(ChannelFamily(BSC, 0.1), g)
    assert a.mass_at(g.snap(L)) == pytest.approx(0.9, abs=1e-12)
    assert a.mass_at(-g.snap(L)) == pytest.approx(0.1, abs=1e-12)
    assert a.support()[1].size == 2


def test_bsc_off_grid_split():
    a = channel_density(ChannelFamily(BSC, 0.1), GRID)
    lo = math.floor(math.log(9) / GRID.spacing) * GRID.spacing
    vals, ms = a.support()
    assert set(np.round(np.abs(vals) / GRID.spacing)) == {round(lo / GRID.spacing), round(lo / GRID.spacing) + 1}
    assert battacharyya(a) == pytest.approx(0.6, abs=1e-14)
    assert ms[vals < 0].sum() == pytest.approx(0.1, abs=1e-4)
    assert is_symmetric(a)


def test_bec_and_noiseless():
    a = channel_density(ChannelFamily(BEC, 0.3), GRID)
    assert a.atom_pos_inf == pytest.approx(0.7)
    assert a.mass_at(0.0) == pytest.approx(0.3)
    z = channel_density(ChannelFamily(BSC, 0.0), GRID)
    assert z.atom_pos_inf == 1.0


@pytest.mark.parametrize("sigma", [0.7, 0.9, 1.2])
def test_awgn_is_symmetric_unit_mass(sigma):
    a = channel_density(ChannelFamily(BIAWGN, sigma), GRID)
    assert a.total == pytest.approx(1.0, abs=1e-12)
    assert is_symmetric(a)


def test_awgn_grid_too_narrow():
    with pytest.raises(GridTooNarrowError):
        channel_density(ChannelFamily(BIAWGN, 0.3), GRID)
    with pytest.raises(GridTooNarrowError):
        channel_density(ChannelFamily(BSC, 1e-12), GRID)


def test_invalid_parameters():
    for kind, p in ((BEC, 1.2), (BSC, 0.6), (BIAWGN, 0.0), ("foo", 0.1)):
        with pytest.raises(ValueError):
            ChannelFamily(kind, p)


@pytest.mark.parametrize("fam", [ChannelFamily(BEC, 0.42), ChannelFamily(BSC, 0.08),
                                 ChannelFamily(BSC, 0.3), ChannelFamily(BIAWGN, 0.9),
                                 ChannelFamily(BIAWGN, 1.5)])
def test_battacharyya_closed_forms(fam):
    assert battacharyya(channel_density(fam, GRID)) == pytest.approx(battacharyya_closed_form(fam), abs=1e-4)


def test_entropy_inversion():
    assert param_for_entropy(BEC, 0.5) == 0.5
    assert param_for_entropy(BSC, 1.0) == pytest.approx(0.5, abs=1e-9)
    oracle = brentq(lambda p: h2(p) - 0.5, 1e-6, 0.5, xtol=1e-14)
    eps = param_for_entropy(BSC, 0.5)
    assert eps == pytest.approx(oracle, abs=2e-5)
    assert round(eps, 4) == 0.1100
    with pytest.raises(ValueError):
        param_for_entropy(BSC, 1.5)


def test_bsc_entropy_matches_binary_entropy():
    # reference-grid quantization leaves a few 1e-6 of error
    for p in (0.01, 0.11, 0.3):
        assert channel_entropy(BSC, p) == pytest.approx(h2(p), abs=1e-5)


def test_awgn_entropy_round_trip():
    s = param_for_entropy(BIAWGN, 0.5)
    assert channel_entropy(BIAWGN, s) == pytest.approx(0.5, abs=1e-8)


@pytest.mark.parametrize("kind,params", [(BEC, [0.1, 0.3, 0.5]), (BSC, [0.02, 0.1, 0.2]),
                                         (BIAWGN, [0.7, 0.9, 1.3])])
def test_family_is_ordered_by_degradation(kind, params):
    dens = [channel_density(ChannelFamily(kind, p), GRID) for p in params]
    ents = [channel_entropy(kind, p) for p in params]
    assert np.all(np.diff(ents) > 0)
    for a, b in zip(dens, dens[1:]):
        assert is_degraded(a, b)
        assert degradation_gap(a, b) <= 1e-12
        assert degradation_gap(b, a) > 1e-3


def test_parse_channel():
    assert parse_channel("bec:0.45") == (BEC, 0.45)
    assert parse_channel("BiAWGN") == (BIAWGN, None)
    kind, p = parse_channel("bsc@h:0.5")
    assert kind == BSC and p == pytest.approx(0.11, abs=1e-3)
    for bad in ("qsc:0.1", "bsc:x", "bsc:0.7"):
        with pytest.raises(ValueError):
            parse_channel(bad)
