import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from satde.channels import BSC, ChannelFamily, channel_density
from satde.density import (MIN_SUM, GridSpec, battacharyya, delta, from_atoms, is_degraded,
                           is_symmetric, symmetric_from_magnitudes, wasserstein)
from satde.saturation import (SaturationConfig, SaturationConfigError, check_level, decompose,
                              saturate, symmetric_saturate, two_tier_saturate)

G = GridSpec.build(1 / 16, 24)


def two_level(p, k, grid=G):
    return from_atoms(grid, [k, -k], [1 - p, p])


@st.composite
def sym_densities(draw, grid=G):
    r = draw(st.integers(1, 4))
    mags = draw(st.lists(st.integers(0, grid.center), min_size=r, max_size=r))
    w = np.array(draw(st.lists(st.floats(0.02, 1.0), min_size=r + 1, max_size=r + 1)))
    w /= w.sum()
    inf = float(w[-1]) if draw(st.booleans()) else 0.0
    dm = w[:-1] if inf else w[:-1] / w[:-1].sum()
    return symmetric_from_magnitudes(grid, np.array(mags) * grid.spacing, dm, inf)


# ---------------------------------------------------------------- config

def test_check_level_formula():
    for k, d in ((10.0, 6), (20.0, 6), (15.0, 10)):
        want = 2 * math.atanh(math.tanh(k / 2) ** (d - 1)) if k < 15 else None
        got = check_level(k, d)
        if want is not None:
            assert got == pytest.approx(want, rel=1e-10)
        # large-k asymptote: k - ln(d-1)
        assert got == pytest.approx(k - math.log(d - 1), abs=2 * (d - 1) * math.exp(-k) + 1e-9)
    assert check_level(7.0, 6, MIN_SUM) == 7.0


def test_config_build_defaults():
    cfg = SaturationConfig.build(20.0, 6, G)
    assert cfg.k_check == pytest.approx(20 - math.log(5), abs=1e-6)
    assert cfg.k_channel <= 2 * cfg.k_check - cfg.k_var
    assert cfg.k_channel > 2 * cfg.k_check - cfg.k_var - G.spacing
    assert (cfg.k_channel / G.spacing) == pytest.approx(round(cfg.k_channel / G.spacing))
    tt = SaturationConfig.build(20.0, 8, G, tier_ratio=0.75)
    assert tt.two_tier and tt.k_alt == 15.0
    assert 2 * tt.k_check - tt.k_var >= tt.k_channel + tt.k_alt - 1e-12


def test_config_violations_name_the_field():
    with pytest.raises(SaturationConfigError) as e:
        SaturationConfig.build(3.0, 6)
    assert e.value.field == "k_var"
    with pytest.raises(SaturationConfigError) as e:
        SaturationConfig.build(20.0, 6, k_channel=30.0)
    assert e.value.field == "k_channel"
    with pytest.raises(SaturationConfigError) as e:
        SaturationConfig.build(20.0, 6, tier_ratio=0.4)
    assert e.value.field == "tier_ratio"
    with pytest.raises(SaturationConfigError) as e:
        SaturationConfig.build(20.0, 6, k_channel=10.0, tier_ratio=0.9)
    assert e.value.field == "k_alt"
    with pytest.raises(SaturationConfigError):
        SaturationConfig.build(30.0, 6, G)


# ---------------------------------------------------------------- hard saturation

def test_saturate_examples():
    assert saturate(delta(G, math.inf), 5).mass_at(5) == 1.0
    assert saturate(delta(G, 0), 5).mass_at(0) == 1.0
    L = math.log(9)
    out = saturate(from_atoms(G, [L, -L], [0.9, 0.1]), 1.0)
    assert out.mass_at(1.0) == pytest.approx(0.9, abs=1e-12)
    assert out.mass_at(-1.0) == pytest.approx(0.1, abs=1e-12)
    with pytest.raises(ValueError):
        saturate(delta(G, 0), 30)


def test_hard_saturation_is_not_symmetric():
    out = saturate(channel_density(ChannelFamily(BSC, 0.1), G), 1.0)
    assert not is_symmetric(out)


# ---------------------------------------------------------------- symmetric saturation

def test_symmetric_saturate_examples():
    out = symmetric_saturate(delta(G, math.inf), 1.0)
    assert out.mass_at(-1.0) == pytest.approx(math.exp(-1) / (1 + math.exp(-1)), abs=1e-15)
    assert out.mass_at(-1.0) == pytest.approx(0.26894, abs=1e-5)
    assert symmetric_saturate(delta(G, 0), 3).mass_at(0) == 1.0
    a = symmetric_from_magnitudes(G, [0.5, 2.0], [0.3, 0.7])
    assert np.array_equal(symmetric_saturate(a, 3.0).interior_mass, a.interior_mass)


def test_symmetric_saturate_rejects_asymmetric_input():
    with pytest.raises(ValueError):
        symmetric_saturate(two_level(0.3, 2.0), 1.0)


@settings(max_examples=40, deadline=None)
@given(sym_densities(), st.sampled_from([0.5, 1.0, 3.0, 8.0]))
def test_saturation_chain_and_bounds(a, k):
    hard = saturate(a, k)
    soft = symmetric_saturate(a, k)
    assert is_symmetric(soft)
    assert is_degraded(a, hard)
    assert is_degraded(hard, soft)
    assert wasserstein(a, soft) <= 1 - math.tanh(k / 2) + 5 * G.spacing
    ek = math.exp(-k / 2)
    assert battacharyya(hard) <= battacharyya(a) + ek + 1e-12
    beyond = hard.mass_at(k) + hard.mass_at(-k)
    assert battacharyya(hard) >= ek * beyond - 1e-12


def test_saturated_battacharyya_floor_for_all_mass_beyond():
    a = symmetric_from_magnitudes(G, [10.0], [0.6], 0.4)
    assert battacharyya(saturate(a, 6.0)) >= math.exp(-3.0) - 1e-15


# ---------------------------------------------------------------- two-tier

def test_two_tier_examples():
    cfg = SaturationConfig.build(20.0, 8, G, tier_ratio=0.75)
    mid = (cfg.k_alt + cfg.k_var) / 2
    assert two_tier_saturate(delta(G, mid), cfg).mass_at(cfg.k_alt) == 1.0
    assert two_tier_saturate(delta(G, cfg.k_var + 3), cfg).mass_at(cfg.k_var) == 1.0
    a = symmetric_from_magnitudes(G, [2.0, 9.0], [0.5, 0.5])
    assert np.array_equal(two_tier_saturate(a, cfg).interior_mass, a.interior_mass)
    with pytest.raises(SaturationConfigError):
        two_tier_saturate(a, SaturationConfig.build(20.0, 8, G))


@settings(max_examples=40, deadline=None)
@given(sym_densities(), st.sampled_from([0.55, 0.6, 0.7]))
def test_two_tier_battacharyya_inequalities(a, ratio):
    cfg = SaturationConfig.build(16.0, 6, G, k_channel=1.0, tier_ratio=ratio)
    t = two_tier_saturate(a, cfg)
    bt = battacharyya(t)
    assert bt <= math.exp((cfg.k_var - cfg.k_alt) / 2) * battacharyya(saturate(a, cfg.k_var)) * (1 + 1e-12) + 1e-300
    assert bt <= battacharyya(a) + math.exp(-cfg.k_alt / 2) + 1e-12


# ---------------------------------------------------------------- decomposition

def test_decompose_examples():
    K = 6.0
    d = decompose(two_level(0.2, K), K)
    assert (d.gamma, d.p, d.interior) == (1.0, pytest.approx(0.2), None)
    d = decompose(delta(G, 0), K)
    assert d.gamma == 0.0 and d.interior.mass_at(0) == 1.0
    mix = from_atoms(G, [K, -K, 0.0], [0.45, 0.05, 0.5])
    d = decompose(mix, K)
    assert d.gamma == pytest.approx(0.5) and d.p == pytest.approx(0.1)
    assert d.interior.mass_at(0) == pytest.approx(1.0)
    assert d.q == pytest.approx(math.exp(3) * 0.1) and d.q_tilde == pytest.approx(math.exp(-3) * 0.9)
    with pytest.raises(ValueError):
        decompose(delta(G, 7.0), K)


@settings(max_examples=40, deadline=None)
@given(sym_densities(), st.sampled_from([1.0, 4.0, 9.0]))
def test_decompose_reconstructs(a, k):
    s = saturate(a, k)
    d = decompose(s, k)
    r = d.reconstruct(G)
    assert np.max(np.abs(r.interior_mass - s.interior_mass)) < 1e-12
    assert d.gp + d.gbar_Bm <= battacharyya(s) + 1e-12 or d.gamma == 1.0
