import math

import numpy as np
import pytest

import satde.de as de
from satde.channels import BEC, BIAWGN, BSC, ChannelFamily, channel_density
from satde.density import (GridSpec, QuantizedDensity, battacharyya, check_combine, delta,
                           is_symmetric)
from satde.de import (FULL_BP, SAT_HARD, SAT_SYM, SAT_TWO_TIER, DEMode, NonMonotoneError,
                      StopRule, de_step, default_config, distance_bound, find_threshold,
                      perturbation_check, prepare_channel, run_de)
from satde.ensembles import DegreeDistribution
from satde.saturation import saturate, symmetric_saturate

REG36 = DegreeDistribution.regular(3, 6)
G = GridSpec.build(1 / 16, 24)


def erasure(grid, x):
    m = np.zeros(grid.bin_count)
    m[grid.center] = x
    return QuantizedDensity(grid, m, 1 - x, 0.0)


def scalar_bec_threshold(dl, dr, tol=1e-9):
    """Bisection on eps for the scalar erasure recursion x -> eps*(1-(1-x)^(dr-1))^(dl-1)."""
    def ok(eps):
        x = eps
        for _ in range(20000):
            nx = eps * (1 - (1 - x) ** (dr - 1)) ** (dl - 1)
            if nx < 1e-12:
                return True
            if abs(nx - x) < 1e-15:
                return False
            x = nx
        return False
    a, b = 0.0, 1.0
    while b - a > tol:
        m = 0.5 * (a + b)
        a, b = (m, b) if ok(m) else (a, m)
    return 0.5 * (a + b)


def test_mode_validation():
    with pytest.raises(ValueError):
        DEMode("bogus")
    with pytest.raises(ValueError):
        DEMode(FULL_BP, "maxproduct")


@pytest.mark.parametrize("eps,w", [(0.4, 0.3), (0.45, 0.05), (0.2, 0.9)])
def test_bec_step_closed_form(eps, w):
    out = de_step(DEMode(), REG36, erasure(G, eps), erasure(G, w))
    assert out.mass_at(0) == pytest.approx(eps * (1 - (1 - w) ** 5) ** 2, abs=1e-14)


@pytest.mark.parametrize("variant", [FULL_BP, SAT_HARD, SAT_SYM])
def test_first_iteration_is_the_prepared_channel(variant):
    mode = DEMode(variant)
    cfg = default_config(REG36, 12.0, G, mode) if mode.saturated else None
    c = channel_density(ChannelFamily(BSC, 0.05), G)
    cu = prepare_channel(mode, c, cfg)
    out = de_step(mode, REG36, cu, delta(G, 0.0), cfg)
    want = {FULL_BP: c, SAT_HARD: saturate(cu, 12.0), SAT_SYM: symmetric_saturate(c, 12.0)}[variant]
    assert np.allclose(out.interior_mass, want.interior_mass, atol=1e-15)


def test_run_de_converges_and_stalls():
    ok = run_de(DEMode(), REG36, ChannelFamily(BEC, 0.40), None, G)
    assert ok.outcome == "target" and ok.last.B < 1e-7 and ok.last.iter <= 500
    bad = run_de(DEMode(), REG36, ChannelFamily(BEC, 0.45), None, G)
    assert bad.outcome == "stall" and bad.last.B > 0.1
    assert [r.iter for r in ok.rows] == list(range(len(ok.rows)))
    assert ok.rows[0].B == 1.0


def test_sathard_reaches_the_floor():
    g = GridSpec.default(25.0)
    mode = DEMode(SAT_HARD)
    cfg = default_config(REG36, 25.0, g, mode)
    t = run_de(mode, REG36, ChannelFamily(BEC, 0.40), cfg, g)
    assert t.outcome == "target"
    assert t.last.B <= 1.1 * math.exp(-12.5)
    assert t.last.B >= math.exp(-12.5) * (1 - 1e-9)
    assert t.last.gamma_p is not None


def test_trace_csv_columns():
    g = GridSpec.default(12.0)
    mode = DEMode(SAT_SYM)
    cfg = default_config(REG36, 12.0, g, mode)
    t = run_de(mode, REG36, ChannelFamily(BSC, 0.05), cfg, g, StopRule(max_iters=4), with_bp=True)
    lines = t.to_csv().splitlines()
    assert lines[0] == "iter,B,H,Pe,gamma_p,gbar_Bm,wasserstein_to_bp"
    assert len(lines) == 6
    assert t.rows[0].wasserstein_to_bp == 0.0


def test_bec_threshold_of_cycle_ensemble():
    dd = DegreeDistribution.regular(2, 4)
    oracle = 1 / (dd.lambda2 * dd.rho_prime_1)
    assert scalar_bec_threshold(2, 4, 1e-6) == pytest.approx(oracle, abs=1e-3)
    r = find_threshold(DEMode(), dd, BEC, None, GridSpec.build(1, 1), tol=1e-3,
                       bracket=(0.25, 0.45), scan_points=3, max_iters=20000)
    assert r.mid == pytest.approx(1 / 3, abs=1e-3)


def test_satsym_outputs_are_symmetric():
    g = GridSpec.build(1 / 16, 24)
    mode = DEMode(SAT_SYM)
    cfg = default_config(REG36, 10.0, g, mode)
    t = run_de(mode, REG36, ChannelFamily(BIAWGN, 0.85), cfg, g, StopRule(max_iters=12), keep_densities=True)
    assert all(is_symmetric(x) for x in t.densities)


def test_sathard_not_worse_than_satsym():
    g = GridSpec.default(15.0)
    cfgs = {}
    traces = {}
    for v in (SAT_HARD, SAT_SYM):
        mode = DEMode(v)
        cfgs[v] = default_config(REG36, 15.0, g, mode)
        traces[v] = run_de(mode, REG36, ChannelFamily(BSC, 0.06), cfgs[v], g,
                           StopRule(stall_window=None, max_iters=30))
    hard, sym = traces[SAT_HARD].B, traces[SAT_SYM].B
    assert np.all(hard <= sym + 5 * g.spacing * math.exp(-7.5))


def test_two_tier_run_uses_both_levels():
    dd = DegreeDistribution.regular(4, 8)
    g = GridSpec.default(20.0)
    mode = DEMode(SAT_TWO_TIER)
    cfg = default_config(dd, 20.0, g, mode, tier_ratio=0.6)
    assert cfg.k_channel > 4.0
    t = run_de(mode, dd, ChannelFamily(BSC, 0.02), cfg, g, StopRule(max_iters=10), keep_densities=True)
    x = t.densities[-1]
    vals, _ = x.support()
    assert np.max(np.abs(vals)) <= cfg.k_var
    assert np.any(np.isclose(np.abs(vals), cfg.k_alt))


def test_min_sum_check_magnitudes():
    rng = np.random.default_rng(4)
    a, b = rng.uniform(-20, 20, 500), rng.uniform(-20, 20, 500)
    for rule in ("minsum", "sumproduct"):
        out = np.abs(check_combine(a, b, rule))
        lo = -np.logaddexp(-np.abs(a), -np.abs(b))
        assert np.all(out >= lo - 1e-9)
        assert np.all(out <= np.minimum(np.abs(a), np.abs(b)) + 1e-12)


def test_nonmonotone_success_region_is_reported(monkeypatch):
    pattern = {0.0: True, 0.25: False, 0.5: True, 0.75: False, 1.0: False}
    monkeypatch.setattr(de, "decodes", lambda mode, dd, kind, p, *a: pattern[round(p, 2)])
    with pytest.raises(NonMonotoneError) as e:
        find_threshold(DEMode(), REG36, BEC, None, G)
    assert e.value.bracket == (0.25, 0.5)


def test_perturbation_example():
    rep = perturbation_check(REG36, ChannelFamily(BEC, 0.4), 10.0, 2)
    assert distance_bound(REG36, 10.0, 2) == pytest.approx(800 * math.exp(-10))
    assert rep.rows[-1].distance <= 800 * math.exp(-10)
    assert rep.ok, rep.failures()
    assert perturbation_check(REG36, ChannelFamily(BEC, 0.4), 10.0, 0).rows == []


def test_perturbation_distance_vanishes_for_large_levels():
    ds = [perturbation_check(REG36, ChannelFamily(BSC, 0.05), k, 3).rows[-1].distance
          for k in (6.0, 10.0, 16.0)]
    assert ds[0] > ds[1] > ds[2]
    assert ds[2] < 1e-4
