import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from satde.density import (GridSpec, QuantizedDensity, battacharyya, delta, from_atoms,
                           symmetric_from_magnitudes)
from satde.ensembles import DegreeDistribution, lambda_apply, parse_ensemble, rho_apply

G = GridSpec.build(1 / 16, 16)
REG36 = DegreeDistribution.regular(3, 6)
IRR = parse_ensemble("irr: l2=0.3,l3=0.5,l5=0.2 ; r5=0.4,r6=0.6")


def erasure(x):
    m = np.zeros(G.bin_count)
    m[G.center] = x
    return QuantizedDensity(G, m, 1 - x, 0.0)


def test_derived_quantities():
    assert REG36.lambda2 == 0.0 and REG36.rho_prime_1 == 5
    assert REG36.design_rate() == pytest.approx(0.5)
    assert REG36.check_regular_degree == 6 and IRR.check_regular_degree is None
    assert IRR.lambda2 == 0.3 and IRR.lambda3 == 0.5
    assert IRR.d_l_avg == pytest.approx(0.6 + 1.5 + 1.0)
    assert IRR.rho_prime_1 == pytest.approx(0.4 * 4 + 0.6 * 5)
    nv, nc = IRR.node_fractions()
    assert sum(nv.values()) == pytest.approx(1.0) and sum(nc.values()) == pytest.approx(1.0)


def test_validation():
    with pytest.raises(ValueError, match="lambda"):
        DegreeDistribution({2: 0.5, 3: 0.4}, {6: 1.0})
    with pytest.raises(ValueError, match="rho"):
        DegreeDistribution({3: 1.0}, {1: 1.0})
    with pytest.raises(ValueError):
        DegreeDistribution({3: 1.1, 4: -0.1}, {6: 1.0})
    for bad in ("reg:3", "foo:1,2", "irr: l2=0.5 ; r6=1", "irr: x2=1 ; r6=1", "reg3,6"):
        with pytest.raises(ValueError, match="ensemble|lambda|rho"):
            parse_ensemble(bad)


def test_rho_examples():
    dd = REG36
    out = rho_apply(dd, delta(G, math.inf))
    assert out.atom_pos_inf == pytest.approx(1.0)
    assert rho_apply(dd, delta(G, 0)).mass_at(0) == pytest.approx(1.0)
    for x in (0.05, 0.3, 0.7):
        out = rho_apply(dd, erasure(x))
        assert out.atom_pos_inf == pytest.approx((1 - x) ** 5, abs=1e-14)
        assert out.mass_at(0) == pytest.approx(1 - (1 - x) ** 5, abs=1e-14)


def test_lambda_examples():
    dd = DegreeDistribution.regular(3, 6)
    assert lambda_apply(dd, delta(G, 0), delta(G, math.inf)).atom_pos_inf == pytest.approx(1.0)
    assert lambda_apply(dd, delta(G, 3), delta(G, 2)).mass_at(7) == pytest.approx(1.0)
    for eps, w in ((0.4, 0.3), (0.2, 0.9)):
        out = lambda_apply(dd, erasure(eps), erasure(w))
        assert out.mass_at(0) == pytest.approx(eps * w * w, abs=1e-14)


def test_irregular_erasure_mixing():
    x, eps = 0.2, 0.45
    r = rho_apply(IRR, erasure(x))
    w = 1 - IRR.rho(1 - x)
    assert r.mass_at(0) == pytest.approx(w, abs=1e-14)
    out = lambda_apply(IRR, erasure(eps), r)
    assert out.mass_at(0) == pytest.approx(eps * IRR.lam(w), abs=1e-14)


@st.composite
def sym_densities(draw):
    r = draw(st.integers(1, 3))
    mags = draw(st.lists(st.integers(0, 40), min_size=r, max_size=r))
    w = np.array(draw(st.lists(st.floats(0.05, 1.0), min_size=r, max_size=r)))
    inf = draw(st.sampled_from([0.0, 0.2]))
    return symmetric_from_magnitudes(G, np.array(mags) / 16, (1 - inf) * w / w.sum(), inf)


@settings(max_examples=25, deadline=None)
@given(sym_densities(), sym_densities())
def test_variable_side_battacharyya_identity(c, b):
    # supports stay below 2.5, so the degree-5 sum fits inside the grid
    out = lambda_apply(IRR, c, b)
    want = battacharyya(c) * IRR.lam(battacharyya(b))
    assert battacharyya(out) == pytest.approx(want, rel=1e-5, abs=1e-300)


@settings(max_examples=25, deadline=None)
@given(sym_densities())
def test_check_side_battacharyya_bound(x):
    for dd in (REG36, IRR):
        out = rho_apply(dd, x)
        assert battacharyya(out) <= 1 - dd.rho(1 - battacharyya(x)) + 1e-5


def test_check_side_bound_can_fail_without_symmetry():
    # an asymmetric input breaks the bound, so it is asserted only for symmetric ones
    x = from_atoms(G, [0.5, -0.5], [0.5, 0.5])
    out = rho_apply(DegreeDistribution.regular(3, 3), x)
    assert battacharyya(out) > 1 - (1 - battacharyya(x)) ** 2
