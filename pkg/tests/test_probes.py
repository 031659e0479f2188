import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from killing_cgb import catalog_metric, hyperbolic_space
from killing_cgb.catalog import flat_r4_translation
from killing_cgb.probes import (
    ProbeConfig,
    ball_model,
    curvature_maximal_function,
    curvature_radius,
    energy_radius,
    excised_variation,
    local_variation,
    maximal_function,
    probe,
    weak_estimate_check,
)

CFG = ProbeConfig()
SMALL = ProbeConfig(n_angular=512)


@pytest.fixture(scope="module")
def hyp():
    return hyperbolic_space(4.0)


@pytest.fixture(scope="module")
def eh_model(eh):
    return ball_model(eh, CFG)


@pytest.fixture(scope="module")
def tn_model(tn):
    return ball_model(tn, CFG)


def test_flat_radii_equal_scale(rot2):
    p = np.array([0.5, 0.2, -0.1, 0.3])
    assert curvature_radius(rot2, p, 3.0, SMALL).value == 3.0
    assert energy_radius(rot2, p, 3.0, SMALL).value == 3.0
    assert curvature_maximal_function(rot2, p, 3.0, SMALL) == 0.0


def test_hyperbolic_curvature_radius(hyp):
    # |Rm| = 4 everywhere, so the radius is 1/sqrt(4) as soon as s exceeds it
    b = curvature_radius(hyp, np.array([0.0, 0.0, 0.0, 1.0]), 2.0, SMALL)
    assert b.value == pytest.approx(0.5, rel=1e-8)
    assert curvature_radius(hyp, np.array([0.0, 0.0, 0.0, 1.0]), 0.3, SMALL).value == 0.3


def test_hyperbolic_energy_radius(hyp):
    b = energy_radius(hyp, np.array([0.0, 0.0, 0.0, 1.0]), 2.0, SMALL)
    assert b.value == pytest.approx((CFG.eps0 / 16.0) ** 0.25, rel=1e-6)


def test_translation_field_has_unit_variation():
    e = flat_r4_translation()
    v = local_variation(e, np.zeros(4), 2.0, SMALL)
    assert not v.infinite and v.ratio == pytest.approx(1.0, abs=1e-12)


def test_planar_rotation_variation_is_infinite(r2):
    v = local_variation(r2, np.array([1.0, 0.0]), 4.0, SMALL)
    assert v.infinite and v.as_dict()["ratio"] is None


def test_planar_rotation_excised_variation(r2):
    # B(p, 1) minus the unit disc: sup/inf of |x| peaks at |p| = 2 with 3/1
    v = excised_variation(r2, (np.zeros(2), 1.0), 1.0, SMALL)
    assert v.ratio == pytest.approx(3.0, rel=1e-3)


def test_maximal_function_of_constants(eh, eh_model):
    p = eh.sample_points(1, seed=3)[0]
    one = maximal_function(eh, lambda x: np.ones(np.shape(x)[:-1]), p, 2.0, CFG, eh_model, key="one")
    assert one == pytest.approx(1.0, rel=1e-9)
    seven = maximal_function(eh, lambda x: np.full(np.shape(x)[:-1], -7.0), p, 2.0, CFG, eh_model, key="seven")
    assert seven == pytest.approx(7.0, rel=1e-9)


def test_radii_monotone_in_scale(tn, tn_model):
    p = tn.sample_points(1, seed=4)[0]
    rs = [curvature_radius(tn, p, s, CFG, tn_model).value for s in (0.25, 0.5, 1.0, 2.0, 4.0)]
    assert all(a <= b + 1e-9 for a, b in zip(rs, rs[1:]))
    rh = [energy_radius(tn, p, s, CFG, tn_model).value for s in (0.25, 0.5, 1.0, 2.0, 4.0)]
    # bisection brackets are relative to s
    assert all(a <= b + 1e-9 for a, b in zip(rh, rh[1:]))


@pytest.mark.parametrize("name", ["eh", "tn"])
def test_ratios_at_least_one(name, request):
    e = request.getfixturevalue(name)
    model = ball_model(e, CFG)
    for p in e.sample_points(10, seed=6):
        v = local_variation(e, p, 2.0, CFG, model)
        assert v.infinite or v.ratio >= 1.0


@pytest.mark.parametrize("name", ["eh", "tn"])
def test_curvature_radius_scale_covariance(name, request):
    e = request.getfixturevalue(name)
    big = e.scaled(2.0)
    m1, m2 = ball_model(e, CFG), ball_model(big, ProbeConfig(s_cap=2 * CFG.s_cap))
    for p in e.sample_points(5, seed=7):
        r1 = curvature_radius(e, p, 3.0, CFG, m1).value
        r2 = curvature_radius(big, p, 6.0, CFG, m2).value
        assert r2 == pytest.approx(2.0 * r1, rel=1e-6)


@pytest.mark.parametrize("k", [1, 3, 4])
def test_weak_estimate(eh, eh_model, k):
    for p in eh.sample_points(5, seed=8):
        assert weak_estimate_check(eh, p, 2.0, k, CFG, eh_model).passed


@pytest.mark.parametrize("name", ["eh", "tn"])
def test_energy_radius_at_most_twice_curvature_radius(name, request):
    e = request.getfixturevalue(name)
    model = ball_model(e, CFG)
    for p in e.sample_points(10, seed=9):
        r = curvature_radius(e, p, 2.0, CFG, model).value
        rho = energy_radius(e, p, 2.0, CFG, model).value
        assert rho <= 2.0 * r * (1 + 1e-9)
        assert r <= 2.0 and rho <= 2.0


def test_maximal_function_monotone_in_scale(eh, eh_model):
    p = eh.sample_points(1, seed=10)[0]
    vals = [curvature_maximal_function(eh, p, s, CFG, eh_model) for s in (0.25, 0.5, 1.0, 2.0, 4.0)]
    assert all(a <= b * (1 + 1e-12) for a, b in zip(vals, vals[1:]))


def test_variation_ratio_scale_invariant(tn):
    p = tn.sample_points(1, seed=13)[0]
    a = local_variation(tn, p, 2.0, CFG).ratio
    b = local_variation(tn.scaled(2.0), p, 4.0, ProbeConfig(s_cap=20.0)).ratio
    assert b == pytest.approx(a, rel=1e-6)


def test_probe_bundle(eh):
    res = probe(eh, eh.sample_points(1, seed=1)[0], 2.0)
    assert 0 < res.r_curv <= 2.0 and 0 < res.rho <= 2.0
    assert res.m_x >= 1.0
    assert set(res.brackets) == {"r_curv", "rho", "m_x", "m_x_omega_s"}


def test_config_validation():
    with pytest.raises(ValueError):
        ProbeConfig(n_radial=1)
    with pytest.raises(ValueError):
        ProbeConfig(s_cap=0.0)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.3, 3.0))
def test_flat_curvature_radius_is_scale(s):
    e = catalog_metric("flat-r4-rot1")
    assert curvature_radius(e, np.array([0.3, 0.1, 0.2, 0.5]), s, SMALL).value == s
