import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from killing_cgb.killing import (
    EULER,
    PONTRYAGIN,
    KillingField,
    deformation,
    dk_closed_form,
    exterior_derivative_3form,
    killing_data,
    killing_residual,
    transgression_at,
    transgression_closed_form,
)
from killing_cgb.tensor_core import GeometryError, levi_civita, riemann
from killing_cgb.theorems import identity_residuals


def _scaled_field(field, c):
    return KillingField(f"{c}*{field.name}", lambda x: c * field.X(x),
                        lambda x: c * field.dX(x), lambda x: c * field.d2X(x))


def test_rotation_fields_are_killing(rot1, rot2):
    for e in (rot1, rot2):
        x = e.sample_points(20)
        assert np.max(killing_residual(e.metric, e.killing, x)) < 1e-14


@pytest.mark.parametrize("name", ["eh", "tn"])
def test_instanton_fields_are_killing(name, request):
    e = request.getfixturevalue(name)
    assert np.max(killing_residual(e.metric, e.killing, e.sample_points(100))) < 1e-8


def test_dilation_is_not_killing(rot2):
    dil = KillingField("x d_x", lambda x: np.stack([x[..., 0]] + [0 * x[..., 0]] * 3, axis=-1))
    # symmetric part of nabla X is e1 (x) e1, whose norm is one
    res = killing_residual(rot2.metric, dil, rot2.sample_points(5))
    assert np.allclose(res, 1.0, atol=1e-8)


@pytest.mark.parametrize("name", ["eh", "tn", "rot2"])
def test_identity_suite_small(name, request):
    res = identity_residuals(request.getfixturevalue(name), n_points=60, seed=4)
    assert max(res.values()) < 1e-8, res


def test_killing_data_structure(tn):
    x = tn.sample_points(40, seed=3)
    curv = riemann(tn.metric, x)
    kd = killing_data(tn.metric, tn.killing, x, curv)
    assert np.max(np.abs(kd.nabla_X + np.swapaxes(kd.nabla_X, -1, -2))) < 1e-10
    assert np.array_equal(kd.dX_flat, 2.0 * kd.nabla_X)
    assert np.min(kd.norm_X) > 0


def test_deformation_is_so4_valued_and_abelian(eh):
    x = eh.sample_points(20, seed=5)
    curv = riemann(eh.metric, x)
    kd = killing_data(eh.metric, eh.killing, x, curv)
    K = deformation(eh.metric, kd, curv).K  # [..., p, q, i]
    v = np.random.default_rng(0).normal(size=(20, 4))
    Kv = np.einsum("mpqi,mi->mpq", K, v)
    # lowered on both slots, K(v) is antisymmetric
    assert np.max(np.abs(Kv + np.swapaxes(Kv, -1, -2))) < 1e-12
    # [K, K] = K_i K_j - K_j K_i as endomorphisms, antisymmetrised over the form slots
    endo = np.einsum("mpa,mpqi->maqi", curv.ginv, K)
    comm = np.einsum("mabi,mbcj->macij", endo, endo)
    assert np.max(np.abs(comm - np.swapaxes(comm, -1, -2))) < 1e-12


def test_dk_closed_form_matches_generic(eh):
    x = eh.sample_points(30, seed=8)
    curv = riemann(eh.metric, x)
    kd = killing_data(eh.metric, eh.killing, x, curv)
    dfm = deformation(eh.metric, kd, curv)
    assert np.max(np.abs(dfm.DK - dk_closed_form(kd))) < 1e-10


@pytest.mark.parametrize("kind", [EULER, PONTRYAGIN])
def test_transgression_is_antisymmetric(tn, kind):
    tp = transgression_at(tn.metric, tn.killing, tn.sample_points(10), kind)
    assert tp.antisymmetry_residual() < 1e-14


def test_single_plane_rotation_has_zero_transgression(rot1):
    tp = transgression_at(rot1.metric, rot1.killing, rot1.sample_points(200))
    assert np.max(np.abs(tp.components)) < 1e-10


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 20.0), st.sampled_from([1.0, -1.0]))
def test_transgression_invariant_under_rescaling_field(c, sign):
    from killing_cgb import catalog_metric

    e = catalog_metric("eguchi-hanson")
    x = e.sample_points(3, seed=11)
    base = transgression_at(e.metric, e.killing, x).components
    scaled = transgression_at(e.metric, _scaled_field(e.killing, sign * c), x).components
    assert np.allclose(base, scaled, rtol=1e-9, atol=1e-14)


def test_transgression_rejects_zero_of_field(rot2):
    with pytest.raises(GeometryError):
        transgression_at(rot2.metric, rot2.killing, np.zeros((1, 4)))


@pytest.mark.parametrize("name", ["eh", "tn"])
def test_closed_form_matches_t_quadrature(name, request):
    from killing_cgb.killing import transgression_via_t_integral

    e = request.getfixturevalue(name)
    x = e.sample_points(100, seed=12)
    curv = riemann(e.metric, x)
    kd = killing_data(e.metric, e.killing, x, curv)
    dfm = deformation(e.metric, kd, curv)
    for kind in (EULER, PONTRYAGIN):
        closed = transgression_closed_form(kind, curv, kd).components
        t_int = transgression_via_t_integral(kind, dfm, curv).components
        assert np.max(np.abs(closed - t_int)) < 1e-10


def test_closed_form_agrees_at_single_point(tn):
    x = tn.sample_points(1, seed=2)[0]
    curv = riemann(tn.metric, x)
    kd = killing_data(tn.metric, tn.killing, x, curv)
    generic = transgression_at(tn.metric, tn.killing, x, PONTRYAGIN).components
    closed = transgression_closed_form(PONTRYAGIN, curv, kd).components
    assert np.max(np.abs(generic - closed)) < 1e-12


def _three_form(coeff):
    eps = levi_civita(4)

    def field_(x):
        x = np.atleast_2d(x)
        return coeff(x)[:, None, None, None] * eps[0][None]

    return field_


def test_exterior_derivative_of_constant_form_vanishes():
    x = np.random.default_rng(0).normal(size=(5, 4))
    d = exterior_derivative_3form(_three_form(lambda x: np.full(len(x), 3.0)), x, 1e-3)
    assert np.max(np.abs(d)) < 1e-12


def test_exterior_derivative_of_linear_coefficient():
    # x0 dx1 ^ dx2 ^ dx3 has d = dx0 ^ dx1 ^ dx2 ^ dx3
    x = np.random.default_rng(1).normal(size=(5, 4))
    d = exterior_derivative_3form(_three_form(lambda x: x[:, 0]), x, 1e-3)
    assert np.allclose(d, 1.0, atol=1e-10)
