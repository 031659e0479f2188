import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from killing_cgb.tensor_core import (
    DomainError,
    GeometryError,
    MetricChart,
    TwoFormAlgebra,
    characteristic_densities,
    christoffel,
    curvature_from,
    decomposition_residual,
    hodge_star_2form,
    orthonormal_frame,
    STAR,
    riemann,
)


def _sphere2():
    def g(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1] + (2, 2))
        out[..., 0, 0] = 1.0
        out[..., 1, 1] = np.sin(x[..., 0]) ** 2
        return out

    return MetricChart("sphere2", 2, (0.0, -np.inf), (np.pi, np.inf), g)


def _flat(n):
    return MetricChart(f"flat{n}", n, (-np.inf,) * n, (np.inf,) * n,
                       lambda x: np.broadcast_to(np.eye(n), np.shape(x)[:-1] + (n, n)).copy())


def _central_christoffel(metric, x, h=1e-5):
    n = metric.dimension
    dg = np.zeros((n, n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        dg[k] = (metric.g(x + e) - metric.g(x - e)) / (2 * h)
    ginv = np.linalg.inv(metric.g(x))
    lower = 0.5 * (np.einsum("ilj->lij", dg) + np.einsum("jli->lij", dg) - dg)
    return np.einsum("kl,lij->kij", ginv, lower)


def test_flat_christoffel_vanishes():
    x = np.array([[0.1, -0.3, 2.0, 1.5]])
    assert np.max(np.abs(christoffel(_flat(4), x))) < 1e-12


def test_sphere_christoffel_closed_form():
    x = np.array([np.pi / 3, 0.4])
    gam = christoffel(_sphere2(), x)
    th = np.pi / 3
    assert gam[0, 1, 1] == pytest.approx(-np.sin(th) * np.cos(th), abs=1e-8)
    assert gam[1, 0, 1] == pytest.approx(np.cos(th) / np.sin(th), abs=1e-8)
    assert gam[0, 0, 0] == pytest.approx(0.0, abs=1e-10)


def test_sphere_has_positive_curvature():
    curv = riemann(_sphere2(), np.array([np.pi / 3, 0.4]))
    assert curv.scalar == pytest.approx(2.0, abs=1e-6)


def test_exact_christoffel_matches_difference_oracle(eh):
    x = eh.sample_points(3, seed=5)
    exact = christoffel(eh.metric, x)
    for i in range(3):
        oracle = _central_christoffel(eh.metric, x[i])
        assert np.max(np.abs(exact[i] - oracle)) < 1e-6


@pytest.mark.parametrize("name", ["eh", "tn"])
def test_curvature_symmetries_and_bianchi(name, request):
    entry = request.getfixturevalue(name)
    curv = riemann(entry.metric, entry.sample_points(50, seed=2))
    assert np.max(curv.symmetry_residual()) < 1e-10
    assert np.max(curv.bianchi_residual()) < 1e-10
    assert np.max(np.abs(curv.ricci)) < 1e-10
    assert np.max(decomposition_residual(curv)) < 1e-10


@pytest.mark.parametrize("name", ["eh", "tn"])
def test_self_duality_and_traceless_weyl(name, request):
    entry = request.getfixturevalue(name)
    curv = riemann(entry.metric, entry.sample_points(40, seed=3))
    assert np.max(np.abs(curv.weyl_minus)) < 1e-10
    assert np.max(np.abs(np.trace(curv.weyl_plus, axis1=-2, axis2=-1))) < 1e-10
    # W+ lives on the +1 eigenspace of the star
    assert np.max(np.abs(STAR @ curv.weyl_plus - curv.weyl_plus)) < 1e-10
    assert np.max(np.abs(curv.weyl_plus @ STAR - curv.weyl_plus)) < 1e-10
    w2, wp2, wm2 = curv.weyl_norms_sq()
    assert np.max(np.abs(wm2)) < 1e-10
    assert np.min(wp2) > 0


def test_numeric_chart_fallback_agrees_with_exact(eh):
    numeric = MetricChart("eh-numeric", 4, eh.metric.lower, eh.metric.upper, eh.metric.g,
                          orientation=eh.metric.orientation, length_scale=eh.metric.length_scale)
    x = eh.sample_points(5, seed=9)
    a = riemann(eh.metric, x)
    b = riemann(numeric, x)
    assert not numeric.exact and eh.metric.exact
    assert np.max(np.abs(a.riemann - b.riemann)) < 1e-5 * np.max(np.abs(a.riemann))


def test_domain_error_outside_chart(eh):
    with pytest.raises(DomainError):
        riemann(eh.metric, np.array([0.5, 1.0, 1.0, 1.0]))
    with pytest.raises(DomainError):
        riemann(eh.metric, np.array([2.0, 1.0, 1.0]))


def test_degenerate_metric_raises_geometry_error():
    g = np.zeros((4, 4))
    with pytest.raises(GeometryError):
        orthonormal_frame(g)


def test_hodge_star_on_basis():
    alg = TwoFormAlgebra.at(np.eye(4))
    e12 = np.zeros((4, 4))
    e12[0, 1], e12[1, 0] = 1.0, -1.0
    star = hodge_star_2form(alg, e12)
    expected = np.zeros((4, 4))
    expected[2, 3], expected[3, 2] = 1.0, -1.0
    assert np.allclose(star, expected)


def test_star_eigenspaces_are_three_dimensional():
    vals = np.linalg.eigvalsh(STAR)
    assert np.allclose(np.sort(vals), [-1, -1, -1, 1, 1, 1])


def test_hodge_star_rejects_non_orthonormal_frame():
    alg = TwoFormAlgebra(np.eye(4) * 2.0, np.eye(4))
    with pytest.raises(GeometryError):
        hodge_star_2form(alg, np.zeros(6))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=6, max_size=6))
def test_hodge_star_is_involution(vec):
    alg = TwoFormAlgebra.at(np.eye(4))
    v = np.asarray(vec)
    assert np.allclose(hodge_star_2form(alg, hodge_star_2form(alg, v)), v, atol=1e-12)
    self_dual = v + hodge_star_2form(alg, v)
    assert np.allclose(hodge_star_2form(alg, self_dual), self_dual, atol=1e-12)


def _random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(4, 4)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_densities_invariant_under_linear_change_of_coordinates(seed):
    """Pulling back by an orientation-preserving linear map leaves scalar densities unchanged."""
    from killing_cgb import catalog_metric

    entry = catalog_metric("eguchi-hanson")
    rng = np.random.default_rng(seed)
    x = entry.sample_points(1, seed=seed % 1000)
    g, dg, d2g = entry.metric.derivatives(x)
    A = _random_rotation(rng) @ np.diag(rng.uniform(0.5, 2.0, 4))
    if np.linalg.det(A) < 0:
        A[:, 0] *= -1
    g2 = np.einsum("ia,...ij,jb->...ab", A, g, A)
    dg2 = np.einsum("kc,ia,...kij,jb->...cab", A, A, dg, A)
    d2g2 = np.einsum("kc,ld,ia,...klij,jb->...cdab", A, A, A, d2g, A)
    c1 = curvature_from(g, dg, d2g, entry.metric.orientation)
    c2 = curvature_from(g2, dg2, d2g2, entry.metric.orientation)
    for a, b in zip(characteristic_densities(c1), characteristic_densities(c2)):
        assert np.allclose(a, b, rtol=1e-8, atol=1e-12)
    assert np.allclose(c1.energy_density, c2.energy_density, rtol=1e-8)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.25, 4.0))
def test_energy_density_scales_as_inverse_fourth_power(lam):
    from killing_cgb import catalog_metric

    entry = catalog_metric("taub-nut")
    x = entry.sample_points(4, seed=1)
    base = riemann(entry.metric, x).energy_density
    scaled = riemann(entry.metric.scaled(lam), x).energy_density
    assert np.allclose(scaled, base / lam**4, rtol=1e-9)
