import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from killing_cgb import GeometryError
from killing_cgb.killing import EULER, PONTRYAGIN
from killing_cgb.theorems import (
    eta_sequence,
    tagged,
    thm2_bound,
    thm2_ladder,
    verify_balance,
    verify_closure,
    verify_thm3,
)


def test_tagged_handles_non_finite():
    assert tagged(float("inf")) == {"value": None, "provenance": "computed"}
    assert tagged(2.0, "paper") == {"value": 2.0, "provenance": "paper"}


@pytest.mark.parametrize("name", ["eh", "tn"])
def test_closure_is_second_order(name, request):
    reports = verify_closure(request.getfixturevalue(name), n_points=20)
    assert [r.kind for r in reports] == [EULER, PONTRYAGIN]
    for r in reports:
        assert r.passed and abs(r.order - 2.0) < 0.3
        assert r.max_residual_half < r.max_residual


def test_closure_on_identically_zero_form(rot1):
    for r in verify_closure(rot1, n_points=10):
        assert r.passed and r.max_residual_half < 1e-12


def test_closure_rejects_two_dimensional_entry(r2):
    with pytest.raises(GeometryError):
        verify_closure(r2, n_points=2)


@pytest.mark.parametrize("name", ["eh", "tn", "rot2", "rot1"])
def test_balance_at_finite_radii(name, request):
    rep = verify_balance(request.getfixturevalue(name), [0.5, 1.0, 3.0])
    assert rep.passed, [r.residual for r in rep.rows]


def test_balance_boundary_terms(rot2, tn):
    rows = verify_balance(rot2, [1.0, 2.0, 5.0]).rows
    assert all(r.chi_inside == 1 and r.energy_over_8pi2 == 0.0 for r in rows)
    assert all(abs(r.boundary + 1.0) < 1e-10 for r in rows)
    far = verify_balance(tn, [400.0]).rows[0]
    assert abs(far.boundary) < 1e-2


@pytest.mark.parametrize("name", ["rot1", "rot2", "tn"])
def test_energy_identity_on_finite_energy_entries(name, request):
    rep = verify_thm3(request.getfixturevalue(name))
    assert rep.passed
    json.dumps(rep.as_dict(), allow_nan=False)


def test_eta_first_weight():
    seq = eta_sequence(1)
    q = (9 / 11) ** 0.25
    assert seq.eta[0] == pytest.approx((1 - q) * q, rel=1e-15)
    assert seq.closed_form_sum == pytest.approx(seq.eta[0], rel=1e-15)


def test_eta_sum_increases_from_below():
    seq = eta_sequence(200)
    assert np.all(np.diff(seq.partial_sums) > 0)
    assert seq.partial_sums[-1] < 1.0
    assert seq.closed_form_sum == pytest.approx(seq.partial_sums[-1], rel=1e-13)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 400))
def test_weighted_sums_below_geometric_bound(k):
    seq = eta_sequence(k)
    assert np.all(seq.weighted_partial_sums < seq.weighted_bound)
    assert np.all(np.diff(seq.weighted_partial_sums) > 0)


def test_eta_rejects_empty():
    with pytest.raises(ValueError):
        eta_sequence(0)


def test_flat_thm2_constant_is_zero(rot2):
    rep = thm2_bound(rot2, 2.0, 1.0)
    assert rep.lhs == 0.0 and rep.chi == 1 and rep.measured_c == 0.0
    assert rep.annulus_volume == pytest.approx(0.5 * np.pi**2 * (3.0**4 - 2.0**4), rel=1e-9)


def test_thm2_taub_nut_ladder_tightens(tn):
    reps = thm2_ladder(tn, [1.0, 2.0, 4.0])
    lhs = [r.lhs for r in reps]
    assert all(a < b for a, b in zip(lhs, lhs[1:]))
    assert lhs[-1] <= 1.0
    # a constant measured on the ladder bounds every rung
    c = max(r.measured_c for r in reps)
    assert all(r.lhs <= r.chi + c * r.annulus_term + 1e-12 for r in reps)


def test_thm2_rejects_bad_arguments(rot2):
    with pytest.raises(ValueError):
        thm2_bound(rot2, 1.0, 1.0, eta=1.5)
