import csv
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from killing_cgb.killing import EULER, PONTRYAGIN
from killing_cgb.quadrature import (
    RadialIntegrator,
    angular_grid,
    ball_volume,
    cutoff_profile,
    energy_in_ball,
    radial_profile,
    richardson,
    sphere_integral_3form,
    transgression_field,
    volume_growth,
)

EIGHT_PI2 = 8 * np.pi**2


def test_angular_grid_measures_three_sphere():
    from killing_cgb.catalog import HOPF_BOX

    grid = angular_grid(HOPF_BOX)
    # sin(theta) d theta d phi d psi over the Euler-angle box is 16 pi^2
    assert np.sum(np.sin(grid.nodes[:, 0]) * grid.weights) == pytest.approx(16 * np.pi**2, rel=1e-12)


@pytest.mark.parametrize("s", [0.5, 1.0, 3.0])
def test_flat_ball_volume(rot2, s):
    assert ball_volume(rot2, s).value == pytest.approx(0.5 * np.pi**2 * s**4, rel=1e-10)


def test_flat_geodesic_distance_is_radius(rot2):
    q = RadialIntegrator(rot2)
    assert q.geodesic_distance(2.5) == pytest.approx(2.5, rel=1e-12)
    assert q.rc_at_distance(2.5) == pytest.approx(2.5, rel=1e-12)


def test_eguchi_hanson_total_energy(eh):
    res = energy_in_ball(eh, np.inf)
    assert res.value / EIGHT_PI2 == pytest.approx(1.5, rel=1e-8)
    assert res.error_estimate / EIGHT_PI2 < 1e-8


def test_taub_nut_energy_stable_under_refinement(tn):
    coarse = energy_in_ball(tn, np.inf, n=96).value / EIGHT_PI2
    fine = energy_in_ball(tn, np.inf, n=192).value / EIGHT_PI2
    assert abs(coarse - fine) < 1e-3 * abs(fine)
    assert fine == pytest.approx(1.0, rel=1e-6)


def test_energy_scale_invariant(eh):
    base = energy_in_ball(eh, np.inf).value
    assert energy_in_ball(eh.scaled(3.0), np.inf).value == pytest.approx(base, rel=1e-9)


def test_eguchi_hanson_volume_growth(eh):
    vg = volume_growth(eh)
    assert vg.limit == pytest.approx(np.pi**2 / 4, rel=1e-6)
    assert vg.growth_exponent == pytest.approx(4.0, abs=0.05)


def test_taub_nut_volume_growth_is_cubic(tn):
    vg = volume_growth(tn)
    assert vg.growth_exponent == pytest.approx(3.0, abs=0.2)
    assert vg.limit == 0.0


def test_flat_volume_growth(rot2):
    assert volume_growth(rot2).limit == pytest.approx(np.pi**2 / 2, rel=1e-10)


def test_richardson_removes_inverse_powers():
    s = 2.0 ** np.arange(5)
    vals = 3.0 + 1.0 / s + 0.5 / s**2 - 2.0 / s**3
    value, err = richardson(vals)
    assert value == pytest.approx(3.0, abs=1e-12)


@pytest.mark.parametrize("s", [1.0, 2.0, 5.0])
def test_flat_double_rotation_sphere_integral(rot2, s):
    assert sphere_integral_3form(rot2, transgression_field(rot2), s) == pytest.approx(-1.0, abs=1e-10)


def test_flat_double_rotation_pontryagin_boundary_matches_nut_residue(rot2):
    # a fixed point with rotation weights (a, b) = (1, 1) carries (a^2 + b^2) / (3ab) = 2/3
    value = sphere_integral_3form(rot2, transgression_field(rot2, PONTRYAGIN), 1.0)
    assert value == pytest.approx(-2.0 / 3.0, abs=1e-10)


def test_flat_single_rotation_sphere_integral(rot1):
    assert abs(sphere_integral_3form(rot1, transgression_field(rot1), 2.0)) < 1e-12


def test_eguchi_hanson_boundary_term_approaches_half(eh):
    far = sphere_integral_3form(eh, transgression_field(eh, EULER), 200.0)
    assert far == pytest.approx(-0.5, abs=1e-4)


def test_balance_invariant_under_orientation_flip(eh):
    from killing_cgb.theorems import verify_balance

    flipped = replace(eh, metric=replace(eh.metric, orientation=-eh.metric.orientation))
    # the Euler transgression and the induced boundary orientation both change sign
    a = sphere_integral_3form(eh, transgression_field(eh), 2.0)
    b = sphere_integral_3form(flipped, transgression_field(flipped), 2.0)
    assert a == pytest.approx(b, abs=1e-12)
    assert verify_balance(flipped, [2.0]).passed


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 50.0), st.floats(0.01, 20.0))
def test_cutoff_bounds(inner, width):
    cut = cutoff_profile(inner, inner + width)
    u = np.linspace(0.0, inner + 2 * width, 513)
    vals = cut(u)
    assert np.all((vals >= 0) & (vals <= 1))
    assert np.all(np.diff(vals) <= 1e-15)
    assert cut(inner) == 1.0 and cut(inner + width) == 0.0
    assert cut.sampled_slope() <= cut.derivative_bound * (1 + 1e-9)


def test_cutoff_rejects_empty_interval():
    with pytest.raises(ValueError):
        cutoff_profile(2.0, 1.0)


def test_quadrature_converges_under_refinement(tn):
    # geodesic ball of radius 3: halving the node spacing shrinks the error by far more than 4
    ref = ball_volume(tn, 3.0, n=384).value
    e1 = abs(ball_volume(tn, 3.0, n=24).value - ref)
    e2 = abs(ball_volume(tn, 3.0, n=48).value - ref)
    assert e2 <= e1 / 4 or e2 < 1e-12 * ref


def test_profile_csv(tmp_path, tn):
    prof = radial_profile(tn, 5.0, n_radial=50)
    out = tmp_path / "p.csv"
    prof.to_csv(out)
    rows = list(csv.reader(open(out)))
    assert rows[0] == ["r", "geodesic_r", "shell_volume", "shell_energy"]
    assert len(rows) == 52
    assert prof.geodesic_r[-1] == pytest.approx(5.0, rel=1e-9)
    assert prof.volume_within(5.0) == pytest.approx(ball_volume(tn, 5.0).value, rel=1e-6)
    assert prof.energy_within(5.0) == pytest.approx(energy_in_ball(tn, 5.0).value, rel=1e-6)
