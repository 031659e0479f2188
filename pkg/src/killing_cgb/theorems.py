"""Drivers that combine the lower modules into end-to-end checks.

Every report is a plain dataclass with an ``as_dict`` method; numbers in
those dictionaries are wrapped as ``{"value": x, "provenance": tag}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .catalog import COMPUTED, DERIVED, PAPER, TRIVIAL
from .killing import (
    EULER,
    PONTRYAGIN,
    covariant_constancy_residual,
    deformation,
    exterior_derivative_3form,
    killing_data,
    killing_residual,
    null_vector_residual,
    trace_k_dk,
    trace_k_dk_closed_form,
    transgression_closed_form,
    transgression_form,
    transgression_via_t_integral,
)
from .probes import ProbeConfig, RadialBalls, ball_model, curvature_radius
from .quadrature import (
    DEFAULT_RADIAL_NODES,
    RadialIntegrator,
    ball_volume,
    energy_in_ball,
    richardson,
    sphere_integral_3form,
    transgression_field,
    volume_growth,
)
from .tensor_core import GeometryError, characteristic_densities, decomposition_residual, riemann

EIGHT_PI2 = 8.0 * np.pi**2
EUCLIDEAN_AVR = 0.5 * np.pi**2


def tagged(value, provenance: str = COMPUTED):
    if value is None:
        return None
    v = float(value)
    return {"value": v if np.isfinite(v) else None, "provenance": provenance}


def _require_4d(entry):
    if entry.metric.dimension != 4:
        raise GeometryError(f"{entry.name}: transgression checks need a four-dimensional chart")


def chi_inside(entry, rc: float) -> int:
    """Sum of Euler characteristics of zero-set components enclosed by the orbit at ``rc``."""
    return sum(
        c.euler_characteristic
        for c in entry.zero_set
        if c.radial_value is not None and c.radial_value <= rc
    )


# ------------------------------------------------------------------ closure


@dataclass
class ClosureReport:
    kind: str
    h: float
    max_residual: float  # at step h
    max_residual_half: float  # at step h/2
    max_density: float
    order: float
    passed: bool

    def as_dict(self):
        return {
            "kind": self.kind,
            "h": tagged(self.h, TRIVIAL),
            "max_residual": tagged(self.max_residual),
            "max_residual_half": tagged(self.max_residual_half),
            "max_density": tagged(self.max_density),
            "order": tagged(self.order, DERIVED),
            "passed": self.passed,
        }


def verify_closure(entry, n_points: int = 100, h: Optional[float] = None, tol: float = 1e-8,
                   seed: int = 0, order_window: float = 0.3) -> list:
    """Compare ``d TP`` with the characteristic density at sample points under stencil halving.

    A kind passes when the estimated order is ``2 +- order_window`` or the
    residual at ``h/2`` is already below ``tol`` (identically vanishing forms).
    """
    _require_4d(entry)
    h = 2e-3 * entry.metric.length_scale if h is None else h
    x = entry.sample_points(n_points, seed)
    curv = riemann(entry.metric, x)
    euler, pont = characteristic_densities(curv)
    scale = curv.orientation * curv.vol_density
    out = []
    for kind, dens in ((EULER, euler), (PONTRYAGIN, pont)):
        field_ = transgression_field(entry, kind)
        res = []
        for step in (h, 0.5 * h):
            d = exterior_derivative_3form(field_, x, step) / scale
            res.append(float(np.max(np.abs(d - dens))))
        order = float(np.log2(res[0] / res[1])) if res[1] > 0 and res[0] > 0 else float("nan")
        passed = res[1] < tol or (np.isfinite(order) and abs(order - 2.0) <= order_window)
        out.append(ClosureReport(kind, h, res[0], res[1], float(np.max(np.abs(dens))), order, bool(passed)))
    return out


# ------------------------------------------------------------------ identities


def _max_abs(a, axes):
    return np.max(np.abs(a), axis=axes)


def identity_residuals(entry, n_points: int = 1000, seed: int = 0, chunk: int = 250) -> dict:
    """Worst-case residual of each pointwise algebraic identity over random sample points.

    Keys: ``killing``, ``hessian_identity``, ``covariant_constancy``,
    ``null_vector``, ``trace_k_dk``, ``norm_decomposition`` and, per
    polynomial kind, ``closed_form_<kind>`` and ``t_integral_<kind>``.
    """
    _require_4d(entry)
    pts = entry.sample_points(n_points, seed)
    worst: dict = {}

    def keep(key, arr):
        worst[key] = max(worst.get(key, 0.0), float(np.max(arr)))

    for start in range(0, n_points, chunk):
        x = pts[start:start + chunk]
        curv = riemann(entry.metric, x)
        kd = killing_data(entry.metric, entry.killing, x, curv)
        dfm = deformation(entry.metric, kd, curv)
        keep("killing", killing_residual(entry.metric, entry.killing, x))
        keep("hessian_identity", _max_abs(kd.nabla2_X - kd.nabla2_X_direct, (-1, -2, -3)))
        keep("covariant_constancy", covariant_constancy_residual(kd, dfm))
        keep("null_vector", null_vector_residual(kd, dfm))
        keep("trace_k_dk", _max_abs(trace_k_dk(curv, dfm) - trace_k_dk_closed_form(curv, kd), (-1, -2, -3)))
        keep("norm_decomposition", decomposition_residual(curv))
        for kind in (EULER, PONTRYAGIN):
            generic = transgression_form(kind, dfm, curv).components
            closed = transgression_closed_form(kind, curv, kd).components
            t_int = transgression_via_t_integral(kind, dfm, curv).components
            keep(f"closed_form_{kind}", _max_abs(generic - closed, (-1, -2, -3)))
            keep(f"t_integral_{kind}", _max_abs(closed - t_int, (-1, -2, -3)))
    return worst


# ------------------------------------------------------------------ balance


@dataclass
class BalanceRow:
    s: float
    energy_over_8pi2: float
    chi_inside: int
    boundary: float
    residual: float

    def as_dict(self):
        return {
            "s": tagged(self.s, TRIVIAL),
            "energy_over_8pi2": tagged(self.energy_over_8pi2),
            "chi_inside": tagged(self.chi_inside, PAPER),
            "boundary_term": tagged(self.boundary),
            "residual": tagged(self.residual),
        }


@dataclass
class BalanceReport:
    entry: str
    rows: list
    tol: float

    @property
    def passed(self) -> bool:
        return all(abs(r.residual) < self.tol for r in self.rows)

    def as_dict(self):
        return {"entry": self.entry, "tol": tagged(self.tol, TRIVIAL), "passed": self.passed,
                "rows": [r.as_dict() for r in self.rows]}


def verify_balance(entry, s_list, tol: float = 1e-6, n: int = DEFAULT_RADIAL_NODES) -> BalanceReport:
    """``(1/8 pi^2) E(s) - chi(inside) - (sphere integral of TP_chi)`` at each geodesic radius."""
    _require_4d(entry)
    q = RadialIntegrator(entry)
    tp = transgression_field(entry, EULER)
    rows = []
    for s in s_list:
        rc = q.rc_at_distance(float(s), n)
        e = energy_in_ball(entry, float(s), n).value / EIGHT_PI2
        chi = chi_inside(entry, rc)
        bnd = sphere_integral_3form(entry, tp, float(s), rc=rc)
        rows.append(BalanceRow(float(s), e, chi, bnd, e - chi - bnd))
    return BalanceReport(entry.name, rows, tol)


# ------------------------------------------------------------------ energy identity


@dataclass
class Thm3Report:
    entry: str
    energy_over_8pi2: float
    energy_error: float
    energy_ladder: list
    chi: int
    avr: float
    avr_extrapolated: float
    avr_error: float
    growth_exponent: float
    volume_ratios: list
    tol: float
    provenance: dict = field(default_factory=dict)

    @property
    def lhs(self) -> float:
        return self.energy_over_8pi2

    @property
    def rhs(self) -> float:
        return self.chi - self.avr / EUCLIDEAN_AVR

    @property
    def passed(self) -> bool:
        return abs(self.lhs - self.rhs) < self.tol

    def as_dict(self):
        return {
            "entry": self.entry,
            "claim": "energy/(8 pi^2) = sum chi - lim Vol B(s) / (pi^2 s^4 / 2)",
            "lhs": tagged(self.lhs),
            "rhs": tagged(self.rhs),
            "difference": tagged(self.lhs - self.rhs),
            "tol": tagged(self.tol, TRIVIAL),
            "passed": self.passed,
            "chi": tagged(self.chi, self.provenance.get("chi", TRIVIAL)),
            "energy_quadrature_error": tagged(self.energy_error),
            "energy_ladder": [tagged(v) for v in self.energy_ladder],
            "avr": tagged(self.avr),
            "avr_extrapolated": tagged(self.avr_extrapolated),
            "avr_richardson_error": tagged(self.avr_error),
            "avr_over_euclidean": tagged(self.avr / EUCLIDEAN_AVR),
            "growth_exponent": tagged(self.growth_exponent),
            "volume_ratios": [tagged(v) for v in self.volume_ratios],
            "expected": {k: tagged(v.value, v.provenance) for k, v in self.provenance.get("known", {}).items()},
        }


def verify_thm3(entry, tol: float = 0.01, n: int = DEFAULT_RADIAL_NODES, s0: Optional[float] = None,
                rungs: int = 5) -> Thm3Report:
    L = entry.metric.length_scale * entry.metric.metric_scale
    total = energy_in_ball(entry, np.inf, n)
    s0 = 10.0 * L if s0 is None else s0
    radii = s0 * 2.0 ** np.arange(rungs)
    ladder = [energy_in_ball(entry, s, n).value / EIGHT_PI2 for s in radii]
    vg = volume_growth(entry, s0, 2.0, rungs, n)
    prov = {"chi": entry.known["chi"].provenance if "chi" in entry.known else TRIVIAL, "known": entry.known}
    return Thm3Report(
        entry=entry.name,
        energy_over_8pi2=total.value / EIGHT_PI2,
        energy_error=total.error_estimate / EIGHT_PI2,
        energy_ladder=ladder,
        chi=entry.chi_total,
        avr=vg.limit,
        avr_extrapolated=vg.extrapolated,
        avr_error=vg.error,
        growth_exponent=vg.growth_exponent,
        volume_ratios=list(vg.ratios),
        tol=tol,
        provenance=prov,
    )


# ------------------------------------------------------------------ iteration weights


@dataclass
class EtaSequence:
    k: int
    eta: np.ndarray
    partial_sums: np.ndarray
    closed_form_sum: float
    weighted_partial_sums: np.ndarray  # sum (3/4)^i eta_i^-4
    weighted_bound: float  # closed-form sum of the full geometric series

    @property
    def sum_deviation(self) -> float:
        return abs(self.closed_form_sum - 1.0)

    def as_dict(self):
        return {
            "k": self.k,
            "eta_first": tagged(self.eta[0], TRIVIAL),
            "sum_direct": tagged(self.partial_sums[-1]),
            "sum_closed_form": tagged(self.closed_form_sum, DERIVED),
            "sum_deviation_from_one": tagged(self.sum_deviation, DERIVED),
            "weighted_sum": tagged(self.weighted_partial_sums[-1]),
            "weighted_bound": tagged(self.weighted_bound, DERIVED),
        }


def eta_sequence(k: int) -> EtaSequence:
    """``eta_i = c q^i`` for ``i = 1..k`` with ``q = (9/11)^(1/4)`` and ``c = 1 - q``."""
    if k < 1:
        raise ValueError("k must be at least 1")
    q = (9.0 / 11.0) ** 0.25
    c = (11.0**0.25 - 9.0**0.25) / 11.0**0.25
    i = np.arange(1, k + 1)
    eta = c * q**i
    weighted = 0.75**i * eta**-4.0
    ratio = 0.75 / q**4  # = 11/12
    closed = c * q * (1.0 - q**k) / (1.0 - q)
    bound = c**-4 * ratio / (1.0 - ratio)
    return EtaSequence(k, eta, np.cumsum(eta), float(closed), np.cumsum(weighted), float(bound))


# ------------------------------------------------------------------ annulus energy bound


@dataclass
class Thm2Report:
    entry: str
    t: float
    s: float
    eta: float
    lhs: float
    chi: int
    annulus_volume: float
    annulus_term: float  # s^-4 |B(t+s) \ B(t)|
    measured_c: float
    first_estimate_integral: float  # eta^-1 s^-1 int (r_R^s)^-3 over the cutoff annulus

    def as_dict(self):
        return {
            "entry": self.entry,
            "t": tagged(self.t, TRIVIAL),
            "s": tagged(self.s, TRIVIAL),
            "eta": tagged(self.eta, TRIVIAL),
            "lhs_energy_over_8pi2": tagged(self.lhs),
            "chi_inside": tagged(self.chi, PAPER),
            "annulus_volume": tagged(self.annulus_volume),
            "annulus_term": tagged(self.annulus_term),
            "measured_c": tagged(self.measured_c),
            "first_estimate_integral": tagged(self.first_estimate_integral),
        }


def thm2_bound(entry, t: float, s: float, eta: float = 1.0, cfg: ProbeConfig = ProbeConfig(),
               n_annulus: int = 8) -> Thm2Report:
    """Smallest ``C`` with ``E(B(t))/8 pi^2 <= chi + C s^-4 |B(t+s) \\ B(t)|`` about the centre orbit."""
    if not (t > 0 and s > 0 and 0 < eta <= 1):
        raise ValueError("need t > 0, s > 0 and 0 < eta <= 1")
    q = RadialIntegrator(entry)
    rc_t = q.rc_at_distance(t)
    lhs = energy_in_ball(entry, t).value / EIGHT_PI2 if entry.metric.dimension == 4 else 0.0
    chi = chi_inside(entry, rc_t)
    ann = ball_volume(entry, t + s).value - ball_volume(entry, t).value
    term = ann / s**4
    excess = lhs - chi
    measured = max(0.0, excess / term) if term > 0 else float("inf")

    # first estimate: integral of (r_R^s)^-3 over distances [t + s eta/3, t + 2 s eta/3]
    a, b = t + s * eta / 3.0, t + 2.0 * s * eta / 3.0
    z, w = np.polynomial.legendre.leggauss(n_annulus)
    u = 0.5 * (b - a) * (z + 1) + a
    w = 0.5 * (b - a) * w
    model = ball_model(entry, cfg, b + s)
    integral = 0.0
    for ui, wi in zip(u, w):
        rc = q.rc_at_distance(ui)
        p = entry.radial.point(rc)[0]
        r = curvature_radius(entry, p, s, cfg, model if isinstance(model, RadialBalls) else None).value
        integral += wi * r**-3.0 * _orbit_area(q, rc)
    return Thm2Report(entry.name, t, s, eta, lhs, chi, ann, term, measured, integral / (eta * s))


def _orbit_area(q: RadialIntegrator, rc: float) -> float:
    """``dVol / du`` at the orbit ``rc`` (orbit volume for unit-speed radial curves)."""
    return float(q.orbit_volume(rc)[0])


def thm2_ladder(entry, s_values, t_factor: float = 2.0, cfg: ProbeConfig = ProbeConfig()) -> list:
    return [thm2_bound(entry, t_factor * s, s, 1.0, cfg) for s in s_values]


def energy_limit(entry, s0: float, rungs: int = 5, n: int = DEFAULT_RADIAL_NODES):
    """Richardson extrapolation of ``E(B(s))/8 pi^2`` over ``s_k = s0 2^k``."""
    vals = [energy_in_ball(entry, s0 * 2.0**k, n).value / EIGHT_PI2 for k in range(rungs)]
    return richardson(vals)
