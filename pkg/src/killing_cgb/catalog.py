"""Closed-form example manifolds with Killing fields and known invariants.

Each entry bundles an exact-derivative chart, a Killing field, zero-set
metadata and a radial structure (orbit parametrization about the nut,
bolt or origin) used by the quadrature and probe modules.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
import sympy as sp

from ._symbolic import lambdify_array, metric_functions, vector_field_functions
from .killing import KillingField, killing_residual
from .tensor_core import DEFAULT_TOL, GeometryError, MetricChart, riemann

PAPER = "paper"
TRIVIAL = "trivial"
DERIVED = "derived"
COMPUTED = "computed"

NAMES = ("flat-r4-rot1", "flat-r4-rot2", "eguchi-hanson", "taub-nut", "flat-r2-rot")


class UnknownMetricError(KeyError):
    pass


@dataclass(frozen=True)
class ZeroSetComponent:
    kind: str  # nut | bolt | plane | none
    euler_characteristic: int
    location: str
    radial_value: Optional[float] = None  # radial coordinate of the component, when centred


@dataclass(frozen=True)
class KnownValue:
    value: float
    provenance: str
    note: str = ""


@dataclass(frozen=True)
class RadialStructure:
    """Orbits ``{rc = const}`` of a cohomogeneity-one isometry group.

    ``embed(rc, u)`` maps a radial value and angular parameters ``u`` (shape
    ``(..., 3)``) to chart coordinates and returns ``(x, d x/d rc, d x/d u)``
    with ``d x/d u`` of shape ``(..., 3, n)``.  Radial curves ``u = const``
    are unit-speed-up-to-reparametrization geodesics orthogonal to orbits.
    """

    center: float
    angular_box: tuple  # ((lo, hi, periodic), ...) for the three angles
    embed: Callable
    reference_u: tuple
    length_scale: float = 1.0
    coordinate: Callable = None  # chart point -> rc; first coordinate when omitted

    def rc_of(self, x):
        x = np.asarray(x, dtype=float)
        return x[..., 0] if self.coordinate is None else self.coordinate(x)

    def point(self, rc):
        rc = np.atleast_1d(np.asarray(rc, dtype=float))
        u = np.broadcast_to(np.asarray(self.reference_u, dtype=float), rc.shape + (3,))
        return self.embed(rc, u)[0]


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    params: dict
    metric: MetricChart
    killing: KillingField
    zero_set: tuple
    known: dict
    radial: Optional[RadialStructure]
    ricci_flat: bool = True
    ball_model: str = "radial"  # radial | euclidean | hyperbolic
    description: str = ""
    sample_box: Optional[tuple] = None  # coordinate box for random interior samples
    # flat entries: Euclidean coordinate distance from a point to the zero set of X
    zero_distance: Optional[Callable] = None
    extra: dict = field(default_factory=dict)

    @property
    def chi_total(self) -> int:
        return sum(c.euler_characteristic for c in self.zero_set)

    def scaled(self, lam: float) -> "CatalogEntry":
        """Same entry with metric ``lam**2 g``; lengths scale by ``lam``."""
        from dataclasses import replace

        rad = self.radial
        if rad is not None:
            rad = replace(rad, length_scale=rad.length_scale * lam)
        return replace(self, name=f"{self.name}*{lam:g}", metric=self.metric.scaled(lam), radial=rad)

    def sample_points(self, n: int, seed: int = 0) -> np.ndarray:
        rng = np.random.default_rng(seed)
        lo, hi = (np.asarray(b, dtype=float) for b in self.sample_box)
        return lo + (hi - lo) * rng.random((n, len(lo)))


# ------------------------------------------------------------------ embeddings


def _euler_embed(rc, u):
    rc = np.asarray(rc, dtype=float)
    u = np.asarray(u, dtype=float)
    x = np.concatenate([rc[..., None], u], axis=-1)
    d_rc = np.zeros(x.shape)
    d_rc[..., 0] = 1.0
    d_u = np.zeros(x.shape[:-1] + (3, 4))
    for a in range(3):
        d_u[..., a, a + 1] = 1.0
    return x, d_rc, d_u


def _hopf_embed(rc, u):
    """Round 3-sphere of radius ``rc`` in Cartesian R^4, Euler-angle parameters."""
    rc = np.asarray(rc, dtype=float)[..., None]
    th, ph, ps = (np.asarray(u, dtype=float)[..., k] for k in range(3))
    al, be = 0.5 * (ps + ph), 0.5 * (ps - ph)
    c, s = np.cos(0.5 * th), np.sin(0.5 * th)
    unit = np.stack([c * np.cos(al), c * np.sin(al), s * np.cos(be), s * np.sin(be)], axis=-1)
    d_th = 0.5 * np.stack([-s * np.cos(al), -s * np.sin(al), c * np.cos(be), c * np.sin(be)], axis=-1)
    # d alpha/d phi = 1/2, d beta/d phi = -1/2; d/d psi both +1/2
    d_ph = 0.5 * np.stack([-c * np.sin(al), c * np.cos(al), s * np.sin(be), -s * np.cos(be)], axis=-1)
    d_ps = 0.5 * np.stack([-c * np.sin(al), c * np.cos(al), -s * np.sin(be), s * np.cos(be)], axis=-1)
    d_u = rc[..., None] * np.stack([d_th, d_ph, d_ps], axis=-2)
    return rc * unit, unit, d_u


def _circle_embed(rc, u):
    rc = np.asarray(rc, dtype=float)[..., None]
    ph = np.asarray(u, dtype=float)[..., 0]
    unit = np.stack([np.cos(ph), np.sin(ph)], axis=-1)
    d_u = (rc * np.stack([-np.sin(ph), np.cos(ph)], axis=-1))[..., None, :]
    return rc * unit, unit, d_u


HOPF_BOX = ((0.0, np.pi, False), (0.0, 2 * np.pi, True), (0.0, 4 * np.pi, True))
HOPF_REF = (np.pi / 2, 0.3, 0.7)


def _norm(x):
    return np.linalg.norm(np.asarray(x, dtype=float), axis=-1)


def _plane_distance(x):
    return np.linalg.norm(np.asarray(x, dtype=float)[..., :2], axis=-1)


def _no_zeros(x):
    return np.full(np.shape(x)[:-1], np.inf)


# ------------------------------------------------------------------ metrics


@lru_cache(maxsize=None)
def _flat_chart(dim: int) -> MetricChart:
    coords = sp.symbols(f"x0:{dim}", real=True)
    g, dg, d2g = metric_functions(sp.eye(dim), coords)
    inf = (np.inf,) * dim
    return MetricChart(
        name=f"flat-r{dim}", dimension=dim, lower=tuple(-v for v in inf), upper=inf, g=g, dg=dg, d2g=d2g
    )


def _linear_field(name: str, comps, dim: int) -> KillingField:
    coords = sp.symbols(f"x0:{dim}", real=True)
    X = [comp(coords) for comp in comps]
    f, df, d2f = vector_field_functions(X, coords)
    return KillingField(name, f, df, d2f)


@lru_cache(maxsize=None)
def _eguchi_hanson_parts(a: float):
    r, th, ph, ps = coords = sp.symbols("r theta phi psi", real=True)
    f = 1 - sp.Float(a) ** 4 / r**4
    g = sp.zeros(4, 4)
    g[0, 0] = 1 / f
    g[1, 1] = r**2 / 4
    g[2, 2] = r**2 / 4 * (sp.sin(th) ** 2 + f * sp.cos(th) ** 2)
    g[3, 3] = r**2 * f / 4
    g[2, 3] = g[3, 2] = r**2 * f * sp.cos(th) / 4
    gf, dgf, d2gf = metric_functions(g, coords)
    chart = MetricChart(
        name=f"eguchi-hanson(a={a:g})",
        dimension=4,
        lower=(a, 0.0, 0.0, 0.0),
        upper=(np.inf, np.pi, 2 * np.pi, 2 * np.pi),
        g=gf,
        dg=dgf,
        d2g=d2gf,
        orientation=1,
        length_scale=a,
        periodic=(2, 3),
    )
    X, dX, d2X = vector_field_functions([0, 0, 0, 1], coords)
    return chart, KillingField("d_psi", X, dX, d2X)


@lru_cache(maxsize=None)
def _taub_nut_parts(m: float):
    rho, th, ph, tau = coords = sp.symbols("rho theta phi tau", real=True)
    mm = sp.Float(m)
    V = 1 + 2 * mm / rho
    w = 2 * mm * sp.cos(th)
    g = sp.zeros(4, 4)
    g[0, 0] = V
    g[1, 1] = V * rho**2
    g[2, 2] = V * rho**2 * sp.sin(th) ** 2 + w**2 / V
    g[3, 3] = 1 / V
    g[2, 3] = g[3, 2] = w / V
    gf, dgf, d2gf = metric_functions(g, coords)
    chart = MetricChart(
        name=f"taub-nut(m={m:g})",
        dimension=4,
        lower=(0.0, 0.0, 0.0, 0.0),
        upper=(np.inf, np.pi, 2 * np.pi, 8 * np.pi * m),
        g=gf,
        dg=dgf,
        d2g=d2gf,
        orientation=-1,
        length_scale=m,
        periodic=(2, 3),
    )
    X, dX, d2X = vector_field_functions([0, 0, 0, 1], coords)
    return chart, KillingField("d_tau", X, dX, d2X)


# ------------------------------------------------------------------ entries


def eguchi_hanson(a: float = 1.0) -> CatalogEntry:
    if not a > 0:
        raise ValueError(f"eguchi-hanson parameter a must be positive, got {a}")
    chart, X = _eguchi_hanson_parts(float(a))
    radial = RadialStructure(
        center=float(a),
        angular_box=((0.0, np.pi, False), (0.0, 2 * np.pi, True), (0.0, 2 * np.pi, True)),
        embed=_euler_embed,
        reference_u=(np.pi / 2, 0.3, 0.7),
        length_scale=float(a),
    )
    return CatalogEntry(
        name="eguchi-hanson",
        params={"a": float(a)},
        metric=chart,
        killing=X,
        zero_set=(ZeroSetComponent("bolt", 2, f"r = a = {a:g} (2-sphere)", radial_value=float(a)),),
        known={
            "chi": KnownValue(2, PAPER, "bolt is a 2-sphere"),
            "avr_ratio": KnownValue(0.5, PAPER, "lim s^-4 Vol B = pi^2/4, i.e. half of Euclidean"),
            "energy_over_8pi2": KnownValue(1.5, PAPER, "(1/8 pi^2) int |Rm|^2"),
        },
        radial=radial,
        description="Eguchi-Hanson ALE instanton on T*S^2, Killing field d/dpsi",
        sample_box=((1.15 * a, 0.3, 0.5, 0.5), (3.0 * a, np.pi - 0.3, 2 * np.pi - 0.5, 2 * np.pi - 0.5)),
    )


def taub_nut(m: float = 1.0) -> CatalogEntry:
    if not m > 0:
        raise ValueError(f"taub-nut parameter m must be positive, got {m}")
    chart, X = _taub_nut_parts(float(m))
    radial = RadialStructure(
        center=0.0,
        angular_box=((0.0, np.pi, False), (0.0, 2 * np.pi, True), (0.0, 8 * np.pi * m, True)),
        embed=_euler_embed,
        reference_u=(np.pi / 2, 0.3, 0.7),
        length_scale=float(m),
    )
    return CatalogEntry(
        name="taub-nut",
        params={"m": float(m)},
        metric=chart,
        killing=X,
        zero_set=(ZeroSetComponent("nut", 1, "rho = 0 (isolated point)", radial_value=0.0),),
        known={
            "chi": KnownValue(1, TRIVIAL, "isolated fixed point"),
            "avr_ratio": KnownValue(0.0, TRIVIAL, "cubic volume growth"),
            "energy_over_8pi2": KnownValue(1.0, DERIVED, "radial quadrature; consistent with chi - avr"),
        },
        radial=radial,
        description="self-dual Taub-NUT (Gibbons-Hawking, one centre), Killing field d/dtau",
        sample_box=((0.3 * m, 0.3, 0.5, 0.5), (4.0 * m, np.pi - 0.3, 2 * np.pi - 0.5, 8 * np.pi * m - 0.5)),
    )


def flat_r4_rot1() -> CatalogEntry:
    chart = _flat_chart(4)
    X = _linear_field("-y d_x + x d_y", [lambda c: -c[1], lambda c: c[0], lambda c: 0, lambda c: 0], 4)
    radial = RadialStructure(0.0, HOPF_BOX, _hopf_embed, HOPF_REF, coordinate=_norm)
    return CatalogEntry(
        name="flat-r4-rot1",
        params={},
        metric=chart,
        killing=X,
        zero_set=(ZeroSetComponent("plane", 1, "x = y = 0 (2-plane)"),),
        known={
            "chi": KnownValue(1, TRIVIAL, "zero set is a 2-plane"),
            "avr_ratio": KnownValue(1.0, TRIVIAL, "Euclidean"),
            "energy_over_8pi2": KnownValue(0.0, TRIVIAL, "flat"),
            "transgression": KnownValue(0.0, PAPER, "integrable orthogonal distribution forces TP = 0"),
        },
        radial=radial,
        ball_model="euclidean",
        description="flat R^4, rotation of a single 2-plane",
        zero_distance=_plane_distance,
        sample_box=((0.2, 0.2, -2.0, -2.0), (2.0, 2.0, 2.0, 2.0)),
    )


def flat_r4_rot2() -> CatalogEntry:
    chart = _flat_chart(4)
    X = _linear_field(
        "(-y d_x + x d_y) + (-w d_z + z d_w)",
        [lambda c: -c[1], lambda c: c[0], lambda c: -c[3], lambda c: c[2]],
        4,
    )
    radial = RadialStructure(0.0, HOPF_BOX, _hopf_embed, HOPF_REF, coordinate=_norm)
    return CatalogEntry(
        name="flat-r4-rot2",
        params={},
        metric=chart,
        killing=X,
        zero_set=(ZeroSetComponent("nut", 1, "origin", radial_value=0.0),),
        known={
            "chi": KnownValue(1, TRIVIAL, "isolated fixed point"),
            "avr_ratio": KnownValue(1.0, TRIVIAL, "Euclidean"),
            "energy_over_8pi2": KnownValue(0.0, TRIVIAL, "flat"),
        },
        radial=radial,
        ball_model="euclidean",
        description="flat R^4, equal-rate rotation of two orthogonal planes",
        zero_distance=_norm,
        sample_box=((0.2, 0.2, 0.2, 0.2), (2.0, 2.0, 2.0, 2.0)),
    )


def flat_r2_rot() -> CatalogEntry:
    chart = _flat_chart(2)
    X = _linear_field("-y d_x + x d_y", [lambda c: -c[1], lambda c: c[0]], 2)
    radial = RadialStructure(0.0, ((0.0, 2 * np.pi, True),), _circle_embed, (0.3,), coordinate=_norm)
    return CatalogEntry(
        name="flat-r2-rot",
        params={},
        metric=chart,
        killing=X,
        zero_set=(ZeroSetComponent("nut", 1, "origin", radial_value=0.0),),
        known={
            "chi": KnownValue(1, TRIVIAL, "isolated fixed point"),
            "local_variation": KnownValue(np.inf, PAPER, "M_X is infinite"),
        },
        radial=radial,
        ball_model="euclidean",
        description="flat R^2, rotation field",
        zero_distance=_norm,
        sample_box=((0.2, 0.2), (2.0, 2.0)),
    )


def flat_r4_translation() -> CatalogEntry:
    """Constant field ``d_x`` on flat R^4 (no zeros; probe fixture)."""
    chart = _flat_chart(4)
    X = _linear_field("d_x", [lambda c: 1, lambda c: 0, lambda c: 0, lambda c: 0], 4)
    return CatalogEntry(
        name="flat-r4-translation",
        params={},
        metric=chart,
        killing=X,
        zero_set=(),
        known={"energy_over_8pi2": KnownValue(0.0, TRIVIAL, "flat")},
        radial=RadialStructure(0.0, HOPF_BOX, _hopf_embed, HOPF_REF, coordinate=_norm),
        ball_model="euclidean",
        description="flat R^4 with a translation field",
        zero_distance=_no_zeros,
        sample_box=((-2.0,) * 4, (2.0,) * 4),
    )


@lru_cache(maxsize=None)
def _hyperbolic_parts(R: float):
    coords = sp.symbols("x0:4", real=True)
    g = sp.eye(4) * sp.Float(R) ** 2 / coords[3] ** 2
    gf, dgf, d2gf = metric_functions(g, coords)
    chart = MetricChart(
        name=f"hyperbolic(R={R:g})",
        dimension=4,
        lower=(-np.inf, -np.inf, -np.inf, 0.0),
        upper=(np.inf, np.inf, np.inf, np.inf),
        g=gf,
        dg=dgf,
        d2g=d2gf,
        length_scale=1.0,
    )
    X, dX, d2X = vector_field_functions([1, 0, 0, 0], coords)
    return chart, KillingField("d_x0", X, dX, d2X)


def hyperbolic_space(curvature_norm: float) -> CatalogEntry:
    """Synthetic constant-curvature fixture: hyperbolic 4-space with ``|Rm| = curvature_norm``.

    The curvature-operator norm of sectional curvature ``-1/R^2`` is
    ``sqrt(6)/R^2``.  Not Ricci-flat; used only by the probe suite.
    """
    if not curvature_norm > 0:
        raise ValueError("curvature_norm must be positive")
    R = float((6.0 / curvature_norm**2) ** 0.25)
    chart, X = _hyperbolic_parts(R)
    return CatalogEntry(
        name="hyperbolic",
        params={"R": R, "curvature_norm": float(curvature_norm)},
        metric=chart,
        killing=X,
        zero_set=(),
        known={},
        radial=None,
        ricci_flat=False,
        ball_model="hyperbolic",
        description="upper half-space model of hyperbolic 4-space",
        zero_distance=_no_zeros,
        sample_box=((-1.0, -1.0, -1.0, 0.5), (1.0, 1.0, 1.0, 2.0)),
    )


_BUILDERS = {
    "flat-r4-rot1": lambda p: flat_r4_rot1(),
    "flat-r4-rot2": lambda p: flat_r4_rot2(),
    "eguchi-hanson": lambda p: eguchi_hanson(p.get("a", 1.0)),
    "taub-nut": lambda p: taub_nut(p.get("m", 1.0)),
    "flat-r2-rot": lambda p: flat_r2_rot(),
}


def catalog_metric(name: str, **params) -> CatalogEntry:
    """Look up a catalog manifold; ``eguchi-hanson(a=2)`` style names are accepted.

    Every entry is gated on the Killing equation and Ricci-flatness at a few
    sample points before it is returned.
    """
    base, parsed = _parse_name(name)
    parsed.update(params)
    if base not in _BUILDERS:
        raise UnknownMetricError(f"unknown metric {name!r}; choose from {', '.join(NAMES)}")
    entry = _BUILDERS[base](parsed)
    gate_entry(entry)
    return entry


def gate_entry(entry: CatalogEntry, n_points: int = 16, tol: float = DEFAULT_TOL.exact) -> None:
    """Raise ``GeometryError`` unless ``X`` is Killing (and ``g`` Ricci-flat when declared)."""
    x = entry.sample_points(n_points, seed=99)
    scale = entry.metric.length_scale * entry.metric.metric_scale
    if np.max(killing_residual(entry.metric, entry.killing, x)) > tol:
        raise GeometryError(f"{entry.name}: field fails the Killing equation")
    if entry.ricci_flat:
        ric = riemann(entry.metric, x).ricci
        if np.max(np.abs(ric)) * scale**2 > tol:
            raise GeometryError(f"{entry.name}: metric is not Ricci-flat")


def _parse_name(name: str):
    name = name.strip()
    if "(" not in name:
        return name, {}
    base, rest = name.split("(", 1)
    params = {}
    for item in rest.rstrip(")").split(","):
        if item.strip():
            k, v = item.split("=")
            params[k.strip()] = float(v)
    return base.strip(), params


def known_invariants(entry: CatalogEntry) -> dict:
    chi_prov = entry.known.get("chi", KnownValue(0, TRIVIAL)).provenance
    row = {
        "name": entry.name,
        "params": dict(entry.params),
        "zero_set": [
            {"kind": c.kind, "chi": {"value": c.euler_characteristic, "provenance": chi_prov}, "location": c.location}
            for c in entry.zero_set
        ],
        "chi_total": {"value": entry.chi_total, "provenance": chi_prov},
    }
    for key, kv in entry.known.items():
        if key == "chi":
            continue
        finite = bool(np.isfinite(kv.value))
        row[key] = {"value": float(kv.value) if finite else None, "provenance": kv.provenance, "note": kv.note}
        if not finite:
            row[key]["infinite"] = True
    return row


def catalog_listing() -> list:
    return [known_invariants(catalog_metric(n)) for n in NAMES]
