"""Constant-curvature manifolds and their product.

Points live in ambient coordinates: a d-dimensional sphere or
hyperboloid sheet uses d+1 numbers, flat space uses d. A point x on a
component with curvature kappa != 0 satisfies <x, x> = 1/kappa in the
ambient bilinear form (Euclidean for positive curvature, Minkowski with
the first coordinate negated for negative curvature). Flat components
are plain vectors and take fast dedicated paths everywhere.

The scalar API in this module validates its inputs and raises typed
errors; the batched entry points used by the network layers live in
``ops`` and share the same policies via the helpers here.
"""

import math
import re
from dataclasses import dataclass, field

import numpy as np

from ._kernels import backend as _K
from .autodiff import record_clamp
from .errors import (ConfigError, DomainError, NumericError, ShapeError,
                     SingularityError)

SPHERICAL = "spherical"
FLAT = "flat"
HYPERBOLIC = "hyperbolic"

# Domain policy shared by the scalar API and the traced batch ops.
CLAMP_TOL = 1e-7        # drift absorbed silently; beyond this is an error
ANTIPODAL_TOL = 1e-9    # sphere log is refused this close to w = -1
INJECTIVITY_MARGIN = 1e-6   # sphere exp is refused within this of pi
CONSTRAINT_TOL = 1e-9   # manifold membership tolerance for validate()
_CLAMP_NOISE = 1e-12    # clamping below this is float noise, not an event


@dataclass(frozen=True)
class Curvature:
    """Sectional curvature of one component, any finite real value."""

    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise DomainError(f"curvature must be finite, got {self.value}")

    @property
    def sign_class(self) -> str:
        if self.value > 0.0:
            return SPHERICAL
        if self.value < 0.0:
            return HYPERBOLIC
        return FLAT

    @property
    def radius(self) -> float:
        """1/sqrt(|kappa|); infinite for flat space."""
        if self.value == 0.0:
            return math.inf
        return 1.0 / math.sqrt(abs(self.value))

    def ambient_dim(self, dim: int) -> int:
        return dim if self.value == 0.0 else dim + 1


@dataclass(frozen=True, eq=False)
class ManifoldPoint:
    """A point in ambient coordinates together with its curvature."""

    coords: np.ndarray
    curvature: Curvature

    def __post_init__(self):
        c = np.ascontiguousarray(self.coords, dtype=np.float64)
        if c.ndim != 1:
            raise ShapeError(f"point coords must be 1-D, got shape {c.shape}")
        object.__setattr__(self, "coords", c)

    @property
    def dim(self) -> int:
        """Intrinsic dimension."""
        n = self.coords.shape[0]
        return n if self.curvature.value == 0.0 else n - 1

    def constraint_violation(self) -> float:
        return float(_K.constraint_violation(
            self.coords[None, :], self.curvature.value)[0])

    def validate(self, tol: float = CONSTRAINT_TOL) -> "ManifoldPoint":
        v = self.constraint_violation()
        if v > tol:
            raise NumericError(
                f"point is off the manifold: |<x,x> - 1/kappa| = {v:.3e}")
        if self.curvature.value < 0.0 and self.coords[0] <= 0.0:
            raise DomainError("point is not on the upper sheet")
        return self


@dataclass(frozen=True, eq=False)
class TangentVector:
    """An ambient vector attached to a base point."""

    coords: np.ndarray
    base: ManifoldPoint

    def __post_init__(self):
        c = np.ascontiguousarray(self.coords, dtype=np.float64)
        if c.shape != self.base.coords.shape:
            raise ShapeError(
                f"tangent shape {c.shape} does not match base "
                f"{self.base.coords.shape}")
        object.__setattr__(self, "coords", c)

    def tangency_violation(self) -> float:
        k = self.base.curvature.value
        if k == 0.0:
            return 0.0
        return abs(float(_K.row_inner(
            self.base.coords[None, :], self.coords[None, :], k)[0]))

    def norm(self) -> float:
        k = self.base.curvature.value
        n2 = float(_K.row_inner(self.coords[None, :],
                                self.coords[None, :], k))
        return math.sqrt(max(n2, 0.0))


def curvature_trig(z, kappa: float):
    """Curvature-scaled cosine and sine.

    Returns (cos_like, sin_like) such that cos_like^2 + kappa *
    sin_like^2 = 1. For kappa = 0 this degenerates to (1, z).
    Vectorized over z.
    """
    z = np.asarray(z, dtype=np.float64)
    if kappa > 0.0:
        r = math.sqrt(kappa)
        return np.cos(r * z), np.sin(r * z) / r
    if kappa < 0.0:
        r = math.sqrt(-kappa)
        return np.cosh(r * z), np.sinh(r * z) / r
    return np.ones_like(z), z.copy()


def inner_product(u, v, kappa: float) -> float:
    """Ambient bilinear form of two coordinate vectors."""
    u = np.ascontiguousarray(u, dtype=np.float64)
    v = np.ascontiguousarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise ShapeError(f"mismatched shapes {u.shape} and {v.shape}")
    return float(_K.row_inner(u[None, :], v[None, :], kappa)[0])


def origin(dim: int, curvature: Curvature) -> ManifoldPoint:
    """The canonical base point: [R, 0, ..., 0], or zeros when flat."""
    if dim < 1:
        raise ShapeError(f"dimension must be positive, got {dim}")
    if curvature.value == 0.0:
        return ManifoldPoint(np.zeros(dim), curvature)
    c = np.zeros(dim + 1)
    c[0] = curvature.radius
    return ManifoldPoint(c, curvature)


def origin_rows(n: int, dim: int, kappa: float) -> np.ndarray:
    """The origin repeated n times as an (n, ambient) array."""
    o = origin(dim, Curvature(kappa))
    return np.tile(o.coords, (n, 1))


# --- batch domain policy -------------------------------------------------
# These helpers are shared with the traced ops so the scalar API and the
# network enforce identical rules.

def check_w(w: np.ndarray, kappa: float, op: str,
            antipodal_ok: bool = False) -> None:
    """Validate the raw cosine-like quantity w = kappa <x, y>.

    Raises NumericError when points have drifted off the manifold by
    more than the clamp budget, and SingularityError at antipodes on
    spheres. Material clamping is reported to the running
    finite-difference check, if any.
    """
    if kappa == 0.0:
        return
    if kappa > 0.0:
        over = np.maximum(w - 1.0, 0.0)
        under = np.maximum(-1.0 - w, 0.0)
        drift = np.maximum(over, under)
        if not antipodal_ok:
            bad = w < (-1.0 + ANTIPODAL_TOL)
            if bad.any():
                i = int(np.argmax(bad))
                raise SingularityError(
                    f"{op}: undefined between antipodal points "
                    f"(row {i}, w = {w[i]:.12f})")
    else:
        drift = np.maximum(1.0 - w, 0.0)
    worst = float(drift.max()) if drift.size else 0.0
    if worst > CLAMP_TOL:
        i = int(np.argmax(drift))
        raise NumericError(
            f"{op}: row {i} is off the manifold beyond the clamp "
            f"budget (drift {worst:.3e})")
    material = int(np.count_nonzero(drift > _CLAMP_NOISE))
    if material:
        record_clamp(material)


def check_injectivity(u: np.ndarray, kappa: float, op: str) -> None:
    """Refuse sphere tangents at or past the injectivity radius."""
    if kappa <= 0.0:
        return
    limit = math.pi - INJECTIVITY_MARGIN
    if float(u.max(initial=0.0)) >= limit:
        i = int(np.argmax(u))
        raise DomainError(
            f"{op}: tangent row {i} has scaled length {u[i]:.6f}, at or "
            f"past the sphere injectivity radius pi")


# --- scalar API ----------------------------------------------------------

def exp_map(point: ManifoldPoint, tangent) -> ManifoldPoint:
    """Follow the geodesic from ``point`` along ``tangent`` for unit time.

    Args:
        point: base point.
        tangent: a TangentVector at ``point`` or a raw ambient vector
            already orthogonal to it.

    Returns:
        The reached ManifoldPoint. A zero tangent returns the base
        exactly.
    """
    k = point.curvature.value
    if isinstance(tangent, TangentVector):
        if tangent.base.coords is not point.coords and \
                not np.array_equal(tangent.base.coords, point.coords):
            raise DomainError("tangent is attached to a different point")
        t = tangent.coords
    else:
        t = np.ascontiguousarray(tangent, dtype=np.float64)
    if t.shape != point.coords.shape:
        raise ShapeError(
            f"tangent shape {t.shape} does not match point "
            f"{point.coords.shape}")
    if k != 0.0:
        viol = abs(float(_K.row_inner(point.coords[None, :], t[None, :], k)[0]))
        tn = float(np.linalg.norm(t))
        if viol > 1e-6 * (1.0 + tn):
            raise DomainError(
                f"vector is not tangent at the base point "
                f"(<x,t> = {viol:.3e})")
    y, u = _K.expmap(point.coords[None, :], t[None, :], k)
    check_injectivity(u, k, "exp_map")
    return ManifoldPoint(y[0], point.curvature)


def log_map(base: ManifoldPoint, target: ManifoldPoint) -> TangentVector:
    """Tangent vector at ``base`` whose exponential reaches ``target``."""
    _require_same_component(base, target, "log_map")
    k = base.curvature.value
    t, w = _K.logmap(base.coords[None, :], target.coords[None, :], k)
    check_w(w, k, "log_map")
    return TangentVector(t[0], base)


def geodesic_distance(x: ManifoldPoint, y: ManifoldPoint) -> float:
    """Length of the shortest path between two points on one component."""
    _require_same_component(x, y, "geodesic_distance")
    k = x.curvature.value
    d, w = _K.distance(x.coords[None, :], y.coords[None, :], k)
    check_w(w, k, "geodesic_distance", antipodal_ok=True)
    return float(d[0])


def project_to_manifold(raw, curvature: Curvature) -> ManifoldPoint:
    """Pull an ambient vector onto the manifold.

    Spheres rescale radially (the zero vector has no direction and is
    refused). The hyperboloid keeps the spatial part and recomputes the
    first coordinate, landing on the upper sheet. Flat space is the
    identity.
    """
    raw = np.ascontiguousarray(raw, dtype=np.float64)
    if raw.ndim != 1:
        raise ShapeError(f"expected a vector, got shape {raw.shape}")
    k = curvature.value
    if k != 0.0 and not raw.any():
        raise DomainError("cannot project the zero vector")
    y, _aux = _K.project_point(raw[None, :], k)
    return ManifoldPoint(y[0], curvature)


def project_to_tangent(point: ManifoldPoint, raw) -> TangentVector:
    """Remove the component of ``raw`` normal to the manifold at ``point``."""
    raw = np.ascontiguousarray(raw, dtype=np.float64)
    if raw.shape != point.coords.shape:
        raise ShapeError(
            f"vector shape {raw.shape} does not match point "
            f"{point.coords.shape}")
    t = _K.project_tangent(point.coords[None, :], raw[None, :],
                           point.curvature.value)
    return TangentVector(t[0], point)


def _require_same_component(x: ManifoldPoint, y: ManifoldPoint, op: str):
    if x.curvature != y.curvature:
        raise DomainError(
            f"{op}: points have different curvatures "
            f"({x.curvature.value} vs {y.curvature.value})")
    if x.coords.shape != y.coords.shape:
        raise ShapeError(
            f"{op}: points have different ambient shapes "
            f"({x.coords.shape} vs {y.coords.shape})")


# --- product manifolds ---------------------------------------------------

@dataclass(frozen=True)
class ManifoldComponent:
    curvature: Curvature
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ShapeError(
                f"component dimension must be positive, got {self.dim}")

    @property
    def ambient_dim(self) -> int:
        return self.curvature.ambient_dim(self.dim)


@dataclass(frozen=True)
class ProductManifoldSpec:
    """An ordered product of constant-curvature components."""

    components: tuple = field(default=())

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ConfigError("a product manifold needs at least one "
                              "component")
        object.__setattr__(self, "components", comps)

    @property
    def total_dim(self) -> int:
        return sum(c.dim for c in self.components)

    @property
    def total_ambient_dim(self) -> int:
        return sum(c.ambient_dim for c in self.components)

    def describe(self) -> str:
        """Canonical text form, inverse of parse_geometry_spec."""
        letters = {SPHERICAL: "s", FLAT: "e", HYPERBOLIC: "h"}
        return "x".join(
            f"{letters[c.curvature.sign_class]}{c.dim}"
            for c in self.components)


_TOKEN = re.compile(r"^([seh])([0-9]+)$")
_LETTER_KAPPA = {"s": 1.0, "e": 0.0, "h": -1.0}


def parse_geometry_spec(text: str) -> ProductManifoldSpec:
    """Parse strings like ``h32`` or ``s16xs8xh4``.

    Each token is a letter (s: spherical, e: flat, h: hyperbolic)
    followed by the component dimension; tokens are joined with ``x``.
    Curvature magnitude is 1 per component.
    """
    if not isinstance(text, str) or not text.strip():
        raise ConfigError("empty geometry spec")
    comps = []
    for pos, token in enumerate(text.strip().split("x")):
        m = _TOKEN.match(token)
        if m is None:
            raise ConfigError(
                f"bad geometry token {token!r} at position {pos} "
                f"in {text!r} (expected letter s/e/h then digits)")
        dim = int(m.group(2))
        if dim < 1:
            raise ConfigError(
                f"bad geometry token {token!r} at position {pos}: "
                f"dimension must be at least 1")
        comps.append(ManifoldComponent(Curvature(_LETTER_KAPPA[m.group(1)]),
                                       dim))
    return ProductManifoldSpec(tuple(comps))


def product_distance_sq(u_parts, v_parts) -> float:
    """Squared product distance: the sum of component squared distances."""
    u_parts = list(u_parts)
    v_parts = list(v_parts)
    if len(u_parts) != len(v_parts):
        raise ShapeError(
            f"component count mismatch: {len(u_parts)} vs {len(v_parts)}")
    total = 0.0
    for x, y in zip(u_parts, v_parts):
        d = geodesic_distance(x, y)
        total += d * d
    return total


# --- sampling helpers (tests and benchmarks) -----------------------------

def random_point(rng: np.random.Generator, curvature: Curvature,
                 dim: int, spread: float = 1.0) -> ManifoldPoint:
    """A generic point: gaussian ambient/spatial coordinates, projected."""
    k = curvature.value
    if k == 0.0:
        return ManifoldPoint(spread * rng.standard_normal(dim), curvature)
    raw = spread * rng.standard_normal(dim + 1)
    if k > 0.0:
        while not raw.any():   # essentially never
            raw = spread * rng.standard_normal(dim + 1)
    return project_to_manifold(raw, curvature)


def random_tangent(rng: np.random.Generator, point: ManifoldPoint,
                   scale: float = 1.0, norm=None) -> TangentVector:
    """A gaussian tangent at ``point``.

    With ``norm`` given the result is rescaled to that exact length.
    Otherwise the draw is capped inside the sphere injectivity radius
    when curvature is positive.
    """
    raw = scale * rng.standard_normal(point.coords.shape[0])
    t = project_to_tangent(point, raw)
    k = point.curvature.value
    n = t.norm()
    if norm is not None:
        if n < 1e-12:
            return random_tangent(rng, point, scale, norm)
        return TangentVector(t.coords * (norm / n), point)
    if k > 0.0:
        cap = (math.pi - 1e-3) / math.sqrt(k)
        if n > cap:
            t = TangentVector(t.coords * (cap / n), point)
    return t
