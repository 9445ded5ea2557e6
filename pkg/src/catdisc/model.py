"""Exact trigonometry and geodesics on the constant-curvature model surfaces.

All three curvature signs share one 3-vector embedding: the sphere of radius
1/sqrt(kappa) for kappa > 0, the plane z = 0 for kappa = 0, and the upper
hyperboloid sheet scaled by 1/sqrt(-kappa) for kappa < 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateTriangleError,
    InvalidPointError,
    NonUniqueGeodesicError,
    TooLargeTriangleError,
    TriangleInequalityError,
)

# Curvature values within this tolerance of zero are treated as exactly zero
# to avoid catastrophic cancellation in the kappa -> 0 limit.
KAPPA_ZERO_TOL = 1e-14

# Side lengths below this floor are treated as exactly zero.
SIDE_FLOOR = 1e-12

QUADRIC_TOL = 1e-12

_TRI_INEQ_TOL = 1e-9


@dataclass(frozen=True)
class Kappa:
    """Curvature parameter together with the diameter bound of M_kappa."""

    value: float

    def __post_init__(self):
        v = float(self.value)
        if abs(v) < KAPPA_ZERO_TOL:
            v = 0.0
        object.__setattr__(self, "value", v)

    @property
    def r_kappa(self) -> float:
        """Diameter of the model surface: pi/sqrt(kappa) if kappa > 0."""
        if self.value > 0:
            return math.pi / math.sqrt(self.value)
        return math.inf

    @property
    def scale(self) -> float:
        """sqrt(|kappa|), the metric scaling of the unit model."""
        return math.sqrt(abs(self.value))


@dataclass(frozen=True, eq=False)
class ModelPoint:
    """Point on M_kappa in the shared 3-vector embedding."""

    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.shape != (3,):
            raise InvalidPointError(f"expected 3-vector, got shape {c.shape}")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @property
    def x(self) -> float:
        return float(self.coords[0])

    @property
    def y(self) -> float:
        return float(self.coords[1])

    def __repr__(self):
        return f"ModelPoint({self.coords[0]!r}, {self.coords[1]!r}, {self.coords[2]!r})"


def _minkowski(u, v) -> float:
    return float(u[0] * v[0] + u[1] * v[1] - u[2] * v[2])


def quadric_residual(kappa: Kappa, coords) -> float:
    """Deviation of coordinates from the model's quadric constraint."""
    c = np.asarray(coords, dtype=float)
    k = kappa.value
    if k > 0:
        return abs(k * float(c @ c) - 1.0)
    if k == 0:
        return abs(float(c[2]))
    res = abs(-k * _minkowski(c, c) + 1.0)
    if c[2] <= 0:
        res = max(res, 1.0)
    return res


def make_point(kappa: Kappa, coords) -> ModelPoint:
    """Validate coordinates against the quadric constraint of M_kappa."""
    res = quadric_residual(kappa, coords)
    if res > QUADRIC_TOL:
        raise InvalidPointError(
            f"quadric residual {res:.3e} exceeds {QUADRIC_TOL:.0e} for kappa={kappa.value}"
        )
    return ModelPoint(np.asarray(coords, dtype=float))


def _project(kappa: Kappa, coords: np.ndarray) -> ModelPoint:
    """Snap nearly-valid coordinates exactly onto the quadric."""
    c = np.asarray(coords, dtype=float).copy()
    k = kappa.value
    if k > 0:
        c *= 1.0 / (math.sqrt(k) * float(np.linalg.norm(c)))
    elif k == 0:
        c[2] = 0.0
    else:
        q = -_minkowski(c, c)
        c *= 1.0 / math.sqrt(q * (-k))
    return ModelPoint(c)


def base_point(kappa: Kappa) -> ModelPoint:
    """Reference point of M_kappa with tangent frame e1=(1,0,0), e2=(0,1,0)."""
    k = kappa.value
    if k > 0:
        return ModelPoint(np.array([0.0, 0.0, 1.0 / math.sqrt(k)]))
    if k == 0:
        return ModelPoint(np.zeros(3))
    return ModelPoint(np.array([0.0, 0.0, 1.0 / math.sqrt(-k)]))


def _tangent_norm(kappa: Kappa, v: np.ndarray) -> float:
    if kappa.value < 0:
        return math.sqrt(max(_minkowski(v, v), 0.0))
    return float(np.linalg.norm(v))


def exp_map(kappa: Kappa, p: ModelPoint, v: np.ndarray) -> ModelPoint:
    """Geodesic exponential: travel |v| from p in tangent direction v."""
    d = _tangent_norm(kappa, v)
    if d < SIDE_FLOOR:
        return p
    s = kappa.scale
    u = v / d
    k = kappa.value
    if k > 0:
        c = math.cos(s * d) * p.coords + (math.sin(s * d) / s) * u
    elif k == 0:
        c = p.coords + v
    else:
        c = math.cosh(s * d) * p.coords + (math.sinh(s * d) / s) * u
    return _project(kappa, c)


def log_map(kappa: Kappa, p: ModelPoint, q: ModelPoint) -> np.ndarray:
    """Tangent vector at p pointing to q, with norm = distance(p, q)."""
    d = model_distance(kappa, p, q)
    if d < SIDE_FLOOR:
        return np.zeros(3)
    s = kappa.scale
    k = kappa.value
    if k > 0:
        if d > kappa.r_kappa - 1e-9:
            raise NonUniqueGeodesicError("antipodal points on the sphere")
        u = (q.coords - math.cos(s * d) * p.coords) * (s / math.sin(s * d))
    elif k == 0:
        u = (q.coords - p.coords) / d
    else:
        u = (q.coords - math.cosh(s * d) * p.coords) * (s / math.sinh(s * d))
    return d * u


def from_tangent(kappa: Kappa, xy) -> ModelPoint:
    """Point reached from the base point along tangent coordinates (x, y)."""
    x, y = float(xy[0]), float(xy[1])
    return exp_map(kappa, base_point(kappa), np.array([x, y, 0.0]))


def model_distance(kappa: Kappa, p: ModelPoint, q: ModelPoint) -> float:
    """Geodesic distance on M_kappa."""
    for pt in (p, q):
        res = quadric_residual(kappa, pt.coords)
        if res > 1e-9:
            raise InvalidPointError(
                f"point off the kappa={kappa.value} quadric (residual {res:.3e})"
            )
    k = kappa.value
    if k == 0:
        return float(np.linalg.norm(p.coords - q.coords))
    s = kappa.scale
    if k > 0:
        # Stable arc length via the chord, exact at small and large angles.
        chord = float(np.linalg.norm(p.coords - q.coords))
        half = min(1.0, 0.5 * chord * s)
        return 2.0 * math.asin(half) / s
    # Stable half-chord form: 4 sinh^2(s d / 2) = <p-q, p-q>_M * (-k),
    # computed from the coordinate difference to avoid cancellation near 0.
    diff = p.coords - q.coords
    msq = max(_minkowski(diff, diff) * (-k), 0.0)
    return 2.0 * math.asinh(0.5 * math.sqrt(msq)) / s


def geodesic_point(kappa: Kappa, p: ModelPoint, q: ModelPoint, t: float) -> ModelPoint:
    """Point at parameter t on the geodesic from p to q (proportional to arclength)."""
    if not -1e-12 <= t <= 1.0 + 1e-12:
        raise ValueError(f"t={t} outside [0, 1]")
    t = min(max(t, 0.0), 1.0)
    v = log_map(kappa, p, q)
    if t == 0.0:
        return p
    if t == 1.0:
        return q
    return exp_map(kappa, p, t * v)


def _check_triangle_sides(kappa: Kappa, a: float, b: float, c: float):
    if min(a, b, c) < 0:
        raise TriangleInequalityError(f"negative side in ({a}, {b}, {c})")
    per = a + b + c
    tol = _TRI_INEQ_TOL * max(1.0, per)
    for s0, s1, s2 in ((a, b, c), (b, c, a), (c, a, b)):
        if s0 > s1 + s2 + tol:
            raise TriangleInequalityError(
                f"side {s0} exceeds the sum of the others ({s1} + {s2})"
            )
    if kappa.value > 0 and per >= 2.0 * kappa.r_kappa:
        raise TooLargeTriangleError(
            f"perimeter {per} >= 2*R_kappa = {2.0 * kappa.r_kappa}"
        )


def angle_from_sides(kappa: Kappa, a: float, b: float, c: float) -> float:
    """Corner angle opposite side c in the M_kappa triangle with sides (a, b, c).

    Uses half-angle forms of the kappa-law of cosines, stable for thin
    triangles.
    """
    if a < SIDE_FLOOR or b < SIDE_FLOOR:
        raise DegenerateTriangleError(
            f"angle undefined with adjacent sides a={a}, b={b}"
        )
    _check_triangle_sides(kappa, a, b, c)
    per = a + b + c
    if c <= SIDE_FLOOR and abs(a - b) <= _TRI_INEQ_TOL * max(1.0, per):
        return 0.0
    # Clamp tiny triangle-inequality violations.
    c = min(c, a + b)
    c = max(c, abs(a - b))
    s = 0.5 * (a + b + c)
    k = kappa.value
    if k == 0:
        num = (c - a + b) * (c + a - b)
        den = (a + b + c) * (a + b - c)
    else:
        sc = kappa.scale
        if k > 0:
            f = math.sin
        else:
            f = math.sinh
        num = f(sc * (s - a)) * f(sc * (s - b))
        den = f(sc * s) * f(sc * (s - c))
    num = max(num, 0.0)
    den = max(den, 0.0)
    return 2.0 * math.atan2(math.sqrt(num), math.sqrt(den))


def side_from_angle(kappa: Kappa, a: float, b: float, gamma: float) -> float:
    """Third side c of the M_kappa triangle with sides a, b and included angle gamma."""
    if a < 0 or b < 0:
        raise TriangleInequalityError(f"negative side in ({a}, {b})")
    if not 0.0 <= gamma <= math.pi + 1e-12:
        raise ValueError(f"angle {gamma} outside [0, pi]")
    k = kappa.value
    if k == 0:
        c2 = a * a + b * b - 2.0 * a * b * math.cos(gamma)
        return math.sqrt(max(c2, 0.0))
    s = kappa.scale
    if k > 0:
        cosc = math.cos(s * a) * math.cos(s * b) + math.sin(s * a) * math.sin(
            s * b
        ) * math.cos(gamma)
        return math.acos(min(max(cosc, -1.0), 1.0)) / s
    coshc = math.cosh(s * a) * math.cosh(s * b) - math.sinh(s * a) * math.sinh(
        s * b
    ) * math.cos(gamma)
    return math.acosh(max(coshc, 1.0)) / s


@dataclass(frozen=True)
class ComparisonTriangle:
    """Triangle in M_kappa realizing prescribed side lengths.

    Vertices (A, B, C) satisfy |BC| = a, |CA| = b, |AB| = c; angles[i] is the
    corner angle at vertex i (0 by convention at collapsed corners).
    Degeneracy is None, "segment" or "point".
    """

    kappa: Kappa
    sides: tuple[float, float, float]
    angles: tuple[float, float, float]
    vertices: tuple[ModelPoint, ModelPoint, ModelPoint]
    degeneracy: str | None = None


def _corner_angle(kappa: Kappa, adj1: float, adj2: float, opp: float) -> float:
    if adj1 < SIDE_FLOOR or adj2 < SIDE_FLOOR:
        return 0.0
    return angle_from_sides(kappa, adj1, adj2, opp)


def build_comparison_triangle(
    kappa: Kappa, a: float, b: float, c: float
) -> ComparisonTriangle:
    """Realize the triangle with sides (a, b, c) in M_kappa, degenerate sides allowed."""
    a = 0.0 if a < SIDE_FLOOR else float(a)
    b = 0.0 if b < SIDE_FLOOR else float(b)
    c = 0.0 if c < SIDE_FLOOR else float(c)
    _check_triangle_sides(kappa, a, b, c)

    alpha = _corner_angle(kappa, b, c, a)
    beta = _corner_angle(kappa, a, c, b)
    gamma = _corner_angle(kappa, a, b, c)

    A = base_point(kappa)
    B = exp_map(kappa, A, np.array([c, 0.0, 0.0]))
    C = exp_map(
        kappa, A, np.array([b * math.cos(alpha), b * math.sin(alpha), 0.0])
    )

    if max(a, b, c) == 0.0:
        degeneracy = "point"
    elif (
        min(a, b, c) == 0.0
        or a + b - c < SIDE_FLOOR
        or b + c - a < SIDE_FLOOR
        or c + a - b < SIDE_FLOOR
    ):
        degeneracy = "segment"
    else:
        degeneracy = None

    return ComparisonTriangle(
        kappa=kappa,
        sides=(a, b, c),
        angles=(alpha, beta, gamma),
        vertices=(A, B, C),
        degeneracy=degeneracy,
    )
