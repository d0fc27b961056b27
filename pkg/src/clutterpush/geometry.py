"""Exact 2D primitives: vectors, rigid poses, convex polygons.

All lengths are centimeters, angles radians. Every tie-break (MTV axis,
degenerate principal axis, contour start vertex) is lexicographic and
documented so repeated runs are bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K

# touching closer than this does not count as interior overlap
CONTACT_EPS = 1e-4


@dataclass(frozen=True)
class Vec2:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite Vec2 components: ({self.x}, {self.y})")

    def __add__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x - other.x, self.y - other.y)

    def __mul__(self, s: float) -> "Vec2":
        return Vec2(self.x * s, self.y * s)

    __rmul__ = __mul__

    def dot(self, other: "Vec2") -> float:
        return self.x * other.x + self.y * other.y

    def cross(self, other: "Vec2") -> float:
        return self.x * other.y - self.y * other.x

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def normalized(self) -> "Vec2":
        n = self.norm()
        if n < 1e-12:
            raise ValueError("cannot normalize a zero vector")
        return Vec2(self.x / n, self.y / n)

    def perp(self) -> "Vec2":
        return Vec2(-self.y, self.x)

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)


def _normalize_angle(a: float) -> float:
    """Wrap to [-pi, pi)."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a < 0.0:
        a += 2.0 * math.pi
    return a - math.pi


@dataclass(frozen=True)
class Pose2D:
    position: Vec2
    heading: float

    def __post_init__(self):
        if not math.isfinite(self.heading):
            raise ValueError("non-finite heading")
        object.__setattr__(self, "heading", _normalize_angle(self.heading))

    @staticmethod
    def identity() -> "Pose2D":
        return Pose2D(Vec2(0.0, 0.0), 0.0)

    def apply(self, p: Vec2) -> Vec2:
        c = math.cos(self.heading)
        s = math.sin(self.heading)
        return Vec2(
            c * p.x - s * p.y + self.position.x,
            s * p.x + c * p.y + self.position.y,
        )


class ConvexPolygon:
    """Strictly convex CCW polygon.

    `vertices` is an (n, 2) float64 array. Use `canonical()` for body-frame
    shapes: it recenters the area centroid at the origin, as object catalogs
    require. `transform()` output keeps world coordinates as-is.
    """

    __slots__ = ("vertices", "_padded")

    def __init__(self, vertices):
        v = np.asarray(vertices, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != 2:
            raise ValueError("vertices must be an (n, 2) array")
        n = v.shape[0]
        if n < 3:
            raise ValueError("a polygon needs at least 3 vertices")
        if n > K.MAX_VERTS:
            raise ValueError(f"at most {K.MAX_VERTS} vertices supported")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite vertex")
        area2 = 0.0
        for i in range(n):
            j = (i + 1) % n
            area2 += v[i, 0] * v[j, 1] - v[j, 0] * v[i, 1]
        if area2 < 0.0:
            v = v[::-1].copy()
        for i in range(n):
            j = (i + 1) % n
            if np.hypot(*(v[j] - v[i])) < 1e-9:
                raise ValueError("repeated vertices")
            k = (i + 2) % n
            e1 = v[j] - v[i]
            e2 = v[k] - v[j]
            cr = e1[0] * e2[1] - e1[1] * e2[0]
            if cr <= 0.0:
                raise ValueError("polygon is not strictly convex / CCW")
        v.setflags(write=False)
        self.vertices = v
        self._padded = None

    @classmethod
    def canonical(cls, vertices) -> "ConvexPolygon":
        """Construct with the area centroid moved to the origin."""
        poly = cls(vertices)
        c = poly.centroid()
        return cls(poly.vertices - np.array([c.x, c.y]))

    @classmethod
    def box(cls, w: float, h: float) -> "ConvexPolygon":
        hw, hh = 0.5 * w, 0.5 * h
        return cls([(-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)])

    @classmethod
    def regular(cls, n: int, radius: float) -> "ConvexPolygon":
        ang = 2.0 * math.pi * np.arange(n) / n
        return cls(np.column_stack([radius * np.cos(ang), radius * np.sin(ang)]))

    def __eq__(self, other):
        return isinstance(other, ConvexPolygon) and np.array_equal(
            self.vertices, other.vertices
        )

    def __hash__(self):
        return hash(self.vertices.tobytes())

    @property
    def n(self) -> int:
        return self.vertices.shape[0]

    def padded(self):
        """(MAX_VERTS, 2) copy for the kernels."""
        if self._padded is None:
            p = np.zeros((K.MAX_VERTS, 2))
            p[: self.n] = self.vertices
            self._padded = p
        return self._padded

    def centroid(self) -> Vec2:
        _, cx, cy = K.poly_area_centroid(self.padded(), self.n)
        return Vec2(cx, cy)

    def area(self) -> float:
        a, _, _ = K.poly_area_centroid(self.padded(), self.n)
        return a

    def perimeter(self) -> float:
        v = self.vertices
        return float(np.sum(np.hypot(*(np.roll(v, -1, axis=0) - v).T)))

    def bbox(self) -> tuple[float, float, float, float]:
        return K.poly_bbox(self.padded(), self.n)

    def min_width(self) -> float:
        """Smallest projection width over all edge-normal directions."""
        best = math.inf
        v = self.vertices
        for i in range(self.n):
            e = v[(i + 1) % self.n] - v[i]
            ln = math.hypot(*e)
            ax, ay = e[1] / ln, -e[0] / ln
            d = v @ np.array([ax, ay])
            best = min(best, float(d.max() - d.min()))
        return best

    def contains(self, p: Vec2, margin: float = 0.0) -> bool:
        return K.inside_margin(self.padded(), self.n, p.x, p.y, margin)


def transform(poly: ConvexPolygon, pose: Pose2D) -> ConvexPolygon:
    """Rotate by the pose heading, then translate by the pose position."""
    c = math.cos(pose.heading)
    s = math.sin(pose.heading)
    rot = np.array([[c, -s], [s, c]])
    return ConvexPolygon(poly.vertices @ rot.T + np.array([pose.position.x, pose.position.y]))


def intersects(a: ConvexPolygon, b: ConvexPolygon) -> bool:
    """True iff interiors overlap by more than CONTACT_EPS (touching is fine)."""
    return K.sat_depth(a.padded(), a.n, b.padded(), b.n) > CONTACT_EPS


def penetration_vector(a: ConvexPolygon, b: ConvexPolygon) -> Vec2 | None:
    """Minimum translation moving `b` out of `a`, or None when disjoint."""
    depth, nx, ny = K.sat_mtv(a.padded(), a.n, b.padded(), b.n)
    if depth <= CONTACT_EPS:
        return None
    return Vec2(depth * nx, depth * ny)


def boundary_samples(poly: ConvexPolygon, k: int) -> np.ndarray:
    """k points at equal arc-length spacing from the first vertex."""
    v = poly.vertices
    edges = np.roll(v, -1, axis=0) - v
    lens = np.hypot(edges[:, 0], edges[:, 1])
    cum = np.concatenate([[0.0], np.cumsum(lens)])
    per = cum[-1]
    s = per * np.arange(k) / k
    idx = np.minimum(np.searchsorted(cum, s, side="right") - 1, poly.n - 1)
    t = (s - cum[idx]) / lens[idx]
    return v[idx] + edges[idx] * t[:, None]


def _boundary_covariance(poly: ConvexPolygon):
    """Covariance of the uniform boundary point distribution, in closed form.

    This is the exact limit of sampling the contour ever more densely (the
    sampled estimate converges quadratically; see the tests).
    """
    v = poly.vertices
    n = poly.n
    total = 0.0
    mean = np.zeros(2)
    for i in range(n):
        a, b = v[i], v[(i + 1) % n]
        ln = math.hypot(*(b - a))
        total += ln
        mean += ln * 0.5 * (a + b)
    mean /= total
    cov = np.zeros((2, 2))
    for i in range(n):
        a = v[i] - mean
        b = v[(i + 1) % n] - mean
        ln = math.hypot(*(b - a))
        cov += ln * (np.outer(a, a) + np.outer(b, b)
                     + 0.5 * (np.outer(a, b) + np.outer(b, a))) / 3.0
    return cov / total


def principal_axis(poly: ConvexPolygon) -> Vec2:
    """Dominant eigenvector of the boundary-point covariance.

    Sign-canonicalized to x >= 0 (y > 0 when x == 0); returns (1, 0) when the
    two eigenvalues are indistinguishable (e.g. squares, regular n-gons).
    """
    cov = _boundary_covariance(poly)
    dxx = cov[0, 0] - cov[1, 1]
    dxy = 2.0 * cov[0, 1]
    spread = math.hypot(dxx, dxy)
    if spread <= 1e-9 * max(cov[0, 0] + cov[1, 1], 1e-12):
        return Vec2(1.0, 0.0)
    ang = 0.5 * math.atan2(dxy, dxx)
    x, y = math.cos(ang), math.sin(ang)
    if x < 0.0 or (x == 0.0 and y < 0.0):
        x, y = -x, -y
    return Vec2(x, y)


def contour_points(poly: ConvexPolygon, k: int) -> list[tuple[Vec2, Vec2]]:
    """k equal-arc-length boundary points with inward edge normals.

    Walks CCW from the lexicographically smallest (x, y) vertex. A point
    landing exactly on a vertex takes the normal of the edge starting there.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    v = poly.vertices
    n = poly.n
    start = min(range(n), key=lambda i: (v[i, 0], v[i, 1]))
    order = [(start + i) % n for i in range(n)]
    pts = v[order]
    edges = np.roll(pts, -1, axis=0) - pts
    lens = np.hypot(edges[:, 0], edges[:, 1])
    cum = np.concatenate([[0.0], np.cumsum(lens)])
    per = cum[-1]
    out = []
    for m in range(k):
        s = per * m / k
        i = min(int(np.searchsorted(cum, s, side="right")) - 1, n - 1)
        t = (s - cum[i]) / lens[i]
        p = pts[i] + edges[i] * t
        e = edges[i] / lens[i]
        # inward normal of a CCW edge
        out.append((Vec2(float(p[0]), float(p[1])), Vec2(-e[1], e[0])))
    return out
