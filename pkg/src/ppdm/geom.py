"""Low-level planar geometry: vectors, planes, frames, intersections.

Points and directions are numpy float64 arrays of shape (3,). A plane is
stored as a unit normal plus offset with the point-on-plane condition
``normal . p == offset``. The material side of a face whose ``same_sense``
flag is true is the half-space ``normal . p <= offset``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tol import EPS_GEOM


def vec(x, y, z) -> np.ndarray:
    return np.array([float(x), float(y), float(z)])


def cross3(a, b) -> np.ndarray:
    """Cross product for 3-vectors (faster than np.cross on tiny inputs)."""
    return np.array([a[1] * b[2] - a[2] * b[1],
                     a[2] * b[0] - a[0] * b[2],
                     a[0] * b[1] - a[1] * b[0]])


def unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = float(np.linalg.norm(v))
    if n < EPS_GEOM:
        raise ValueError("cannot normalize near-zero vector")
    return v / n


def norm(v) -> float:
    return float(np.linalg.norm(v))


@dataclass(frozen=True)
class Plane:
    """Oriented plane: normal . p == offset, normal unit length."""

    normal: tuple
    offset: float

    @staticmethod
    def from_normal_point(normal, point) -> "Plane":
        n = unit(normal)
        return Plane(tuple(n), float(np.dot(n, point)))

    @property
    def n(self) -> np.ndarray:
        return np.asarray(self.normal, dtype=float)

    def flipped(self) -> "Plane":
        return Plane(tuple(-self.n), -self.offset)

    def signed_distance(self, p) -> float:
        return float(np.dot(self.n, p) - self.offset)

    def reference_point(self) -> np.ndarray:
        return self.n * self.offset

    def coincident_with(self, other: "Plane", tol=EPS_GEOM) -> bool:
        """Same surface, either orientation."""
        d = float(np.dot(self.n, other.n))
        if d > 1.0 - 1e-12:
            return abs(self.offset - other.offset) <= tol
        if d < -1.0 + 1e-12:
            return abs(self.offset + other.offset) <= tol
        return False

    def same_oriented(self, other: "Plane", tol=EPS_GEOM) -> bool:
        """Same surface with the same orientation."""
        d = float(np.dot(self.n, other.n))
        return d > 1.0 - 1e-12 and abs(self.offset - other.offset) <= tol

    def parallel_to(self, other: "Plane", tol=EPS_GEOM) -> bool:
        return norm(cross3(self.n, other.n)) <= tol


def plane_key(plane: Plane, angle_tol=1e-9, offset_tol=EPS_GEOM):
    """Orientation-free canonical key pieces: (canonical normal, offset).

    Flips so the first component of the normal with magnitude above tol is
    positive. Used together with tolerance comparison, not exact hashing.
    """
    n = plane.n
    o = plane.offset
    for c in n:
        if abs(c) > angle_tol:
            if c < 0:
                n = -n
                o = -o
            break
    return n, o


class PlaneTable:
    """Groups planes that coincide within tolerance, assigning stable keys."""

    def __init__(self, angle_tol=1e-9, offset_tol=EPS_GEOM):
        self._reps: list[tuple[np.ndarray, float]] = []
        self.angle_tol = angle_tol
        self.offset_tol = offset_tol

    def key_of(self, plane: Plane) -> int:
        n, o = plane_key(plane, self.angle_tol, self.offset_tol)
        for i, (rn, ro) in enumerate(self._reps):
            if norm(cross3(rn, n)) <= self.angle_tol and float(np.dot(rn, n)) > 0 \
                    and abs(ro - o) <= self.offset_tol:
                return i
        self._reps.append((n, o))
        return len(self._reps) - 1

    def rep(self, key: int) -> Plane:
        n, o = self._reps[key]
        return Plane(tuple(n), o)


@dataclass
class Frame:
    """Orthonormal 2D chart on a plane: p = origin + x*u + y*v."""

    origin: tuple
    u: tuple
    v: tuple
    normal: tuple
    _uv: np.ndarray = None  # (3,2) chart matrix, lazy
    _o: np.ndarray = None

    @staticmethod
    def for_plane(normal, offset) -> "Frame":
        n = unit(normal)
        # pick the coordinate axis least aligned with n for a stable chart
        k = int(np.argmin(np.abs(n)))
        e = np.zeros(3)
        e[k] = 1.0
        u = unit(cross3(e, n))
        v = cross3(n, u)
        return Frame(tuple(n * offset), tuple(u), tuple(v), tuple(n))

    def _mats(self):
        if self._uv is None:
            self._uv = np.column_stack([np.asarray(self.u), np.asarray(self.v)])
            self._o = np.asarray(self.origin)
        return self._uv, self._o

    def to_2d(self, pts) -> np.ndarray:
        uv, o = self._mats()
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return (pts - o) @ uv

    def to_3d(self, xy) -> np.ndarray:
        uv, o = self._mats()
        xy = np.atleast_2d(np.asarray(xy, dtype=float))
        return o + xy @ uv.T


def plane_plane_intersection(p1: Plane, p2: Plane, tol=EPS_GEOM):
    """Intersect two planes.

    Returns ('line', point, direction) | ('parallel',) | ('coincident',).
    """
    n1, n2 = p1.n, p2.n
    d = cross3(n1, n2)
    dn = norm(d)
    if dn <= tol:
        return ("coincident",) if p1.coincident_with(p2, tol) else ("parallel",)
    d = d / dn
    # point: solve [n1; n2; d] x = [o1, o2, 0]
    a = np.array([n1, n2, d])
    b = np.array([p1.offset, p2.offset, 0.0])
    pt = np.linalg.solve(a, b)
    return ("line", pt, d)


def intersect_planes_point(planes: list[Plane], tol=1e-7):
    """Common point of three or more planes.

    Returns (point, rank). rank < 3 means no unique point. For more than
    three planes the stack is solved by least squares; the caller checks the
    residual against its own tolerance.
    """
    a = np.array([p.n for p in planes])
    b = np.array([p.offset for p in planes])
    if len(planes) == 3:
        try:
            # fast path; fall back to lstsq on singular stacks
            if abs(np.linalg.det(a)) > 1e-12:
                return np.linalg.solve(a, b), 3
        except np.linalg.LinAlgError:
            pass
    sol, _res, rank, _sv = np.linalg.lstsq(a, b, rcond=1e-9)
    return sol, int(rank)


def dedup_planes(planes: list[Plane], tol=EPS_GEOM) -> list[Plane]:
    """Drop planes coincident (either orientation) with an earlier one."""
    out: list[Plane] = []
    for p in planes:
        if not any(p.coincident_with(q) or p.flipped().coincident_with(q) for q in out):
            out.append(p)
    return out


def polygon_area2(ring: np.ndarray) -> float:
    """Twice the signed area of a closed 2D ring (positive when CCW)."""
    x = ring[:, 0]
    y = ring[:, 1]
    return float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def newell_normal(pts3: np.ndarray) -> np.ndarray:
    """Newell normal of a 3D ring; robust for planar, possibly nonconvex rings."""
    p = np.asarray(pts3, dtype=float)
    q = np.roll(p, -1, axis=0)
    n = np.array([
        np.sum((p[:, 1] - q[:, 1]) * (p[:, 2] + q[:, 2])),
        np.sum((p[:, 2] - q[:, 2]) * (p[:, 0] + q[:, 0])),
        np.sum((p[:, 0] - q[:, 0]) * (p[:, 1] + q[:, 1])),
    ])
    return n


def aabb(points: np.ndarray):
    pts = np.atleast_2d(points)
    return pts.min(axis=0), pts.max(axis=0)


def aabb_overlap(lo1, hi1, lo2, hi2, pad=0.0) -> bool:
    return bool(np.all(lo1 - pad <= hi2) and np.all(lo2 - pad <= hi1))
