"""Rigid motion paths and root-finding for geometric events.

A Motion is a one-parameter family of rigid transforms T(t), t in [0, 1],
with T(0) = identity. Screw motions compose rotate-then-translate at every t.
Event roots are found in closed form for translations (linear residual) and
pure rotations (single-harmonic residual); screw residuals and box-exit
trajectories fall back to dense sampling plus bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geom import Plane, unit
from .tol import EPS_GEOM, EPS_T

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class RigidTransform:
    """x -> R x + t"""

    r: tuple  # 3x3 row tuples
    t: tuple

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(((1, 0, 0), (0, 1, 0), (0, 0, 1)), (0, 0, 0))

    @property
    def rm(self) -> np.ndarray:
        return np.asarray(self.r, dtype=float)

    @property
    def tv(self) -> np.ndarray:
        return np.asarray(self.t, dtype=float)

    def apply_point(self, p) -> np.ndarray:
        return self.rm @ np.asarray(p, dtype=float) + self.tv

    def apply_points(self, pts) -> np.ndarray:
        return np.atleast_2d(pts) @ self.rm.T + self.tv

    def apply_direction(self, d) -> np.ndarray:
        return self.rm @ np.asarray(d, dtype=float)

    def apply_plane(self, plane: Plane) -> Plane:
        n = self.rm @ plane.n
        p0 = self.apply_point(plane.reference_point())
        return Plane(tuple(n), float(n @ p0))

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self after other: x -> self(other(x))."""
        r = self.rm @ other.rm
        t = self.rm @ other.tv + self.tv
        return RigidTransform(tuple(map(tuple, r)), tuple(t))

    def inverse(self) -> "RigidTransform":
        ri = self.rm.T
        return RigidTransform(tuple(map(tuple, ri)), tuple(-(ri @ self.tv)))

    def is_identity(self, tol=EPS_GEOM) -> bool:
        return (np.allclose(self.rm, np.eye(3), atol=tol)
                and np.allclose(self.tv, 0.0, atol=tol))


def rotation_matrix(axis_dir, angle) -> np.ndarray:
    u = unit(axis_dir)
    c, s = math.cos(angle), math.sin(angle)
    ux, uy, uz = u
    k = np.array([[0, -uz, uy], [uz, 0, -ux], [-uy, ux, 0]])
    return np.eye(3) * c + s * k + (1 - c) * np.outer(u, u)


@dataclass(frozen=True)
class Motion:
    """T(t): rotate by t*angle about (axis_point, axis_dir), then translate
    by t*translation."""

    translation: tuple = (0.0, 0.0, 0.0)
    axis_point: tuple = (0.0, 0.0, 0.0)
    axis_dir: tuple = (0.0, 0.0, 1.0)
    angle: float = 0.0

    @staticmethod
    def translate(v) -> "Motion":
        return Motion(translation=tuple(float(x) for x in v))

    @staticmethod
    def rotate(axis_point, axis_dir, angle) -> "Motion":
        return Motion(axis_point=tuple(float(x) for x in axis_point),
                      axis_dir=tuple(unit(axis_dir)), angle=float(angle))

    @staticmethod
    def screw(v, axis_point, axis_dir, angle) -> "Motion":
        return Motion(tuple(float(x) for x in v),
                      tuple(float(x) for x in axis_point),
                      tuple(unit(axis_dir)), float(angle))

    @property
    def kind(self) -> str:
        has_t = float(np.linalg.norm(self.translation)) > 0.0
        has_r = abs(self.angle) > 0.0
        if has_t and has_r:
            return "screw"
        if has_r:
            return "rotation"
        return "translation"

    @property
    def v(self) -> np.ndarray:
        return np.asarray(self.translation, dtype=float)

    @property
    def a(self) -> np.ndarray:
        return np.asarray(self.axis_point, dtype=float)

    @property
    def u(self) -> np.ndarray:
        return np.asarray(self.axis_dir, dtype=float)

    def transform(self, t: float) -> RigidTransform:
        if abs(self.angle) == 0.0:
            return RigidTransform(((1, 0, 0), (0, 1, 0), (0, 0, 1)),
                                  tuple(t * self.v))
        r = rotation_matrix(self.u, t * self.angle)
        # x -> R (x - a) + a + t v
        tr = self.a - r @ self.a + t * self.v
        return RigidTransform(tuple(map(tuple, r)), tuple(tr))

    def restricted(self, t0: float, t1: float) -> "Motion":
        """The motion over [t0, t1] as a fresh motion on [0, 1]:
        T_res(s) = T(t0 + s (t1 - t0)) o T(t0)^-1."""
        dt = t1 - t0
        return Motion(translation=tuple(dt * self.v),
                      axis_point=tuple(self.a + t0 * self.v),
                      axis_dir=self.axis_dir,
                      angle=dt * self.angle)

    def inverse_motion(self) -> "Motion":
        """Motion undoing T(1) over [0, 1] (exact for pure translation or
        pure rotation)."""
        if self.kind == "translation":
            return Motion.translate(-self.v)
        if self.kind == "rotation":
            return Motion(axis_point=self.axis_point, axis_dir=self.axis_dir,
                          angle=-self.angle)
        raise ValueError("inverse of a screw motion is not a screw about the same axis")

    def max_speed(self, points) -> float:
        """Upper bound of |d/dt T(t) p| over [0,1] for the given points."""
        s = float(np.linalg.norm(self.v))
        if abs(self.angle) > 0:
            pts = np.atleast_2d(points)
            rel = pts - self.a
            rad = np.linalg.norm(rel - np.outer(rel @ self.u, self.u), axis=1)
            s += abs(self.angle) * float(rad.max() if len(rad) else 0.0)
        return s

    def is_noop(self) -> bool:
        return float(np.linalg.norm(self.v)) <= EPS_GEOM and abs(self.angle) <= EPS_T


def evaluate_motion(motion: Motion, t: float, x):
    """Apply T(t) to a point (array of 3 floats) or a Plane."""
    tr = motion.transform(t)
    if isinstance(x, Plane):
        return tr.apply_plane(x)
    return tr.apply_point(x)


@dataclass(frozen=True)
class MovingPlane:
    base: Plane
    motion: Motion

    def at(self, t: float) -> Plane:
        return self.motion.transform(t).apply_plane(self.base)


def plane_plane_intersect(p1: Plane, p2: Plane):
    """Spec-level plane pair intersection; see geom.plane_plane_intersection."""
    from .geom import plane_plane_intersection

    return plane_plane_intersection(p1, p2)


# ---------------------------------------------------------------------------
# Event constraints and root finding
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelingSpaceBox:
    lo: tuple
    hi: tuple

    def contains(self, p, tol=0.0) -> bool:
        p = np.asarray(p)
        return bool(np.all(p >= np.asarray(self.lo) - tol)
                    and np.all(p <= np.asarray(self.hi) + tol))

    def boundary_distance(self, p) -> float:
        """Negative inside, positive outside (Chebyshev-style)."""
        p = np.asarray(p)
        c = (np.asarray(self.hi) + np.asarray(self.lo)) / 2.0
        h = (np.asarray(self.hi) - np.asarray(self.lo)) / 2.0
        return float(np.max(np.abs(p - c) - h))


def modeling_box_for(points, scale: float) -> ModelingSpaceBox:
    pts = np.atleast_2d(points)
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    c = (lo + hi) / 2.0
    diag = float(np.linalg.norm(hi - lo))
    half = max(diag, 1.0) * scale / 2.0
    return ModelingSpaceBox(tuple(c - half), tuple(c + half))


@dataclass(frozen=True)
class EventConstraint:
    kind: str  # point_crossing | line_containment | parallelism | box_exit
    point: tuple = None
    direction: tuple = None
    other: Plane = None
    trajectory: object = None  # callable t -> point or None (box_exit)
    box: ModelingSpaceBox = None

    @staticmethod
    def point_crossing(point) -> "EventConstraint":
        return EventConstraint("point_crossing", point=tuple(float(x) for x in point))

    @staticmethod
    def line_containment(point, direction) -> "EventConstraint":
        return EventConstraint("line_containment",
                               point=tuple(float(x) for x in point),
                               direction=tuple(unit(direction)))

    @staticmethod
    def parallelism(other: Plane) -> "EventConstraint":
        return EventConstraint("parallelism", other=other)

    @staticmethod
    def box_exit(trajectory, box: ModelingSpaceBox) -> "EventConstraint":
        return EventConstraint("box_exit", trajectory=trajectory, box=box)


@dataclass(frozen=True)
class EventRoots:
    roots: tuple
    degenerate: bool = False


def _dedup(ts, lo, hi, tol=EPS_T):
    ts = sorted(t for t in ts if lo - tol <= t <= hi + tol)
    out = []
    for t in ts:
        t = min(max(t, lo), hi)
        if not out or t - out[-1] > tol:
            out.append(t)
    return out


def _solve_harmonic(a, b, c, phi_lo, phi_hi, tol=1e-13):
    """All phi in [phi_lo, phi_hi] with a cos(phi) + b sin(phi) + c = 0.

    Returns (roots, degenerate)."""
    r = math.hypot(a, b)
    if r < tol:
        return ([], True) if abs(c) < 1e-9 else ([], False)
    if abs(c) > r * (1 + 1e-12):
        return [], False
    alpha = math.atan2(b, a)
    x = min(1.0, max(-1.0, -c / r))
    beta = math.acos(x)
    roots = []
    for base in (alpha + beta, alpha - beta):
        k0 = math.floor((phi_lo - base) / TWO_PI) - 1
        k1 = math.ceil((phi_hi - base) / TWO_PI) + 1
        for k in range(int(k0), int(k1) + 1):
            phi = base + k * TWO_PI
            if phi_lo - 1e-12 <= phi <= phi_hi + 1e-12:
                roots.append(min(max(phi, phi_lo), phi_hi))
    return roots, False


def _rot_dot_coeffs(u, w, m):
    """R(phi; u) w . m == A cos(phi) + B sin(phi) + C."""
    uw = float(u @ w)
    um = float(u @ m)
    a = float(w @ m) - uw * um
    b = float(np.cross(u, w) @ m)
    c = uw * um
    return a, b, c


def _sample_bisect(f, lo, hi, samples=256, tol=EPS_T):
    """Roots of a scalar residual by sign-change bisection on a dense grid.

    Discards sign changes that converge onto discontinuities (poles)."""
    ts = np.linspace(lo, hi, samples + 1)
    vals = []
    for t in ts:
        try:
            v = f(t)
        except (ZeroDivisionError, FloatingPointError):
            v = math.nan
        vals.append(v if v is not None and math.isfinite(v) else math.nan)
    roots = []
    maxabs = 0.0
    for v in vals:
        if not math.isnan(v):
            maxabs = max(maxabs, abs(v))
    for i in range(samples):
        v0, v1 = vals[i], vals[i + 1]
        if math.isnan(v0) or math.isnan(v1):
            continue
        if v0 == 0.0:
            roots.append(ts[i])
            continue
        if v0 * v1 < 0:
            a, b = ts[i], ts[i + 1]
            fa = v0
            for _ in range(80):
                m = 0.5 * (a + b)
                try:
                    fm = f(m)
                except (ZeroDivisionError, FloatingPointError):
                    fm = math.nan
                if fm is None or math.isnan(fm):
                    break
                if fa * fm <= 0:
                    b = m
                else:
                    a, fa = m, fm
                if b - a < tol:
                    break
            m = 0.5 * (a + b)
            try:
                fm = f(m)
            except (ZeroDivisionError, FloatingPointError):
                fm = None
            # pole rejection: residual must actually vanish
            if fm is not None and math.isfinite(fm):
                span = abs(vals[i]) + abs(vals[i + 1])
                if abs(fm) <= max(1e-6, 1e-6 * span):
                    roots.append(m)
    if vals and maxabs < 1e-12:
        return [], True
    return roots, False


def _point_crossing_roots(mp: MovingPlane, q, lo, hi):
    motion = mp.motion
    n0 = mp.base.n
    o0 = mp.base.offset
    q = np.asarray(q, dtype=float)
    kind = motion.kind
    if kind == "translation":
        slope = -float(n0 @ motion.v)
        g0 = float(n0 @ q) - o0
        if abs(slope) < 1e-14:
            return ([], True) if abs(g0) < EPS_GEOM else ([], False)
        t = -g0 / slope
        return _dedup([t], lo, hi), False
    if kind == "rotation":
        u = motion.u
        a = motion.a
        cc = o0 - float(n0 @ a)
        ca, cb, cconst = _rot_dot_coeffs(u, n0, q - a)
        theta = motion.angle
        # map phi = t * theta and solve the single harmonic in phi
        phi_lo, phi_hi = sorted((lo * theta, hi * theta))
        phis, degen = _solve_harmonic(ca, cb, cconst - cc, phi_lo, phi_hi)
        ts = [phi / theta for phi in phis]
        return _dedup(ts, lo, hi), degen
    # screw: numeric
    def g(t):
        pl = mp.at(t)
        return float(pl.n @ q) - pl.offset

    roots, degen = _sample_bisect(g, lo, hi)
    return _dedup(roots, lo, hi), degen


def _parallelism_roots(mp: MovingPlane, other: Plane, lo, hi):
    motion = mp.motion
    n0 = mp.base.n
    m = other.n
    if motion.kind == "translation" or abs(motion.angle) == 0.0:
        cross = float(np.linalg.norm(np.cross(n0, m)))
        return ([], True) if cross <= EPS_GEOM else ([], False)
    u = motion.u
    theta = motion.angle
    ca, cb, cc = _rot_dot_coeffs(u, n0, m)
    phi_lo, phi_hi = sorted((lo * theta, hi * theta))
    roots = []
    degen = True
    for target in (1.0, -1.0):
        phis, dg = _solve_harmonic(ca, cb, cc - target, phi_lo, phi_hi)
        roots.extend(phi / theta for phi in phis)
        degen = degen and dg
    return _dedup(roots, lo, hi), degen


def event_roots(moving: MovingPlane, constraint: EventConstraint, window) -> EventRoots:
    """All t in the window at which the constraint is satisfied.

    Identically satisfied constraints report degenerate=True with no roots."""
    lo, hi = float(window[0]), float(window[1])
    if hi < lo:
        return EventRoots((), False)
    kind = constraint.kind
    if kind == "point_crossing":
        roots, degen = _point_crossing_roots(moving, constraint.point, lo, hi)
        return EventRoots(tuple(roots), degen)
    if kind == "line_containment":
        q = np.asarray(constraint.point)
        w = np.asarray(constraint.direction)
        r1, d1 = _point_crossing_roots(moving, q, lo, hi)
        r2, d2 = _point_crossing_roots(moving, q + w, lo, hi)
        if d1 and d2:
            return EventRoots((), True)
        if d1:
            return EventRoots(tuple(r2), False)
        if d2:
            return EventRoots(tuple(r1), False)
        common = [t for t in r1 if any(abs(t - s) <= 10 * EPS_T for s in r2)]
        return EventRoots(tuple(_dedup(common, lo, hi)), False)
    if kind == "parallelism":
        roots, degen = _parallelism_roots(moving, constraint.other, lo, hi)
        return EventRoots(tuple(roots), degen)
    if kind == "box_exit":
        box = constraint.box
        traj = constraint.trajectory

        def g(t):
            p = traj(t)
            if p is None:
                return math.nan
            return box.boundary_distance(p)

        roots, degen = _sample_bisect(g, lo, hi)
        return EventRoots(tuple(_dedup(roots, lo, hi)), degen)
    raise ValueError(f"unknown constraint kind {kind!r}")
