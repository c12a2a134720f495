"""Boundary-representation data model for planar solids.

A Body owns tables of vertices, edges, planes and faces, grouped into shells
and lumps. Faces reference a plane plus a ``same_sense`` flag; the outward
normal (pointing away from material) is the plane normal when ``same_sense``
is true. Loops list (edge id, forward) entries; with the outward normal up,
outer loops run counter-clockwise and hole loops clockwise.

Bodies are treated as immutable after construction: operations build new
bodies rather than mutating existing ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import shapely
from shapely.geometry import LineString, Point, Polygon

from . import geom
from .errors import StructureError, UnknownFaceError, ValidityError
from .geom import Frame, Plane
from .tol import EPS_AREA, EPS_GEOM, WELD_EPS


@dataclass(frozen=True)
class Vertex:
    id: int
    point: tuple


@dataclass(frozen=True)
class Edge:
    id: int
    vertices: tuple  # (v0, v1)


@dataclass(frozen=True)
class Face:
    id: int
    plane: int
    same_sense: bool
    loops: tuple  # tuple of loops; each loop is a tuple of (edge id, forward)
    origin_tag: str


@dataclass(frozen=True)
class Shell:
    id: int
    faces: tuple
    outer: bool


@dataclass(frozen=True)
class Lump:
    shells: tuple  # shell ids; first is the outer shell


@dataclass
class Body:
    vertices: dict
    edges: dict
    planes: list
    faces: dict
    shells: dict
    lumps: tuple
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_cache"] = {}  # derived geometry; rebuilt on demand
        return state

    # -- basic queries ----------------------------------------------------

    def point(self, vid: int) -> np.ndarray:
        return np.asarray(self.vertices[vid].point)

    def face_plane(self, fid: int) -> Plane:
        return self.planes[self.faces[fid].plane]

    def face_outward(self, fid: int) -> Plane:
        """Plane oriented so its normal is the face's outward normal."""
        f = self.faces[fid]
        p = self.planes[f.plane]
        return p if f.same_sense else p.flipped()

    def loop_vertices(self, loop) -> list:
        """Ordered vertex ids along a loop."""
        out = []
        for eid, fwd in loop:
            v0, v1 = self.edges[eid].vertices
            out.append(v0 if fwd else v1)
        return out

    def face_rings(self, fid: int) -> list:
        """3D coordinate rings of a face, outer first."""
        f = self.faces[fid]
        return [np.array([self.point(v) for v in self.loop_vertices(lp)])
                for lp in f.loops]

    def face_frame(self, fid: int) -> Frame:
        pl = self.face_outward(fid)
        return Frame.for_plane(pl.n, pl.offset)

    def face_polygon(self, fid: int) -> Polygon:
        """Shapely polygon of the face in its outward frame (cached)."""
        key = ("poly", fid)
        if key not in self._cache:
            rings = self.face_rings(fid)
            frame = self.face_frame(fid)
            outer = frame.to_2d(rings[0])
            holes = [frame.to_2d(r) for r in rings[1:]]
            self._cache[key] = Polygon(outer, holes)
        return self._cache[key]

    def face_bbox(self, fid: int):
        key = ("bbox", fid)
        if key not in self._cache:
            pts = np.vstack(self.face_rings(fid))
            self._cache[key] = geom.aabb(pts)
        return self._cache[key]

    def bbox(self):
        if not self.vertices:
            z = np.zeros(3)
            return z, z
        pts = np.array([v.point for v in self.vertices.values()])
        return geom.aabb(pts)

    def is_empty(self) -> bool:
        return not self.lumps

    def edge_faces(self) -> dict:
        """edge id -> list of (face id, forward flag) usages (cached)."""
        key = ("edge_faces",)
        if key not in self._cache:
            usage: dict = {}
            for f in self.faces.values():
                for lp in f.loops:
                    for eid, fwd in lp:
                        usage.setdefault(eid, []).append((f.id, fwd))
            self._cache[key] = usage
        return self._cache[key]

    def faces_by_tag(self, tag: str) -> list:
        return sorted(f.id for f in self.faces.values() if f.origin_tag == tag)

    def tags(self) -> set:
        return {f.origin_tag for f in self.faces.values()}


def empty_body() -> Body:
    return Body({}, {}, [], {}, {}, ())


# ---------------------------------------------------------------------------
# Validity checking
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    condition: object  # 1 | 2 | 3 | 4 | "structure"
    entities: tuple
    message: str


@dataclass(frozen=True)
class ValidityReport:
    valid: bool
    violations: tuple

    def by_condition(self, cond) -> list:
        return [v for v in self.violations if v.condition == cond]


def _check_structure(body: Body, out: list) -> bool:
    ok = True
    for f in body.faces.values():
        if not (0 <= f.plane < len(body.planes)):
            out.append(Violation("structure", (f.id,), f"face {f.id}: dangling plane index"))
            ok = False
        if not f.loops:
            out.append(Violation("structure", (f.id,), f"face {f.id}: no loops"))
            ok = False
        for lp in f.loops:
            for eid, _fwd in lp:
                if eid not in body.edges:
                    out.append(Violation("structure", (f.id, eid), f"face {f.id}: dangling edge {eid}"))
                    ok = False
    for e in body.edges.values():
        for v in e.vertices:
            if v not in body.vertices:
                out.append(Violation("structure", (e.id, v), f"edge {e.id}: dangling vertex {v}"))
                ok = False
    for s in body.shells.values():
        for fid in s.faces:
            if fid not in body.faces:
                out.append(Violation("structure", (s.id, fid), f"shell {s.id}: dangling face {fid}"))
                ok = False
    for lump in body.lumps:
        for sid in lump.shells:
            if sid not in body.shells:
                out.append(Violation("structure", (sid,), f"lump: dangling shell {sid}"))
                ok = False
    if ok:
        # loop chains must close
        for f in body.faces.values():
            for lp in f.loops:
                n = len(lp)
                for i, (eid, fwd) in enumerate(lp):
                    v0, v1 = body.edges[eid].vertices
                    end = v1 if fwd else v0
                    neid, nfwd = lp[(i + 1) % n]
                    nv0, nv1 = body.edges[neid].vertices
                    start = nv0 if nfwd else nv1
                    if end != start:
                        out.append(Violation("structure", (f.id, eid, neid),
                                             f"face {f.id}: loop not closed between edges {eid} and {neid}"))
                        ok = False
    return ok


def _check_condition1(body: Body, out: list):
    for f in body.faces.values():
        pl = body.face_outward(f.id)
        frame = Frame.for_plane(pl.n, pl.offset)
        rings3d = body.face_rings(f.id)
        for ring in rings3d:
            d = np.abs(ring @ pl.n - pl.offset)
            if np.any(d > 10 * EPS_GEOM):
                out.append(Violation(1, (f.id,), f"face {f.id}: vertex off its plane by {d.max():.3g}"))
        rings2d = [frame.to_2d(r) for r in rings3d]
        outer = rings2d[0]
        if len(outer) < 3:
            out.append(Violation(1, (f.id,), f"face {f.id}: outer loop has <3 vertices"))
            continue
        a2 = geom.polygon_area2(outer)
        if a2 <= 2 * EPS_AREA:
            out.append(Violation(1, (f.id,), f"face {f.id}: outer loop not counter-clockwise or degenerate"))
            continue
        try:
            poly = Polygon(outer, rings2d[1:])
        except Exception:
            out.append(Violation(1, (f.id,), f"face {f.id}: loops do not form a polygon"))
            continue
        if not poly.is_valid:
            out.append(Violation(1, (f.id,), f"face {f.id}: ill-bounded ({shapely.is_valid_reason(poly)})"))
            continue
        shell = Polygon(outer)
        for hole in rings2d[1:]:
            if geom.polygon_area2(hole) >= 0:
                out.append(Violation(1, (f.id,), f"face {f.id}: hole loop not clockwise"))
            hp = Polygon(hole[::-1])
            if not hp.within(shell.buffer(EPS_GEOM)):
                out.append(Violation(1, (f.id,), f"face {f.id}: hole loop escapes outer loop"))


def _check_condition2(body: Body, out: list):
    for eid, usages in body.edge_faces().items():
        if len(usages) != 2:
            out.append(Violation(2, (eid,) + tuple(u[0] for u in usages),
                                 f"edge {eid}: used {len(usages)} times, expected 2"))
        elif usages[0][1] == usages[1][1]:
            out.append(Violation(2, (eid, usages[0][0], usages[1][0]),
                                 f"edge {eid}: both usages share the same sense"))


def _check_condition3(body: Body, out: list):
    # gather, per vertex, the loop corners (face visit with its two edges)
    corners: dict = {}
    for f in body.faces.values():
        for lp in f.loops:
            n = len(lp)
            for i, (eid, fwd) in enumerate(lp):
                v0, v1 = body.edges[eid].vertices
                start = v0 if fwd else v1
                peid = lp[(i - 1) % n][0]
                corners.setdefault(start, []).append((f.id, peid, eid))
    for vid, cs in corners.items():
        edge_ids = set()
        for _f, e1, e2 in cs:
            edge_ids.add(e1)
            edge_ids.add(e2)
        # fan graph: corners are nodes, shared edges connect them
        by_edge: dict = {}
        for idx, (_f, e1, e2) in enumerate(cs):
            by_edge.setdefault(e1, []).append(idx)
            by_edge.setdefault(e2, []).append(idx)
        ok = all(len(v) == 2 for v in by_edge.values()) and len(edge_ids) == len(cs)
        if ok:
            # connectivity
            seen = {0}
            stack = [0]
            adj: dict = {i: [] for i in range(len(cs))}
            for pair in by_edge.values():
                a, b = pair
                adj[a].append(b)
                adj[b].append(a)
            while stack:
                cur = stack.pop()
                for nxt in adj[cur]:
                    if nxt not in seen:
                        seen.add(nxt)
                        stack.append(nxt)
            ok = len(seen) == len(cs)
        if not ok:
            out.append(Violation(3, (vid,) + tuple(sorted({c[0] for c in cs})),
                                 f"vertex {vid}: faces do not form a single closed fan"))


def _face_interferes(body: Body, fa: int, fb: int) -> bool:
    """Exact pairwise interference: do the faces meet anywhere beyond shared
    edges/vertices?"""
    pa = body.face_outward(fa)
    pb = body.face_outward(fb)
    band = 1e-7
    res = geom.plane_plane_intersection(pa, pb)
    if res[0] == "parallel":
        return False
    poly_a = body.face_polygon(fa)
    poly_b = body.face_polygon(fb)
    if res[0] == "coincident":
        inter = poly_a.intersection(_reproject(body, fb, fa))
        return inter.area > 1e-10
    _kind, pt, d = res
    lo_a, hi_a = body.face_bbox(fa)
    lo_b, hi_b = body.face_bbox(fb)
    # slab-clip the line against both boxes; disjoint ranges cannot interfere
    rng = None
    for lo, hi in ((lo_a, hi_a), (lo_b, hi_b)):
        t0, t1 = -np.inf, np.inf
        ok = True
        for k in range(3):
            if abs(d[k]) < 1e-12:
                if not (lo[k] - 1e-7 <= pt[k] <= hi[k] + 1e-7):
                    ok = False
                    break
                continue
            a0 = (lo[k] - 1e-7 - pt[k]) / d[k]
            a1 = (hi[k] + 1e-7 - pt[k]) / d[k]
            t0 = max(t0, min(a0, a1))
            t1 = min(t1, max(a0, a1))
        if not ok or t0 > t1:
            return False
        rng = (max(rng[0], t0), min(rng[1], t1)) if rng else (t0, t1)
        if rng[0] > rng[1]:
            return False
    frame_a = body.face_frame(fa)
    frame_b = body.face_frame(fb)
    span = float(np.linalg.norm(np.maximum(hi_a, hi_b) - np.minimum(lo_a, lo_b))) + 1.0
    p0 = pt - span * d
    p1 = pt + span * d
    la = LineString(frame_a.to_2d(np.array([p0, p1])))
    lb = LineString(frame_b.to_2d(np.array([p0, p1])))
    seg_a = la.intersection(poly_a)
    seg_b = lb.intersection(poly_b)
    if seg_a.is_empty or seg_b.is_empty or seg_a.length < 1e-9 or seg_b.length < 1e-9:
        return False
    # compare intervals along the common line parameter
    ia = _line_intervals(seg_a, frame_a, pt, d)
    ib = _line_intervals(seg_b, frame_b, pt, d)
    for a0, a1 in ia:
        for b0, b1 in ib:
            lo, hi = max(a0, b0), min(a1, b1)
            if hi - lo <= 1e-9:
                continue
            # the common piece must lie on both boundaries
            for t in (lo + 1e-9, 0.5 * (lo + hi), hi - 1e-9):
                q = pt + t * d
                if poly_a.boundary.distance(Point(*frame_a.to_2d(q)[0])) > band:
                    return True
                if poly_b.boundary.distance(Point(*frame_b.to_2d(q)[0])) > band:
                    return True
    return False


def _line_intervals(seg, frame: Frame, pt, d):
    geoms = getattr(seg, "geoms", [seg])
    out = []
    for g in geoms:
        if g.length < 1e-12:
            continue
        c0 = frame.to_3d(np.array(g.coords[0]))[0]
        c1 = frame.to_3d(np.array(g.coords[-1]))[0]
        t0 = float(np.dot(c0 - pt, d))
        t1 = float(np.dot(c1 - pt, d))
        out.append((min(t0, t1), max(t0, t1)))
    return out


def _reproject(body: Body, src: int, dst: int) -> Polygon:
    """Polygon of face src expressed in face dst's frame."""
    frame = body.face_frame(dst)
    rings = body.face_rings(src)
    outer = frame.to_2d(rings[0])
    holes = [frame.to_2d(r) for r in rings[1:]]
    return Polygon(outer, holes)


def _check_condition4(body: Body, out: list):
    fids = sorted(body.faces)
    boxes = {fid: body.face_bbox(fid) for fid in fids}
    for i, fa in enumerate(fids):
        lo_a, hi_a = boxes[fa]
        for fb in fids[i + 1:]:
            lo_b, hi_b = boxes[fb]
            if not geom.aabb_overlap(lo_a, hi_a, lo_b, hi_b, pad=1e-7):
                continue
            if _face_interferes(body, fa, fb):
                out.append(Violation(4, (fa, fb),
                                     f"faces {fa} and {fb} interfere beyond shared edges"))


def validate(body: Body) -> ValidityReport:
    """Four-condition validity check plus structural screening.

    Bodies are immutable after construction, so the report is cached."""
    key = ("validity",)
    if key in body._cache:
        return body._cache[key]
    violations: list = []
    if _check_structure(body, violations):
        _check_condition1(body, violations)
        _check_condition2(body, violations)
        _check_condition3(body, violations)
        _check_condition4(body, violations)
    report = ValidityReport(valid=not violations, violations=tuple(violations))
    body._cache[key] = report
    return report


# ---------------------------------------------------------------------------
# Integral properties and adjacency
# ---------------------------------------------------------------------------

def _face_area(body: Body, fid: int) -> float:
    rings = body.face_rings(fid)
    frame = body.face_frame(fid)
    area = 0.5 * geom.polygon_area2(frame.to_2d(rings[0]))
    for hole in rings[1:]:
        area += 0.5 * geom.polygon_area2(frame.to_2d(hole))  # holes are CW, negative
    return area


def volume_unchecked(body: Body) -> float:
    """Signed volume by the divergence theorem; assumes a valid body."""
    total = 0.0
    for fid in body.faces:
        pl = body.face_outward(fid)
        total += pl.offset * _face_area(body, fid) / 3.0
    return total


def volume(body: Body) -> float:
    report = validate(body)
    if not report.valid:
        raise ValidityError("volume of an invalid body is undefined", report)
    return volume_unchecked(body)


def face_areas(body: Body) -> dict:
    report = validate(body)
    if not report.valid:
        raise ValidityError("face areas of an invalid body are undefined", report)
    return {fid: _face_area(body, fid) for fid in body.faces}


def neighbors(body: Body, face_ids) -> set:
    """Faces sharing at least one edge with any of the given faces."""
    if isinstance(face_ids, int):
        face_ids = {face_ids}
    face_ids = set(face_ids)
    for fid in face_ids:
        if fid not in body.faces:
            raise UnknownFaceError(f"unknown face id {fid}")
    usage = body.edge_faces()
    edge_of: dict = {}
    for eid, us in usage.items():
        edge_of[eid] = [u[0] for u in us]
    out: set = set()
    for fid in face_ids:
        f = body.faces[fid]
        for lp in f.loops:
            for eid, _fwd in lp:
                out.update(edge_of.get(eid, []))
    return out - face_ids


def shell_signed_volume(body: Body, face_ids) -> float:
    total = 0.0
    for fid in face_ids:
        pl = body.face_outward(fid)
        total += pl.offset * _face_area(body, fid) / 3.0
    return total


# ---------------------------------------------------------------------------
# Body construction from face patches
# ---------------------------------------------------------------------------

@dataclass
class FacePatch:
    """A planar face-to-be: 3D outer ring (counter-clockwise around the
    outward normal), optional hole rings (clockwise), and an origin tag."""

    outer: np.ndarray
    holes: list
    tag: str
    outward: np.ndarray = None

    def resolved_outward(self) -> np.ndarray:
        if self.outward is not None:
            return geom.unit(self.outward)
        return geom.unit(geom.newell_normal(self.outer))


class _WeldTable:
    def __init__(self, eps=WELD_EPS):
        self.eps = eps
        self.pts: list = []
        self.grid: dict = {}

    def _cells(self, p):
        base = np.floor(p / (4 * self.eps)).astype(int)
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for dz in (-1, 0, 1):
                    yield (base[0] + dx, base[1] + dy, base[2] + dz)

    def add(self, p) -> int:
        p = np.asarray(p, dtype=float)
        cell = tuple(np.floor(p / (4 * self.eps)).astype(int))
        for c in self._cells(p):
            for idx in self.grid.get(c, ()):
                if np.max(np.abs(self.pts[idx] - p)) <= self.eps:
                    return idx
        idx = len(self.pts)
        self.pts.append(p)
        self.grid.setdefault(cell, []).append(idx)
        return idx


def build_body(patches: list, *, snap=True) -> Body:
    """Stitch face patches into a Body: weld vertices, snap them back onto
    their incident planes, refine T-junctions, pair edge usages (resolving
    edges shared by more than two faces into separate manifold entities),
    split vertex fans, and group faces into shells and lumps."""
    patches = [p for p in patches if len(p.outer) >= 3]
    if not patches:
        return empty_body()

    plane_of: list = []
    for p in patches:
        n = p.resolved_outward()
        # normalize winding: outer CCW, holes CW around the outward normal
        if float(geom.newell_normal(p.outer) @ n) < 0:
            p.outer = np.asarray(p.outer)[::-1]
        p.holes = [np.asarray(h)[::-1] if float(geom.newell_normal(h) @ n) > 0 else np.asarray(h)
                   for h in p.holes]
        pts = np.vstack([p.outer] + list(p.holes)) if p.holes else np.asarray(p.outer)
        offset = float(np.mean(pts @ n))
        plane_of.append(Plane(tuple(n), offset))

    weld = _WeldTable()
    rings_idx: list = []  # per patch: [outer ids, hole ids...]
    for p in patches:
        rr = []
        for ring in [p.outer] + list(p.holes):
            ids = [weld.add(q) for q in ring]
            dedup = [ids[i] for i in range(len(ids)) if ids[i] != ids[(i - 1) % len(ids)]]
            rr.append(dedup)
        rings_idx.append(rr)

    npts = len(weld.pts)
    coords = np.array(weld.pts)

    if snap:
        incident: dict = {i: [] for i in range(npts)}
        for pi, rr in enumerate(rings_idx):
            for ring in rr:
                for vid in ring:
                    incident[vid].append(pi)
        for vid in range(npts):
            pls = geom.dedup_planes([plane_of[pi] for pi in set(incident[vid])])
            if not pls:
                continue
            a = np.array([pl.n for pl in pls])
            r = np.array([pl.offset for pl in pls]) - a @ coords[vid]
            d, *_ = np.linalg.lstsq(a, r, rcond=1e-9)
            if np.linalg.norm(d) < 1e-4:
                coords[vid] = coords[vid] + d

    # T-junction refinement: insert any welded vertex that sits strictly
    # inside a ring segment of some patch.
    by_cell: dict = {}
    cell_size = 0.25
    for vid in range(npts):
        by_cell.setdefault(tuple(np.floor(coords[vid] / cell_size).astype(int)), []).append(vid)

    def candidates_near(a, b):
        lo = np.minimum(a, b) - 2 * WELD_EPS
        hi = np.maximum(a, b) + 2 * WELD_EPS
        clo = np.floor(lo / cell_size).astype(int)
        chi = np.floor(hi / cell_size).astype(int)
        for cx in range(clo[0], chi[0] + 1):
            for cy in range(clo[1], chi[1] + 1):
                for cz in range(clo[2], chi[2] + 1):
                    yield from by_cell.get((cx, cy, cz), ())

    def refine(ring):
        out = []
        n = len(ring)
        for i in range(n):
            a, b = ring[i], ring[(i + 1) % n]
            pa, pb = coords[a], coords[b]
            seg = pb - pa
            L2 = float(seg @ seg)
            out.append(a)
            if L2 < (4 * WELD_EPS) ** 2:
                continue
            inner = []
            for vid in set(candidates_near(pa, pb)):
                if vid == a or vid == b:
                    continue
                t = float((coords[vid] - pa) @ seg) / L2
                if t <= 1e-12 or t >= 1 - 1e-12:
                    continue
                d = coords[vid] - (pa + t * seg)
                if float(d @ d) <= WELD_EPS ** 2:
                    inner.append((t, vid))
            out.extend(v for _t, v in sorted(inner))
        return out

    rings_idx = [[refine(r) for r in rr] for rr in rings_idx]

    # collect directed usages per undirected vertex pair
    usages: dict = {}
    face_ring_entries: list = []  # parallel to rings_idx: usage handles per segment
    handle = 0
    handles: list = []
    for pi, rr in enumerate(rings_idx):
        entry_rr = []
        for ri, ring in enumerate(rr):
            entry = []
            n = len(ring)
            for i in range(n):
                a, b = ring[i], ring[(i + 1) % n]
                if a == b:
                    entry.append(None)
                    continue
                key = (min(a, b), max(a, b))
                usages.setdefault(key, []).append(handle)
                handles.append((pi, ri, i, a, b))
                entry.append(handle)
                handle += 1
            entry_rr.append(entry)
        face_ring_entries.append(entry_rr)

    # pair usages into edge entities (radial resolution when >2)
    edge_of_handle: dict = {}
    edges: dict = {}
    next_edge = 0

    def new_edge(a, b):
        nonlocal next_edge
        eid = next_edge
        next_edge += 1
        edges[eid] = (a, b)
        return eid

    for (a, b), hs in usages.items():
        if len(hs) == 2:
            eid = new_edge(a, b)
            edge_of_handle[hs[0]] = eid
            edge_of_handle[hs[1]] = eid
            continue
        if len(hs) % 2 == 1:
            # unmatched boundary; give each usage its own edge and let the
            # validator report the open shell
            for h in hs:
                edge_of_handle[h] = new_edge(a, b)
            continue
        # radial sort around the edge direction
        d = geom.unit(coords[b] - coords[a])
        k = int(np.argmin(np.abs(d)))
        e0 = np.zeros(3)
        e0[k] = 1.0
        e1 = geom.unit(np.cross(e0, d))
        e2 = np.cross(d, e1)
        wings = []
        for h in hs:
            pi, _ri, _i, ua, _ub = handles[h]
            nrm = plane_of[pi].n  # outward normal of the patch
            tdir = d if ua == a else -d
            wing = np.cross(nrm, tdir)  # into the face interior (CCW loops)
            phi = math.atan2(float(wing @ e2), float(wing @ e1))
            wings.append((phi, h, nrm))
        wings.sort(key=lambda w: w[0])
        m = len(wings)
        paired = [False] * m
        for i in range(m):
            if paired[i]:
                continue
            j = (i + 1) % m
            phi_i, h_i, n_i = wings[i]
            phi_j, h_j, n_j = wings[j]
            mid = phi_i + (((phi_j - phi_i) % (2 * math.pi)) or 2 * math.pi) / 2.0
            sdir = math.cos(mid) * e1 + math.sin(mid) * e2
            # sector between wing i and wing j is material iff both faces
            # have their material pointing into it
            if float(sdir @ n_i) < 0 and float(sdir @ n_j) < 0 and not paired[j]:
                eid = new_edge(a, b)
                edge_of_handle[h_i] = eid
                edge_of_handle[h_j] = eid
                paired[i] = paired[j] = True
        for i in range(m):
            if not paired[i]:
                edge_of_handle[wings[i][1]] = new_edge(a, b)

    # face loops from handles
    face_loops: list = []
    for pi, entry_rr in enumerate(face_ring_entries):
        loops = []
        for ri, entry in enumerate(entry_rr):
            ring = rings_idx[pi][ri]
            n = len(ring)
            loop = []
            for i, h in enumerate(entry):
                if h is None:
                    continue
                a = ring[i]
                eid = edge_of_handle[h]
                ea, _eb = edges[eid]
                loop.append((eid, ea == a))
            if len(loop) >= 3:
                loops.append(tuple(loop))
        face_loops.append(tuple(loops))

    keep = [pi for pi in range(len(patches)) if face_loops[pi] and len(face_loops[pi][0]) >= 3]

    # face adjacency through edges -> shells
    faces_of_edge: dict = {}
    for pi in keep:
        for lp in face_loops[pi]:
            for eid, _f in lp:
                faces_of_edge.setdefault(eid, []).append(pi)
    parent = {pi: pi for pi in keep}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for fs in faces_of_edge.values():
        for other in fs[1:]:
            ra, rb = find(fs[0]), find(other)
            if ra != rb:
                parent[rb] = ra

    comp_faces: dict = {}
    for pi in keep:
        comp_faces.setdefault(find(pi), []).append(pi)

    # split vertices shared between components (or between disjoint fans)
    vertex_alias: dict = {}  # (vertexidx, component) -> new vertex id
    next_vid = 0
    vertex_tbl: dict = {}

    def vid_for(v, comp):
        nonlocal next_vid
        key = (v, comp)
        if key not in vertex_alias:
            vertex_alias[key] = next_vid
            vertex_tbl[next_vid] = Vertex(next_vid, tuple(coords[v]))
            next_vid += 1
        return vertex_alias[key]

    edge_comp: dict = {}
    for eid, fs in faces_of_edge.items():
        edge_comp[eid] = find(fs[0])

    edge_tbl: dict = {}
    for eid, (a, b) in edges.items():
        if eid not in edge_comp:
            continue
        comp = edge_comp[eid]
        edge_tbl[eid] = Edge(eid, (vid_for(a, comp), vid_for(b, comp)))

    # plane table with dedup
    ptable: list = []
    pindex: dict = {}

    def plane_index(pl: Plane):
        for i, q in enumerate(ptable):
            if pl.same_oriented(q):
                return i, True
            if pl.flipped().same_oriented(q):
                return i, False
        ptable.append(pl)
        return len(ptable) - 1, True

    face_tbl: dict = {}
    for pi in keep:
        pl = plane_of[pi]
        idx, same = plane_index(pl)
        face_tbl[pi] = Face(pi, idx, same, face_loops[pi], patches[pi].tag)

    # shells and lumps
    shells: dict = {}
    shell_meta: list = []
    for si, (comp, fids) in enumerate(sorted(comp_faces.items())):
        tmp = Body(vertex_tbl, edge_tbl, ptable, {f: face_tbl[f] for f in fids}, {}, ())
        sv = shell_signed_volume(tmp, fids)
        shells[si] = Shell(si, tuple(sorted(fids)), sv > 0)
        shell_meta.append((si, sv, fids))

    outer_shells = [(si, sv, fids) for si, sv, fids in shell_meta if sv > 0]
    void_shells = [(si, sv, fids) for si, sv, fids in shell_meta if sv <= 0]
    lump_shells: dict = {si: [si] for si, _sv, _f in outer_shells}
    probe_body = Body(vertex_tbl, edge_tbl, ptable, face_tbl, {}, ())
    for si, _sv, fids in void_shells:
        # attach to the smallest containing outer shell
        first_edge = face_tbl[fids[0]].loops[0][0][0]
        vpt = probe_body.point(edge_tbl[first_edge].vertices[0])
        best = None
        for so, sv, fo in outer_shells:
            if _point_in_shell(probe_body, fo, vpt):
                if best is None or sv < best[1]:
                    best = (so, sv)
        if best is None:
            lump_shells[si] = [si]  # orphan; validator will complain
        else:
            lump_shells[best[0]].append(si)

    lumps = tuple(Lump(tuple(s)) for s in lump_shells.values())
    return Body(vertex_tbl, edge_tbl, ptable, face_tbl, shells, lumps)


def _point_in_shell(body: Body, face_ids, p) -> bool:
    """Parity test of a point against one shell's faces (deterministic ray)."""
    rng_dirs = [
        geom.unit([0.5773502691896258, 0.5773502691896258, 0.5773502691896258]),
        geom.unit([0.8512, -0.3421, 0.3981]),
        geom.unit([-0.2671, 0.9211, 0.2834]),
        geom.unit([0.1234, -0.4321, 0.8932]),
    ]
    for d in rng_dirs:
        hits = 0
        degenerate = False
        for fid in face_ids:
            pl = body.face_outward(fid)
            denom = float(pl.n @ d)
            if abs(denom) < 1e-9:
                continue
            t = (pl.offset - float(pl.n @ p)) / denom
            if t <= 1e-9:
                continue
            q = p + t * d
            poly = body.face_polygon(fid)
            q2 = Point(*body.face_frame(fid).to_2d(q)[0])
            if poly.boundary.distance(q2) < 1e-9:
                degenerate = True
                break
            if poly.contains(q2):
                hits += 1
        if not degenerate:
            return hits % 2 == 1
    return False


def patches_of(body: Body) -> list:
    """Face patches reproducing the body (used by transforms and documents)."""
    out = []
    for fid in sorted(body.faces):
        rings = body.face_rings(fid)
        out.append(FacePatch(rings[0], list(rings[1:]), body.faces[fid].origin_tag,
                             np.asarray(body.face_outward(fid).n)))
    return out


def transform_body(body: Body, rigid) -> Body:
    """Apply a rigid transform (an object with apply_points/apply_direction)."""
    patches = []
    for p in patches_of(body):
        outer = rigid.apply_points(p.outer)
        holes = [rigid.apply_points(h) for h in p.holes]
        patches.append(FacePatch(outer, holes, p.tag,
                                 rigid.apply_direction(p.outward)))
    return build_body(patches)


def concatenate(a: Body, b: Body) -> Body:
    """Structural merge of two bodies without any Boolean resolution.

    Used to construct deliberately interfering bodies for validator tests.
    """
    out_v = dict(a.vertices)
    out_e = dict(a.edges)
    out_f = dict(a.faces)
    out_s = dict(a.shells)
    planes = list(a.planes)
    dv = (max(a.vertices) + 1) if a.vertices else 0
    de = (max(a.edges) + 1) if a.edges else 0
    df = (max(a.faces) + 1) if a.faces else 0
    ds = (max(a.shells) + 1) if a.shells else 0
    dp = len(planes)
    for v in b.vertices.values():
        out_v[v.id + dv] = Vertex(v.id + dv, v.point)
    for e in b.edges.values():
        out_e[e.id + de] = Edge(e.id + de, (e.vertices[0] + dv, e.vertices[1] + dv))
    planes.extend(b.planes)
    for f in b.faces.values():
        loops = tuple(tuple((eid + de, fwd) for eid, fwd in lp) for lp in f.loops)
        out_f[f.id + df] = Face(f.id + df, f.plane + dp, f.same_sense, loops, f.origin_tag)
    for s in b.shells.values():
        out_s[s.id + ds] = Shell(s.id + ds, tuple(fid + df for fid in s.faces), s.outer)
    lumps = tuple(a.lumps) + tuple(Lump(tuple(sid + ds for sid in lp.shells)) for lp in b.lumps)
    return Body(out_v, out_e, planes, out_f, out_s, lumps)
