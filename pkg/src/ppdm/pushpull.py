"""Continuity-based push-pull direct modeling.

The edit loop detects the next topology change point along the motion,
builds the signed volume swept by the moving front over the TCP-free
interval, updates the model with regularized Booleans, re-identifies the
moving front on the updated model, and repeats until the motion ends. Every
intermediate and final model is a valid solid and the model volume changes
continuously in the push-pull parameter.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
import shapely
from shapely.geometry import Polygon

from . import brep, geom
from .booleans import (BoolKind, Candidate, assemble, assemble_multi, bool_op,
                       classify_points, candidates_from_body)
from .brep import Body, FacePatch, build_body, neighbors, validate, volume_unchecked
from .errors import (InternalError, MotionError, NonManifoldUpdateError,
                     UnknownFaceError, ValidityError)
from .geom import Frame, Plane
from .geometry import (EventConstraint, ModelingSpaceBox, Motion, MovingPlane,
                       event_roots, modeling_box_for)
from .tol import (EPS_AREA, EPS_CONFIRM, EPS_GEOM, EPS_T, MODELING_SPACE_ENV,
                  MODELING_SPACE_SCALE)

KIND_INNER = "new_connection_inner"
KIND_OUTER = "new_connection_outer"
KIND_TANGENCY = "lost_connection_tangency"
KIND_WORKSPACE = "lost_connection_workspace"
_KIND_PRIORITY = {KIND_INNER: 0, KIND_OUTER: 1, KIND_TANGENCY: 2, KIND_WORKSPACE: 3}


@dataclass(frozen=True)
class PushPullRequest:
    face_tags: tuple
    motion: Motion

    @staticmethod
    def make(tags, motion: Motion) -> "PushPullRequest":
        if isinstance(tags, str):
            tags = (tags,)
        return PushPullRequest(tuple(tags), motion)


@dataclass
class PushPullContext:
    pp_faces: tuple
    nei_faces: tuple
    merged: bool
    start_planes: tuple = ()   # outward planes of the pp faces (S_s)
    target_planes: tuple = ()  # the same planes at the interval end (S_t)


@dataclass(frozen=True)
class TcpEvent:
    t: float
    kind: str
    entities: tuple
    confirmed: bool


@dataclass
class AuxiliaryVolume:
    body: Body
    sign: str  # "additive" | "subtractive"
    interval: tuple
    source_tags: tuple

    def volume(self) -> float:
        return volume_unchecked(self.body)


@dataclass(frozen=True)
class IllBoundedDiagnosis:
    face: int
    kind: str  # "open_boundary" | "extra_intersection"
    entities: tuple = ()


@dataclass(frozen=True)
class IllBoundedReport:
    diagnoses: tuple

    def kinds(self) -> set:
        return {d.kind for d in self.diagnoses}

    def faces(self, kind=None) -> set:
        return {d.face for d in self.diagnoses if kind is None or d.kind == kind}


@dataclass
class IntervalRecord:
    t0: float
    t1: float
    aux: list            # (sign, volume, source tags)
    volume_after: float
    front_area_max: float
    speed_max: float


@dataclass
class PushPullTrace:
    events: list = field(default_factory=list)
    intervals: list = field(default_factory=list)
    volumes: list = field(default_factory=list)  # (t, volume) samples at steps
    notes: list = field(default_factory=list)
    final_report: object = None
    models: list = field(default_factory=list)  # (t, body, pp ids) if kept


def modeling_box(body: Body, scale=None) -> ModelingSpaceBox:
    if scale is None:
        scale = float(os.environ.get(MODELING_SPACE_ENV, MODELING_SPACE_SCALE))
    pts = np.array([v.point for v in body.vertices.values()])
    return modeling_box_for(pts, scale)


# ---------------------------------------------------------------------------
# Regeneration
# ---------------------------------------------------------------------------

def _vertex_faces(body: Body) -> dict:
    key = ("vertex_faces",)
    if key in body._cache:
        return body._cache[key]
    out: dict = {}
    for f in body.faces.values():
        for lp in f.loops:
            for vid in body.loop_vertices(lp):
                out.setdefault(vid, set()).add(f.id)
    body._cache[key] = out
    return out


def resolve_tags(body: Body, tags) -> list:
    ids = []
    for tag in tags:
        found = body.faces_by_tag(tag)
        if not found:
            raise UnknownFaceError(f"no face with origin tag {tag!r}")
        ids.extend(found)
    return sorted(set(ids))


def regenerate(body: Body, pp_tags, transform, *, full_validate=True):
    """Move the tagged faces' planes rigidly and recompute the boundary under
    the unchanged topology graph. Returns the regenerated Body, or an
    IllBoundedReport when the moved geometry no longer supports it."""
    ids = resolve_tags(body, pp_tags if not isinstance(pp_tags, str) else (pp_tags,))
    return regenerate_faces(body, ids, transform, full_validate=full_validate)


def regenerate_faces(body: Body, pp_ids, transform, *, full_validate=True):
    pp_ids = set(pp_ids)
    outward: dict = {}
    for fid in body.faces:
        pl = body.face_outward(fid)
        outward[fid] = transform.apply_plane(pl) if fid in pp_ids else pl

    vfaces = _vertex_faces(body)
    new_points: dict = {}
    diagnoses: list = []
    for vid, fids in vfaces.items():
        planes = geom.dedup_planes([outward[f] for f in sorted(fids)])
        p0 = body.point(vid)
        # minimum-displacement solve: exact for three independent planes,
        # slide-along-the-edge for T-vertices between coplanar faces
        a = np.array([p.n for p in planes])
        b = np.array([p.offset for p in planes]) - a @ p0
        d, _res, rank, _sv = np.linalg.lstsq(a, b, rcond=1e-9)
        sol = p0 + d
        res = float(np.max(np.abs(a @ d - b)))
        if res > 1e-7:
            if len(planes) > 3 and rank >= 3:
                raise NonManifoldUpdateError(
                    f"vertex {vid} has {len(planes)} incident planes with an "
                    f"inconsistent intersection (residual {res:.3g})")
            for f in sorted(fids):
                diagnoses.append(IllBoundedDiagnosis(f, "open_boundary", (vid,)))
            new_points[vid] = p0
            continue
        new_points[vid] = sol

    if diagnoses:
        return IllBoundedReport(tuple(diagnoses))

    # rebuild with the same topology
    vertices = {vid: brep.Vertex(vid, tuple(p)) for vid, p in new_points.items()}
    planes_tbl: list = []
    faces: dict = {}
    for fid, f in body.faces.items():
        planes_tbl.append(outward[fid])
        faces[fid] = brep.Face(fid, len(planes_tbl) - 1, True, f.loops, f.origin_tag)
    new_body = Body(vertices, dict(body.edges), planes_tbl, faces,
                    dict(body.shells), tuple(body.lumps))

    moved_verts = {vid for vid in new_points
                   if not np.allclose(new_points[vid], body.point(vid), atol=EPS_GEOM)}
    affected = {f for vid in moved_verts for f in vfaces[vid]} | pp_ids

    # per-face well-boundedness
    for fid in sorted(body.faces):
        pl = outward[fid]
        frame = Frame.for_plane(pl.n, pl.offset)
        rings = new_body.face_rings(fid)
        bad = False
        for ring in rings:
            if np.any(np.abs(ring @ pl.n - pl.offset) > 1e-6):
                diagnoses.append(IllBoundedDiagnosis(fid, "open_boundary", ()))
                bad = True
                break
        if bad:
            continue
        rings2 = [frame.to_2d(r) for r in rings]
        outer_area = 0.5 * geom.polygon_area2(rings2[0])
        if outer_area <= EPS_AREA:
            diagnoses.append(IllBoundedDiagnosis(fid, "open_boundary", ()))
            continue
        try:
            poly = Polygon(rings2[0], rings2[1:])
            ok = poly.is_valid
        except Exception:
            ok = False
        if not ok:
            diagnoses.append(IllBoundedDiagnosis(fid, "extra_intersection", ()))
            continue
        shell = Polygon(rings2[0])
        for hole in rings2[1:]:
            if 0.5 * geom.polygon_area2(hole) >= -EPS_AREA:
                diagnoses.append(IllBoundedDiagnosis(fid, "extra_intersection", ()))
                break
            if not Polygon(hole[::-1]).within(shell.buffer(1e-9)):
                diagnoses.append(IllBoundedDiagnosis(fid, "extra_intersection", ()))
                break

    if not diagnoses:
        # interference between affected faces and the rest
        fids = sorted(body.faces)
        boxes = {fid: new_body.face_bbox(fid) for fid in fids}
        for fa in sorted(affected):
            lo_a, hi_a = boxes[fa]
            for fb in fids:
                if fb <= fa and fb in affected:
                    continue
                if fb == fa:
                    continue
                lo_b, hi_b = boxes[fb]
                if not geom.aabb_overlap(lo_a, hi_a, lo_b, hi_b, pad=1e-7):
                    continue
                if brep._face_interferes(new_body, fa, fb):
                    diagnoses.append(IllBoundedDiagnosis(fa, "extra_intersection", (fb,)))

    if diagnoses:
        return IllBoundedReport(tuple(diagnoses))
    if full_validate:
        report = validate(new_body)
        if not report.valid:
            diags = tuple(IllBoundedDiagnosis(v.entities[0] if v.entities else -1,
                                              "extra_intersection", tuple(v.entities))
                          for v in report.violations)
            return IllBoundedReport(diags)
    return new_body


def regen_signature(body: Body, pp_ids, transform, box: ModelingSpaceBox):
    """Topology signature of the regenerated model, used to confirm TCPs."""
    res = regenerate_faces(body, pp_ids, transform, full_validate=False)
    if isinstance(res, IllBoundedReport):
        return ("ill", frozenset((d.face, d.kind) for d in res.diagnoses))
    pts = np.array([v.point for v in res.vertices.values()])
    in_box = bool(np.all([box.contains(p, tol=1e-9) for p in pts])) if len(pts) else True
    degenerate = frozenset(fid for fid in res.faces
                           if abs(brep._face_area(res, fid)) < 1e-9)
    return ("ok", in_box, degenerate)


# ---------------------------------------------------------------------------
# Moving front model
# ---------------------------------------------------------------------------

def _ruled_edge_plane(point, edge_dir, motion: Motion, *, strict=True):
    """Plane swept by the rigid motion of an edge (a flush front edge or an
    interior edge of a merged group). None when the sweep is degenerate and
    strict is off; MotionError when the sweep would not be planar."""
    d = geom.unit(edge_dir)
    if abs(motion.angle) > EPS_T:
        u = motion.u
        if float(np.linalg.norm(geom.cross3(d, u))) > 1e-9:
            raise MotionError(
                "rotating a front edge not parallel to the axis would sweep "
                "a non-planar wall")
        w = np.asarray(point) - motion.a
        w = w - float(w @ u) * u
        if float(np.linalg.norm(w)) < 1e-12:
            if strict:
                raise MotionError("front edge lies on the rotation axis")
            return None
        n = geom.unit(geom.cross3(u, w))
        return Plane.from_normal_point(n, point)
    v = motion.v
    n = geom.cross3(d, v)
    if float(np.linalg.norm(n)) < 1e-12:
        if strict:
            raise MotionError("front edge parallel to the translation direction")
        return None
    return Plane.from_normal_point(geom.unit(n), point)


class FrontModel:
    """Regenerated geometry of the moving front as a function of the local
    motion parameter: face planes, loop vertices (each the meet of its three
    incident planes, the moving ones transformed), polygons, and membership
    of the swept band.

    Boundary edges whose neighbor face is coplanar with the front (flush
    neighbors, the state right after a front lands on a coplanar face) have
    no fixed wall plane; the wall they sweep is the ruled plane through the
    edge along the motion, and their vertices ride that plane."""

    def __init__(self, body: Body, pp_ids, motion: Motion):
        self.body = body
        self.motion = motion
        self.pp_ids = tuple(sorted(pp_ids))
        self._tr_cache: dict = {}
        self._vp_cache: dict = {}
        self._ring_cache: dict = {}
        pp_set = set(self.pp_ids)
        vfaces = _vertex_faces(body)
        self.face_base: dict = {}
        self.face_loops: dict = {}
        self.frames: dict = {}
        self.solvers: dict = {}
        self.flush_walls: list = []   # (Plane, neighbor tag) for aux walls
        self.group_walls: list = []   # sweep planes of interior group edges
        flush_fix: dict = {}          # vid -> {fixed face id -> [ruled Planes]}

        usage = body.edge_faces()
        group_edges_done = set()
        for fid in self.pp_ids:
            pl = body.face_outward(fid)
            self.face_base[fid] = pl
            self.frames[fid] = body.face_frame(fid)
            loops = []
            for lp in body.faces[fid].loops:
                loops.append(tuple(body.loop_vertices(lp)))
                for eid, _fwd in lp:
                    if self.motion.is_noop():
                        continue
                    others = [f for f, _s in usage.get(eid, ()) if f != fid]
                    va, vb = body.edges[eid].vertices
                    pa, pb = body.point(va), body.point(vb)
                    for g in others:
                        if g in pp_set:
                            # interior edge of a merged group: its rigid sweep
                            # can bound the band (e.g. a valley line moving
                            # sideways), so offer it as a wall candidate
                            if eid not in group_edges_done:
                                group_edges_done.add(eid)
                                ruled = _ruled_edge_plane(pa, pb - pa, motion,
                                                          strict=False)
                                if ruled is not None:
                                    self.group_walls.append(
                                        (ruled, body.faces[fid].origin_tag))
                            continue
                        if not body.face_outward(g).same_oriented(pl):
                            continue
                        ruled = _ruled_edge_plane(pa, pb - pa, motion)
                        self.flush_walls.append((ruled, body.faces[g].origin_tag))
                        for vid in (va, vb):
                            flush_fix.setdefault(vid, {}).setdefault(g, []).append(ruled)
            self.face_loops[fid] = tuple(loops)

        for fid in self.pp_ids:
            for lp in self.face_loops[fid]:
                for vid in lp:
                    if vid in self.solvers:
                        continue
                    moving = []
                    fixed = []
                    for f in sorted(vfaces[vid]):
                        opl = body.face_outward(f)
                        if f in pp_set:
                            moving.append(opl)
                        elif vid in flush_fix and f in flush_fix[vid]:
                            fixed.extend(flush_fix[vid][f])
                        else:
                            fixed.append(opl)
                    self.solvers[vid] = (geom.dedup_planes(moving),
                                        geom.dedup_planes(fixed))

        # batched ring solver arrays: one 3x3 system per loop vertex for the
        # common case of exactly three incident planes
        self._batch: dict = {}
        for fid in self.pp_ids:
            vids = [vid for lp in self.face_loops[fid] for vid in lp]
            rows_n = np.zeros((len(vids), 3, 3))
            rows_p = np.zeros((len(vids), 3, 3))
            rows_move = np.zeros((len(vids), 3, 1), dtype=bool)
            simple = True
            for i, vid in enumerate(vids):
                moving, fixed = self.solvers[vid]
                if len(moving) + len(fixed) != 3:
                    simple = False
                    break
                k = 0
                for pl in moving:
                    rows_n[i, k] = pl.n
                    rows_p[i, k] = pl.reference_point()
                    rows_move[i, k, 0] = True
                    k += 1
                for pl in fixed:
                    rows_n[i, k] = pl.n
                    rows_p[i, k] = pl.reference_point()
                    k += 1
            if simple:
                self._batch[fid] = (vids, rows_n, rows_p, rows_move)

    def transform(self, s: float):
        key = round(s, 12)
        cache = self._tr_cache
        if key not in cache:
            cache[key] = self.motion.transform(s)
            if len(cache) > 4096:
                cache.clear()
        return cache[key]

    def face_plane(self, fid: int, s: float) -> Plane:
        return self.transform(s).apply_plane(self.face_base[fid])

    def vertex_point(self, vid: int, s: float):
        key = (vid, round(s, 12))
        cache = self._vp_cache
        if key in cache:
            return cache[key]
        moving, fixed = self.solvers[vid]
        tr = self.transform(s)
        planes = [tr.apply_plane(p) for p in moving] + list(fixed)
        planes = geom.dedup_planes(planes)
        # minimum-displacement solve; T-vertices between coplanar faces slide
        p0 = self.body.point(vid)
        a = np.array([p.n for p in planes])
        b = np.array([p.offset for p in planes]) - a @ p0
        d, _res, _rank, _sv = np.linalg.lstsq(a, b, rcond=1e-9)
        sol = p0 + d
        if float(np.max(np.abs(a @ d - b))) > 1e-7:
            sol = None
        if len(cache) > 65536:
            cache.clear()
        cache[key] = sol
        return sol

    def face_rings(self, fid: int, s: float):
        key = (fid, round(s, 12))
        cache = self._ring_cache
        if key in cache:
            return cache[key]
        result = self._face_rings_batched(fid, s)
        if result is NotImplemented:
            rings = []
            ok = True
            for lp in self.face_loops[fid]:
                pts = []
                for vid in lp:
                    p = self.vertex_point(vid, s)
                    if p is None:
                        ok = False
                        break
                    pts.append(p)
                if not ok:
                    break
                rings.append(np.array(pts))
            result = rings if ok else None
        if len(cache) > 16384:
            cache.clear()
        cache[key] = result
        return result

    def _face_rings_batched(self, fid: int, s: float):
        batch = self._batch.get(fid)
        if batch is None:
            return NotImplemented
        vids, rows_n, rows_p, rows_move = batch
        tr = self.transform(s)
        r = tr.rm
        t = tr.tv
        n_m = rows_n @ r.T
        p_m = rows_p @ r.T + t
        n = np.where(rows_move, n_m, rows_n)
        p = np.where(rows_move, p_m, rows_p)
        b = np.einsum("vkj,vkj->vk", n, p)
        det = np.linalg.det(n)
        if np.any(np.abs(det) < 1e-12):
            return None
        pts = np.linalg.solve(n, b[..., None])[..., 0]
        rings = []
        i = 0
        for lp in self.face_loops[fid]:
            rings.append(pts[i:i + len(lp)])
            i += len(lp)
        return rings

    def face_frame(self, fid: int, s: float) -> Frame:
        base = self.frames[fid]
        tr = self.transform(s)
        o = tr.apply_point(np.asarray(base.origin))
        u = tr.apply_direction(np.asarray(base.u))
        v = tr.apply_direction(np.asarray(base.v))
        n = tr.apply_direction(np.asarray(base.normal))
        return Frame(tuple(o), tuple(u), tuple(v), tuple(n))

    def face_polygon(self, fid: int, s: float):
        rings = self.face_rings(fid, s)
        if rings is None:
            return None, None
        frame = self.face_frame(fid, s)
        return frame, [frame.to_2d(r) for r in rings]

    def face_area(self, fid: int, s: float) -> float:
        frame, rings2 = self.face_polygon(fid, s)
        if rings2 is None:
            return 0.0
        area = 0.5 * geom.polygon_area2(rings2[0])
        for h in rings2[1:]:
            area += 0.5 * geom.polygon_area2(h)
        return area

    def sweep_bbox(self, fid: int):
        """Axis-aligned bounds of the face's swept positions (sampled)."""
        key = ("sweep_bbox", fid)
        if key in self._ring_cache:
            return self._ring_cache[key]
        los = []
        his = []
        for s in np.linspace(0.0, 1.0, 5):
            rings = self.face_rings(fid, float(s))
            if rings is None:
                self._ring_cache[key] = None
                return None
            pts = np.vstack(rings)
            los.append(pts.min(axis=0))
            his.append(pts.max(axis=0))
        box = (np.min(los, axis=0) - 1e-6, np.max(his, axis=0) + 1e-6)
        self._ring_cache[key] = box
        return box

    def face_contains(self, fid: int, s: float, p3, tol=1e-7) -> bool:
        """Is the (on-plane) point within the regenerated face region?"""
        bb = self.sweep_bbox(fid)
        if bb is not None:
            p = np.asarray(p3)
            pad = max(tol, 1e-6)
            if np.any(p < bb[0] - pad) or np.any(p > bb[1] + pad):
                return False
        frame, rings2 = self.face_polygon(fid, s)
        if rings2 is None:
            return False
        q = frame.to_2d(np.asarray(p3).reshape(1, 3))[0]
        inside = False
        near = False
        for ring in rings2:
            x1 = ring[:, 0]
            y1 = ring[:, 1]
            x2 = np.roll(x1, -1)
            y2 = np.roll(y1, -1)
            dy = y2 - y1
            nz = dy != 0
            with np.errstate(divide="ignore", invalid="ignore"):
                xint = x1 + (q[1] - y1) * (x2 - x1) / np.where(nz, dy, 1.0)
            cond = ((y1 > q[1]) != (y2 > q[1])) & nz & (q[0] < xint)
            inside ^= bool(np.sum(cond) % 2)
            dx = x2 - x1
            l2 = dx * dx + dy * dy
            l2 = np.where(l2 > 0, l2, 1.0)
            t = np.clip(((q[0] - x1) * dx + (q[1] - y1) * dy) / l2, 0.0, 1.0)
            ex = x1 + t * dx - q[0]
            ey = y1 + t * dy - q[1]
            near |= bool(np.any(ex * ex + ey * ey <= tol * tol))
        return inside or near

    def plane_crossing_params(self, fid: int, p3, s0: float, s1: float):
        mp = MovingPlane(self.face_base[fid], self.motion)
        res = event_roots(mp, EventConstraint.point_crossing(p3), (s0, s1))
        if res.degenerate:
            return []
        return list(res.roots)

    def _plane_distance(self, fid: int, s: float, p3) -> float:
        pl = self.face_plane(fid, s)
        return float(pl.n @ p3) - pl.offset

    def crossings(self, p3) -> list:
        """All front-face crossings of a fixed point over local [0, 1]:
        (parameter, 'solid'|'air'), sorted. A crossing solidifies the point
        when the face's material side arrives (signed distance drops)."""
        out = []
        for fid in self.pp_ids:
            for s in self.plane_crossing_params(fid, p3, -1e-12, 1.0 + 1e-12):
                sc = min(max(s, 0.0), 1.0)
                if not self.face_contains(fid, sc, p3, tol=1e-9):
                    continue
                h = 1e-7
                g0 = self._plane_distance(fid, max(sc - h, 0.0), p3)
                g1 = self._plane_distance(fid, min(sc + h, 1.0), p3)
                out.append((sc, "solid" if g1 < g0 else "air"))
        out.sort()
        return out

    def band_contains(self, pts, box: ModelingSpaceBox) -> np.ndarray:
        """Membership of the volume swept by the front over local [0, 1]."""
        pts = np.atleast_2d(pts)
        out = np.zeros(len(pts), dtype=bool)
        for i, p in enumerate(pts):
            if not box.contains(p, tol=1e-9):
                continue
            out[i] = bool(self.crossings(p))
        return out

    def final_state(self, pts, box: ModelingSpaceBox) -> np.ndarray:
        """Per point: +1 ends solid, -1 ends air, 0 never crossed (keeps its
        initial state). Decided by the last front crossing."""
        return self.final_state_with_param(pts, box)[0]

    def final_state_with_param(self, pts, box: ModelingSpaceBox):
        """final_state plus the parameter of the deciding crossing (-1 when
        the point is never crossed)."""
        pts = np.atleast_2d(pts)
        out = np.zeros(len(pts), dtype=np.int8)
        when = np.full(len(pts), -1.0)
        for i, p in enumerate(pts):
            if not box.contains(p, tol=1e-9):
                continue
            cr = self.crossings(p)
            if cr:
                out[i] = 1 if cr[-1][1] == "solid" else -1
                when[i] = cr[-1][0]
        return out, when


# ---------------------------------------------------------------------------
# Context construction
# ---------------------------------------------------------------------------

def merge_adjacent_faces(body: Body, request: PushPullRequest) -> list:
    """Partition the requested faces into edge-connected groups; each group
    moves as one front so interior shared edges sweep no internal walls."""
    ids = resolve_tags(body, request.face_tags)
    return _contexts_from_ids(body, ids)


# ---------------------------------------------------------------------------
# TCP detection (Algorithm 2 analog)
# ---------------------------------------------------------------------------

def _global_t(t_from, s):
    return t_from + s * (1.0 - t_from)


def detect_next_tcp(body: Body, ctx: PushPullContext, motion: Motion,
                    t_from: float, *, box: ModelingSpaceBox = None,
                    space_scale=None):
    """Earliest confirmed topology change strictly inside (t_from, 1)."""
    if box is None:
        box = modeling_box(body, space_scale)
    rel = motion.restricted(t_from, 1.0)
    if rel.is_noop():
        return None
    fm = FrontModel(body, ctx.pp_faces, rel)
    window = (EPS_T, 1.0 - EPS_T)
    pp_set = set(ctx.pp_faces)
    nei_set = set(ctx.nei_faces)

    nei_planes = []
    ptable = geom.PlaneTable()
    seen = {}
    for f in ctx.nei_faces:
        pl = body.face_outward(f)
        k = ptable.key_of(pl)
        if k not in seen:
            seen[k] = (pl, f)
            nei_planes.append((pl, f))

    candidates = []  # (s, priority, kind, entities)

    def add_roots(roots, kind, entities):
        for s in roots:
            if window[0] <= s <= window[1]:
                candidates.append((s, _KIND_PRIORITY[kind], kind, entities))

    for fid in ctx.pp_faces:
        mp = MovingPlane(fm.face_base[fid], rel)

        # (i) inner group: moving plane reaches the line of a neighbor pair
        for i in range(len(nei_planes)):
            for j in range(i + 1, len(nei_planes)):
                pl_i, f_i = nei_planes[i]
                pl_j, f_j = nei_planes[j]
                res = geom.plane_plane_intersection(pl_i, pl_j)
                if res[0] != "line":
                    continue
                _k, pt, d = res
                r = event_roots(mp, EventConstraint.line_containment(pt, d), window)
                add_roots(r.roots, KIND_INNER, (f_i, f_j))

        # (iii) tangency: moving plane parallel to a neighbor plane; when the
        # planes also become coincident the connection itself degenerates
        for pl_n, f_n in nei_planes:
            r = event_roots(mp, EventConstraint.parallelism(pl_n), window)
            for s in r.roots:
                if not (window[0] <= s <= window[1]):
                    continue
                coincident = mp.at(s).coincident_with(pl_n, tol=1e-7)
                prio = -1 if coincident else _KIND_PRIORITY[KIND_TANGENCY]
                candidates.append((s, prio, KIND_TANGENCY, (f_n,)))

        # (ii) outer group: plane-face collisions filtered by containment
        outer = [f for f in body.faces if f not in pp_set and f not in nei_set]
        seen_pts = set()
        seen_lines = set()
        for f_o in sorted(outer):
            rings = body.face_rings(f_o)
            for ring in rings:
                npts = len(ring)
                for a in range(npts):
                    p = ring[a]
                    pk = tuple(np.round(p, 9))
                    if pk not in seen_pts:
                        seen_pts.add(pk)
                        r = event_roots(mp, EventConstraint.point_crossing(p), window)
                        if not r.degenerate:
                            for s in r.roots:
                                if window[0] <= s <= window[1] and \
                                        fm.face_contains(fid, s, p, tol=1e-7):
                                    candidates.append((s, _KIND_PRIORITY[KIND_OUTER],
                                                       KIND_OUTER, (f_o,)))
                    q = ring[(a + 1) % npts]
                    d = q - p
                    ln = float(np.linalg.norm(d))
                    if ln < EPS_GEOM:
                        continue
                    d = d / ln
                    if d[0] < 0 or (d[0] == 0 and (d[1] < 0 or (d[1] == 0 and d[2] < 0))):
                        d = -d
                    foot = p - float(p @ d) * d  # line's closest point to origin
                    lk = tuple(np.round(d, 9)) + tuple(np.round(foot, 9))
                    if lk in seen_lines:
                        continue
                    seen_lines.add(lk)
                    r = event_roots(mp, EventConstraint.line_containment(p, d), window)
                    if not r.degenerate:
                        for s in r.roots:
                            if window[0] <= s <= window[1]:
                                mid = 0.5 * (p + q)
                                if (fm.face_contains(fid, s, p, tol=1e-7)
                                        or fm.face_contains(fid, s, q, tol=1e-7)
                                        or fm.face_contains(fid, s, mid, tol=1e-7)):
                                    candidates.append((s, _KIND_PRIORITY[KIND_OUTER],
                                                       KIND_OUTER, (f_o,)))

    # (iv) workspace exit of regenerated front vertices; a coarse sweep of
    # every front vertex skips the fine search when the whole front stays
    # deep inside the modeling space
    all_verts = sorted({vid for fid in ctx.pp_faces
                        for lp in fm.face_loops[fid] for vid in lp})
    need_fine = False
    lo_b = np.asarray(box.lo)
    hi_b = np.asarray(box.hi)
    center = (lo_b + hi_b) / 2
    half = (hi_b - lo_b) / 2
    for s in np.linspace(0.0, 1.0, 17):
        for vid in all_verts:
            p = fm.vertex_point(vid, float(s))
            if p is None or np.any(np.abs(p - center) > 0.5 * half):
                need_fine = True
                break
        if need_fine:
            break
    if need_fine:
        any_pp_plane = fm.face_base[ctx.pp_faces[0]]
        for vid in all_verts:
            traj = (lambda v: (lambda s: fm.vertex_point(v, s)))(vid)
            r = event_roots(MovingPlane(any_pp_plane, rel),
                            EventConstraint.box_exit(traj, box), window)
            add_roots(r.roots, KIND_WORKSPACE, (vid,))

    if not candidates:
        return None
    candidates.sort(key=lambda c: (c[0], c[1]))

    # cluster simultaneous candidates within parameter tolerance
    clusters = []
    for c in candidates:
        if clusters and abs(c[0] - clusters[-1][0][0]) <= 10 * EPS_T:
            clusters[-1].append(c)
        else:
            clusters.append([c])

    for cluster in clusters:
        s0 = cluster[0][0]
        tau = _global_t(t_from, s0)
        if tau >= 1.0 - EPS_T:
            return None
        if tau <= t_from + EPS_CONFIRM:
            # below the confirmation probe's resolution; a residue of the
            # event just processed at the interval start
            continue
        eps = EPS_CONFIRM
        t_minus = max(t_from, tau - eps)
        t_plus = min(1.0, tau + eps)
        tr_minus = motion.transform(t_minus).compose(motion.transform(t_from).inverse())
        tr_plus = motion.transform(t_plus).compose(motion.transform(t_from).inverse())
        sig_minus = regen_signature(body, ctx.pp_faces, tr_minus, box)
        sig_plus = regen_signature(body, ctx.pp_faces, tr_plus, box)
        if sig_minus != sig_plus:
            kind = cluster[0][2]
            entities = tuple(sorted({e for c in cluster for e in c[3]}))
            return TcpEvent(t=tau, kind=kind, entities=entities, confirmed=True)
    return None


# ---------------------------------------------------------------------------
# Auxiliary model construction (Algorithm 3 analog)
# ---------------------------------------------------------------------------

def _plane_box_polygon(pl: Plane, box: ModelingSpaceBox):
    """Polygon of a plane clipped to the modeling-space box."""
    lo = np.asarray(box.lo)
    hi = np.asarray(box.hi)
    pts = []
    # collect intersections of the plane with the 12 box edges
    axes = [(0, 1, 2), (1, 2, 0), (2, 0, 1)]
    for ax, ay, az in axes:
        for vy in (lo[ay], hi[ay]):
            for vz in (lo[az], hi[az]):
                # edge along axis ax at (vy, vz)
                p0 = np.zeros(3)
                p0[ay], p0[az] = vy, vz
                d = np.zeros(3)
                d[ax] = 1.0
                denom = float(pl.n @ d)
                if abs(denom) < 1e-12:
                    continue
                p0[ax] = lo[ax]
                t = (pl.offset - float(pl.n @ p0)) / denom
                if -1e-9 <= t <= (hi[ax] - lo[ax]) + 1e-9:
                    q = p0 + t * d
                    pts.append(q)
    if len(pts) < 3:
        return None
    frame = Frame.for_plane(pl.n, pl.offset)
    q2 = frame.to_2d(np.array(pts))
    center = q2.mean(axis=0)
    ang = np.arctan2(q2[:, 1] - center[1], q2[:, 0] - center[0])
    order = np.argsort(ang)
    ring = q2[order]
    dedup = [ring[0]]
    for q in ring[1:]:
        if np.linalg.norm(q - dedup[-1]) > 1e-9:
            dedup.append(q)
    if len(dedup) < 3:
        return None
    return frame, np.array(dedup)


def _check_motion_supported(fm: FrontModel, rel: Motion):
    if abs(rel.angle) <= EPS_T:
        return
    u = rel.u
    a = rel.a
    for fid in fm.pp_ids:
        pl = fm.face_base[fid]
        if abs(float(pl.n @ u)) <= 1e-9:
            # axis parallel to the plane: it must lie in it
            if abs(pl.signed_distance(a)) > 1e-7:
                raise MotionError(
                    "rotation axis must lie in the moving face plane "
                    "(offset axes sweep non-planar volumes)")
        else:
            if float(np.linalg.norm(geom.cross3(pl.n, u))) > 1e-9:
                raise MotionError(
                    "rotation axis must lie in the moving face plane or be "
                    "normal to it")


def build_auxiliary(body: Body, ctx: PushPullContext, motion: Motion,
                    t_a: float, t_b: float, *, box: ModelingSpaceBox = None,
                    space_scale=None, fm: FrontModel = None) -> list:
    """Auxiliary volumes swept by the context's front over [t_a, t_b]
    (no confirmed TCP may lie strictly inside), signed per part."""
    if t_b - t_a <= EPS_T:
        return []
    if box is None:
        box = modeling_box(body, space_scale)
    rel = motion.restricted(t_a, t_b)
    if rel.is_noop():
        return []
    if fm is None:
        fm = FrontModel(body, ctx.pp_faces, rel)
    _check_motion_supported(fm, rel)

    candidates = _sweep_candidates(body, ctx, fm, rel, box, key_prefix=0)
    if candidates is None:
        return []
    # model faces bound the signed regions where they touch existing material
    lo_band, hi_band = _candidates_bbox([c for c in candidates if c.rank <= 1])
    for fid in sorted(body.faces):
        lo_f, hi_f = body.face_bbox(fid)
        if not geom.aabb_overlap(lo_band, hi_band, lo_f, hi_f, pad=1e-6):
            continue
        candidates.append(_model_candidate(body, fid))

    def memberships(pts):
        state = fm.final_state(pts, box)
        in_m = classify_points(body, pts) >= 0
        return [(state == -1) & in_m, (state == 1) & ~in_m]

    regions = assemble_multi(candidates, memberships, context="auxiliary")
    out = []
    tags = tuple(sorted({body.faces[f].origin_tag for f in ctx.pp_faces}))
    for sign, region in zip(("subtractive", "additive"), regions):
        if region.is_empty():
            continue
        for part in split_lumps(region):
            rep = validate(part)
            if not rep.valid:
                raise InternalError("auxiliary shell failed to close: "
                                    + "; ".join(v.message for v in rep.violations[:3]))
            if volume_unchecked(part) > 1e-12:
                out.append(AuxiliaryVolume(part, sign, (t_a, t_b), tags))
    return out


def _candidates_bbox(candidates):
    los, his = zip(*(c.bbox3() for c in candidates))
    return np.min(np.array(los), axis=0), np.max(np.array(his), axis=0)


def _model_candidate(body: Body, fid: int) -> Candidate:
    pl = body.face_outward(fid)
    frame = body.face_frame(fid)
    rings = body.face_rings(fid)
    poly = Polygon(frame.to_2d(rings[0]), [frame.to_2d(r) for r in rings[1:]])
    return Candidate(pl, frame, poly, body.faces[fid].origin_tag, 4, (4, fid))


def _sweep_candidates(body: Body, ctx: PushPullContext, fm: FrontModel,
                      rel: Motion, box: ModelingSpaceBox, key_prefix=0):
    """Start caps, target caps, neighbor walls, edge-sweep walls, and (when
    the sweep can reach it) modeling-space walls for one context. None when
    no front plane actually sweeps."""
    candidates = []
    for fid in ctx.pp_faces:
        pl = fm.face_base[fid]
        if abs(rel.angle) > EPS_T and float(np.linalg.norm(geom.cross3(pl.n, rel.u))) > 1e-9:
            pass  # axis in plane: plane sweeps
        elif abs(rel.angle) > EPS_T:
            continue  # plane invariant under rotation about its normal
        elif abs(float(pl.n @ rel.v)) <= EPS_GEOM:
            continue  # translation within the plane: no sweep
        frame = body.face_frame(fid)
        rings = body.face_rings(fid)
        poly = Polygon(frame.to_2d(rings[0]), [frame.to_2d(r) for r in rings[1:]])
        tag = body.faces[fid].origin_tag
        candidates.append(Candidate(pl, frame, poly, tag, 0, (key_prefix, 0, fid)))
        tframe, trings = fm.face_polygon(fid, 1.0)
        if trings is not None:
            outer = trings[0]
            if 0.5 * abs(geom.polygon_area2(outer)) > EPS_AREA:
                tpoly = Polygon(outer, [r for r in trings[1:]])
                if not tpoly.is_valid:
                    tpoly = shapely.make_valid(tpoly)
                    polys = [g for g in getattr(tpoly, "geoms", [tpoly])
                             if g.geom_type == "Polygon"]
                    tpoly = max(polys, key=lambda g: g.area) if polys else None
                if tpoly is not None:
                    tpl = fm.face_plane(fid, 1.0)
                    candidates.append(Candidate(tpl, tframe, tpoly, tag, 1,
                                                (key_prefix, 1, fid)))
    if not candidates:
        return None

    wall_table = geom.PlaneTable()
    seen_wall = set()
    for f_n in ctx.nei_faces:
        pl = body.face_outward(f_n)
        k = wall_table.key_of(pl)
        if k in seen_wall:
            continue
        seen_wall.add(k)
        clipped = _plane_box_polygon(pl, box)
        if clipped is None:
            continue
        frame, ring = clipped
        candidates.append(Candidate(pl, frame, Polygon(ring),
                                    body.faces[f_n].origin_tag, 2,
                                    (key_prefix, 2, k)))
    # walls swept by flush and interior front edges (fresh planes, fresh tags)
    for pl, nei_tag in fm.flush_walls + fm.group_walls:
        k = wall_table.key_of(pl)
        if k in seen_wall:
            continue
        seen_wall.add(k)
        clipped = _plane_box_polygon(pl, box)
        if clipped is None:
            continue
        frame, ring = clipped
        candidates.append(Candidate(pl, frame, Polygon(ring),
                                    f"sweep:{nei_tag}", 2, (key_prefix, 2, k)))
    # modeling-space walls close sweeps that leave the workspace; skip them
    # when the swept band cannot reach the box boundary
    lo = np.asarray(box.lo)
    hi = np.asarray(box.hi)
    lo_c, hi_c = _candidates_bbox([c for c in candidates if c.rank <= 1])
    if np.any(lo_c <= lo + 0.05 * (hi - lo)) or np.any(hi_c >= hi - 0.05 * (hi - lo)):
        for axis in range(3):
            for sign, off in ((1.0, hi[axis]), (-1.0, lo[axis])):
                n = np.zeros(3)
                n[axis] = sign
                pl = Plane(tuple(n), sign * off)
                clipped = _plane_box_polygon(pl, box)
                if clipped is None:
                    continue
                frame, ring = clipped
                candidates.append(Candidate(pl, frame, Polygon(ring), "workspace",
                                            3, (key_prefix, 3, axis, sign)))
    return candidates


def split_lumps(body: Body) -> list:
    """One body per lump."""
    if len(body.lumps) <= 1:
        return [] if body.is_empty() else [body]
    out = []
    for lump in body.lumps:
        fids = sorted(fid for sid in lump.shells for fid in body.shells[sid].faces)
        patches = []
        for fid in fids:
            rings = body.face_rings(fid)
            patches.append(FacePatch(rings[0], list(rings[1:]),
                                     body.faces[fid].origin_tag,
                                     np.asarray(body.face_outward(fid).n)))
        out.append(build_body(patches))
    return out


# ---------------------------------------------------------------------------
# Overlap subdivision (three-part rule)
# ---------------------------------------------------------------------------

def subdivide_overlaps(auxes: list) -> list:
    """Split volumetrically overlapping auxiliary volumes into disjoint
    parts: remainders keep their own sign; the shared part keeps the common
    sign, or cancels when the signs differ."""
    work = sorted(auxes, key=_aux_key)
    guard = 0
    while guard < 64:
        guard += 1
        overlap = None
        for i in range(len(work)):
            for j in range(i + 1, len(work)):
                inter = bool_op(work[i].body, work[j].body, BoolKind.INTERSECTION,
                                check_inputs=False)
                if not inter.is_empty() and volume_unchecked(inter) > 1e-12:
                    overlap = (i, j, inter)
                    break
            if overlap:
                break
        if overlap is None:
            break
        i, j, inter = overlap
        a, b = work[i], work[j]
        rest = [w for k, w in enumerate(work) if k not in (i, j)]
        for src in (a, b):
            diff = bool_op(src.body, inter, BoolKind.DIFFERENCE, check_inputs=False)
            for piece in split_lumps(diff):
                if volume_unchecked(piece) > 1e-12:
                    rest.append(AuxiliaryVolume(piece, src.sign, src.interval,
                                                src.source_tags))
        if a.sign == b.sign:
            tags = tuple(sorted(set(a.source_tags) | set(b.source_tags)))
            for piece in split_lumps(inter):
                rest.append(AuxiliaryVolume(piece, a.sign, a.interval, tags))
        work = sorted(rest, key=_aux_key)
    return work


def _aux_key(aux: AuxiliaryVolume):
    lo, hi = aux.body.bbox()
    return (aux.source_tags, aux.sign, tuple(np.round(lo, 9)), tuple(np.round(hi, 9)))


# ---------------------------------------------------------------------------
# Main loop (Algorithm 1 analog)
# ---------------------------------------------------------------------------

def _adopt_front(model: Body, fm: FrontModel, ctx: PushPullContext,
                 s: float) -> list:
    """Faces of the updated model that continue the moving front: they lie on
    the moved plane with matching orientation and overlap the swept front's
    end region."""
    adopted = []
    for fid in ctx.pp_faces:
        tpl = fm.face_plane(fid, s)
        frame, rings2 = fm.face_polygon(fid, s)
        if rings2 is None:
            continue
        region = Polygon(rings2[0], rings2[1:])
        if not region.is_valid:
            region = region.buffer(0)
        if region.is_empty:
            continue
        for gid in sorted(model.faces):
            gpl = model.face_outward(gid)
            if float(gpl.n @ tpl.n) < 1.0 - 1e-9:
                continue
            if abs(gpl.offset - tpl.offset) > 1e-7:
                continue
            grings = model.face_rings(gid)
            g2 = [frame.to_2d(r) for r in grings]
            gpoly = Polygon(g2[0], g2[1:])
            if not gpoly.is_valid:
                gpoly = gpoly.buffer(0)
            try:
                inter = gpoly.intersection(region)
            except Exception:
                continue
            if inter.area > 1e-9:
                adopted.append(gid)
    return sorted(set(adopted))


def apply_push_pull(body: Body, request: PushPullRequest, *,
                    space_scale=None, keep_models=False) -> tuple:
    """Run the full continuity-based edit; returns (body, trace)."""
    report = validate(body)
    if not report.valid:
        raise ValidityError("push-pull requires a valid body", report)
    motion = request.motion
    trace = PushPullTrace()
    box = modeling_box(body, space_scale)
    model = body
    t = 0.0
    trace.volumes.append((0.0, volume_unchecked(model)))

    contexts = merge_adjacent_faces(body, request)
    if keep_models:
        trace.models.append((0.0, body, tuple(f for c in contexts for f in c.pp_faces)))
    guard = 0
    while t < 1.0 - EPS_T and guard < 64:
        guard += 1
        if motion.is_noop():
            break
        events = []
        for ctx in contexts:
            ev = detect_next_tcp(model, ctx, motion, t, box=box)
            if ev is not None:
                events.append((ev, ctx))
        if events:
            events.sort(key=lambda e: e[0].t)
            tau = events[0][0].t
            fired = [e for e in events if abs(e[0].t - tau) <= 10 * EPS_T]
        else:
            tau = 1.0
            fired = []

        front_area = 0.0
        speed = 0.0
        rel = motion.restricted(t, tau)
        fms = []  # (ctx, front model over [t, tau]) reused for re-seeding
        for ctx in contexts:
            fm = FrontModel(model, ctx.pp_faces, rel)
            fms.append((ctx, fm))
            _check_motion_supported(fm, rel)
            for fid in ctx.pp_faces:
                front_area = max(front_area,
                                 abs(fm.face_area(fid, 0.0)),
                                 abs(fm.face_area(fid, 1.0)),
                                 abs(fm.face_area(fid, 0.5)))
            pts = np.array([model.point(v) for fid in ctx.pp_faces
                            for lp in model.faces[fid].loops
                            for v in model.loop_vertices(lp)])
            if tau > t:
                speed = max(speed, rel.max_speed(pts) / (tau - t))

        # one arrangement per interval: the signed sweep regions of every
        # context and the updated model all classify over the same fragments
        model, summaries = _apply_interval(model, fms, rel, box, (t, tau))
        vol_after = volume_unchecked(model)
        trace.intervals.append(IntervalRecord(t, tau, summaries, vol_after,
                                              front_area, speed))
        trace.volumes.append((tau, vol_after))

        if tau >= 1.0 - EPS_T:
            break
        if fired:
            # simultaneous events across contexts merge into one TCP
            kind = min((e[0].kind for e in fired), key=_KIND_PRIORITY.get)
            entities = tuple(sorted({x for e in fired for x in e[0].entities}))
            trace.events.append(TcpEvent(tau, kind, entities, True))

        # re-seed the moving front on the updated model
        new_ids = []
        for ctx, fm in fms:
            new_ids.extend(_adopt_front(model, fm, ctx, 1.0))
        t = tau
        new_ids = sorted(set(new_ids))
        if not new_ids:
            trace.notes.append(
                f"moving front annihilated at t={t:.9g}; remaining motion has no effect")
            break
        contexts = _contexts_from_ids(model, new_ids)
        if keep_models:
            trace.models.append((t, model, tuple(new_ids)))

    trace.final_report = validate(model)
    return model, trace


def _apply_interval(model: Body, fms: list, rel: Motion, box: ModelingSpaceBox,
                    interval) -> tuple:
    """Update the model over one TCP-free interval.

    The subtractive/additive sweep regions of all contexts and the final
    model share one boundary arrangement; a point's state is decided by its
    last front crossing across every context, which is what sequential
    regularized subtract/unite of the disjoint subdivided parts computes."""
    candidates = []
    active = []
    for ctx, fm in fms:
        cands = _sweep_candidates(model, ctx, fm, rel, box,
                                  key_prefix=len(active) + 10)
        if cands is None:
            continue
        active.append((ctx, fm))
        candidates.extend(cands)
    if not active:
        return model, []
    for fid in sorted(model.faces):
        candidates.append(_model_candidate(model, fid))

    def memberships(pts):
        in_m = classify_points(model, pts) >= 0
        states = []
        whens = []
        for _ctx, fm in active:
            st, when = fm.final_state_with_param(pts, box)
            states.append(st)
            whens.append(when)
        states = np.array(states)
        whens = np.array(whens)
        latest = np.argmax(whens, axis=0)
        idx = np.arange(pts.shape[0] if hasattr(pts, "shape") else len(pts))
        combined = states[latest, idx]
        crossed = np.max(whens, axis=0) >= 0
        final_solid = np.where(crossed, combined == 1, in_m)
        masks = []
        for st in states:
            masks.append((st == -1) & in_m)
            masks.append((st == 1) & ~in_m)
        masks.append(final_solid)
        return masks

    outs = assemble_multi(candidates, memberships, context="interval")
    summaries = []
    for (ctx, _fm), sub, add in zip(active, outs[0:-1:2], outs[1:-1:2]):
        tags = tuple(sorted({model.faces[f].origin_tag for f in ctx.pp_faces}))
        vs = volume_unchecked(sub)
        va = volume_unchecked(add)
        if vs > 1e-12:
            summaries.append(("subtractive", vs, tags))
        if va > 1e-12:
            summaries.append(("additive", va, tags))
    return outs[-1], summaries


def _contexts_from_ids(model: Body, ids) -> list:
    ids = sorted(set(ids))
    parent = {i: i for i in ids}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for eid, us in model.edge_faces().items():
        fs = [u[0] for u in us if u[0] in parent]
        for other in fs[1:]:
            ra, rb = find(fs[0]), find(other)
            if ra != rb:
                parent[rb] = ra
    groups: dict = {}
    for i in ids:
        groups.setdefault(find(i), []).append(i)
    out = []
    for root in sorted(groups):
        members = tuple(sorted(groups[root]))
        nei = tuple(sorted(neighbors(model, set(members))))
        out.append(PushPullContext(members, nei, len(members) > 1,
                                   tuple(model.face_outward(f) for f in members)))
    return out
