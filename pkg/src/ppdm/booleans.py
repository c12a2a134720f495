"""Regularized Boolean set operations, point membership classification, and
the Monte-Carlo volume oracle.

The Boolean engine works by boundary arrangement plus membership probes:
every face of both operands is cut by the traces of the other faces' planes,
each fragment is classified by the set membership of two points offset a
little to either side, and the surviving fragments (flipped where material
sits on the outside of the source orientation) are stitched into the result.
The same assembly routine also builds swept auxiliary volumes from an
analytic membership function.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
import shapely
from shapely.geometry import LineString, Point, Polygon
from shapely.ops import polygonize, unary_union

from . import brep, geom
from .brep import Body, FacePatch, build_body, validate, volume_unchecked
from .errors import RobustnessFailure, ValidityError
from .geom import Frame, Plane
from .tol import EPS_AREA, EPS_GEOM, PROBE_DELTA, SNAP_DIHEDRAL


class BoolKind(enum.Enum):
    UNION = "union"
    DIFFERENCE = "difference"
    INTERSECTION = "intersection"


class Classification(enum.Enum):
    INSIDE = "inside"
    OUTSIDE = "outside"
    ON_BOUNDARY = "on_boundary"


# deterministic ray directions, mildly irrational to dodge axis alignments
_RAY_DIRS = [
    geom.unit([0.5773502691896258, 0.5773502691896257, 0.5773502691896259]),
    geom.unit([0.8511233471, -0.3421766812, 0.3981123944]),
    geom.unit([-0.2671233145, 0.9211455233, 0.2834912311]),
    geom.unit([0.1234567891, -0.4321987654, 0.8932145611]),
    geom.unit([-0.7071456121, -0.1234912388, 0.6961233412]),
    geom.unit([0.3341276551, 0.6612348811, -0.6712389145]),
    geom.unit([-0.5512347781, 0.2213456618, -0.8041123475]),
    geom.unit([0.9123356671, 0.2231449911, 0.3441192371]),
]


def _face_geometry(body: Body):
    """Cached per-face arrays used by the vectorized classifier."""
    key = ("pmc",)
    if key in body._cache:
        return body._cache[key]
    data = []
    for fid in sorted(body.faces):
        pl = body.face_outward(fid)
        frame = body.face_frame(fid)
        rings3 = body.face_rings(fid)
        rings2 = [frame.to_2d(r) for r in rings3]
        data.append({
            "fid": fid,
            "n": np.asarray(pl.n),
            "o": pl.offset,
            "origin": np.asarray(frame.origin),
            "u": np.asarray(frame.u),
            "v": np.asarray(frame.v),
            "rings": rings2,
            "poly": body.face_polygon(fid),
        })
    body._cache[key] = data
    return data


def _rings_hit(rings, qx, qy, band):
    """Vectorized crossing-parity over a face's rings plus a near-boundary flag."""
    inside = np.zeros(qx.shape, dtype=bool)
    near = np.zeros(qx.shape, dtype=bool)
    band2 = band * band
    for ring in rings:
        x1 = ring[:, 0]
        y1 = ring[:, 1]
        x2 = np.roll(x1, -1)
        y2 = np.roll(y1, -1)
        for k in range(len(x1)):
            ax, ay, bx, by = x1[k], y1[k], x2[k], y2[k]
            dy = by - ay
            if dy != 0.0:
                cond = (ay > qy) != (by > qy)
                if cond.any():
                    xint = ax + (qy - ay) * (bx - ax) / dy
                    inside ^= cond & (qx < xint)
            dx = bx - ax
            l2 = dx * dx + dy * dy
            if l2 <= 0:
                continue
            t = ((qx - ax) * dx + (qy - ay) * dy) / l2
            t = np.clip(t, 0.0, 1.0)
            ex = ax + t * dx - qx
            ey = ay + t * dy - qy
            near |= ex * ex + ey * ey <= band2
    return inside, near


def classify_points(body: Body, pts, boundary_tol=EPS_GEOM) -> np.ndarray:
    """Batch PMC: +1 inside, 0 on boundary, -1 outside."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    n_pts = len(pts)
    out = np.full(n_pts, -1, dtype=np.int8)
    if body.is_empty():
        return out
    faces = _face_geometry(body)

    on = np.zeros(n_pts, dtype=bool)
    for f in faces:
        d = pts @ f["n"] - f["o"]
        idx = np.nonzero(np.abs(d) <= boundary_tol)[0]
        if len(idx) == 0:
            continue
        rel = pts[idx] - f["origin"]
        qx = rel @ f["u"]
        qy = rel @ f["v"]
        inside, near = _rings_hit(f["rings"], qx, qy, boundary_tol)
        on[idx[inside | near]] = True
    out[on] = 0

    todo = np.nonzero(~on)[0]
    for d in _RAY_DIRS:
        if len(todo) == 0:
            break
        p = pts[todo]
        parity = np.zeros(len(todo), dtype=np.int64)
        bad = np.zeros(len(todo), dtype=bool)
        for f in faces:
            denom = float(f["n"] @ d)
            dpl = p @ f["n"] - f["o"]
            if abs(denom) < 1e-12:
                bad |= np.abs(dpl) < 10 * boundary_tol
                continue
            t = -dpl / denom
            act = t > boundary_tol
            if not act.any():
                continue
            q = p[act] + np.outer(t[act], d)
            rel = q - f["origin"]
            qx = rel @ f["u"]
            qy = rel @ f["v"]
            inside, near = _rings_hit(f["rings"], qx, qy, 1e-9)
            pa = np.zeros(len(p), dtype=np.int64)
            pa[act] = inside
            parity += pa
            nb = np.zeros(len(p), dtype=bool)
            nb[act] = near
            bad |= nb
        ok = ~bad
        res = np.where(parity % 2 == 1, 1, -1).astype(np.int8)
        out[todo[ok]] = res[ok]
        todo = todo[bad]
    # points that stayed degenerate for every direction: call them boundary
    out[todo] = 0
    return out


def classify_point(body: Body, p) -> Classification:
    code = int(classify_points(body, np.asarray(p, dtype=float).reshape(1, 3))[0])
    return {1: Classification.INSIDE, 0: Classification.ON_BOUNDARY,
            -1: Classification.OUTSIDE}[code]


def mc_volume(body: Body, samples: int, seed: int, chunk=200_000):
    """Monte-Carlo volume over the body's bounding box; (estimate, stderr)."""
    if samples < 10_000:
        raise ValueError("mc_volume requires at least 10^4 samples")
    if body.is_empty():
        return 0.0, 0.0
    lo, hi = body.bbox()
    span = hi - lo
    box_vol = float(np.prod(span))
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        pts = lo + rng.random((n, 3)) * span
        cls = classify_points(body, pts)
        hits += int(np.sum(cls == 1))
        done += n
    p = hits / samples
    est = p * box_vol
    stderr = box_vol * math.sqrt(max(p * (1 - p), 1e-12) / samples)
    return est, stderr


# ---------------------------------------------------------------------------
# Assembly engine
# ---------------------------------------------------------------------------

@dataclass
class Candidate:
    """A face polygon proposed for the result boundary."""

    plane: Plane        # outward orientation
    frame: Frame
    polygon: Polygon    # 2D in frame
    tag: str
    rank: int           # dedup priority across operands (lower wins)
    source: tuple       # stable identity, e.g. (rank, face id)
    inert: bool = False  # cut others but never appear in the result
    _bbox: tuple = None

    def bbox3(self):
        if self._bbox is None:
            xs, ys = self.polygon.exterior.xy
            pts3 = self.frame.to_3d(np.column_stack([xs, ys]))
            self._bbox = geom.aabb(pts3)
        return self._bbox


def candidates_from_body(body: Body, rank: int, plane_map=None) -> list:
    out = []
    for fid in sorted(body.faces):
        pl = body.face_outward(fid)
        if plane_map is not None:
            pl = plane_map(pl)
        frame = Frame.for_plane(pl.n, pl.offset)
        rings = body.face_rings(fid)
        outer = frame.to_2d(rings[0])
        holes = [frame.to_2d(r) for r in rings[1:]]
        poly = Polygon(outer, holes)
        if not poly.is_valid:
            poly = shapely.make_valid(poly)
            if poly.geom_type != "Polygon":
                polys = [g for g in getattr(poly, "geoms", []) if g.geom_type == "Polygon"]
                if not polys:
                    continue
                poly = max(polys, key=lambda g: g.area)
        out.append(Candidate(pl, frame, poly, body.faces[fid].origin_tag,
                             rank, (rank, fid)))
    return out


class _CutPlanner:
    """Vectorized pairwise plane/bbox precomputation for fragmentation."""

    def __init__(self, candidates):
        self.cands = candidates
        self.normals = np.array([c.plane.n for c in candidates])
        self.offsets = np.array([c.plane.offset for c in candidates])
        boxes = [c.bbox3() for c in candidates]
        self.los = np.array([b[0] for b in boxes])
        self.his = np.array([b[1] for b in boxes])

    def cut_partners(self, i):
        """Indices j that may cut candidate i, with the pair classification:
        list of (j, kind) where kind is 'line' | 'rings'."""
        lo_i = self.los[i]
        hi_i = self.his[i]
        pad = 1e-6
        overlap = np.all(lo_i - pad <= self.his, axis=1) & \
            np.all(self.los - pad <= hi_i, axis=1)
        overlap[i] = False
        out = []
        n_i = self.normals[i]
        o_i = self.offsets[i]
        cross = np.cross(np.broadcast_to(n_i, self.normals.shape), self.normals)
        cross_norm = np.linalg.norm(cross, axis=1)
        dots = self.normals @ n_i
        for j in np.nonzero(overlap)[0]:
            if cross_norm[j] > EPS_GEOM:
                out.append((int(j), "line"))
                continue
            gap = abs(o_i * dots[j] - self.offsets[j])
            if gap <= 10 * PROBE_DELTA:
                out.append((int(j), "rings"))
        return out


def _fragment(cand: Candidate, planner: _CutPlanner, i: int) -> list:
    """Cut a candidate polygon by the traces of the other candidate planes."""
    poly = cand.polygon
    minx, miny, maxx, maxy = poly.bounds
    span = math.hypot(maxx - minx, maxy - miny) + 1.0
    cx, cy = (minx + maxx) / 2, (miny + maxy) / 2
    c3 = cand.frame.to_3d(np.array([[cx, cy]]))[0]
    cuts = []
    for j, kind in planner.cut_partners(i):
        other = planner.cands[j]
        if kind == "rings":
            # coplanar or near-coplanar: cut by the other face's ring segments
            for ring3 in _candidate_rings3(other):
                r2 = cand.frame.to_2d(ring3)
                cuts.append(LineString(np.vstack([r2, r2[:1]])))
            continue
        res = geom.plane_plane_intersection(cand.plane, other.plane)
        if res[0] != "line":
            continue
        _kind, pt, d = res
        # center the cut segment on the polygon's projection onto the line
        t0 = float((c3 - pt) @ d)
        p2 = cand.frame.to_2d(np.array([pt + (t0 - span) * d, pt + (t0 + span) * d]))
        # reject cuts whose supporting line misses the polygon's bbox
        dx = p2[1, 0] - p2[0, 0]
        dy = p2[1, 1] - p2[0, 1]
        ln = math.hypot(dx, dy)
        if ln > 0:
            nx, ny = -dy / ln, dx / ln
            c0 = nx * p2[0, 0] + ny * p2[0, 1]
            corners = (nx * minx + ny * miny, nx * minx + ny * maxy,
                       nx * maxx + ny * miny, nx * maxx + ny * maxy)
            if min(corners) > c0 + 1e-9 or max(corners) < c0 - 1e-9:
                continue
        cuts.append(LineString(p2))
    if not cuts:
        return [poly]
    pieces = []
    try:
        rings = [poly.exterior] + list(poly.interiors)
        merged = unary_union(rings + cuts)
        prep = shapely.prepared.prep(poly)
        for frag in polygonize(merged):
            if frag.area <= EPS_AREA:
                continue
            if prep.contains(frag.representative_point()):
                pieces.append(frag)
    except Exception as exc:  # GEOS failure surfaces as robustness error
        raise RobustnessFailure(f"2D arrangement failed: {exc}") from exc
    if not pieces:
        return [poly]
    return pieces


def _candidate_rings3(cand: Candidate) -> list:
    rings = [np.column_stack(cand.polygon.exterior.xy)]
    rings += [np.column_stack(i.xy) for i in cand.polygon.interiors]
    return [cand.frame.to_3d(r[:-1]) if np.allclose(r[0], r[-1]) else cand.frame.to_3d(r)
            for r in rings]


def _interior_probe(frag: Polygon):
    """Deep interior point of a fragment plus its clearance to the boundary."""
    rp = frag.centroid
    if frag.contains(rp):
        d = frag.boundary.distance(rp)
        if d > 1e-7:
            return rp, d
    rp = frag.representative_point()
    d = frag.boundary.distance(rp)
    if d < 1e-7:
        # sliver or notch: use the incenter of the largest ear triangle
        from .tessellate import triangulate_rings

        outer = np.column_stack(frag.exterior.xy)[:-1]
        holes = [np.column_stack(h.xy)[:-1] for h in frag.interiors]
        try:
            pts, tris = triangulate_rings(outer, holes)
        except Exception:
            return rp, d
        best = None
        for a, b, c in tris:
            pa = np.asarray(pts[a])
            pb = np.asarray(pts[b])
            pc = np.asarray(pts[c])
            la = float(np.linalg.norm(pc - pb))
            lb = float(np.linalg.norm(pc - pa))
            lc = float(np.linalg.norm(pb - pa))
            peri = la + lb + lc
            if peri <= 0:
                continue
            area2 = abs((pb[0] - pa[0]) * (pc[1] - pa[1])
                        - (pb[1] - pa[1]) * (pc[0] - pa[0]))
            r = area2 / peri  # inradius
            if best is None or r > best[0]:
                inc = (la * pa + lb * pb + lc * pc) / peri
                best = (r, inc)
        if best is not None and best[0] > 0:
            cand = Point(*best[1])
            dc = frag.boundary.distance(cand)
            if dc > d:
                return cand, dc
    return rp, d


def assemble(candidates: list, membership, *, context="assembly") -> Body:
    """Build the body bounded by the membership function.

    membership: callable (n,3) array -> bool array, True where the point is
    inside the target point set. Fragments keep their orientation when
    material lies below (against the outward normal) and empty space above;
    they flip when the reverse holds; otherwise they are dropped.
    """
    return assemble_multi(candidates, lambda pts: [membership(pts)],
                          context=context)[0]


def assemble_multi(candidates: list, memberships, *, context="assembly") -> list:
    """Assemble several bodies over one shared boundary arrangement.

    memberships: callable (n,3) array -> list of bool arrays, one per output
    body. Fragmentation and probe placement are shared; only the keep
    decisions differ."""
    planner = _CutPlanner(candidates)
    frags = []  # (candidate, fragment polygon, probe2d, clearance)
    for i, cand in enumerate(candidates):
        if cand.inert:
            continue
        for frag in _fragment(cand, planner, i):
            rp, clear = _interior_probe(frag)
            frags.append((cand, frag, rp, clear))
    if not frags:
        return [brep.empty_body() for _ in range(_n_outputs(memberships))]

    probes = []
    for cand, frag, rp, clear in frags:
        delta = min(PROBE_DELTA, max(0.3 * clear, 1e-9))
        p3 = cand.frame.to_3d(np.array([[rp.x, rp.y]]))[0]
        n = cand.plane.n
        probes.append(p3 + delta * n)
        probes.append(p3 - delta * n)
    masks = memberships(np.array(probes))
    out = []
    for mask in masks:
        above = mask[0::2]
        below = mask[1::2]
        kept = {}  # (source, flipped) -> list of fragments
        for i, (cand, frag, _rp, _clear) in enumerate(frags):
            if below[i] and not above[i]:
                kept.setdefault((cand.source, False), []).append((cand, frag))
            elif above[i] and not below[i]:
                kept.setdefault((cand.source, True), []).append((cand, frag))
        out.append(_assemble_kept(kept))
    return out


def _n_outputs(memberships) -> int:
    probe = memberships(np.zeros((2, 3)))
    return len(probe)


def _assemble_kept(kept: dict) -> Body:
    if not kept:
        return brep.empty_body()

    # group by geometric plane and side for cross-rank overlap dedup
    ptable = geom.PlaneTable(angle_tol=SNAP_DIHEDRAL, offset_tol=10 * EPS_GEOM)
    groups = {}
    for (source, flipped), items in kept.items():
        cand = items[0][0]
        pl = cand.plane if not flipped else cand.plane.flipped()
        k = ptable.key_of(pl)
        side = 1 if float(pl.n @ ptable.rep(k).n) > 0 else -1
        groups.setdefault((k, side), []).append((source, flipped, items))

    patches = []
    for (k, side), members in groups.items():
        members.sort(key=lambda m: m[0])
        multiple = len(members) > 1
        gframe = None
        if multiple:
            rep = ptable.rep(k)
            gn = rep.n * side
            gframe = Frame.for_plane(gn, rep.offset * side)
        claimed = None
        emitted = []  # (tag, outward, frame, region)
        for source, flipped, items in members:
            cand = items[0][0]
            outward = cand.plane.n if not flipped else -cand.plane.n
            frame = cand.frame
            region = unary_union([frag for _c, frag in items])
            if multiple:
                # all members share one chart so overlap subtraction is sound;
                # the lower rank keeps the overlap
                region = _reproject_region(region, cand.frame, gframe)
                frame = gframe
                if claimed is not None:
                    region = region.difference(claimed)
                claimed = unary_union([claimed, region]) if claimed is not None else region
            emitted.append((cand.tag, outward, frame, region))
        if multiple:
            # coplanar pieces that share an origin tag merge back into one
            # face; snap to the incidence tolerance grid so seams from
            # different charts dissolve
            by_tag: dict = {}
            for tag, outward, frame, region in emitted:
                if tag in by_tag:
                    prev = by_tag[tag]
                    merged = unary_union([
                        shapely.set_precision(prev[3], 1e-9),
                        shapely.set_precision(region, 1e-9)])
                    by_tag[tag] = (tag, outward, frame, merged)
                else:
                    by_tag[tag] = (tag, outward, frame, region)
            emitted = list(by_tag.values())
        for tag, outward, frame, region in emitted:
            for poly in _iter_polys(region):
                if poly.area <= 100 * EPS_AREA:
                    continue
                poly = shapely.geometry.polygon.orient(poly, 1.0)
                outer3 = _simplify_ring(frame.to_3d(np.column_stack(poly.exterior.xy)[:-1]))
                holes3 = [_simplify_ring(frame.to_3d(np.column_stack(h.xy)[:-1]))
                          for h in poly.interiors]
                if len(outer3) < 3:
                    continue
                patches.append(FacePatch(outer3, [h for h in holes3 if len(h) >= 3],
                                         tag, outward))
    body = build_body(patches)
    return body


def _reproject_region(region, from_frame: Frame, to_frame: Frame):
    """Re-express a 2D region from one plane chart in another (same plane)."""
    def conv(ring_xy):
        pts3 = from_frame.to_3d(np.asarray(ring_xy))
        return to_frame.to_2d(pts3)

    polys = []
    for poly in _iter_polys(region):
        outer = conv(np.column_stack(poly.exterior.xy))
        holes = [conv(np.column_stack(h.xy)) for h in poly.interiors]
        polys.append(Polygon(outer, holes))
    if not polys:
        return Polygon()
    return unary_union(polys)


def _simplify_ring(pts3: np.ndarray, tol=1e-9) -> np.ndarray:
    """Drop ring vertices collinear with their neighbors; the builder's
    T-junction refinement re-inserts any that adjacent faces still need."""
    pts = np.asarray(pts3, dtype=float)
    changed = True
    while changed and len(pts) > 3:
        changed = False
        n = len(pts)
        for i in range(n):
            a = pts[(i - 1) % n]
            b = pts[i]
            c = pts[(i + 1) % n]
            ac = c - a
            l2 = float(ac @ ac)
            if l2 >= tol * tol:
                t = float((b - a) @ ac) / l2
                d = b - (a + t * ac)
                if not (0.0 <= t <= 1.0 and float(d @ d) <= tol * tol):
                    continue
            pts = np.delete(pts, i, axis=0)
            changed = True
            break
    return pts


def _iter_polys(region):
    if region.is_empty:
        return []
    if region.geom_type == "Polygon":
        return [region]
    return [g for g in region.geoms if g.geom_type == "Polygon" and g.area > EPS_AREA]


# ---------------------------------------------------------------------------
# Boolean operations
# ---------------------------------------------------------------------------

def _snapped_plane_map(a: Body, b: Body):
    """Snap near-coplanar planes across the operands to shared geometry."""
    table = geom.PlaneTable(angle_tol=SNAP_DIHEDRAL, offset_tol=EPS_GEOM)
    reps = {}

    def mapper(pl: Plane) -> Plane:
        k = table.key_of(pl)
        rep = table.rep(k)
        if k not in reps:
            reps[k] = rep
        rep = reps[k]
        return rep if float(rep.n @ pl.n) > 0 else rep.flipped()

    return mapper


def bool_op(a: Body, b: Body, kind: BoolKind, *, check_inputs=True,
            check_result=True) -> Body:
    """Regularized union, difference, or intersection of two valid bodies."""
    kind = BoolKind(kind)
    if check_inputs:
        for name, body in (("a", a), ("b", b)):
            rep = validate(body)
            if not rep.valid:
                raise ValidityError(f"operand {name} of {kind.value} is invalid", rep)
    if a.is_empty() and b.is_empty():
        return brep.empty_body()
    if b.is_empty():
        return brep.empty_body() if kind is BoolKind.INTERSECTION else _copy_body(a)
    if a.is_empty():
        return _copy_body(b) if kind is BoolKind.UNION else brep.empty_body()

    mapper = _snapped_plane_map(a, b)
    cands_a = candidates_from_body(a, 0, mapper)
    cands_b = candidates_from_body(b, 1, mapper)
    if kind is BoolKind.DIFFERENCE:
        # faces identical in both operands can never bound a difference:
        # material sits on their inner side in both, so both probes agree.
        # They still cut other candidates.
        def face_key(c):
            n, o = geom.plane_key(c.plane)
            pts = c.frame.to_3d(np.column_stack(c.polygon.exterior.xy)[:-1])
            return (tuple(np.round(n, 9)), round(o, 9),
                    frozenset(map(tuple, np.round(pts, 9))))

        keys_a = {}
        for c in cands_a:
            keys_a.setdefault(face_key(c), []).append(c)
        for c in cands_b:
            twins = keys_a.get(face_key(c))
            if twins and float(twins[0].plane.n @ c.plane.n) > 0:
                c.inert = True
                for t in twins:
                    t.inert = True
    cands = cands_a + cands_b

    def membership(pts):
        ca = classify_points(a, pts)
        cb = classify_points(b, pts)
        # boundary-classified probes count as inside; they only occur when a
        # probe grazes a snapped surface
        in_a = ca >= 0
        in_b = cb >= 0
        if kind is BoolKind.UNION:
            return in_a | in_b
        if kind is BoolKind.INTERSECTION:
            return in_a & in_b
        return in_a & ~in_b

    result = assemble(cands, membership, context=f"bool_{kind.value}")
    if check_result:
        report = validate(result)
        if not report.valid:
            raise RobustnessFailure(
                f"{kind.value} produced an invalid body: "
                + "; ".join(v.message for v in report.violations[:4]))
    return result


def _copy_body(body: Body) -> Body:
    return Body(dict(body.vertices), dict(body.edges), list(body.planes),
                dict(body.faces), dict(body.shells), tuple(body.lumps))


def symdiff_volume(a: Body, b: Body, *, check_inputs=True) -> float:
    """Volume of the regularized symmetric difference (a - b) union (b - a).

    The two one-sided differences are interior-disjoint, so the union volume
    is their sum."""
    if check_inputs:
        for name, body in (("a", a), ("b", b)):
            rep = validate(body)
            if not rep.valid:
                raise ValidityError(f"operand {name} of symdiff is invalid", rep)
    d1 = bool_op(a, b, BoolKind.DIFFERENCE, check_inputs=False)
    d2 = bool_op(b, a, BoolKind.DIFFERENCE, check_inputs=False)
    return volume_unchecked(d1) + volume_unchecked(d2)


def volume_gap(a: Body, b: Body) -> float:
    """|vol(a) - vol(b)|, the weaker volume-based difference measure."""
    return abs(volume_unchecked(a) - volume_unchecked(b))
