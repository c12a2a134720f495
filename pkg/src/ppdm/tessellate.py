"""Face triangulation (ear clipping with hole bridging) and triangle meshes.

The triangulator is a compact port of the classic earcut linked-list ear
clipper: holes are bridged into the outer ring through mutually visible
vertices, then ears are clipped with reflex-vertex blocking and the usual
fallback passes for pinched rings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .brep import Body
from .errors import ValidityError


class _Node:
    __slots__ = ("i", "x", "y", "prev", "next", "steiner")

    def __init__(self, i, x, y):
        self.i = i
        self.x = x
        self.y = y
        self.prev = None
        self.next = None
        self.steiner = False


def _insert_node(i, x, y, last):
    p = _Node(i, x, y)
    if last is None:
        p.prev = p
        p.next = p
    else:
        p.next = last.next
        p.prev = last
        last.next.prev = p
        last.next = p
    return p


def _remove_node(p):
    p.next.prev = p.prev
    p.prev.next = p.next


def _area(p, q, r):
    return (q.y - p.y) * (r.x - q.x) - (q.x - p.x) * (r.y - q.y)


def _equals(p, q):
    return p.x == q.x and p.y == q.y


def _linked_list(pts, indices, clockwise):
    total = 0.0
    n = len(indices)
    for k in range(n):
        a = pts[indices[k]]
        b = pts[indices[(k + 1) % n]]
        total += (b[0] - a[0]) * (b[1] + a[1])
    last = None
    # ccw=True keeps counter-clockwise rings (math orientation) as given
    order = indices if (total < 0) == clockwise else indices[::-1]
    for i in order:
        last = _insert_node(i, pts[i][0], pts[i][1], last)
    if last and _equals(last, last.next):
        _remove_node(last)
        last = last.next
    return last


def _filter_points(start, end=None):
    if start is None:
        return start
    if end is None:
        end = start
    p = start
    while True:
        again = False
        if not p.steiner and (_equals(p, p.next) or _area(p.prev, p, p.next) == 0):
            _remove_node(p)
            p = end = p.prev
            if p == p.next:
                break
            again = True
        else:
            p = p.next
        if not (again or p != end):
            break
    return end


def _point_in_triangle(ax, ay, bx, by, cx, cy, px, py):
    return ((cx - px) * (ay - py) - (ax - px) * (cy - py) >= 0
            and (ax - px) * (by - py) - (bx - px) * (ay - py) >= 0
            and (bx - px) * (cy - py) - (cx - px) * (by - py) >= 0)


def _is_ear(ear):
    a, b, c = ear.prev, ear, ear.next
    if _area(a, b, c) >= 0:
        return False  # reflex or degenerate
    p = ear.next.next
    while p is not ear.prev:
        if (_point_in_triangle(a.x, a.y, b.x, b.y, c.x, c.y, p.x, p.y)
                and _area(p.prev, p, p.next) >= 0):
            return False
        p = p.next
    return True


def _on_segment(p, q, r):
    return (max(p.x, r.x) >= q.x >= min(p.x, r.x)
            and max(p.y, r.y) >= q.y >= min(p.y, r.y))


def _sign(x):
    return (x > 0) - (x < 0)


def _intersects(p1, q1, p2, q2):
    o1 = _sign(_area(p1, q1, p2))
    o2 = _sign(_area(p1, q1, q2))
    o3 = _sign(_area(p2, q2, p1))
    o4 = _sign(_area(p2, q2, q1))
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and _on_segment(p1, p2, q1):
        return True
    if o2 == 0 and _on_segment(p1, q2, q1):
        return True
    if o3 == 0 and _on_segment(p2, p1, q2):
        return True
    if o4 == 0 and _on_segment(p2, q1, q2):
        return True
    return False


def _intersects_polygon(a, b):
    p = a
    while True:
        if (p.i != a.i and p.next.i != a.i and p.i != b.i and p.next.i != b.i
                and _intersects(p, p.next, a, b)):
            return True
        p = p.next
        if p is a:
            return False


def _locally_inside(a, b):
    if _area(a.prev, a, a.next) < 0:
        return _area(a, b, a.next) >= 0 and _area(a, a.prev, b) >= 0
    return _area(a, b, a.prev) < 0 or _area(a, a.next, b) < 0


def _middle_inside(a, b):
    p = a
    inside = False
    px = (a.x + b.x) / 2
    py = (a.y + b.y) / 2
    while True:
        if (((p.y > py) != (p.next.y > py)) and p.next.y != p.y
                and px < (p.next.x - p.x) * (py - p.y) / (p.next.y - p.y) + p.x):
            inside = not inside
        p = p.next
        if p is a:
            return inside


def _is_valid_diagonal(a, b):
    return (a.next.i != b.i and a.prev.i != b.i and not _intersects_polygon(a, b)
            and (_locally_inside(a, b) and _locally_inside(b, a) and _middle_inside(a, b)
                 and (_area(a.prev, a, b.prev) or _area(a, b.prev, b))
                 or _equals(a, b) and _area(a.prev, a, a.next) > 0 and _area(b.prev, b, b.next) > 0))


def _split_polygon(a, b):
    a2 = _Node(a.i, a.x, a.y)
    b2 = _Node(b.i, b.x, b.y)
    an = a.next
    bp = b.prev
    a.next = b
    b.prev = a
    a2.next = an
    an.prev = a2
    b2.next = a2
    a2.prev = b2
    bp.next = b2
    b2.prev = bp
    return b2


def _cure_local_intersections(start, triangles):
    p = start
    while True:
        a, b = p.prev, p.next.next
        if (not _equals(a, b) and _intersects(a, p, p.next, b)
                and _locally_inside(a, b) and _locally_inside(b, a)):
            triangles.append((a.i, p.i, b.i))
            _remove_node(p)
            _remove_node(p.next)
            p = start = b
        p = p.next
        if p is start:
            return _filter_points(p)


def _earcut_linked(ear, triangles, pass_num=0):
    if ear is None:
        return
    stop = ear
    while ear.prev is not ear.next:
        prev = ear.prev
        nxt = ear.next
        if _is_ear(ear):
            triangles.append((prev.i, ear.i, nxt.i))
            _remove_node(ear)
            ear = nxt.next
            stop = nxt.next
            continue
        ear = nxt
        if ear is stop:
            if pass_num == 0:
                _earcut_linked(_filter_points(ear), triangles, 1)
            elif pass_num == 1:
                ear = _cure_local_intersections(_filter_points(ear), triangles)
                _earcut_linked(ear, triangles, 2)
            elif pass_num == 2:
                _split_earcut(ear, triangles)
            break


def _split_earcut(start, triangles):
    a = start
    while True:
        b = a.next.next
        while b is not a.prev:
            if a.i != b.i and _is_valid_diagonal(a, b):
                c = _split_polygon(a, b)
                a = _filter_points(a, a.next)
                c = _filter_points(c, c.next)
                _earcut_linked(a, triangles)
                _earcut_linked(c, triangles)
                return
            b = b.next
        a = a.next
        if a is start:
            return


def _find_hole_bridge(hole, outer_node):
    p = outer_node
    qx = -math.inf
    m = None
    hx, hy = hole.x, hole.y
    while True:
        if hy <= p.y and hy >= p.next.y and p.next.y != p.y:
            x = p.x + (hy - p.y) * (p.next.x - p.x) / (p.next.y - p.y)
            if x <= hx and x > qx:
                qx = x
                m = p if p.x < p.next.x else p.next
                if x == hx:
                    return m  # hole touches outer segment; use that endpoint
        p = p.next
        if p is outer_node:
            break
    if m is None:
        return None
    stop = m
    mx, my = m.x, m.y
    tan_min = math.inf
    p = m
    while True:
        if (hx >= p.x >= mx and hx != p.x
                and _point_in_triangle(hx if hy < my else qx, hy,
                                       mx, my,
                                       qx if hy < my else hx, hy,
                                       p.x, p.y)):
            tan = abs(hy - p.y) / (hx - p.x)
            if (_locally_inside(p, hole)
                    and (tan < tan_min or (tan == tan_min and (p.x > m.x or _sector_contains(m, p))))):
                m = p
                tan_min = tan
        p = p.next
        if p is stop:
            break
    return m


def _sector_contains(m, p):
    return _area(m.prev, m, p.prev) < 0 and _area(p.next, m, m.next) < 0


def _eliminate_holes(pts, hole_rings, outer_node):
    queue = []
    for ring in hole_rings:
        lst = _linked_list(pts, ring, clockwise=False)
        if lst is None:
            continue
        if lst is lst.next:
            lst.steiner = True
        # leftmost node of the hole
        p = lst
        leftmost = lst
        while True:
            if (p.x, p.y) < (leftmost.x, leftmost.y):
                leftmost = p
            p = p.next
            if p is lst:
                break
        queue.append(leftmost)
    queue.sort(key=lambda n: (n.x, n.y))
    for hole in queue:
        bridge = _find_hole_bridge(hole, outer_node)
        if bridge is None:
            continue
        bridge_reverse = _split_polygon(bridge, hole)
        _filter_points(bridge_reverse, bridge_reverse.next)
        outer_node = _filter_points(outer_node, outer_node.next)
    return outer_node


def triangulate_rings(outer2d, holes2d):
    """Triangulate a CCW outer ring with CW hole rings.

    Returns (points, triangles); triangles index into the concatenated point
    list (outer points first, then hole points ring by ring).
    """
    pts = [tuple(map(float, p)) for p in outer2d]
    outer_idx = list(range(len(pts)))
    hole_rings = []
    for h in holes2d:
        start = len(pts)
        pts.extend(tuple(map(float, p)) for p in h)
        hole_rings.append(list(range(start, len(pts))))

    outer_node = _linked_list(pts, outer_idx, clockwise=True)
    if outer_node is None or outer_node.next is outer_node.prev:
        return pts, []
    if hole_rings:
        outer_node = _eliminate_holes(pts, hole_rings, outer_node)
    triangles: list = []
    _earcut_linked(_filter_points(outer_node), triangles)
    return pts, triangles


@dataclass
class TriangleMesh:
    positions: np.ndarray  # (n, 3)
    triangles: np.ndarray  # (m, 3) indices
    face_ids: np.ndarray   # (m,) source face per triangle
    normals: np.ndarray    # (m, 3)
    warnings: list = field(default_factory=list)

    def volume(self) -> float:
        p = self.positions
        t = self.triangles
        if len(t) == 0:
            return 0.0
        a = p[t[:, 0]]
        b = p[t[:, 1]]
        c = p[t[:, 2]]
        return float(np.sum(np.einsum("ij,ij->i", a, np.cross(b, c)))) / 6.0

    def is_empty(self) -> bool:
        return len(self.triangles) == 0


def tessellate(body: Body) -> TriangleMesh:
    """Triangulate every face of a valid body.

    Triangles reuse the body's welded vertex coordinates, so the mesh is
    watertight whenever the body is valid. Degenerate faces are skipped with
    a warning entry.
    """
    from .brep import validate  # local import to avoid cycles in tooling

    report = validate(body)
    if not report.valid:
        raise ValidityError("cannot tessellate an invalid body", report)

    positions = []
    pos_index = {}

    def emit(p3):
        key = tuple(np.round(p3, 12))
        if key not in pos_index:
            pos_index[key] = len(positions)
            positions.append(np.asarray(p3, dtype=float))
        return pos_index[key]

    triangles = []
    face_ids = []
    normals = []
    warnings = []
    for fid in sorted(body.faces):
        frame = body.face_frame(fid)
        rings = body.face_rings(fid)
        outer = frame.to_2d(rings[0])
        holes = [frame.to_2d(r) for r in rings[1:]]
        pts2, tris = triangulate_rings(outer, holes)
        if not tris:
            warnings.append(f"face {fid}: degenerate, skipped")
            continue
        pts3 = frame.to_3d(np.array(pts2))
        outward = np.asarray(body.face_outward(fid).n)
        for (a, b, c) in tris:
            ia, ib, ic = emit(pts3[a]), emit(pts3[b]), emit(pts3[c])
            if ia == ib or ib == ic or ia == ic:
                continue
            triangles.append((ia, ib, ic))
            face_ids.append(fid)
            normals.append(outward)
    if not positions:
        return TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=int),
                            np.zeros(0, dtype=int), np.zeros((0, 3)), warnings)
    return TriangleMesh(np.array(positions), np.array(triangles, dtype=int),
                        np.array(face_ids, dtype=int), np.array(normals), warnings)
