"""BREP-JSON v1 documents and edit-trace files."""

from __future__ import annotations

import json

import numpy as np

from .brep import Body, Edge, Face, Lump, Shell, Vertex, validate
from .errors import DocumentError, ValidityError
from .geom import Plane

FORMAT_VERSION = 1


def canonical_form(body: Body) -> Body:
    """Renumber all ids densely in sorted order (stable canonical layout)."""
    vmap = {vid: i for i, vid in enumerate(sorted(body.vertices))}
    emap = {eid: i for i, eid in enumerate(sorted(body.edges))}
    fmap = {fid: i for i, fid in enumerate(sorted(body.faces))}
    smap = {sid: i for i, sid in enumerate(sorted(body.shells))}
    vertices = {vmap[v.id]: Vertex(vmap[v.id], v.point) for v in body.vertices.values()}
    edges = {emap[e.id]: Edge(emap[e.id], (vmap[e.vertices[0]], vmap[e.vertices[1]]))
             for e in body.edges.values()}
    faces = {}
    for f in body.faces.values():
        loops = tuple(tuple((emap[eid], fwd) for eid, fwd in lp) for lp in f.loops)
        faces[fmap[f.id]] = Face(fmap[f.id], f.plane, f.same_sense, loops, f.origin_tag)
    shells = {smap[s.id]: Shell(smap[s.id], tuple(sorted(fmap[x] for x in s.faces)), s.outer)
              for s in body.shells.values()}
    lumps = tuple(Lump(tuple(sorted(smap[x] for x in lp.shells)))
                  for lp in sorted(body.lumps, key=lambda l: tuple(sorted(smap[x] for x in l.shells))))
    return Body(vertices, edges, list(body.planes), faces, shells, lumps)


def body_to_document(body: Body, units="mm") -> dict:
    b = canonical_form(body)
    return {
        "version": FORMAT_VERSION,
        "units": units,
        "vertices": [list(b.vertices[i].point) for i in sorted(b.vertices)],
        "planes": [{"normal": list(p.normal), "offset": p.offset} for p in b.planes],
        "edges": [list(b.edges[i].vertices) for i in sorted(b.edges)],
        "faces": [{
            "plane": b.faces[i].plane,
            "same_sense": b.faces[i].same_sense,
            "loops": [[[eid, bool(fwd)] for eid, fwd in lp] for lp in b.faces[i].loops],
            "origin_tag": b.faces[i].origin_tag,
        } for i in sorted(b.faces)],
        "shells": [{"faces": list(b.shells[i].faces), "outer": b.shells[i].outer}
                   for i in sorted(b.shells)],
        "lumps": [list(lp.shells) for lp in b.lumps],
    }


def save_document(body: Body, units="mm") -> bytes:
    report = validate(body)
    if not report.valid:
        raise ValidityError("refusing to save an invalid body", report)
    doc = body_to_document(body, units)
    return (json.dumps(doc, indent=1, sort_keys=True) + "\n").encode()


def _need(doc, field, types):
    if field not in doc:
        raise DocumentError(f"missing field {field!r}", field=field)
    if not isinstance(doc[field], types):
        raise DocumentError(f"field {field!r} has the wrong type", field=field)
    return doc[field]


def document_to_body(doc: dict) -> Body:
    version = _need(doc, "version", int)
    if version != FORMAT_VERSION:
        raise DocumentError(f"unsupported document version {version}", field="version")
    verts = _need(doc, "vertices", list)
    planes_raw = _need(doc, "planes", list)
    edges_raw = _need(doc, "edges", list)
    faces_raw = _need(doc, "faces", list)
    shells_raw = _need(doc, "shells", list)
    lumps_raw = _need(doc, "lumps", list)

    vertices = {}
    for i, p in enumerate(verts):
        if not (isinstance(p, list) and len(p) == 3):
            raise DocumentError(f"vertices[{i}] is not a coordinate triple", field="vertices")
        vertices[i] = Vertex(i, tuple(float(x) for x in p))
    planes = []
    for i, pr in enumerate(planes_raw):
        n = pr.get("normal") if isinstance(pr, dict) else None
        o = pr.get("offset") if isinstance(pr, dict) else None
        if not (isinstance(n, list) and len(n) == 3 and isinstance(o, (int, float))):
            raise DocumentError(f"planes[{i}] must have normal and offset", field="planes")
        nv = np.asarray(n, dtype=float)
        nn = float(np.linalg.norm(nv))
        if abs(nn - 1.0) > 1e-6:
            raise DocumentError(f"planes[{i}].normal is not unit length", field="planes")
        planes.append(Plane(tuple(nv / nn), float(o)))
    edges = {}
    for i, ev in enumerate(edges_raw):
        if not (isinstance(ev, list) and len(ev) == 2):
            raise DocumentError(f"edges[{i}] is not a vertex pair", field="edges")
        a, b = ev
        if a not in vertices or b not in vertices:
            raise DocumentError(f"edges[{i}] references a missing vertex", field="edges")
        edges[i] = Edge(i, (int(a), int(b)))
    faces = {}
    for i, fr in enumerate(faces_raw):
        if not isinstance(fr, dict):
            raise DocumentError(f"faces[{i}] is not an object", field="faces")
        pidx = fr.get("plane")
        if not isinstance(pidx, int) or not (0 <= pidx < len(planes)):
            raise DocumentError(f"faces[{i}].plane does not resolve", field="faces")
        loops_raw = fr.get("loops")
        if not isinstance(loops_raw, list) or not loops_raw:
            raise DocumentError(f"faces[{i}].loops missing or empty", field="faces")
        loops = []
        for lp in loops_raw:
            entries = []
            for ent in lp:
                if not (isinstance(ent, list) and len(ent) == 2):
                    raise DocumentError(f"faces[{i}] loop entry malformed", field="faces")
                eid, fwd = ent
                if eid not in edges:
                    raise DocumentError(f"faces[{i}] references missing edge {eid}", field="faces")
                entries.append((int(eid), bool(fwd)))
            loops.append(tuple(entries))
        faces[i] = Face(i, pidx, bool(fr.get("same_sense", True)), tuple(loops),
                        str(fr.get("origin_tag", f"face{i}")))
    shells = {}
    for i, sr in enumerate(shells_raw):
        if not isinstance(sr, dict) or "faces" not in sr:
            raise DocumentError(f"shells[{i}] malformed", field="shells")
        for fid in sr["faces"]:
            if fid not in faces:
                raise DocumentError(f"shells[{i}] references missing face {fid}", field="shells")
        shells[i] = Shell(i, tuple(int(f) for f in sr["faces"]), bool(sr.get("outer", True)))
    lumps = []
    for i, lr in enumerate(lumps_raw):
        for sid in lr:
            if sid not in shells:
                raise DocumentError(f"lumps[{i}] references missing shell {sid}", field="lumps")
        lumps.append(Lump(tuple(int(s) for s in lr)))
    body = Body(vertices, edges, planes, faces, shells, tuple(lumps))

    # structural screening (loop closure) is part of loading
    from .brep import _check_structure

    problems: list = []
    if not _check_structure(body, problems):
        raise DocumentError("document structure invalid: " + problems[0].message,
                            field="faces")
    return body


def load_document(data) -> Body:
    if isinstance(data, (bytes, bytearray)):
        data = data.decode()
    if isinstance(data, str):
        try:
            doc = json.loads(data)
        except json.JSONDecodeError as exc:
            raise DocumentError(f"not valid JSON: {exc}") from None
    else:
        doc = data
    if not isinstance(doc, dict):
        raise DocumentError("document root must be an object")
    return document_to_body(doc)


# ---------------------------------------------------------------------------
# Trace files
# ---------------------------------------------------------------------------

def trace_to_document(trace, samples=None) -> dict:
    events = []
    for ev in trace.events:
        interval = next((iv for iv in trace.intervals if abs(iv.t1 - ev.t) < 1e-9), None)
        signs = {s for s, _v, _t in interval.aux} if interval else set()
        events.append({
            "t": ev.t,
            "kind": ev.kind,
            "entities": list(ev.entities),
            "interval_volume": sum(v for _s, v, _t in interval.aux) if interval else 0.0,
            "sign": (signs.pop() if len(signs) == 1 else
                     ("mixed" if signs else "none")),
        })
    doc = {
        "version": 1,
        "events": events,
        "samples": [[t, v] for t, v in (samples if samples is not None else trace.volumes)],
        "intervals": [{
            "t0": iv.t0, "t1": iv.t1,
            "aux": [{"sign": s, "volume": v, "tags": list(tags)} for s, v, tags in iv.aux],
            "volume_after": iv.volume_after,
            "front_area_max": iv.front_area_max,
            "speed_max": iv.speed_max,
        } for iv in trace.intervals],
        "notes": list(trace.notes),
        "final_valid": bool(trace.final_report.valid) if trace.final_report else None,
    }
    return doc


def save_trace(trace, samples=None) -> bytes:
    return (json.dumps(trace_to_document(trace, samples), indent=1, sort_keys=True)
            + "\n").encode()
