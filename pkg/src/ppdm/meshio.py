"""Mesh export (OBJ with face-tag groups, ASCII STL) and mesh payloads."""

from __future__ import annotations

import numpy as np

from .brep import Body, validate, volume_unchecked
from .errors import ValidityError
from .tessellate import TriangleMesh, tessellate


def export_obj(body: Body) -> bytes:
    mesh = tessellate(body)
    lines = ["# ppdm mesh"]
    for w in mesh.warnings:
        lines.append(f"# warning: {w}")
    if mesh.is_empty():
        lines.append("# empty body")
        return ("\n".join(lines) + "\n").encode()
    for p in mesh.positions:
        lines.append("v {:.12g} {:.12g} {:.12g}".format(*p))
    by_tag: dict = {}
    for k, (tri, fid) in enumerate(zip(mesh.triangles, mesh.face_ids)):
        by_tag.setdefault(body.faces[int(fid)].origin_tag, []).append(tri)
    for tag in sorted(by_tag):
        lines.append(f"g {tag}")
        for tri in by_tag[tag]:
            lines.append("f {} {} {}".format(tri[0] + 1, tri[1] + 1, tri[2] + 1))
    return ("\n".join(lines) + "\n").encode()


def export_stl(body: Body, name="ppdm") -> bytes:
    mesh = tessellate(body)
    lines = [f"solid {name}"]
    p = mesh.positions
    for tri, n in zip(mesh.triangles, mesh.normals):
        lines.append("  facet normal {:.9g} {:.9g} {:.9g}".format(*n))
        lines.append("    outer loop")
        for idx in tri:
            lines.append("      vertex {:.12g} {:.12g} {:.12g}".format(*p[idx]))
        lines.append("    endloop")
        lines.append("  endfacet")
    lines.append(f"endsolid {name}")
    return ("\n".join(lines) + "\n").encode()


def export_mesh(body: Body, format: str) -> bytes:
    report = validate(body)
    if not report.valid:
        raise ValidityError("refusing to export an invalid body", report)
    if format == "obj":
        return export_obj(body)
    if format == "stl":
        return export_stl(body)
    raise ValueError(f"unknown mesh format {format!r}")


def stl_volume(data: bytes) -> float:
    """Enclosed volume of an ASCII STL by divergence over its triangles."""
    total = 0.0
    tri: list = []
    for line in data.decode().splitlines():
        parts = line.split()
        if parts[:1] == ["vertex"]:
            tri.append(np.array([float(x) for x in parts[1:4]]))
            if len(tri) == 3:
                a, b, c = tri
                total += float(a @ np.cross(b, c)) / 6.0
                tri = []
    return total


def mesh_payload(body: Body) -> dict:
    """JSON-ready mesh with per-triangle face tags for picking."""
    mesh = tessellate(body)
    if mesh.is_empty():
        return {"positions": [], "triangles": [], "face_tags": [], "normals": [],
                "volume": 0.0, "warnings": list(mesh.warnings)}
    return {
        "positions": [round(float(x), 12) for x in mesh.positions.ravel()],
        "triangles": [int(i) for i in mesh.triangles.ravel()],
        "face_tags": [body.faces[int(f)].origin_tag for f in mesh.face_ids],
        "normals": [round(float(x), 12) for x in mesh.normals.ravel()],
        "volume": volume_unchecked(body),
        "warnings": list(mesh.warnings),
    }
