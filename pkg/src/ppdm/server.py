"""HTTP session server for interactive editing.

Endpoints mirror the session message ops one-to-one with JSON bodies:
load, list_faces, select, preview, commit, undo, export_mesh (plus a mesh
getter for the current model). Previews run on a scratch copy and never
mutate the session; commits push undo snapshots. One session per server
process; malformed requests return an error response and leave the session
intact.
"""

from __future__ import annotations

import math

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response

from . import errors
from .brep import face_areas, validate, volume_unchecked
from .documents import document_to_body, trace_to_document
from .geometry import Motion
from .meshio import export_mesh, mesh_payload
from .pushpull import PushPullRequest, apply_push_pull

UNDO_DEPTH = 16


def parse_motion(spec) -> Motion:
    if not isinstance(spec, dict):
        raise errors.MotionError("motion must be an object")
    translate = spec.get("translate")
    rotate = spec.get("rotate")
    if translate is not None and (not isinstance(translate, list) or len(translate) != 3):
        raise errors.MotionError("motion.translate must be [x, y, z]")
    if rotate is not None:
        if not isinstance(rotate, dict):
            raise errors.MotionError("motion.rotate must be an object")
        for k in ("axis_point", "axis_dir"):
            if not isinstance(rotate.get(k), list) or len(rotate[k]) != 3:
                raise errors.MotionError(f"motion.rotate.{k} must be [x, y, z]")
        if "angle_deg" not in rotate and "angle_rad" not in rotate:
            raise errors.MotionError("motion.rotate needs angle_deg or angle_rad")
    if translate and rotate:
        angle = rotate.get("angle_rad", math.radians(rotate.get("angle_deg", 0.0)))
        return Motion.screw(translate, rotate["axis_point"], rotate["axis_dir"], angle)
    if rotate:
        angle = rotate.get("angle_rad", math.radians(rotate.get("angle_deg", 0.0)))
        return Motion.rotate(rotate["axis_point"], rotate["axis_dir"], angle)
    if translate:
        return Motion.translate(translate)
    raise errors.MotionError("motion needs translate and/or rotate")


class Session:
    def __init__(self):
        self.body = None
        self.selection: tuple = ()
        self.undo_stack: list = []

    def model_meta(self) -> dict:
        if self.body is None:
            return {"loaded": False}
        report = validate(self.body)
        lo, hi = self.body.bbox()
        return {
            "loaded": True,
            "valid": report.valid,
            "volume": volume_unchecked(self.body),
            "face_count": len(self.body.faces),
            "tags": sorted(self.body.tags()),
            "bbox": [list(lo), list(hi)],
            "undo_depth": len(self.undo_stack),
        }

    def face_list(self) -> list:
        areas = face_areas(self.body)
        return [{
            "id": fid,
            "tag": self.body.faces[fid].origin_tag,
            "area": areas[fid],
            "selected": self.body.faces[fid].origin_tag in self.selection,
        } for fid in sorted(self.body.faces)]


def create_app() -> FastAPI:
    app = FastAPI(title="ppdm session")
    session = Session()

    def error_response(exc, status=400):
        return JSONResponse({"error": {"code": type(exc).__name__, "message": str(exc)}},
                            status_code=status)

    def require_model():
        if session.body is None:
            raise errors.PpdmError("no model loaded")

    @app.exception_handler(errors.PpdmError)
    async def _ppdm_error(_req: Request, exc: errors.PpdmError):
        return error_response(exc)

    @app.post("/load")
    async def load(payload: dict):
        doc = payload.get("document")
        if doc is None:
            raise errors.DocumentError("payload must carry a document")
        body = document_to_body(doc)
        report = validate(body)
        if not report.valid:
            raise errors.ValidityError("document is not a valid solid", report)
        session.body = body
        session.selection = ()
        session.undo_stack = []
        return {"model_meta": session.model_meta(), "mesh": mesh_payload(body)}

    @app.get("/list_faces")
    async def list_faces():
        require_model()
        return {"face_list": session.face_list()}

    @app.post("/select")
    async def select(payload: dict):
        require_model()
        tags = payload.get("tags")
        if not isinstance(tags, list):
            raise errors.DocumentError("select payload needs tags: [..]")
        known = session.body.tags()
        for t in tags:
            if t not in known:
                raise errors.UnknownFaceError(f"unknown face tag {t!r}")
        session.selection = tuple(tags)
        return {"face_list": session.face_list()}

    @app.post("/preview")
    async def preview(payload: dict):
        require_model()
        motion = parse_motion(payload.get("motion"))
        t = float(payload.get("t", 1.0))
        if not (0.0 <= t <= 1.0):
            raise errors.MotionError("preview t must lie in [0, 1]")
        tags = tuple(payload.get("tags") or session.selection)
        if not tags:
            raise errors.UnknownFaceError("nothing selected")
        restricted = motion.restricted(0.0, t) if t < 1.0 else motion
        out, trace = apply_push_pull(session.body,
                                     PushPullRequest.make(tags, restricted))
        return {"mesh": mesh_payload(out), "trace": trace_to_document(trace)}

    @app.post("/commit")
    async def commit(payload: dict):
        require_model()
        motion = parse_motion(payload.get("motion"))
        tags = tuple(payload.get("tags") or session.selection)
        if not tags:
            raise errors.UnknownFaceError("nothing selected")
        out, trace = apply_push_pull(session.body, PushPullRequest.make(tags, motion))
        session.undo_stack.append(session.body)
        del session.undo_stack[:-UNDO_DEPTH]
        session.body = out
        session.selection = tuple(t for t in session.selection if t in out.tags())
        return {"model_meta": session.model_meta(), "mesh": mesh_payload(out),
                "trace": trace_to_document(trace)}

    @app.post("/undo")
    async def undo():
        require_model()
        if not session.undo_stack:
            raise errors.PpdmError("nothing to undo")
        session.body = session.undo_stack.pop()
        session.selection = tuple(t for t in session.selection if t in session.body.tags())
        return {"model_meta": session.model_meta(), "mesh": mesh_payload(session.body)}

    @app.get("/mesh")
    async def mesh():
        require_model()
        return {"mesh": mesh_payload(session.body)}

    @app.get("/export_mesh")
    async def export(format: str = "obj"):
        require_model()
        if format not in ("obj", "stl"):
            raise errors.DocumentError("format must be obj or stl")
        data = export_mesh(session.body, format)
        media = "text/plain"
        return Response(content=data, media_type=media,
                        headers={"Content-Disposition": f"attachment; filename=model.{format}"})

    return app
