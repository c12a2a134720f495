"""Command-line interface: validate, volume, fixture, pushpull, export, serve.

Exit codes: 0 success, 1 domain failure (invalid model, robustness failure),
2 usage error. Failures print one machine-parsable line:
``error: code=<CODE> <message>``.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

from . import errors
from .brep import validate, volume
from .documents import load_document, save_document, save_trace
from .fixtures import FIXTURE_NAMES, make_fixture
from .geometry import Motion
from .meshio import export_mesh
from .pushpull import PushPullRequest, apply_push_pull

_ERROR_CODES = {
    errors.ValidityError: "INVALID_MODEL",
    errors.RobustnessFailure: "ROBUSTNESS_FAILURE",
    errors.DocumentError: "BAD_DOCUMENT",
    errors.UnknownFixtureError: "UNKNOWN_FIXTURE",
    errors.FixtureParamError: "BAD_FIXTURE_PARAMS",
    errors.UnknownFaceError: "UNKNOWN_FACE",
    errors.MotionError: "UNSUPPORTED_MOTION",
    errors.NonManifoldUpdateError: "NON_MANIFOLD_UPDATE",
    errors.InternalError: "INTERNAL_ERROR",
}


def _fail(exc) -> int:
    code = _ERROR_CODES.get(type(exc), "ERROR")
    print(f"error: code={code} {exc}", file=sys.stderr)
    return 1


def _read_body(path):
    with open(path, "rb") as fh:
        return load_document(fh.read())


def _fmt_volume(v: float) -> str:
    """Fixed 12-significant-digit rendering."""
    if v == 0:
        return "0.00000000000"
    digits_before = max(1, int(math.floor(math.log10(abs(v)))) + 1)
    decimals = max(0, 12 - digits_before)
    return f"{v:.{decimals}f}"


def _cmd_validate(args) -> int:
    body = _read_body(args.file)
    report = validate(body)
    if args.report == "json":
        print(json.dumps({
            "valid": report.valid,
            "violations": [{"condition": v.condition, "entities": list(v.entities),
                            "message": v.message} for v in report.violations],
        }, indent=1))
    else:
        print("valid" if report.valid else "invalid")
        for v in report.violations:
            print(f"  condition {v.condition}: {v.message}")
    return 0 if report.valid else 1


def _cmd_volume(args) -> int:
    body = _read_body(args.file)
    print(_fmt_volume(volume(body)))
    return 0


def _cmd_fixture(args) -> int:
    params = {}
    for kv in args.params or []:
        if "=" not in kv:
            raise errors.FixtureParamError(f"expected k=v, got {kv!r}")
        k, v = kv.split("=", 1)
        params[k] = float(v)
    body = make_fixture(args.name, params)
    with open(args.out, "wb") as fh:
        fh.write(save_document(body))
    print(f"wrote {args.out}")
    return 0


def parse_motion_args(args) -> Motion:
    if args.translate and args.rotate:
        t = [float(x) for x in args.translate.split(",")]
        r = [float(x) for x in args.rotate.split(",")]
        if len(t) != 3 or len(r) != 7:
            raise errors.MotionError("bad --translate/--rotate values")
        return Motion.screw(t, r[3:6], r[0:3], math.radians(r[6]))
    if args.translate:
        t = [float(x) for x in args.translate.split(",")]
        if len(t) != 3:
            raise errors.MotionError("--translate expects x,y,z")
        return Motion.translate(t)
    if args.rotate:
        r = [float(x) for x in args.rotate.split(",")]
        if len(r) != 7:
            raise errors.MotionError("--rotate expects ux,uy,uz,px,py,pz,deg")
        return Motion.rotate(r[3:6], r[0:3], math.radians(r[6]))
    raise errors.MotionError("one of --translate/--rotate is required")


def _cmd_pushpull(args) -> int:
    body = _read_body(args.file)
    motion = parse_motion_args(args)
    tags = tuple(t for t in args.faces.split(",") if t)
    request = PushPullRequest.make(tags, motion)
    out, trace = apply_push_pull(body, request)
    samples = None
    if args.steps:
        samples = []
        from .brep import volume_unchecked

        for k in range(args.steps + 1):
            s = k / args.steps
            if s == 0.0:
                samples.append((0.0, volume_unchecked(body)))
                continue
            partial, _tr = apply_push_pull(
                body, PushPullRequest.make(tags, motion.restricted(0.0, s)))
            samples.append((s, volume_unchecked(partial)))
    with open(args.out, "wb") as fh:
        fh.write(save_document(out))
    if args.trace:
        with open(args.trace, "wb") as fh:
            fh.write(save_trace(trace, samples))
    print(f"wrote {args.out}" + (f" and {args.trace}" if args.trace else ""))
    return 0


def _cmd_export(args) -> int:
    body = _read_body(args.file)
    data = export_mesh(body, args.format)
    with open(args.out, "wb") as fh:
        fh.write(data)
    print(f"wrote {args.out}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    app = create_app()
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ppdm",
                                 description="Planar push-pull direct modeling kernel")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check the four validity conditions")
    p.add_argument("file")
    p.add_argument("--report", choices=("text", "json"), default="text")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("volume", help="print the model volume")
    p.add_argument("file")
    p.set_defaults(func=_cmd_volume)

    p = sub.add_parser("fixture", help="write a catalog fixture")
    p.add_argument("name", choices=FIXTURE_NAMES)
    p.add_argument("--params", nargs="*", metavar="k=v")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fixture)

    p = sub.add_parser("pushpull", help="apply a push-pull edit")
    p.add_argument("file")
    p.add_argument("--faces", required=True, help="comma-separated origin tags")
    p.add_argument("--translate", help="x,y,z")
    p.add_argument("--rotate", help="ux,uy,uz,px,py,pz,deg")
    p.add_argument("--out", required=True)
    p.add_argument("--trace")
    p.add_argument("--steps", type=int)
    p.set_defaults(func=_cmd_pushpull)

    p = sub.add_parser("export", help="export a triangle mesh")
    p.add_argument("file")
    p.add_argument("--format", choices=("obj", "stl"), required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_export)

    p = sub.add_parser("serve", help="run the HTTP session server")
    p.add_argument("--port", type=int, default=8787)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=_cmd_serve)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except errors.PpdmError as exc:
        return _fail(exc)
    except FileNotFoundError as exc:
        print(f"error: code=FILE_NOT_FOUND {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
