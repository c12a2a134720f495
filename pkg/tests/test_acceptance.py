"""Acceptance suite: one test per criterion, each timed against its budget
and reporting a pass/fail line."""

import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pytest

from ppdm.booleans import (BoolKind, bool_op, classify_points, mc_volume,
                           symdiff_volume)
from ppdm.brep import build_body, validate, volume_unchecked
from ppdm.fixtures import FIXTURE_NAMES, make_fixture, _prism_patches
from ppdm.geometry import Motion
from ppdm.pushpull import (PushPullRequest, apply_push_pull, build_auxiliary,
                           merge_adjacent_faces, modeling_box, regen_signature,
                           subdivide_overlaps)

# regression corpus: all four TCP kinds, translation and rotation,
# single- and multi-face requests
CORPUS = {
    "step_riser": ("step_block", None, ("riser",), Motion.translate((2, 0, 0)), None),
    "slotted_press": ("slotted_block", None, ("top",), Motion.translate((0, 0, -4)), None),
    "notch_press": ("notch_block", None, ("top",), Motion.translate((0, 0, -1.5)), None),
    "crank_pocket": ("crank_step", None, ("boss_end",), Motion.translate((-2, 0, 0)), None),
    "cube_hinge": ("box", None, ("top",),
                   Motion.rotate((0, 0, 1), (1, 0, 0), -math.radians(100)), None),
    "tall_pull": ("box", None, ("top",), Motion.translate((0, 0, 2.0)), 1.5),
    "dovetail_press": ("dovetail_over_holes", None, ("dove_floor",),
                       Motion.translate((0, 0, -3.5)), None),
    "groove_fill": ("vslot", None, ("incl_left",), Motion.translate((1.25, 0, 1.25)), None),
    "vslot_deepen": ("vslot", None, ("incl_left", "incl_right"),
                     Motion.translate((0, 0, -0.5)), None),
    "vslot_shift": ("vslot", None, ("incl_left", "incl_right"),
                    Motion.translate((0.75, 0, 0)), None),
    "wedge_rock": ("rot_wedge_base", None, ("top",),
                   Motion.rotate((2, 0, 1), (0, 1, 0), math.radians(20)), None),
}

N_SAMPLES = 50


def run_case(name, keep_models=False):
    fixture, params, tags, motion, scale = CORPUS[name]
    body = make_fixture(fixture, params)
    out, trace = apply_push_pull(body, PushPullRequest.make(tags, motion),
                                 space_scale=scale, keep_models=keep_models)
    return body, out, trace


def _report(num, label, elapsed, budget):
    print(f"[PASS] criterion {num}: {label} ({elapsed:.1f}s < {budget:.0f}s)")


def _continuity_chunk(task):
    """One worker task: sampled bodies for k in [k0, k1] of one case, the
    symmetric differences of consecutive pairs, and (for the last chunk) the
    continuity bound from the full-motion trace. Only scalars come back."""
    import gc

    gc.disable()  # short-lived worker; allocation-heavy numeric code
    name, k0, k1 = task
    fixture, params, tags, motion, scale = CORPUS[name]
    body = make_fixture(fixture, params)
    bound = None
    bodies = {}
    for k in range(k0, k1 + 1):
        if k == 0:
            bodies[0] = body
            continue
        restricted = motion if k == N_SAMPLES else motion.restricted(0.0, k / N_SAMPLES)
        sampled, trace = apply_push_pull(
            body, PushPullRequest.make(tags, restricted), space_scale=scale)
        bodies[k] = sampled
        if k == N_SAMPLES:
            area_max = max((iv.front_area_max for iv in trace.intervals), default=0.0)
            speed_max = max((iv.speed_max for iv in trace.intervals), default=0.0)
            bound = 2.0 * area_max * speed_max / N_SAMPLES
    worst = 0.0
    for k in range(k0, k1):
        worst = max(worst, symdiff_volume(bodies[k], bodies[k + 1],
                                          check_inputs=False))
    counts = {k: len(b.faces) for k, b in bodies.items()}
    return name, worst, counts, bound


def _sweep_case(name):
    fixture, params, tags, motion, scale = CORPUS[name]
    body = make_fixture(fixture, params)
    box = modeling_box(body, scale)
    _out, trace = apply_push_pull(body, PushPullRequest.make(tags, motion),
                                  space_scale=scale, keep_models=True)
    steps = 500
    changes = []
    for (t_i, model, pp_ids), iv in zip(trace.models, trace.intervals):
        t_j = iv.t1
        ks = [k for k in range(steps + 1) if t_i < k / steps < t_j]
        if len(ks) < 2:
            continue
        sigs = []
        for k in ks:
            t = k / steps
            tr = motion.transform(t).compose(motion.transform(t_i).inverse())
            sigs.append((k, regen_signature(model, pp_ids, tr, box)))
        # the interior of a TCP-free interval has one constant signature;
        # deviations may only touch the first/last sample of the interval
        interior = sigs[1:-1]
        base = interior[0][1] if interior else sigs[0][1]
        for k, sig in interior:
            if sig != base:
                changes.append((name, t_i, t_j, k))
    return {"name": name, "violations": changes}


class TestAcceptance:
    corpus_results = {}

    def test_criterion_1_validity_closure(self):
        budget = 10.0
        t0 = time.time()
        kinds = set()
        motions = set()
        multi = 0
        for name in CORPUS:
            _body, out, trace = run_case(name)
            assert trace.final_report.valid, f"{name} output invalid"
            type(self).corpus_results[name] = (out, trace)
            for ev in trace.events:
                kinds.add(ev.kind)
            motion = CORPUS[name][3]
            motions.add("rotation" if abs(motion.angle) > 0 else "translation")
            if len(CORPUS[name][2]) > 1:
                multi += 1
        elapsed = time.time() - t0
        assert len(CORPUS) >= 10
        assert kinds == {"new_connection_inner", "new_connection_outer",
                         "lost_connection_tangency", "lost_connection_workspace"}
        assert motions == {"translation", "rotation"}
        assert multi >= 2
        assert elapsed < budget
        _report(1, f"{len(CORPUS)} edits valid, all TCP kinds covered", elapsed, budget)

    def test_criterion_2_continuity(self):
        budget = 60.0
        t0 = time.time()
        chunk = 13
        tasks = []
        for name in CORPUS:
            k0 = 0
            while k0 < N_SAMPLES:
                k1 = min(k0 + chunk, N_SAMPLES)
                tasks.append((name, k0, k1))
                k0 = k1
        # heavy cases first so the two workers stay balanced to the end
        heavy = {"dovetail_press": 0, "slotted_press": 1, "vslot_deepen": 2,
                 "vslot_shift": 3}
        tasks.sort(key=lambda t: (heavy.get(t[0], 9), t[0], -t[1]))
        with ProcessPoolExecutor(max_workers=2) as pool:
            results = list(pool.map(_continuity_chunk, tasks, chunksize=1))
        worst = {name: 0.0 for name in CORPUS}
        bounds = {}
        counts = {}
        for name, w, cc, bound in results:
            worst[name] = max(worst[name], w)
            if bound is not None:
                bounds[name] = bound
            if name == "step_riser":
                counts.update(cc)
        elapsed = time.time() - t0
        for name in CORPUS:
            bound = bounds[name]
            slack = max(bound * 1e-9, 1e-9)
            assert worst[name] <= bound + slack, \
                f"{name}: {worst[name]} > {bound}"
        assert counts[N_SAMPLES] < counts[N_SAMPLES - 1], \
            "face count must drop at the step TCP"
        assert elapsed < budget
        _report(2, "50-sample symdiff bound holds on all cases; "
                   "step face count drops", elapsed, budget)

    def test_criterion_3_two_tcp_golden_trace(self):
        budget = 10.0
        t0 = time.time()
        body = make_fixture("slotted_block")
        motion = Motion.translate((0, 0, -4))
        out, trace = apply_push_pull(body, PushPullRequest.make("top", motion))
        ts = [ev.t for ev in trace.events]
        assert len(ts) == 2
        assert ts[0] == pytest.approx(0.5, abs=1e-6)
        assert ts[1] == pytest.approx(0.75, abs=1e-6)
        # between the TCPs the through-hole side walls persist uncut
        mid, _tr = apply_push_pull(body, PushPullRequest.make(
            "top", motion.restricted(0.0, 0.6)))
        for tag in ("hole_left", "hole_right"):
            faces = mid.faces_by_tag(tag)
            assert len(faces) == 1, f"{tag} must persist as a single face"
        from ppdm.brep import face_areas

        areas = face_areas(mid)
        assert areas[mid.faces_by_tag("hole_left")[0]] == pytest.approx(0.6 * 4, abs=1e-9)
        # the final body keeps walls exactly on the hole-wall planes x=1, x=3
        final_planes = {float(round(out.face_outward(f).offset * out.face_outward(f).n[0], 9))
                        for f in out.faces
                        if abs(abs(out.face_outward(f).n[0]) - 1) < 1e-9}
        assert final_planes == {1.0, 3.0}
        v = volume_unchecked(out)
        assert v == pytest.approx(8.0, abs=1e-9)
        est, stderr = mc_volume(out, 1_000_000, seed=17)
        assert abs(est - v) <= 3 * stderr
        elapsed = time.time() - t0
        assert elapsed < budget
        _report(3, "TCPs at 0.5/0.75, hole walls persist, MC volume agrees",
                elapsed, budget)

    def test_criterion_4_swept_volume_identity(self):
        budget = 5.0
        t0 = time.time()
        crank = make_fixture("crank_step")
        out, trace = apply_push_pull(
            crank, PushPullRequest.make("boss_end", Motion.translate((-2, 0, 0))))
        v0 = volume_unchecked(crank)
        swept = 1.0 * 1.0 * 2.0  # boss cross-section area times travel
        assert len(trace.events) == 1
        got = volume_unchecked(out)
        assert abs(got - (v0 - swept)) / (v0 - swept) < 1e-9
        elapsed = time.time() - t0
        assert elapsed < budget
        _report(4, "final volume equals initial minus swept prism", elapsed, budget)

    def test_criterion_5_order_independence_and_merged_shell(self):
        budget = 10.0
        t0 = time.time()
        vslot = make_fixture("vslot")
        # horizontal push: overlapping signed sweeps; application order must
        # not matter after subdivision
        motion = Motion.translate((0.75, 0, 0))
        ctxs = merge_adjacent_faces(vslot, PushPullRequest.make(
            ("incl_left", "incl_right"), motion))
        auxes = []
        box = modeling_box(vslot)
        for ctx in ctxs:
            auxes.extend(build_auxiliary(vslot, ctx, motion, 0.0, 1.0, box=box))
        parts = subdivide_overlaps(auxes)
        assert len(parts) >= 2

        def apply_parts(order):
            m = vslot
            for p in order:
                kind = BoolKind.DIFFERENCE if p.sign == "subtractive" else BoolKind.UNION
                m = bool_op(m, p.body, kind, check_inputs=False)
            return m

        fwd = apply_parts(parts)
        rev = apply_parts(list(reversed(parts)))
        assert symdiff_volume(fwd, rev) <= 1e-9

        # vertical merged push leaves no missed volume: equal to direct CSG
        out, _trace = apply_push_pull(vslot, PushPullRequest.make(
            ("incl_left", "incl_right"), Motion.translate((0, 0, -0.5))))
        prism = build_body(_prism_patches(
            [(0.5, 2.0), (2.0, 0.5), (3.5, 2.0)], 0, 2, ["a", "b", "c"]))
        direct = bool_op(make_fixture("box", {"w": 4, "d": 2, "h": 2}), prism,
                         BoolKind.DIFFERENCE)
        assert symdiff_volume(out, direct) <= 1e-9
        elapsed = time.time() - t0
        assert elapsed < budget
        _report(5, "aux order irrelevant; merged shell equals direct CSG",
                elapsed, budget)

    def test_criterion_6_tcp_completeness(self):
        budget = 120.0
        t0 = time.time()
        with ProcessPoolExecutor(max_workers=2) as pool:
            results = list(pool.map(_sweep_case, list(CORPUS)))
        elapsed = time.time() - t0
        for res in results:
            assert not res["violations"], res
        assert elapsed < budget
        _report(6, "500-step regeneration sweep finds no unconfirmed "
                   "topology changes", elapsed, budget)

    def test_criterion_7_boolean_engine_laws(self):
        budget = 60.0
        t0 = time.time()
        bodies = {n: make_fixture(n) for n in FIXTURE_NAMES}
        golden = {"box": 1.0, "step_block": 12.0, "slotted_block": 56.0,
                  "vslot": 14.0, "notch_block": 15.0, "crank_step": 17.0,
                  "rot_wedge_base": 8.0, "dovetail_over_holes": 118.0}
        rng = np.random.default_rng(23)
        for (na, a), (nb, b) in itertools.combinations(bodies.items(), 2):
            u = bool_op(a, b, BoolKind.UNION, check_inputs=False)
            i = bool_op(a, b, BoolKind.INTERSECTION, check_inputs=False)
            d = bool_op(a, b, BoolKind.DIFFERENCE, check_inputs=False)
            va, vb = volume_unchecked(a), volume_unchecked(b)
            vu, vi, vd = map(volume_unchecked, (u, i, d))
            scale = max(1.0, vu)
            assert abs(vu - (va + vb - vi)) <= 1e-9 * scale, (na, nb)
            assert abs(vd - (va - vi)) <= 1e-9 * scale, (na, nb)
            # PMC agreement on interior/exterior points
            lo_a, hi_a = a.bbox()
            lo_b, hi_b = b.bbox()
            lo = np.minimum(lo_a, lo_b) - 0.3
            hi = np.maximum(hi_a, hi_b) + 0.3
            pts = lo + rng.random((10_000, 3)) * (hi - lo)
            ca = classify_points(a, pts)
            cb = classify_points(b, pts)
            cu = classify_points(u, pts)
            mask = (ca != 0) & (cb != 0) & (cu != 0)
            assert np.array_equal((cu == 1)[mask],
                                  ((ca == 1) | (cb == 1))[mask]), (na, nb)
        for name, body in bodies.items():
            est, stderr = mc_volume(body, 1_000_000, seed=101)
            assert abs(est - golden[name]) <= 3 * max(stderr, 1e-12), name
        elapsed = time.time() - t0
        assert elapsed < budget
        _report(7, "volume laws, PMC agreement, and MC oracle on all fixtures",
                elapsed, budget)

    def test_criterion_8_rotational_decomposition(self):
        budget = 5.0
        t0 = time.time()
        wedge = make_fixture("rot_wedge_base")
        motion = Motion.rotate((2, 0, 1), (0, 1, 0), math.radians(20))
        ctx = merge_adjacent_faces(wedge, PushPullRequest.make("top", motion))[0]
        parts = build_auxiliary(wedge, ctx, motion, 0.0, 1.0)
        assert sorted(p.sign for p in parts) == ["additive", "subtractive"]
        add = next(p for p in parts if p.sign == "additive")
        sub = next(p for p in parts if p.sign == "subtractive")
        assert abs(add.volume() - sub.volume()) <= 1e-9
        for p in parts:
            assert validate(p.body).valid
        elapsed = time.time() - t0
        assert elapsed < budget
        _report(8, "one additive and one subtractive part of equal volume",
                elapsed, budget)
