import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ppdm.geom import Plane
from ppdm.geometry import (EventConstraint, ModelingSpaceBox, Motion,
                           MovingPlane, evaluate_motion, event_roots,
                           modeling_box_for, plane_plane_intersect)


class TestEvaluateMotion:
    def test_translation_on_plane(self):
        plane = Plane((0, 0, 1), 4.0)
        out = evaluate_motion(Motion.translate((0, 0, -2)), 0.5, plane)
        assert out.offset == pytest.approx(3.0)
        assert np.allclose(out.n, (0, 0, 1))

    def test_rotation_on_point(self):
        p = evaluate_motion(Motion.rotate((0, 0, 0), (0, 0, 1), math.pi / 2),
                            1.0, np.array([1.0, 0.0, 0.0]))
        assert np.allclose(p, (0, 1, 0), atol=1e-12)

    def test_screw_rotate_then_translate(self):
        mo = Motion.screw((0, 0, 1), (0, 0, 0), (0, 0, 1), math.pi)
        p = evaluate_motion(mo, 0.5, np.array([1.0, 0.0, 0.0]))
        assert np.allclose(p, (0, 1, 0.5), atol=1e-12)

    def test_identity_at_zero(self):
        mo = Motion.screw((1, 2, 3), (0.5, 0, 0), (0, 1, 0), 1.2)
        assert mo.transform(0.0).is_identity()

    def test_restriction_composes(self):
        mo = Motion.rotate((1, 0, 0), (0, 0, 1), 1.0)
        full = mo.transform(0.7)
        first = mo.transform(0.3)
        rest = mo.restricted(0.3, 0.7).transform(1.0)
        q = np.array([0.3, -0.2, 0.9])
        assert np.allclose(rest.apply_point(first.apply_point(q)),
                           full.apply_point(q), atol=1e-12)


class TestPlanePlaneIntersect:
    def test_crossing(self):
        res = plane_plane_intersect(Plane((0, 0, 1), 0.0), Plane((1, 0, 0), 0.0))
        assert res[0] == "line"
        assert abs(abs(res[2][1]) - 1.0) < 1e-12  # direction along y

    def test_parallel(self):
        res = plane_plane_intersect(Plane((0, 0, 1), 0.0), Plane((0, 0, 1), 1.0))
        assert res == ("parallel",)

    def test_coincident_opposite_orientation(self):
        res = plane_plane_intersect(Plane((0, 0, 1), 0.0), Plane((0, 0, -1), 0.0))
        assert res == ("coincident",)


class TestEventRoots:
    def test_linear_crossing(self):
        mp = MovingPlane(Plane((0, 0, 1), 4.0), Motion.translate((0, 0, -4)))
        res = event_roots(mp, EventConstraint.point_crossing((1, 1, 2)), (0, 1))
        assert res.roots == (0.5,)
        assert not res.degenerate

    def test_translation_parallelism_degenerate(self):
        mp = MovingPlane(Plane((0, 0, 1), 4.0), Motion.translate((0, 0, -4)))
        res = event_roots(mp, EventConstraint.parallelism(Plane((0, 0, 1), 0.0)), (0, 1))
        assert res.degenerate
        assert res.roots == ()

    def test_rotation_parallelism(self):
        mp = MovingPlane(Plane((1, 0, 0), 0.0),
                         Motion.rotate((0, 0, 0), (0, 1, 0), math.pi / 2))
        res = event_roots(mp, EventConstraint.parallelism(Plane((0, 0, 1), 0.0)), (0, 1))
        assert res.roots == (1.0,)
        # cross-check against dense sampling of |n(t) x k|
        ts = np.linspace(0, 1, 2001)
        vals = []
        for t in ts:
            n = np.asarray(evaluate_motion(mp.motion, t, mp.base).normal)
            vals.append(np.linalg.norm(np.cross(n, [0, 0, 1])))
        k = int(np.argmin(vals))
        assert abs(ts[k] - 1.0) < 1e-3

    def test_point_always_on_plane_degenerate(self):
        mp = MovingPlane(Plane((0, 0, 1), 0.0),
                         Motion.rotate((0, 0, 0), (0, 0, 1), 1.0))
        res = event_roots(mp, EventConstraint.point_crossing((0.3, -0.2, 0.0)), (0, 1))
        assert res.degenerate

    def test_line_containment(self):
        mp = MovingPlane(Plane((0, 0, 1), 2.0), Motion.translate((0, 0, -2)))
        res = event_roots(mp, EventConstraint.line_containment((5, 0, 1), (0, 1, 0)),
                          (0, 1))
        assert res.roots == (0.5,)
        res = event_roots(mp, EventConstraint.line_containment((0, 0, 1), (0, 0, 1)),
                          (0, 1))
        assert res.roots == ()  # vertical line is never contained

    def test_box_exit(self):
        box = ModelingSpaceBox((-1, -1, -1), (1, 1, 1))
        traj = lambda t: np.array([0.0, 0.0, 3.0 * t - 1.0 + 1.0 - 1.0]) + (0, 0, 2.9 * t)
        res = event_roots(MovingPlane(Plane((0, 0, 1), 0.0), Motion.translate((0, 0, 3))),
                          EventConstraint.box_exit(lambda t: np.array([0, 0, 2.9 * t]), box),
                          (0, 1))
        assert len(res.roots) == 1
        assert res.roots[0] == pytest.approx(1.0 / 2.9, abs=1e-7)


def _random_motion(rng):
    if rng.random() < 0.5:
        return Motion.translate(rng.normal(size=3))
    axis_dir = rng.normal(size=3)
    axis_dir /= np.linalg.norm(axis_dir)
    return Motion.rotate(rng.normal(size=3), axis_dir, rng.uniform(0.5, 3.0))


class TestRootProperties:
    def test_no_missed_or_phantom_crossings(self):
        rng = np.random.default_rng(7)
        grid = np.linspace(0.0, 1.0, 10_001)
        for _case in range(40):
            n = rng.normal(size=3)
            n /= np.linalg.norm(n)
            base = Plane(tuple(n), float(rng.uniform(-2, 2)))
            motion = _random_motion(rng)
            q = rng.normal(size=3) * 2
            mp = MovingPlane(base, motion)
            res = event_roots(mp, EventConstraint.point_crossing(q), (0, 1))
            vals = np.array([evaluate_motion(motion, t, base).signed_distance(q)
                             for t in grid])
            signs = np.sign(vals)
            changes = [0.5 * (grid[i] + grid[i + 1])
                       for i in range(len(grid) - 1)
                       if signs[i] != 0 and signs[i + 1] != 0 and signs[i] != signs[i + 1]]
            if res.degenerate:
                assert np.max(np.abs(vals)) < 1e-7
                continue
            # every sign change sits within a grid step of a reported root
            for c in changes:
                assert any(abs(c - r) <= 2e-4 for r in res.roots), (c, res.roots)
            # every reported root has a near-zero residual
            for r in res.roots:
                assert abs(evaluate_motion(motion, r, base).signed_distance(q)) < 1e-7

    def test_incidence_preserved(self):
        rng = np.random.default_rng(11)
        for _case in range(20):
            n = rng.normal(size=3)
            n /= np.linalg.norm(n)
            base = Plane(tuple(n), float(rng.uniform(-2, 2)))
            motion = _random_motion(rng)
            p0 = base.reference_point() + np.cross(n, rng.normal(size=3))
            assert abs(base.signed_distance(p0)) < 1e-9
            for t in rng.random(8):
                moved_plane = evaluate_motion(motion, t, base)
                moved_point = evaluate_motion(motion, t, p0)
                assert abs(moved_plane.signed_distance(moved_point)) < 1e-9

    @settings(max_examples=25, deadline=None)
    @given(dx=st.floats(-3, 3), dy=st.floats(-3, 3), dz=st.floats(-3, 3))
    def test_translation_invariance(self, dx, dy, dz):
        base = Plane((0, 0, 1), 1.0)
        motion = Motion.translate((0, 0, -2))
        q = np.array([0.3, 0.4, 0.5])
        r0 = event_roots(MovingPlane(base, motion),
                         EventConstraint.point_crossing(q), (0, 1))
        shift = np.array([dx, dy, dz])
        base2 = Plane.from_normal_point((0, 0, 1), np.array([0, 0, 1.0]) + shift)
        r1 = event_roots(MovingPlane(base2, motion),
                         EventConstraint.point_crossing(q + shift), (0, 1))
        assert len(r0.roots) == len(r1.roots)
        for a, b in zip(r0.roots, r1.roots):
            assert a == pytest.approx(b, abs=1e-9)


def test_modeling_box_scale():
    pts = np.array([[0, 0, 0], [1, 1, 1.0]])
    box = modeling_box_for(pts, 10.0)
    assert box.contains((0.5, 0.5, 0.5))
    assert not box.contains((20, 0, 0))
