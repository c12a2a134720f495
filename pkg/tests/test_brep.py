import numpy as np
import pytest

from conftest import moved_box
from ppdm.booleans import bool_op, BoolKind, mc_volume
from ppdm.brep import (Body, Face, Vertex, concatenate, face_areas, neighbors,
                       validate, volume, volume_unchecked)
from ppdm.errors import UnknownFaceError, ValidityError
from ppdm.fixtures import make_fixture


def tags_of(body, ids):
    return sorted(body.faces[f].origin_tag for f in ids)


class TestValidate:
    def test_unit_cube_valid(self, cube):
        report = validate(cube)
        assert report.valid
        assert report.violations == ()

    def test_open_shell_condition2(self, cube):
        top = cube.faces_by_tag("top")[0]
        faces = {fid: f for fid, f in cube.faces.items() if fid != top}
        shells = {sid: s for sid, s in cube.shells.items()}
        sid = next(iter(shells))
        shells[sid] = type(shells[sid])(sid, tuple(f for f in shells[sid].faces
                                                   if f != top), True)
        broken = Body(dict(cube.vertices), dict(cube.edges), list(cube.planes),
                      faces, shells, cube.lumps)
        report = validate(broken)
        assert not report.valid
        # the removed face leaves its four boundary edges half-used
        assert len(report.by_condition(2)) == 4

    def test_interfering_bodies_condition4(self, cube):
        other = moved_box(0.5, 0.5, 0.0)
        bad = concatenate(cube, other)
        report = validate(bad)
        assert not report.valid
        assert report.by_condition(4)

    def test_flipped_loop_detected(self, cube):
        top = cube.faces_by_tag("top")[0]
        f = cube.faces[top]
        flipped = tuple(tuple((eid, not fwd) for eid, fwd in reversed(lp))
                        for lp in f.loops)
        faces = dict(cube.faces)
        faces[top] = Face(top, f.plane, f.same_sense, flipped, f.origin_tag)
        broken = Body(dict(cube.vertices), dict(cube.edges), list(cube.planes),
                      faces, dict(cube.shells), cube.lumps)
        report = validate(broken)
        assert not report.valid
        assert report.by_condition(2)

    def test_vertex_off_plane_condition1(self, cube):
        vid = next(iter(cube.vertices))
        verts = dict(cube.vertices)
        p = np.asarray(verts[vid].point) + np.array([0.0, 0.0, 1e-3])
        verts[vid] = Vertex(vid, tuple(p))
        broken = Body(verts, dict(cube.edges), list(cube.planes),
                      dict(cube.faces), dict(cube.shells), cube.lumps)
        report = validate(broken)
        assert not report.valid
        assert report.by_condition(1)


class TestVolume:
    def test_box(self):
        assert volume(make_fixture("box", {"w": 1, "d": 1, "h": 1})) == pytest.approx(1.0)

    def test_box_with_void(self):
        # 4x2x2 box with a 2x1x1 void: build via a through-of... difference
        outer = make_fixture("box", {"w": 4, "d": 2, "h": 2})
        inner = moved_box(1.0, 0.5, 0.5, w=2, d=1, h=1)
        hollow = bool_op(outer, inner, BoolKind.DIFFERENCE)
        assert validate(hollow).valid
        assert len(hollow.lumps) == 1
        assert len(hollow.shells) == 2  # outer boundary plus the void shell
        assert volume(hollow) == pytest.approx(16 - 2, abs=1e-12)

    def test_vslot_against_monte_carlo(self, vslot):
        v = volume(vslot)
        assert v == pytest.approx(14.0, abs=1e-12)
        est, _stderr = mc_volume(vslot, 1_000_000, seed=123)
        assert abs(est - v) / v < 0.005

    def test_invalid_body_refused(self, cube):
        bad = concatenate(cube, moved_box(0.5, 0.5, 0.0))
        with pytest.raises(ValidityError):
            volume(bad)


class TestFaceAreas:
    def test_unit_cube(self, cube):
        areas = face_areas(cube)
        assert len(areas) == 6
        assert all(a == pytest.approx(1.0) for a in areas.values())

    def test_face_with_hole(self):
        # 1x1 wall with a 0.5x0.5 through-tunnel: wall area 0.75
        outer = make_fixture("box")
        tunnel = moved_box(0.25, -0.5, 0.25, w=0.5, d=2.0, h=0.5)
        holed = bool_op(outer, tunnel, BoolKind.DIFFERENCE)
        areas = face_areas(holed)
        front = [areas[f] for f in holed.faces
                 if holed.faces[f].origin_tag == "front"]
        assert front == [pytest.approx(0.75)]

    def test_step_ledge_area(self):
        step = make_fixture("step_block")
        areas = face_areas(step)
        ledge = step.faces_by_tag("ledge")[0]
        assert areas[ledge] == pytest.approx(2.0 * 2.0)  # width x depth


class TestNeighbors:
    def test_cube_top(self, cube):
        top = cube.faces_by_tag("top")[0]
        assert tags_of(cube, neighbors(cube, top)) == ["back", "front", "left", "right"]

    def test_cube_top_and_side(self, cube):
        ids = {cube.faces_by_tag("top")[0], cube.faces_by_tag("front")[0]}
        got = tags_of(cube, neighbors(cube, ids))
        assert got == ["back", "bottom", "left", "right"]

    def test_vslot_inclined(self, vslot):
        incl = vslot.faces_by_tag("incl_left")[0]
        assert tags_of(vslot, neighbors(vslot, incl)) == [
            "back", "front", "incl_right", "top_left"]

    def test_symmetry(self, vslot):
        for fid in vslot.faces:
            for gid in neighbors(vslot, fid):
                assert fid in neighbors(vslot, gid)

    def test_unknown_face(self, cube):
        with pytest.raises(UnknownFaceError):
            neighbors(cube, 999)
