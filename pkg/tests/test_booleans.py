import itertools

import numpy as np
import pytest

from conftest import moved, moved_box
from ppdm.booleans import (BoolKind, Classification, bool_op, classify_point,
                           classify_points, mc_volume, symdiff_volume)
from ppdm.brep import validate, volume, volume_unchecked
from ppdm.errors import ValidityError
from ppdm.fixtures import make_fixture


class TestBoolOp:
    def test_half_overlap_difference(self, cube):
        res = bool_op(cube, moved_box(0.5, 0, 0), BoolKind.DIFFERENCE)
        assert volume(res) == pytest.approx(0.5, abs=1e-12)

    def test_touching_union_removes_shared_wall(self, cube):
        res = bool_op(cube, moved_box(1.0, 0, 0), BoolKind.UNION)
        assert volume(res) == pytest.approx(2.0, abs=1e-12)
        planes_x1 = [f for f in res.faces
                     if abs(abs(res.face_outward(f).n[0]) - 1) < 1e-9
                     and abs(abs(res.face_outward(f).offset) - 1) < 1e-9]
        assert not planes_x1  # no zero-thickness wall at x=1

    def test_touching_intersection_empty(self, cube):
        res = bool_op(cube, moved_box(1.0, 0, 0), BoolKind.INTERSECTION)
        assert res.is_empty()
        assert volume_unchecked(res) == 0.0

    def test_slotted_equals_fixture(self):
        box = make_fixture("box", {"w": 4, "d": 4, "h": 4})
        hole = moved(make_fixture("box", {"w": 2, "d": 4, "h": 1}), 1, 0, 1)
        res = bool_op(box, hole, BoolKind.DIFFERENCE)
        fix = make_fixture("slotted_block")
        assert len(res.faces) == len(fix.faces)
        assert len(res.edges) == len(fix.edges)
        assert symdiff_volume(res, fix) < 1e-12

    def test_invalid_input_rejected(self, cube):
        from ppdm.brep import concatenate

        bad = concatenate(cube, moved_box(0.5, 0.5, 0))
        with pytest.raises(ValidityError):
            bool_op(bad, cube, BoolKind.UNION)

    def test_empty_operands(self, cube):
        from ppdm.brep import empty_body

        assert volume_unchecked(bool_op(cube, empty_body(), BoolKind.UNION)) == pytest.approx(1.0)
        assert bool_op(cube, empty_body(), BoolKind.INTERSECTION).is_empty()
        assert bool_op(empty_body(), cube, BoolKind.DIFFERENCE).is_empty()
        assert volume_unchecked(bool_op(empty_body(), cube, BoolKind.UNION)) == pytest.approx(1.0)


def _corpus():
    return {
        "boxA": make_fixture("box", {"w": 2, "d": 2, "h": 2}),
        "boxB": moved_box(1.0, 0.5, 0.7, w=2, d=2, h=2),
        "vslot": make_fixture("vslot"),
        "step": make_fixture("step_block"),
        "notch": moved(make_fixture("notch_block"), 0.5, 0.25, 0.4),
    }


class TestClosureAndLaws:
    def test_closure_and_volume_laws(self):
        corpus = _corpus()
        for (na, a), (nb, b) in itertools.combinations(corpus.items(), 2):
            for x, y in ((a, b), (b, a)):
                u = bool_op(x, y, BoolKind.UNION)
                i = bool_op(x, y, BoolKind.INTERSECTION)
                d = bool_op(x, y, BoolKind.DIFFERENCE)
                for r in (u, i, d):
                    assert validate(r).valid, (na, nb)
                vx, vy = volume_unchecked(x), volume_unchecked(y)
                vu, vi, vd = (volume_unchecked(r) for r in (u, i, d))
                assert vu == pytest.approx(vx + vy - vi, abs=1e-9 * max(1, vu))
                assert vd == pytest.approx(vx - vi, abs=1e-9 * max(1, vx))

    def test_pmc_agreement(self):
        a = make_fixture("box", {"w": 2, "d": 2, "h": 2})
        b = moved_box(1.0, 0.5, 0.7, w=2, d=2, h=2)
        rng = np.random.default_rng(5)
        pts = rng.uniform(-0.5, 3.5, size=(10_000, 3))
        ca = classify_points(a, pts)
        cb = classify_points(b, pts)
        combos = {
            BoolKind.UNION: (ca == 1) | (cb == 1),
            BoolKind.INTERSECTION: (ca == 1) & (cb == 1),
            BoolKind.DIFFERENCE: (ca == 1) & (cb == -1),
        }
        for kind, want in combos.items():
            res = bool_op(a, b, kind)
            cr = classify_points(res, pts)
            interior = (ca != 0) & (cb != 0) & (cr != 0)
            assert np.array_equal(cr[interior] == 1, want[interior]), kind


class TestClassify:
    def test_examples(self, cube):
        assert classify_point(cube, (0.5, 0.5, 0.5)) is Classification.INSIDE
        assert classify_point(cube, (2, 2, 2)) is Classification.OUTSIDE
        assert classify_point(cube, (1, 0.5, 0.5)) is Classification.ON_BOUNDARY

    def test_void_interior(self, cube):
        hollow = bool_op(make_fixture("box", {"w": 4, "d": 2, "h": 2}),
                         moved_box(1, 0.5, 0.5, 2, 1, 1), BoolKind.DIFFERENCE)
        assert classify_point(hollow, (2, 1, 1)) is Classification.OUTSIDE
        assert classify_point(hollow, (0.5, 0.5, 0.5)) is Classification.INSIDE


class TestMcVolume:
    def test_box(self):
        body = make_fixture("box", {"w": 4, "d": 2, "h": 2})
        est, stderr = mc_volume(body, 1_000_000, seed=42)
        assert abs(est - 16.0) <= max(3 * stderr, 1e-9)

    def test_vslot(self, vslot):
        est, stderr = mc_volume(vslot, 1_000_000, seed=9)
        assert abs(est - 14.0) <= 3 * max(stderr, 1e-12) + 1e-9

    def test_empty(self):
        from ppdm.brep import empty_body

        assert mc_volume(empty_body(), 100_000, seed=1) == (0.0, 0.0)

    def test_reproducible(self, cube):
        a = mc_volume(cube, 20_000, seed=3)
        b = mc_volume(cube, 20_000, seed=3)
        assert a == b

    def test_sample_floor(self, cube):
        with pytest.raises(ValueError):
            mc_volume(cube, 100, seed=1)


class TestSymdiff:
    def test_identity(self, cube):
        assert symdiff_volume(cube, make_fixture("box")) == pytest.approx(0.0, abs=1e-12)

    def test_height_change(self):
        a = make_fixture("box")
        b = make_fixture("box", {"h": 1.5})
        assert symdiff_volume(a, b) == pytest.approx(0.5, abs=1e-12)

    def test_step_push_prism(self):
        a = make_fixture("step_block")
        b = make_fixture("step_block", {"step_z": 1.1})
        # raising the ledge by 0.1 changes a 2x2 prism slab
        assert symdiff_volume(a, b) == pytest.approx(0.1 * 4.0, abs=1e-9)
        est, stderr = mc_volume(bool_op(b, a, BoolKind.DIFFERENCE), 200_000, seed=2)
        assert abs(est - 0.4) <= 3 * stderr + 1e-6

    def test_pseudometric(self):
        corpus = list(_corpus().values())[:3]
        for a, b in itertools.combinations(corpus, 2):
            assert symdiff_volume(a, b) == pytest.approx(symdiff_volume(b, a), abs=1e-9)
        a, b, c = corpus
        ab = symdiff_volume(a, b)
        bc = symdiff_volume(b, c)
        ac = symdiff_volume(a, c)
        assert ac <= ab + bc + 1e-9
