import json
from importlib import resources

import pytest

from ppdm.brep import neighbors, validate, volume
from ppdm.errors import FixtureParamError, UnknownFixtureError
from ppdm.fixtures import FIXTURE_NAMES, make_fixture


def load_golden(name):
    with resources.files("ppdm").joinpath(f"goldens/{name}.json").open() as fh:
        return json.load(fh)


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_fixture_matches_golden(name):
    body = make_fixture(name)
    report = validate(body)
    assert report.valid, report.violations
    golden = load_golden(name)
    assert len(body.faces) == golden["face_count"]
    assert volume(body) == pytest.approx(golden["volume"], rel=1e-9)
    adj = set()
    for fid in body.faces:
        for gid in neighbors(body, fid):
            adj.add(tuple(sorted((body.faces[fid].origin_tag,
                                  body.faces[gid].origin_tag))))
    assert sorted(list(p) for p in adj) == golden["adjacency"]


def test_box_dimensions():
    body = make_fixture("box", {"w": 4, "d": 2, "h": 2})
    assert len(body.faces) == 6
    assert volume(body) == pytest.approx(16.0)


def test_step_block_defaults():
    body = make_fixture("step_block")
    assert len(body.faces) == 8
    assert volume(body) == pytest.approx(12.0)


def test_slotted_block_defaults():
    body = make_fixture("slotted_block")
    assert volume(body) == pytest.approx(64 - 8)


def test_unknown_name():
    with pytest.raises(UnknownFixtureError):
        make_fixture("gear")


def test_degenerate_params_rejected():
    with pytest.raises(FixtureParamError):
        make_fixture("vslot", {"apex_z": 5.0})
    with pytest.raises(FixtureParamError):
        make_fixture("box", {"w": -1.0})
    with pytest.raises(FixtureParamError):
        make_fixture("box", {"bogus": 1.0})
