import numpy as np
import pytest

from ppdm.brep import transform_body
from ppdm.fixtures import make_fixture
from ppdm.geometry import Motion


@pytest.fixture
def cube():
    return make_fixture("box")


@pytest.fixture
def vslot():
    return make_fixture("vslot")


def moved(body, dx, dy, dz):
    return transform_body(body, Motion.translate((dx, dy, dz)).transform(1.0))


def moved_box(dx, dy, dz, w=1.0, d=1.0, h=1.0):
    return moved(make_fixture("box", {"w": w, "d": d, "h": h}), dx, dy, dz)
