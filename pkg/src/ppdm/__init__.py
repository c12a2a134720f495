"""Planar B-rep kernel with continuity-based push-pull direct modeling."""

from .brep import (
    Body,
    Edge,
    Face,
    FacePatch,
    Lump,
    Shell,
    ValidityReport,
    Vertex,
    Violation,
    build_body,
    empty_body,
    face_areas,
    neighbors,
    validate,
    volume,
)
from .fixtures import FIXTURE_NAMES, make_fixture
from .geom import Frame, Plane

__all__ = [
    "Body", "Edge", "Face", "FacePatch", "Lump", "Shell", "ValidityReport",
    "Vertex", "Violation", "build_body", "empty_body", "face_areas",
    "neighbors", "validate", "volume", "FIXTURE_NAMES", "make_fixture",
    "Frame", "Plane",
]
