"""Catalog of planar test solids.

Every fixture is built from explicit face patches (no Booleans involved), so
the catalog doubles as an independent reference for the Boolean engine.
Profiles are drawn in the xz plane and extruded along y; holes are cut as
through-tunnels with their own wall faces.
"""

from __future__ import annotations

import numpy as np

from .brep import Body, FacePatch, build_body
from .errors import FixtureParamError, UnknownFixtureError
from .geom import unit, vec

FIXTURE_NAMES = (
    "box",
    "step_block",
    "slotted_block",
    "vslot",
    "dovetail_over_holes",
    "crank_step",
    "notch_block",
    "rot_wedge_base",
)


def _prism_patches(profile, y0, y1, wall_tags, front_tag="front", back_tag="back",
                   holes=None, hole_tags=None):
    """Extrude a CCW xz profile along y.

    profile: list of (x, z); wall_tags: one tag per profile edge, edge i runs
    from profile[i] to profile[i+1]. holes: list of CCW (x, z) rings cut
    through the prism; hole_tags: per hole, one tag per hole edge.
    """
    profile = [tuple(map(float, p)) for p in profile]
    holes = holes or []
    hole_tags = hole_tags or []
    patches = []

    def xz(p, y):
        return vec(p[0], y, p[1])

    front_outer = np.array([xz(p, y0) for p in profile])
    back_outer = np.array([xz(p, y1) for p in reversed(profile)])
    # front outward is -y; a CCW xz ring is CCW around -y, holes must be CW
    front_holes = [np.array([xz(p, y0) for p in reversed(h)]) for h in holes]
    back_holes = [np.array([xz(p, y1) for p in h]) for h in holes]
    patches.append(FacePatch(front_outer, front_holes, front_tag, vec(0, -1, 0)))
    patches.append(FacePatch(back_outer, back_holes, back_tag, vec(0, 1, 0)))

    n = len(profile)
    for i in range(n):
        a = profile[i]
        b = profile[(i + 1) % n]
        dx, dz = b[0] - a[0], b[1] - a[1]
        outward = unit(vec(dz, 0, -dx))
        ring = np.array([xz(a, y0), xz(a, y1), xz(b, y1), xz(b, y0)])
        patches.append(FacePatch(ring, [], wall_tags[i], outward))

    for h, tags in zip(holes, hole_tags):
        m = len(h)
        for i in range(m):
            a = h[i]
            b = h[(i + 1) % m]
            dx, dz = b[0] - a[0], b[1] - a[1]
            outward = unit(vec(-dz, 0, dx))  # into the tunnel
            ring = np.array([xz(a, y0), xz(b, y0), xz(b, y1), xz(a, y1)])
            patches.append(FacePatch(ring, [], tags[i], outward))
    return patches


def _require(cond, message):
    if not cond:
        raise FixtureParamError(message)


def _box(w=1.0, d=1.0, h=1.0):
    _require(w > 0 and d > 0 and h > 0, "box dimensions must be positive")
    profile = [(0, 0), (w, 0), (w, h), (0, h)]
    return _prism_patches(profile, 0.0, d, ["bottom", "right", "top", "left"])


def _step_block(w=4.0, d=2.0, h=2.0, step_x=2.0, step_z=1.0):
    _require(0 < step_x < w and 0 < step_z < h, "step must lie inside the block")
    profile = [(0, 0), (w, 0), (w, step_z), (step_x, step_z), (step_x, h), (0, h)]
    tags = ["bottom", "right", "ledge", "riser", "top", "left"]
    return _prism_patches(profile, 0.0, d, tags)


def _slotted_block(w=4.0, d=4.0, h=4.0, hole_x0=1.0, hole_x1=3.0,
                   hole_z0=1.0, hole_z1=2.0):
    _require(0 < hole_x0 < hole_x1 < w, "hole x-range must lie inside the block")
    _require(0 < hole_z0 < hole_z1 < h, "hole z-range must lie inside the block")
    profile = [(0, 0), (w, 0), (w, h), (0, h)]
    tags = ["bottom", "right", "top", "left"]
    hole = [(hole_x0, hole_z0), (hole_x1, hole_z0), (hole_x1, hole_z1), (hole_x0, hole_z1)]
    hole_tags = [["hole_floor", "hole_right", "hole_top", "hole_left"]]
    return _prism_patches(profile, 0.0, d, tags, holes=[hole], hole_tags=hole_tags)


def _vslot(w=4.0, d=2.0, h=2.0, gx0=1.0, gx1=3.0, apex_z=1.0):
    apex_x = 0.5 * (gx0 + gx1)
    _require(0 < gx0 < gx1 < w and 0 < apex_z < h, "groove must lie inside the block")
    profile = [(0, 0), (w, 0), (w, h), (gx1, h), (apex_x, apex_z), (gx0, h), (0, h)]
    tags = ["bottom", "right", "top_right", "incl_right", "incl_left", "top_left", "left"]
    return _prism_patches(profile, 0.0, d, tags)


def _notch_block(w=4.0, d=2.0, h=2.0, notch_x=3.0, notch_tip_z=1.0):
    _require(0 < notch_x < w and 0 < notch_tip_z < h, "notch must lie inside the block")
    profile = [(0, 0), (w, 0), (w, notch_tip_z), (notch_x, h), (0, h)]
    tags = ["bottom", "right", "notch", "top", "left"]
    return _prism_patches(profile, 0.0, d, tags)


def _rot_wedge_base(w=4.0, d=2.0, h=1.0):
    _require(w > 0 and d > 0 and h > 0, "dimensions must be positive")
    profile = [(0, 0), (w, 0), (w, h), (0, h)]
    return _prism_patches(profile, 0.0, d, ["bottom", "right", "top", "left"])


def _dovetail_over_holes(w=6.0, d=4.0, h=6.0, floor_x0=2.0, floor_x1=4.0,
                         floor_z=4.0, open_x0=1.5, open_x1=4.5,
                         hole_z0=1.5, hole_z1=3.0,
                         h1_x0=2.3, h1_x1=2.8, h2_x0=3.2, h2_x1=3.7):
    _require(0 < open_x0 <= floor_x0 < floor_x1 <= open_x1 < w, "groove walls must not cross")
    _require(0 < floor_z < h, "groove floor must lie inside the block")
    _require(0 < hole_z0 < hole_z1 < floor_z, "holes must sit below the groove floor")
    _require(floor_x0 < h1_x0 < h1_x1 < h2_x0 < h2_x1 < floor_x1,
             "holes must sit under the groove floor span, left to right")
    profile = [(0, 0), (w, 0), (w, h), (open_x1, h), (floor_x1, floor_z),
               (floor_x0, floor_z), (open_x0, h), (0, h)]
    tags = ["bottom", "right", "top_right", "dove_right", "dove_floor",
            "dove_left", "top_left", "left"]
    holes = []
    hole_tags = []
    for i, (x0, x1) in enumerate(((h1_x0, h1_x1), (h2_x0, h2_x1)), start=1):
        holes.append([(x0, hole_z0), (x1, hole_z0), (x1, hole_z1), (x0, hole_z1)])
        hole_tags.append([f"hole{i}_floor", f"hole{i}_right", f"hole{i}_top", f"hole{i}_left"])
    return _prism_patches(profile, 0.0, d, tags, holes=holes, hole_tags=hole_tags)


def _crank_step(w=4.0, d=2.0, h=2.0, boss_len=1.0, boss_y0=0.5, boss_y1=1.5,
                boss_z0=0.5, boss_z1=1.5):
    _require(0 < boss_y0 < boss_y1 < d and 0 < boss_z0 < boss_z1 < h,
             "boss root must lie inside the right wall")
    _require(boss_len > 0, "boss length must be positive")
    patches = []

    def quad(pts, tag, outward):
        patches.append(FacePatch(np.array([vec(*p) for p in pts]), [], tag, vec(*outward)))

    # base box walls (right wall carries the boss-root hole)
    quad([(0, 0, 0), (w, 0, 0), (w, d, 0), (0, d, 0)], "bottom", (0, 0, -1))
    quad([(0, 0, h), (0, d, h), (w, d, h), (w, 0, h)], "top", (0, 0, 1))
    quad([(0, 0, 0), (0, d, 0), (0, d, h), (0, 0, h)], "left", (-1, 0, 0))
    quad([(0, 0, 0), (0, 0, h), (w, 0, h), (w, 0, 0)], "front", (0, -1, 0))
    quad([(0, d, 0), (w, d, 0), (w, d, h), (0, d, h)], "back", (0, 1, 0))
    wall_outer = np.array([vec(w, 0, 0), vec(w, d, 0), vec(w, d, h), vec(w, 0, h)])
    # hole ring must be CW around +x: CCW in (y, z) is CCW around +x
    wall_hole = np.array([vec(w, boss_y0, boss_z0), vec(w, boss_y0, boss_z1),
                          vec(w, boss_y1, boss_z1), vec(w, boss_y1, boss_z0)])
    patches.append(FacePatch(wall_outer, [wall_hole], "right", vec(1, 0, 0)))

    xe = w + boss_len
    quad([(w, boss_y0, boss_z0), (xe, boss_y0, boss_z0), (xe, boss_y1, boss_z0),
          (w, boss_y1, boss_z0)], "boss_bottom", (0, 0, -1))
    quad([(w, boss_y0, boss_z1), (w, boss_y1, boss_z1), (xe, boss_y1, boss_z1),
          (xe, boss_y0, boss_z1)], "boss_top", (0, 0, 1))
    quad([(w, boss_y0, boss_z0), (w, boss_y0, boss_z1), (xe, boss_y0, boss_z1),
          (xe, boss_y0, boss_z0)], "boss_front", (0, -1, 0))
    quad([(w, boss_y1, boss_z0), (xe, boss_y1, boss_z0), (xe, boss_y1, boss_z1),
          (w, boss_y1, boss_z1)], "boss_back", (0, 1, 0))
    quad([(xe, boss_y0, boss_z0), (xe, boss_y0, boss_z1), (xe, boss_y1, boss_z1),
          (xe, boss_y1, boss_z0)], "boss_end", (1, 0, 0))
    return patches


_CATALOG = {
    "box": _box,
    "step_block": _step_block,
    "slotted_block": _slotted_block,
    "vslot": _vslot,
    "dovetail_over_holes": _dovetail_over_holes,
    "crank_step": _crank_step,
    "notch_block": _notch_block,
    "rot_wedge_base": _rot_wedge_base,
}


def make_fixture(name: str, params: dict | None = None) -> Body:
    if name not in _CATALOG:
        raise UnknownFixtureError(f"unknown fixture {name!r}; catalog: {sorted(_CATALOG)}")
    params = dict(params or {})
    try:
        patches = _CATALOG[name](**params)
    except TypeError as exc:
        raise FixtureParamError(f"bad parameters for {name}: {exc}") from None
    return build_body(patches)
