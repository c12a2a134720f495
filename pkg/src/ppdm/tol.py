"""Numeric tolerances for the kernel.

All models are expected at desk scale, O(1) to O(10) units, so absolute
tolerances are used throughout.
"""

# Incidence tolerance for geometric predicates (point on plane, on line, ...).
EPS_GEOM = 1e-9

# Parameter-space tolerance: root dedup and interval degeneracy.
EPS_T = 1e-9

# Parameter-space probe distance for TCP confirmation by regeneration.
EPS_CONFIRM = 1e-6

# Area below which a 2D region is treated as empty.
EPS_AREA = 1e-12

# Off-surface probe distance for membership classification of face fragments.
PROBE_DELTA = 1e-6

# Planes closer than this are snapped to coplanar before an arrangement.
SNAP_DIHEDRAL = 1e-7
SNAP_OFFSET = EPS_GEOM

# Vertex welding distance when stitching faces into a body.
WELD_EPS = 1e-7

# Default modeling-space box factor (times the model bounding-box diagonal).
MODELING_SPACE_SCALE = 1000.0
MODELING_SPACE_ENV = "PPDM_MODELING_SPACE_SCALE"
