"""Exception types shared across the kernel."""


class PpdmError(Exception):
    """Base class for kernel errors."""


class StructureError(PpdmError):
    """A body or document is structurally malformed (dangling ids, open chains)."""


class ValidityError(PpdmError):
    """An operation that requires a valid solid was handed an invalid one."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class UnknownFaceError(PpdmError):
    """A face id or origin tag does not resolve in the body."""


class UnknownFixtureError(PpdmError):
    """Requested fixture name is not in the catalog."""


class FixtureParamError(PpdmError):
    """Fixture parameters produce a degenerate or self-intersecting solid."""


class RobustnessFailure(PpdmError):
    """A Boolean predicate failed beyond tolerance; no silently invalid body
    is ever returned in its place."""


class NonManifoldUpdateError(PpdmError):
    """Regeneration hit a vertex with four or more incident planes whose
    intersection became inconsistent (excluded non-manifold special case)."""


class MotionError(PpdmError):
    """The motion cannot be applied (e.g. a rotation axis that would sweep a
    non-planar envelope)."""


class DocumentError(PpdmError):
    """BREP-JSON or trace document violates the schema."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class InternalError(PpdmError):
    """Invariant violation inside the kernel (a bug, not a user error)."""
