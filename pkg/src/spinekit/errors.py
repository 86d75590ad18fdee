"""Exception hierarchy with stable machine-readable codes.

Every error raised by the toolkit carries a ``code`` attribute that survives
into CLI reports, so batch pipelines can branch on failures without parsing
messages.
"""


class SpinekitError(Exception):
    """Base class; ``code`` is a stable identifier, never reworded."""

    code = "E_GENERIC"

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.context = context


class InvalidSpecError(SpinekitError):
    code = "E_INVALID_SPEC"


class InsufficientDataError(SpinekitError):
    code = "E_INSUFFICIENT_DATA"


class InvalidInputError(SpinekitError):
    code = "E_INVALID_INPUT"


class MissingInputError(SpinekitError):
    code = "E_MISSING_INPUT"


class InvalidConfigError(SpinekitError):
    code = "E_INVALID_CONFIG"


class ParseError(SpinekitError):
    code = "E_PARSE"


class MissingLandmarkError(SpinekitError):
    code = "E_MISSING_LANDMARK"


class DegenerateGeometryError(SpinekitError):
    code = "E_DEGENERATE_GEOMETRY"


class DegenerateDataError(SpinekitError):
    code = "E_DEGENERATE_DATA"


class InvalidWindowError(SpinekitError):
    code = "E_INVALID_WINDOW"


class MeshParseError(ParseError):
    code = "E_MESH_PARSE"


class EmptySectionError(SpinekitError):
    code = "E_EMPTY_SECTION"


class NonManifoldSectionError(SpinekitError):
    code = "E_NON_MANIFOLD_SECTION"


class OpenMeshError(SpinekitError):
    code = "E_OPEN_MESH"


class InvalidRangeError(SpinekitError):
    code = "E_INVALID_RANGE"


class TrackingLostError(SpinekitError):
    code = "E_TRACKING_LOST"


class CapacityExceededError(SpinekitError):
    code = "E_CAPACITY_EXCEEDED"


class DegenerateDesignError(SpinekitError):
    code = "E_DEGENERATE_DESIGN"
