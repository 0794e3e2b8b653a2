"""Exception hierarchy for mesh validation, flow stepping and diagnostics."""


class VpwfError(Exception):
    """Base class for all package errors."""


class MeshError(VpwfError):
    """Base class for mesh validation failures."""


class NonManifoldError(MeshError):
    """An edge is incident to a number of faces different from two."""


class InconsistentOrientationError(MeshError):
    """Two incident faces traverse a shared edge in the same direction."""


class DegenerateFaceError(MeshError):
    """A face area is below the degeneracy floor."""


class DanglingVertexError(MeshError):
    """A vertex index is out of range or referenced by fewer than 3 faces."""


class ZeroNormalError(VpwfError):
    """The area-weighted normal sum at a vertex has near-zero magnitude."""


class NonFiniteError(VpwfError):
    """A computed field contains NaN or infinity (operator blow-up)."""


class StepUnderflowError(VpwfError):
    """The adaptive time step fell below the representable floor."""


class ProjectionDivergedError(VpwfError):
    """Volume projection failed to meet tolerance within the iteration cap."""


class DissipationViolationError(VpwfError):
    """Energy increased beyond tolerance even after the retry budget."""


class QualityCollapseError(VpwfError):
    """Mesh quality fell below the floor after the quality pass."""


class ZeroVolumeError(VpwfError):
    """Signed volume is zero where a volume-normalized quantity is needed."""


class NoFiniteRadiusError(VpwfError):
    """The concentration threshold is not exceeded at any finite radius."""


class SnapshotMissingError(VpwfError):
    """A trajectory lacks the mesh snapshot required for the operation."""


class SingularFitError(VpwfError):
    """Sphere fitting is degenerate (vertices coplanar)."""


class BadParamsError(VpwfError):
    """Generator or CLI parameters are out of range."""


class FileFormatError(VpwfError):
    """A mesh or trajectory file could not be parsed."""

    def __init__(self, message, path=None, line=None):
        if path is not None and line is not None:
            message = "%s:%d: %s" % (path, line, message)
        elif path is not None:
            message = "%s: %s" % (path, message)
        super().__init__(message)
        self.path = path
        self.line = line
