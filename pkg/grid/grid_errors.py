# Error types raised by the grid package


class GridGenError(ValueError):
    """Base class for all grid generation errors"""


class GridSpecError(GridGenError):
    """Invalid grid geometry (too few nodes, inverted bounds)"""


class SpecMismatchError(GridGenError):
    """Two fields that must share a grid do not"""


class NonFiniteFieldError(GridGenError):
    """A field holds NaN or infinite values"""


class InvalidParameterError(GridGenError):
    """A numeric parameter is out of its legal range"""


class InfeasibleMapError(GridGenError):
    """A synthetic transformation folds (non-positive Jacobian)"""


class InfeasibleMonitorError(GridGenError):
    """Monitor functions that no orientation preserving map can match"""


class BoundaryNodeError(GridGenError):
    """An operation that needs an interior node was given a boundary node"""


class FieldFormatError(GridGenError):
    """Malformed field CSV input"""


class DegenerateCellError(GridGenError):
    """A grid cell has a zero-length edge"""

    def __init__(self, cell: tuple, message: str = ''):
        self.cell = cell
        super().__init__(message or f'Degenerate cell at index {cell}: zero-length edge')
