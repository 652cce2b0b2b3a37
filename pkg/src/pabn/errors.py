"""Exception hierarchy for the PABN solver."""


class PabnError(Exception):
    """Base class for all solver errors."""


class InvalidParams(PabnError, ValueError):
    pass


class NonConformingGrid(PabnError, ValueError):
    """Post or cell dimensions are not integer multiples of the grid spacing."""


class OutOfRange(PabnError, IndexError):
    pass


class ZeroVector(PabnError, ValueError):
    def __init__(self, node, message=None):
        self.node = node
        super().__init__(message or f"zero-length director at node {node}")


class DegenerateInterior(PabnError, ValueError):
    def __init__(self, node):
        self.node = node
        super().__init__(f"trial vector vanishes at non-vertex node {node}")


class NotNormalized(PabnError, ValueError):
    def __init__(self, node, norm):
        self.node = node
        self.norm = norm
        super().__init__(f"director at node {node} has norm {norm!r}")


class CorruptEdge(PabnError, ValueError):
    def __init__(self, edge, component):
        self.edge = edge
        super().__init__(f"edge {edge!r}: director component along edge is {component:.3g}")


class ProjectionDegenerate(PabnError, ValueError):
    pass


class PathTooCoarse(PabnError, ValueError):
    pass


class SurfaceOpen(PabnError, RuntimeError):
    pass


class DegenerateTriangle(PabnError, ValueError):
    pass


class EmptySpec(PabnError, ValueError):
    pass


class ParseError(PabnError, ValueError):
    def __init__(self, key, reason):
        self.key = key
        self.reason = reason
        super().__init__(f"{key}: {reason}")


class IoError(PabnError, OSError):
    """A result or field file could not be written or read."""
