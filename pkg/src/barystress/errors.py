"""Exception taxonomy shared across the package."""


class DomainError(ValueError):
    """Arguments outside the admissible range of an operation."""


class GeometryError(ValueError):
    """Degenerate or invalid geometry."""


class ConformityError(ValueError):
    """Mesh is not a conforming triangulation."""


class CertificationError(RuntimeError):
    """A numerical certificate (rank, residual, condition number) failed."""


class NumericalError(RuntimeError):
    """A linear-algebra step failed unexpectedly."""
