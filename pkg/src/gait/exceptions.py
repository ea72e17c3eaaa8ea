class ValidationError(ValueError):
    """Malformed input: shapes, simplex membership, kernel parameters, files."""


class BoundaryError(ValidationError):
    """A distribution on the simplex boundary was passed where the interior is required."""


class InfiniteDivergence(ArithmeticError):
    """P puts mass where Q's similarity profile vanishes, so D(P||Q) is +inf.

    Raised instead of returning ``inf`` so optimizers can treat it as a barrier.
    """

    value = float("inf")


class NumericalFailure(FloatingPointError):
    """A solver produced a non-finite objective or gradient."""

    def __init__(self, step, what="objective"):
        super().__init__(f"non-finite {what} at step {step}")
        self.step = step
        self.what = what


class DegenerateGradientWarning(RuntimeWarning):
    """A nonsmooth kernel was differentiated at coincident points; zero was used."""
