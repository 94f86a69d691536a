"""Exception hierarchy shared by all ncatoms modules."""

from __future__ import annotations


class NcAtomsError(Exception):
    """Base class for every error raised by ncatoms."""


class ExpressionSyntaxError(NcAtomsError, ValueError):
    """Raised by the parser; ``position`` is the 0-based character offset."""

    def __init__(self, message: str, position: int | None = None, text: str | None = None):
        self.position = position
        self.text = text
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class UnknownVariable(ExpressionSyntaxError):
    pass


class SingularSubexpression(NcAtomsError, ArithmeticError):
    """An ``Inv`` node received a singular argument during evaluation."""

    def __init__(self, node=None, message: str = "argument of inverse is singular"):
        self.node = node
        super().__init__(message)


class SingularMatrix(NcAtomsError, ArithmeticError):
    pass


class BadDenominator(NcAtomsError, ValueError):
    """A scalar cannot be reduced modulo the working prime."""


class InsufficientSamples(NcAtomsError):
    pass


class SpecError(NcAtomsError, ValueError):
    """Malformed marginal specification or measure."""


class EmptySpec(SpecError):
    pass


class PersistentPole(NcAtomsError):
    """Every resample at the top blow-up size hit a singular inverse."""


class RNotDefinedAtFreeTuple(PersistentPole):
    pass


class DomainError(NcAtomsError, ValueError):
    pass


class HypothesisNotMet(NcAtomsError, ValueError):
    pass


class InjectivityViolatedOnGrid(HypothesisNotMet):
    pass


class UnclassifiableMonomial(NcAtomsError, ValueError):
    pass


class NotAPolynomial(NcAtomsError, ValueError):
    pass


class DisconnectedGraph(NcAtomsError, ValueError):
    pass


class SingularSample(NcAtomsError, ArithmeticError):
    """Floating-point sample was numerically singular at an inverse node."""
