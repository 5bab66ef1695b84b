"""Exception types shared across the toolkit."""


class TSystemError(Exception):
    """Base class for all toolkit errors."""


class DomainViolation(TSystemError):
    """A point lies outside the family's domain."""


class NonDifferentiable(TSystemError):
    """A requested derivative does not exist (e.g. x^alpha at 0, alpha not integer)."""


class DimensionMismatch(TSystemError):
    """Matrix/node/coefficient dimensions are inconsistent or exceed the cap."""


class NonPositiveLeadFunction(TSystemError):
    """Reduction requires f_0 > 0 on the domain."""


class CertificationRequired(TSystemError):
    """Operation needs a T/ET/ECT certificate that could not be established."""


class IndexTooLarge(TSystemError):
    """Zero configuration violates the 2k + l <= n feasibility bound."""


class ZeroPolynomial(TSystemError):
    """Operation is undefined for the identically-zero polynomial."""


class InvariantViolation(TSystemError):
    """A structural invariant failed at runtime (diagnostic payload in args)."""


class NotPositive(TSystemError):
    """Input polynomial must be strictly positive on the domain."""


class NoConvergence(TSystemError):
    """Solver exhausted its fallbacks; diagnostics attached."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class TooManyZeros(TSystemError):
    """Nonnegative decomposition needs r < n zeros."""


class OddInteriorMultiplicity(TSystemError):
    """Interior zeros of a nonnegative polynomial must have even multiplicity."""


class LeadingCoefficientNonpositive(TSystemError):
    """Half-line/real-line decompositions need a positive leading coefficient."""


class ValueAtZeroNonpositive(TSystemError):
    """Half-line nonneg mode needs f(0) > 0 after factor-out."""


class OddDegree(TSystemError):
    """Real-line decomposition needs an even-degree leading term."""


class NegativeLeading(TSystemError):
    """Real-line decomposition needs a positive leading coefficient."""


class NegativeSomewhere(TSystemError):
    """Polynomial is negative somewhere on the requested domain."""


class NoSeparator(TSystemError):
    """No polynomial strictly between the snake bounds exists (LP infeasible)."""


class SNotStrictlyPositive(TSystemError):
    """Denominator functional must be strictly positive on the nonnegative cone."""


class NotFeasible(TSystemError):
    """Moment functional has no representing measure (or feasibility not established)."""


class QuadratureBudgetExceeded(TSystemError):
    """Smoothing quadrature could not reach the requested accuracy."""


class TooShort(TSystemError):
    """Moment sequence too short for the requested Hankel test."""
