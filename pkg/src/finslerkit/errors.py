"""Exception types shared across the package."""


class FinslerKitError(Exception):
    """Base class for all package errors."""


class NonConvergence(FinslerKitError):
    """A Newton solve failed to reach its residual tolerance.

    Usually signals an invalid (non strongly convex) metric; carries the
    worst residual and, for batched solves, the offending cell count.
    """

    def __init__(self, message, residual=None, cells=None):
        super().__init__(message)
        self.residual = residual
        self.cells = cells


class InvalidSpec(FinslerKitError):
    """A metric spec violates its invariants (e.g. Randers drift |b| >= 1)."""


class NotMinkowski(FinslerKitError):
    """Operation requires a base-point independent metric."""


class MaskTooThin(FinslerKitError):
    """A masked cell has too few in-mask neighbours for any stencil."""


class UnsupportedPhi(FinslerKitError):
    """Test function does not vanish on the mask collar."""


class EmptyMask(FinslerKitError):
    """Quadrature over a mask with no included cells."""


class DegenerateDomain(FinslerKitError):
    """Domain descriptor produced a mask with empty interior."""


class HypothesisViolated(FinslerKitError):
    """A named theorem hypothesis failed beyond tolerance."""

    def __init__(self, message, checks=None, margins=None):
        super().__init__(message)
        self.checks = checks or {}
        self.margins = margins or {}


class BadExponent(FinslerKitError):
    """Exponent parameter outside the theorem's admissible range."""


class InfiniteReversibility(FinslerKitError):
    """theta > 1 requires a finite reversibility constant."""


class CurvatureUnverified(FinslerKitError):
    """Certificate lacks the declared curvature/mean-covariation flags."""


class DomainMismatch(FinslerKitError):
    """Domain kind does not match the exponent regime."""


class ExponentInconsistent(FinslerKitError):
    """No valid interpolation exponent r solves the stated relations."""


class ZeroDenominator(FinslerKitError):
    """Rayleigh quotient denominator vanished."""


class DegenerateK(FinslerKitError):
    """Capacity requested for an empty or non-compact K."""


class ConstantField(FinslerKitError):
    """Poincare probe received a field with identically zero differential."""


class ConfigError(FinslerKitError):
    """Invalid run configuration."""

    def __init__(self, message, path=None, field=None):
        super().__init__(message)
        self.path = path
        self.field = field
