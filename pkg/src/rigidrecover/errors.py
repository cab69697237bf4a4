"""Exception hierarchy shared by all rigidrecover modules."""

from __future__ import annotations


class RigidRecoverError(Exception):
    """Base class for every error raised by this package."""


# -- geometry ---------------------------------------------------------------

class CoincidentPoint(RigidRecoverError):
    """A body point coincides with the focal point."""


class WrongKind(RigidRecoverError):
    """Operation applied to an observation of the wrong projection kind."""


class DegenerateConfiguration(RigidRecoverError):
    """Point set too degenerate (collinear correspondences, vanishing spans)."""


class LabelMismatch(RigidRecoverError):
    """Two labeled objects do not share the same label set."""


# -- feasibility ------------------------------------------------------------

class InvalidInstance(RigidRecoverError):
    """Problem instance violates its invariants (no features, or no frames)."""


# -- orthogonal solvers -----------------------------------------------------

class NegativeRadicand(RigidRecoverError):
    """A hypothesised true length is shorter than its projection."""


class NoSolution(RigidRecoverError):
    """No root of the squared system survives the unsquared-relation filter."""


class DegenerateImages(RigidRecoverError):
    """Image points too close to collinear for the solver to proceed."""


class IllConditioned(RigidRecoverError):
    """Linearised system is numerically rank deficient (special-form motion)."""


class NonPositiveLengths(RigidRecoverError):
    """A solved squared length came out non-positive."""


class InconsistentLengths(RigidRecoverError):
    """No depth-sign assignment satisfies all pairwise length constraints."""


class MirrorMismatch(RigidRecoverError):
    """Only an improper (reflecting) map aligns two structures."""


# -- perspective solvers ----------------------------------------------------

class OutOfArc(RigidRecoverError):
    """Focal-point parameter incompatible with the inscribed-angle circle."""


class AngleMismatch(RigidRecoverError):
    """Camera-frame and world-frame ray angles disagree."""


class NoConvergence(RigidRecoverError):
    """No multistart branch converged to an acceptable root.

    Carries the best residual infinity-norm attained across all starts.
    """

    def __init__(self, message: str, best_residual: float = float("inf")):
        super().__init__(message)
        self.best_residual = best_residual


# -- synthesis --------------------------------------------------------------

class GuardExhausted(RigidRecoverError):
    """Degeneracy guard rejected the maximum number of sampled scenes."""


# -- scene / report files ---------------------------------------------------

class ParseError(RigidRecoverError):
    """File is not syntactically valid JSON."""


class SchemaError(RigidRecoverError):
    """File parses but does not match the documented schema.

    ``pointer`` is a JSON pointer to the offending field.
    """

    def __init__(self, message: str, pointer: str = ""):
        super().__init__(f"{message} (at {pointer or '/'})")
        self.pointer = pointer


class InvariantError(RigidRecoverError):
    """File matches the schema but violates a value-level invariant."""
