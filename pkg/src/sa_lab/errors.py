"""Exception hierarchy.

Every error raised by the library derives from :class:`SALabError`.  The CLI
maps the three top-level families onto exit codes: :class:`ConfigError` -> 2,
:class:`NumericError` -> 3, :class:`NotCertifiable` -> 4.
"""


class SALabError(Exception):
    """Base class for all library errors."""


class ConfigError(SALabError):
    """Malformed run configuration or domain specification."""


class NumericError(SALabError):
    """A numerical precondition failed or a solver did not converge."""


# -- Green-space structure -------------------------------------------------

class NotAlmostComplex(NumericError):
    """The matrix of A on E does not square to -I."""


class NotIsometry(NumericError):
    """The matrix of A on E is not unitary for the A-inner product."""


class DegenerateGreenForm(NumericError):
    pass


class DimensionMismatch(NumericError):
    pass


class WrongRank(NumericError):
    pass


class RankMismatch(NumericError):
    pass


class NotHermitian(NumericError):
    pass


class OutOfChart(NumericError):
    """The projection of a domain onto the chart base is singular."""


class EigensolverFailure(NumericError):
    pass


# -- Realizations ----------------------------------------------------------

class QuadratureFailure(NumericError):
    pass


class SingularTraceMap(NumericError):
    pass


class RootFindingStall(NumericError):
    pass


class MultiplicityAmbiguity(NumericError):
    """A (near) double root of the secular function was detected."""


class BackgroundSpectrum(NumericError):
    pass


# -- Series engine ---------------------------------------------------------

class NotInComplement(NumericError):
    pass


class ConsistencyFailure(NumericError):
    pass


class SpectrumCollision(NumericError):
    """The spectral parameter is too close to an eigenvalue of the base."""


class TailTooLarge(NumericError):
    pass


class SingularTraceSolve(NumericError):
    pass


class SingularF(NumericError):
    pass


# -- Instability lab -------------------------------------------------------

class NotUnstable(NumericError):
    pass


class FNotInvertible(NumericError):
    pass


class Inconclusive(NumericError):
    pass


class NotCertifiable(SALabError):
    """No grid point satisfies the negativity bound required for a certificate."""
