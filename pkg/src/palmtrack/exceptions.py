"""Error types raised by the tracking toolkit."""


class PalmTrackError(Exception):
    """Base class for all toolkit errors."""


class ZeroClutterAtMeasurement(PalmTrackError):
    """A measurement sits where the clutter intensity is zero, so the
    posterior Bernoulli ratios are undefined."""


class EmptyPrior(PalmTrackError):
    """The prior intensity integrates to zero."""


class ZeroIntensityPoint(PalmTrackError):
    """Pair correlation requested at a point of zero posterior intensity."""


class ConditioningOnZeroIntensity(PalmTrackError):
    """A conditioning state has zero posterior intensity."""


class DegenerateDenominator(PalmTrackError):
    """The exact two-target reduction has a non-positive second factorial
    moment at the conditioning pair."""


class TruncationInsufficient(PalmTrackError):
    """The cardinality pmf truncation leaves too much tail mass."""


class ZeroMeanPmf(PalmTrackError):
    """A cardinality pmf with zero mean cannot be ratio-normalized."""


class ZeroMassOnSupport(PalmTrackError):
    """A conditional pdf integrates to zero over its truncation region."""


class EnumerationTooLarge(PalmTrackError):
    """The requested brute-force enumeration exceeds the size guard."""


class ZeroFactorialMoment(PalmTrackError):
    """Conditioning on states the enumerated posterior never occupies."""


class MissingAssignment(PalmTrackError):
    """An initialization scan lacks the truth association for a target."""


class DegenerateMass(PalmTrackError):
    """A particle cloud with zero total mass cannot be resampled."""


class EmptyCloud(PalmTrackError):
    """Peak extraction requested on an empty or massless particle cloud."""


class MismatchedScanCounts(PalmTrackError):
    """Monte Carlo records with different scan counts cannot be aggregated."""


class InvalidConfig(PalmTrackError):
    """A run configuration file or option is malformed."""
