"""Exception and warning types shared across the package."""


class OtsmError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInput(OtsmError):
    """An argument is malformed: wrong shape, non-finite entries, bad dims."""


class InvalidConfig(OtsmError):
    """An experiment or CLI configuration failed validation."""


class InfeasibleProjection(OtsmError):
    """The requested box/hyperplane intersection is empty."""


class RankDeficient(OtsmError):
    """A factorization required full column rank and did not have it."""


class DegenerateRank(OtsmError):
    """A Gram matrix has no usable rank-r spectral split."""


class MissingGroundTruth(OtsmError):
    """An operation needs the planted blocks and the instance has none."""


class GapWarning(UserWarning):
    """The spectral gap backing an initialization or rounding is degenerate."""


class RankDeficientWarning(UserWarning):
    """A polar factor was completed on null directions."""
