"""Exception hierarchy shared by every subpackage."""


class BeaconError(Exception):
    """Base class for all errors raised by twinebeacon."""


# ledger / serialization
class UnsupportedValue(BeaconError, TypeError):
    pass


class DecodeError(BeaconError, ValueError):
    pass


class UnsupportedAlgorithm(BeaconError, ValueError):
    pass


class SigningFailure(BeaconError):
    pass


class InvalidRadix(BeaconError, ValueError):
    pass


class HeadMismatch(BeaconError):
    pass


class ResolverMiss(BeaconError, KeyError):
    """A referenced record is not available from the resolver."""


class ResolverUnavailable(BeaconError):
    """The resolver itself failed (I/O, network)."""


# store
class NotFound(ResolverMiss):
    pass


class VerificationFailed(BeaconError):
    pass


class HeadConflict(BeaconError):
    pass


class UnknownChain(BeaconError):
    pass


# certification
class DegenerateCounts(BeaconError, ValueError):
    pass


class NumericalDegeneracy(BeaconError, ArithmeticError):
    pass


class ConvergenceFailure(BeaconError, ArithmeticError):
    pass


class NoPositiveRate(BeaconError):
    pass


class ZeroPefValue(BeaconError):
    pass


# extraction
class EntropyTooLow(BeaconError, ValueError):
    pass


class SeedLengthMismatch(BeaconError, ValueError):
    pass


class CapacityExceeded(BeaconError, ValueError):
    pass


# number theory / prng
class InvalidFactorization(BeaconError, ValueError):
    pass


class GenerationTimeout(BeaconError):
    pass


class TooLarge(BeaconError, ValueError):
    pass


class SourceUnavailable(BeaconError):
    pass


class CommitmentMismatch(BeaconError):
    pass


class GenesisInvalid(BeaconError, ValueError):
    pass


# protocol
class TimingViolation(BeaconError):
    pass


class DataHashMismatch(BeaconError):
    pass


class UpstreamUnavailable(BeaconError):
    pass


class FreshnessViolation(BeaconError):
    pass
