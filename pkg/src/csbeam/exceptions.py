"""Exception types raised across the toolkit."""


class CsbeamError(Exception):
    """Base class for all csbeam-specific errors."""


class DegenerateGeometryError(CsbeamError, ValueError):
    """A source or grid point (nearly) coincides with a sensor position."""


class NyquistError(CsbeamError, ValueError):
    """Sample rate too low for the highest frequency in the scene."""


class OffBinFrequencyError(CsbeamError, ValueError):
    """Requested analysis frequency is not an exact DFT bin.

    Carries the two nearest on-bin frequencies for the chosen block size.
    """

    def __init__(self, frequency, below, above):
        self.frequency = frequency
        self.nearest_bins = (below, above)
        super().__init__(
            f"frequency {frequency} Hz is not an exact DFT bin; "
            f"nearest bins are {below} Hz and {above} Hz"
        )


class InfeasibleNonnegError(CsbeamError, RuntimeError):
    """No nonnegative vector satisfies the residual ball constraint.

    Raised by the covariance-domain beamformer; increase delta to proceed.
    """


class AllZeroMapError(CsbeamError, ValueError):
    """A power map with no strictly positive value cannot be normalized."""


class ConfigError(CsbeamError, ValueError):
    """Run configuration is invalid.  Message includes the field path."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
