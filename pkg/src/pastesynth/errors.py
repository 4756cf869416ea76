"""Exception hierarchy shared by all pastesynth modules."""


class PastesynthError(Exception):
    """Base class for every error raised by this package."""


class ImageIOError(PastesynthError, OSError):
    """A file could not be read or written."""


class DecodeError(PastesynthError):
    """A file exists but is not a decodable PNG/JPEG."""


class InvalidRleError(PastesynthError, ValueError):
    pass


class DimensionMismatchError(PastesynthError, ValueError):
    pass


class DegenerateResultError(PastesynthError):
    """An augmentation produced an empty mask."""


class NoValidPlacementError(PastesynthError):
    pass


class EmptySceneError(PastesynthError):
    pass


class EmptyMaskError(PastesynthError, ValueError):
    pass


class NoBoundaryError(PastesynthError):
    """The Poisson region has no Dirichlet boundary inside the image."""


class NotConvergedError(PastesynthError):
    """Iterative solve hit max_iter; ``solution`` carries the best iterate."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class CoverageUnsatisfiableError(PastesynthError):
    pass


class NoValidTargetError(PastesynthError):
    pass


class RemoteFailureError(PastesynthError):
    pass


class ServiceTimeoutError(PastesynthError, TimeoutError):
    pass


class BadResponseError(PastesynthError):
    pass


class EmptyInputError(PastesynthError, ValueError):
    pass


class EmptyAssetDirError(PastesynthError):
    pass


class MissingOriginError(PastesynthError):
    pass


class ConfigError(PastesynthError, ValueError):
    pass


class SynthesisAbortedError(PastesynthError):
    """Too many scenes failed during dataset generation."""
