"""Exception hierarchy shared across the package."""


class NeuGenError(Exception):
    """Base class for every error raised by neugen."""


class UnsupportedFormat(NeuGenError):
    pass


class InvalidChannelCount(NeuGenError, ValueError):
    pass


class DimensionMismatch(NeuGenError, ValueError):
    pass


class InvalidPatchSize(NeuGenError, ValueError):
    pass


class PatchTooLarge(NeuGenError, ValueError):
    pass


class ImageTooSmall(NeuGenError, ValueError):
    pass


class TooFewImages(NeuGenError, ValueError):
    pass


class EmptyRay(NeuGenError, ValueError):
    pass


class InvalidCamera(NeuGenError, ValueError):
    pass


class EmptyDataset(NeuGenError):
    pass
