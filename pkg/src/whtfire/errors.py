"""Exception types shared across the library."""


class WhtFireError(Exception):
    """Base class for every error raised by this package."""


# -- transform ----------------------------------------------------------

class OrderTooLargeError(WhtFireError, ValueError):
    """Hadamard order exponent exceeds the supported maximum."""


class LengthNotPowerOfTwoError(WhtFireError, ValueError):
    """Transform input length is not a power of two."""


class LengthMismatchError(WhtFireError, ValueError):
    """Two sequences that must share a length do not."""


# -- tensors and layers -------------------------------------------------

class ShapeMismatchError(WhtFireError, ValueError):
    """Operand shapes are inconsistent with the layer contract."""


class BadLabelError(WhtFireError, ValueError):
    """Class label outside the valid range."""


class CacheMissingError(WhtFireError, ValueError):
    """Backward pass invoked without the forward cache."""


class ChannelCountNotPowerOfTwoError(WhtFireError, ValueError):
    """Spectral layer requires a power-of-two channel count."""


# -- architecture -------------------------------------------------------

class InvalidDescriptorError(WhtFireError, ValueError):
    """Architecture descriptor violates its structural rules."""


class BadWidthError(WhtFireError, ValueError):
    """Requested network width is unsupported."""


# -- tiling --------------------------------------------------------------

class BlockLargerThanImageError(WhtFireError, ValueError):
    """Block does not fit into the image even once."""


class DegenerateGridError(WhtFireError, ValueError):
    """Grid too small to form any 2x2 block window."""


class OddDimensionsError(WhtFireError, ValueError):
    """2x2 pooling requires even spatial extents."""


# -- data formats --------------------------------------------------------

class BadMagicError(WhtFireError, ValueError):
    """File does not start with the expected magic bytes."""


class TruncatedFileError(WhtFireError, ValueError):
    """File ended before the declared payload was complete."""


class UnsupportedMaxvalError(WhtFireError, ValueError):
    """Pixmap maxval other than 255."""


class ManifestError(WhtFireError, ValueError):
    """Malformed dataset manifest (bad label, duplicate path, bad row)."""


class IoFailureError(WhtFireError, OSError):
    """Underlying filesystem operation failed."""


class VersionMismatchError(WhtFireError, ValueError):
    """Checkpoint version not understood by this build."""


class ArchMismatchError(WhtFireError, ValueError):
    """Checkpoint architecture does not match the requested one."""


class TensorShapeMismatchError(WhtFireError, ValueError):
    """Stored tensor shape disagrees with the architecture."""


# -- pipeline -------------------------------------------------------------

class SingleClassDatasetError(WhtFireError, ValueError):
    """Training requires both classes to be present."""


class EmptyDatasetError(WhtFireError, ValueError):
    """Operation needs a non-empty dataset."""


class SizeTooLargeError(WhtFireError, ValueError):
    """Benchmark size beyond the allowed ceiling."""
