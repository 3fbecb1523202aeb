"""Patch-contrast normalization for neural-rendering inputs, with an evaluation harness."""

__version__ = "0.1.0"

from .errors import (DimensionMismatch, EmptyDataset, EmptyRay, ImageTooSmall,  # noqa: E402
                     InvalidCamera, InvalidChannelCount, InvalidPatchSize, NeuGenError,
                     PatchTooLarge, TooFewImages, UnsupportedFormat)
from .imagecore import (ImageF, broadcast_channel, load_image, read_ngf1,  # noqa: E402
                        save_image, to_grayscale, write_ngf1)
from .metrics import SsimParams, class_ssim, psnr, ssim  # noqa: E402
from .transform import (NeuGenConfig, StatsMap, fuse, neugen_enhance, neugen_map,  # noqa: E402
                        patch_stats, windowed_stats_fast)
