"""Video-specific autoencoders.

Images are float32 arrays of shape (H, W, 3) with values in [0, 1].
"""

from ._core import (
    Model,
    VisaError,
    box_downsample,
    decode_packet,
    encode_packet,
    load_frames,
    load_image,
    psnr,
    resize_bilinear,
    save_png,
    ssim,
)

__all__ = [
    "Model",
    "VisaError",
    "box_downsample",
    "decode_packet",
    "encode_packet",
    "load_frames",
    "load_image",
    "psnr",
    "resize_bilinear",
    "save_png",
    "ssim",
]
