"""Image array helpers.

Canonical tensor-image layout is (3, 64, 256) float32 in [-1, 1],
channels first.  On disk images are 8-bit RGB PNG and masks are 8-bit
grayscale PNG with values {0, 255}.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

from .errors import ShapeMismatch

HEIGHT = 64
WIDTH = 256
CANONICAL_SHAPE = (3, HEIGHT, WIDTH)


def check_shape(arr: np.ndarray, shape=CANONICAL_SHAPE, name: str = "image") -> None:
    if tuple(arr.shape) != tuple(shape):
        raise ShapeMismatch(f"{name}: expected shape {shape}, got {tuple(arr.shape)}")


def to_unit(img: np.ndarray) -> np.ndarray:
    """[-1, 1] -> [0, 1]."""
    return (img + 1.0) / 2.0


def to_signed(img: np.ndarray) -> np.ndarray:
    """[0, 1] -> [-1, 1]."""
    return img * 2.0 - 1.0


def from_uint8(img: np.ndarray) -> np.ndarray:
    """HWC or HW uint8 -> CHW float32 in [-1, 1]; grayscale replicated to 3 channels."""
    arr = img.astype(np.float32) / 255.0
    if arr.ndim == 2:
        arr = np.stack([arr] * 3, axis=0)
    else:
        arr = arr.transpose(2, 0, 1)
    return to_signed(arr)


def to_uint8(img: np.ndarray) -> np.ndarray:
    """CHW float32 in [-1, 1] -> HWC uint8."""
    arr = np.clip(to_unit(img), 0.0, 1.0)
    return np.round(arr * 255.0).astype(np.uint8).transpose(1, 2, 0)


def load_image(path) -> np.ndarray:
    """Load an RGB PNG as CHW float32 in [-1, 1]."""
    with Image.open(path) as im:
        return from_uint8(np.asarray(im.convert("RGB")))


def load_mask(path) -> np.ndarray:
    """Load a grayscale mask PNG as CHW float32 with values exactly -1/+1."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"))
    signed = np.where(arr >= 128, 1.0, -1.0).astype(np.float32)
    return np.stack([signed] * 3, axis=0)


def save_image(path, img: np.ndarray) -> None:
    Image.fromarray(to_uint8(img)).save(path)


def save_mask(path, mask: np.ndarray) -> None:
    """Save channel 0 of a signed mask as {0, 255} grayscale PNG."""
    arr = np.where(mask[0] > 0, 255, 0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path)


def resize(img: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinear resize of a CHW float image (stretch, no letterboxing)."""
    import cv2

    hwc = img.transpose(1, 2, 0)
    out = cv2.resize(hwc, (width, height), interpolation=cv2.INTER_LINEAR)
    if out.ndim == 2:
        out = out[:, :, None]
    return np.ascontiguousarray(out.transpose(2, 0, 1))
