"""Fundus image loading and preprocessing.

Images are plain numpy arrays: an RGB image is ``uint8`` of shape
``(height, width, 3)`` and a gray image is ``uint8`` of shape
``(height, width)``. Every function returns a new array.
"""
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import kernels

CANVAS_H = 256
CANVAS_W = 388
ROTATION_ANGLES = (45, 90, 135, 180, 225, 270)


class ImageFormatError(ValueError):
    """The file exists but does not decode as a PNG or JPEG image."""


def _check_rgb(img):
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"expected an (H, W, 3) RGB image, got shape {img.shape}")
    if img.dtype != np.uint8:
        raise ValueError(f"expected uint8 pixels, got {img.dtype}")
    return img


def _check_gray(img):
    img = np.asarray(img)
    if img.ndim != 2 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"expected an (H, W) gray image, got shape {img.shape}")
    if img.dtype != np.uint8:
        raise ValueError(f"expected uint8 pixels, got {img.dtype}")
    return img


def load_image(path):
    """Decode a PNG or JPEG file into an ``(H, W, 3)`` uint8 array.

    Raises ``FileNotFoundError``/``OSError`` when the file cannot be read and
    :class:`ImageFormatError` when its content does not decode.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        try:
            with Image.open(fh) as im:
                if im.format not in ("PNG", "JPEG"):
                    raise ImageFormatError(f"{path}: unsupported format {im.format}")
                im.load()
                rgb = im.convert("RGB")
        except ImageFormatError:
            raise
        except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
            raise ImageFormatError(f"{path}: {exc}") from exc
    return np.array(rgb, dtype=np.uint8)


def save_gray_png(img, path):
    Image.fromarray(_check_gray(img), mode="L").save(path, format="PNG")


def resize_to_canvas(img, target_h=CANVAS_H, target_w=CANVAS_W):
    """Bilinear resize of an RGB or gray image to ``target_h x target_w``."""
    if target_h < 1 or target_w < 1:
        raise ValueError(f"target size must be positive, got {target_h}x{target_w}")
    img = np.asarray(img)
    if img.ndim == 2:
        src = _check_gray(img)[:, :, None]
    else:
        src = _check_rgb(img)
    if src.shape[:2] == (target_h, target_w):
        out = src.copy()
    else:
        out = kernels.resize_bilinear(np.ascontiguousarray(src), int(target_h), int(target_w))
    return out[:, :, 0] if img.ndim == 2 else out


def extract_green_channel(img):
    """The red-free rendering: the G plane of an RGB image."""
    return _check_rgb(img)[:, :, 1].copy()


def to_grayscale(img):
    """ITU-R 601 luma, rounded half up and clamped to [0, 255]."""
    rgb = _check_rgb(img).astype(np.float64)
    y = 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]
    return np.clip(np.floor(y + 0.5), 0, 255).astype(np.uint8)


def equalization_lut(img):
    """The 256-entry lookup table used by :func:`equalize_histogram`.

    ``lut[v] = round((cdf(v) - cdf_min) / (n - cdf_min) * 255)`` with halves
    rounded up, evaluated in exact integer arithmetic; ``None`` for a constant
    image, where the denominator vanishes.
    """
    counts = kernels.histogram256(np.ascontiguousarray(_check_gray(img)))
    cdf = np.cumsum(counts)
    n = int(cdf[-1])
    cdf_min = int(cdf[np.flatnonzero(counts)[0]])
    if n == cdf_min:
        return None
    num = np.maximum(cdf - cdf_min, 0) * 255
    den = n - cdf_min
    return ((2 * num + den) // (2 * den)).astype(np.uint8)


def equalize_histogram(img):
    """Global 256-bin histogram equalization. A constant image comes back unchanged."""
    img = _check_gray(img)
    lut = equalization_lut(img)
    if lut is None:
        return img.copy()
    return lut[img]


def _quarter_turn(img, quarters):
    # Exact index permutation about the center; with odd H - W the half-pixel
    # offset is floored.
    h, w = img.shape
    r = np.arange(h)[:, None]
    c = np.arange(w)[None, :]
    if quarters == 1:
        src_r = c + (h - w) // 2
        src_c = (h + w - 2) // 2 - r
    elif quarters == 2:
        src_r = np.broadcast_to(h - 1 - r, (h, w))
        src_c = np.broadcast_to(w - 1 - c, (h, w))
    else:
        src_r = (h + w - 2) // 2 - c
        src_c = r + (w - h) // 2
    src_r, src_c = np.broadcast_arrays(src_r, src_c)
    inside = (src_r >= 0) & (src_r < h) & (src_c >= 0) & (src_c < w)
    out = np.zeros_like(img)
    out[inside] = img[src_r[inside], src_c[inside]]
    return out


def rotate(img, angle):
    """Counterclockwise rotation about the center on the original canvas.

    ``angle`` must be one of 45, 90, 135, 180, 225, 270 degrees. Pixels whose
    source falls outside the image are filled with 0.
    """
    img = _check_gray(img)
    if isinstance(angle, bool) or angle not in ROTATION_ANGLES:
        raise ValueError(f"rotation angle must be one of {ROTATION_ANGLES}, got {angle!r}")
    angle = int(angle)
    if angle % 90 == 0:
        return _quarter_turn(img, angle // 90)
    theta = np.deg2rad(angle)
    return kernels.rotate_bilinear(np.ascontiguousarray(img), float(np.cos(theta)), float(np.sin(theta)))


def preprocess(rgb, prep="GRH", target_h=CANVAS_H, target_w=CANVAS_W, equalize=True):
    """Canonical single-channel raster for one photograph.

    ``GRH``: resize, green channel, histogram equalization (skipped when
    ``equalize`` is false).
    ``GRAY``: resize, luma; no enhancement.
    """
    resized = resize_to_canvas(rgb, target_h, target_w)
    if prep == "GRH":
        green = extract_green_channel(resized)
        return equalize_histogram(green) if equalize else green
    if prep == "GRAY":
        return to_grayscale(resized)
    raise ValueError(f"unknown preprocessing {prep!r}; expected 'GRH' or 'GRAY'")
