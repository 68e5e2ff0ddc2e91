"""Image container conventions, luminance, 2-D convolution, and file I/O.

An image is a float64 array of shape (H, W, 3), RGB interleaved, with
values nominally in [0, 1]. Every public filter clamps its output back
into [0, 1]; convolution is the one exception and returns the raw linear
result so that callers can compose before clamping.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError
from scipy import ndimage as ndi

# Rec. luminance weights used by the contrast filter; they sum to 1.
LUMINANCE_WEIGHTS = np.array([0.27, 0.67, 0.06])

# 8-bit PNG and binary PPM are the only accepted inputs; anything else
# (16-bit, float TIFF, ...) is rejected rather than silently rescaled.
_ACCEPTED_FORMATS = {"PNG", "PPM"}
_ACCEPTED_MODES = {"1", "L", "LA", "P", "RGB", "RGBA"}


def clamp01(image: np.ndarray) -> np.ndarray:
    """Clamp values into [0, 1]; the final step of every filter."""
    return np.clip(image, 0.0, 1.0)


def validate_image(image: np.ndarray) -> np.ndarray:
    """Check the (H, W, 3) shape and value-range invariants."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) image, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("image must have at least one pixel")
    if not np.isfinite(arr).all():
        raise ValueError("image contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("image values must lie in [0, 1]")
    return arr


def load_image(path: str | Path) -> np.ndarray:
    """Load an 8-bit PNG or binary PPM (P6) as a float64 [0, 1] image.

    Each 8-bit channel value v maps to v/255 exactly; an alpha channel is
    dropped; grayscale is replicated to RGB.
    """
    path = Path(path)
    try:
        with PILImage.open(path) as im:
            if im.format not in _ACCEPTED_FORMATS:
                raise ValueError(
                    f"unsupported format {im.format!r} for {path}; "
                    "only 8-bit PNG and binary PPM are accepted"
                )
            if im.mode not in _ACCEPTED_MODES:
                raise ValueError(
                    f"unsupported pixel mode {im.mode!r} for {path}; only 8-bit data is accepted"
                )
            rgb = im.convert("RGB")
            arr = np.asarray(rgb, dtype=np.float64) / 255.0
    except UnidentifiedImageError as exc:
        raise ValueError(f"unreadable image file: {path}") from exc
    if arr.ndim != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"zero-dimension image: {path}")
    return arr


def save_image(image: np.ndarray, path: str | Path) -> None:
    """Write an image as 8-bit PNG; v in [0, 1] encodes as round(v * 255)."""
    arr = validate_image(image)
    data = np.rint(arr * 255.0).astype(np.uint8)
    PILImage.fromarray(data, mode="RGB").save(Path(path), format="PNG")


def luminance(pixel: np.ndarray) -> np.ndarray | float:
    """Lum(P) = 0.27 r + 0.67 g + 0.06 b, elementwise over trailing axis."""
    arr = np.asarray(pixel, dtype=np.float64)
    out = arr @ LUMINANCE_WEIGHTS
    return float(out) if out.ndim == 0 else out


def validate_kernel(kernel: np.ndarray) -> np.ndarray:
    """Check that a kernel is square 2-D with odd side."""
    k = np.asarray(kernel, dtype=np.float64)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ValueError(f"kernel must be square 2-D, got shape {k.shape}")
    if k.shape[0] % 2 == 0:
        raise ValueError(f"kernel side must be odd, got {k.shape[0]}")
    return k


def gaussian_kernel(side: int, sigma: float) -> np.ndarray:
    """Normalized 2-D Gaussian kernel with odd side length."""
    if side % 2 == 0 or side < 1:
        raise ValueError(f"kernel side must be odd and positive, got {side}")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    c = side // 2
    y, x = np.ogrid[:side, :side]
    k = np.exp(-((x - c) ** 2 + (y - c) ** 2) / (2.0 * sigma**2))
    return k / k.sum()


def gaussian_blur(image: np.ndarray, side: int, sigma: float,
                  mode: str = "nearest") -> np.ndarray:
    """Gaussian convolution via two separable 1-D passes; identical to
    ``convolve2d`` with ``gaussian_kernel`` but ~6x faster."""
    if side % 2 == 0 or side < 1:
        raise ValueError(f"kernel side must be odd and positive, got {side}")
    c = side // 2
    g = np.exp(-((np.arange(side) - c) ** 2) / (2.0 * sigma**2))
    g /= g.sum()
    arr = np.asarray(image, dtype=np.float64)
    out = ndi.convolve1d(arr, g, axis=0, mode=mode)
    return ndi.convolve1d(out, g, axis=1, mode=mode)


def convolve2d(image: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """True 2-D convolution with replicate (clamp-to-edge) border padding.

    Accepts a single channel (H, W) or an RGB image (H, W, 3), convolving
    each channel independently. Output has the input's shape and is NOT
    clamped; callers clamp after composing.
    """
    k = validate_kernel(kernel)
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 2:
        return ndi.convolve(arr, k, mode="nearest")
    if arr.ndim == 3:
        out = np.empty_like(arr)
        for c in range(arr.shape[2]):
            out[:, :, c] = ndi.convolve(arr[:, :, c], k, mode="nearest")
        return out
    raise ValueError(f"expected (H, W) or (H, W, 3) array, got shape {arr.shape}")
