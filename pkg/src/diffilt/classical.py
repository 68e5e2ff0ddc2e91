"""The six classical differentiable filters: gamma, white balance,
contrast, tone, sharpen, and defog.

Each filter is a pure function of (image, parameters). The public entry
points clamp their result into [0, 1]; the ``*_raw`` variants return the
pre-clamp values needed by the gradient engine's clamp-mask convention.
Declared parameter ranges live here as module constants and are
re-exported through the gradient engine's registry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage as ndi

from .image import LUMINANCE_WEIGHTS, clamp01, gaussian_blur

GAMMA_RANGE = (1.0 / 3.0, 3.0)
WHITE_BALANCE_RANGE = (0.5, 2.0)
CONTRAST_RANGE = (-1.0, 1.0)
TONE_RANGE = (0.5, 2.0)
SHARPEN_RANGE = (0.0, 5.0)
DEFOG_RANGE = (0.0, 1.0)

TONE_SEGMENTS = 8

# Fixed Gaussian used by the unsharp mask.
SHARPEN_SIGMA = 5.0
SHARPEN_KERNEL_SIZE = 13

DARK_CHANNEL_WINDOW = 15
TRANSMISSION_FLOOR = 0.1
ATMOSPHERIC_LIGHT_FLOOR = 0.05
ATMOSPHERIC_TOP_FRACTION = 0.001


# ---------------------------------------------------------------------------
# Pixel-wise filters
# ---------------------------------------------------------------------------

def gamma_raw(image: np.ndarray, gamma: float) -> np.ndarray:
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    return np.power(image, gamma)


def gamma_filter(image: np.ndarray, gamma: float) -> np.ndarray:
    """P_o = P_i ** gamma, with 0 ** gamma defined as 0."""
    return clamp01(gamma_raw(image, gamma))


def white_balance_raw(image: np.ndarray, gains: np.ndarray) -> np.ndarray:
    g = np.asarray(gains, dtype=np.float64)
    if g.shape != (3,):
        raise ValueError(f"white balance expects 3 gains, got shape {g.shape}")
    if (g < 0).any():
        raise ValueError(f"white balance gains must be non-negative, got {g}")
    return image * g


def white_balance(image: np.ndarray, gains: np.ndarray) -> np.ndarray:
    """P_o = (W_r r, W_g g, W_b b), clamped."""
    return clamp01(white_balance_raw(image, gains))


def scurve(lum: np.ndarray) -> np.ndarray:
    """S-curve gain 0.5 (1 - cos(pi x)) / x, with the x=0 value set to 1
    so that the enhanced pixel degenerates to the input at black."""
    lum = np.asarray(lum, dtype=np.float64)
    out = np.ones_like(lum)
    nz = lum > 0
    out[nz] = 0.5 * (1.0 - np.cos(np.pi * lum[nz])) / lum[nz]
    return out


def scurve_prime(lum: np.ndarray) -> np.ndarray:
    """Derivative of ``scurve``; 0 at x=0 by the same convention."""
    lum = np.asarray(lum, dtype=np.float64)
    out = np.zeros_like(lum)
    nz = lum > 0
    x = lum[nz]
    out[nz] = (0.5 * np.pi * np.sin(np.pi * x) * x - 0.5 * (1.0 - np.cos(np.pi * x))) / x**2
    return out


def contrast_enhanced(image: np.ndarray) -> np.ndarray:
    """En(P) = P * 0.5 (1 - cos(pi Lum(P))) / Lum(P)."""
    lum = image @ LUMINANCE_WEIGHTS
    return image * scurve(lum)[..., None]


def contrast_raw(image: np.ndarray, alpha: float) -> np.ndarray:
    return alpha * contrast_enhanced(image) + (1.0 - alpha) * image


def contrast_filter(image: np.ndarray, alpha: float) -> np.ndarray:
    """P_o = alpha * En(P) + (1 - alpha) * P, clamped."""
    return clamp01(contrast_raw(image, alpha))


def tone_raw(image: np.ndarray, tones: np.ndarray) -> np.ndarray:
    t = np.asarray(tones, dtype=np.float64)
    if t.ndim != 1 or t.size == 0:
        raise ValueError("tone filter needs a non-empty 1-D slope vector")
    if (t <= 0).any():
        raise ValueError(f"tone slopes must be positive, got {t}")
    n = t.size
    total = t.sum()
    out = np.zeros_like(image)
    for j in range(n):
        out += np.clip(n * image - j, 0.0, 1.0) * t[j]
    return out / total


def tone_filter(image: np.ndarray, tones: np.ndarray) -> np.ndarray:
    """Piecewise-linear tone curve with slope t_j / T on [j/L, (j+1)/L].

    P_o = (1/T) sum_j clip(L*(P - j/L), 0, 1) * t_j with T = sum_j t_j;
    monotone non-decreasing, fixing 0 and 1.
    """
    return clamp01(tone_raw(image, tones))


# ---------------------------------------------------------------------------
# Sharpen (unsharp mask)
# ---------------------------------------------------------------------------

def sharpen_blur(image: np.ndarray) -> np.ndarray:
    """The fixed Gaussian blur (size 13, sigma 5) of the unsharp mask."""
    return gaussian_blur(image, SHARPEN_KERNEL_SIZE, SHARPEN_SIGMA, mode="nearest")


def sharpen_raw(image: np.ndarray, lam: float) -> np.ndarray:
    return image + lam * (image - sharpen_blur(image))


def sharpen_filter(image: np.ndarray, lam: float) -> np.ndarray:
    """F = I + lambda (I - Gau(I)), clamped."""
    return clamp01(sharpen_raw(image, lam))


# ---------------------------------------------------------------------------
# Defog (parameterized dark-channel prior)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DefogContext:
    """Per-image quantities the defog filter depends on besides omega."""

    atmospheric_light: np.ndarray
    dark_channel_window: int = DARK_CHANNEL_WINDOW
    transmission_floor: float = TRANSMISSION_FLOOR

    def __post_init__(self):
        a = np.asarray(self.atmospheric_light, dtype=np.float64)
        if a.shape != (3,):
            raise ValueError(f"atmospheric light must be an RGB triple, got shape {a.shape}")
        if (a <= 0).any() or (a > 1).any():
            raise ValueError(f"atmospheric light components must lie in (0, 1], got {a}")
        if self.dark_channel_window % 2 == 0 or self.dark_channel_window < 1:
            raise ValueError("dark channel window must be odd and positive")
        if not 0.0 < self.transmission_floor <= 0.5:
            raise ValueError("transmission floor must lie in (0, 0.5]")
        object.__setattr__(self, "atmospheric_light", a)


def dark_channel(image: np.ndarray, window: int) -> np.ndarray:
    """min over channels then over a window x window neighborhood."""
    if window % 2 == 0 or window < 1:
        raise ValueError("dark channel window must be odd and positive")
    per_pixel = image.min(axis=2)
    # Replicate padding: border minima see only real pixels.
    return ndi.minimum_filter(per_pixel, size=window, mode="nearest")


def estimate_atmospheric_light(image: np.ndarray, window: int = DARK_CHANNEL_WINDOW) -> np.ndarray:
    """Per-channel max over the brightest 0.1% of dark-channel pixels.

    Each component is floored at 0.05 so the defog division stays sane on
    black inputs.
    """
    dark = dark_channel(image, window)
    flat = dark.ravel()
    count = max(1, int(np.ceil(flat.size * ATMOSPHERIC_TOP_FRACTION)))
    idx = np.argpartition(flat, flat.size - count)[flat.size - count:]
    candidates = image.reshape(-1, 3)[idx]
    return np.maximum(candidates.max(axis=0), ATMOSPHERIC_LIGHT_FLOOR)


def transmission_map(image: np.ndarray, omega: float, ctx: DefogContext) -> np.ndarray:
    """t(x, omega) = 1 - omega * min_C min_{y in window} I^C(y) / A^C,
    clamped below at the context's transmission floor."""
    normalized = image / ctx.atmospheric_light
    dark = dark_channel(normalized, ctx.dark_channel_window)
    return np.maximum(1.0 - omega * dark, ctx.transmission_floor)


def defog_raw(image: np.ndarray, omega: float, ctx: DefogContext) -> np.ndarray:
    if not 0.0 <= omega <= 1.0:
        raise ValueError(f"omega must lie in [0, 1], got {omega}")
    t = transmission_map(image, omega, ctx)[..., None]
    return (image - ctx.atmospheric_light) / t + ctx.atmospheric_light


def defog_filter(image: np.ndarray, omega: float, ctx: DefogContext) -> np.ndarray:
    """J = (I - A) / t(x, omega) + A, clamped."""
    return clamp01(defog_raw(image, omega, ctx))


def default_defog_context(image: np.ndarray,
                          window: int = DARK_CHANNEL_WINDOW,
                          floor: float = TRANSMISSION_FLOOR) -> DefogContext:
    """Estimate atmospheric light from the image itself."""
    return DefogContext(
        atmospheric_light=estimate_atmospheric_light(image, window),
        dark_channel_window=window,
        transmission_floor=floor,
    )
