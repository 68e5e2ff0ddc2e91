"""Image-quality metrics: MSE, PSNR, and single-scale SSIM on luminance,
plus the analytic SSIM gradient the fitting loop backpropagates through.
"""

from __future__ import annotations

import numpy as np

from .image import LUMINANCE_WEIGHTS, gaussian_blur

PSNR_CAP_DB = 100.0

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2

_SSIM_MARGIN = SSIM_WINDOW // 2


def _check_pair(a: np.ndarray, b: np.ndarray) -> None:
    if np.shape(a) != np.shape(b):
        raise ValueError(f"image shapes disagree: {np.shape(a)} vs {np.shape(b)}")


def mse(a: np.ndarray, b: np.ndarray) -> float:
    """Mean over all channel values of (a - b)**2."""
    _check_pair(a, b)
    return float(np.mean((np.asarray(a, dtype=np.float64) - b) ** 2))


def mse_grad(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """d mse / d a."""
    _check_pair(a, b)
    diff = np.asarray(a, dtype=np.float64) - b
    return 2.0 * diff / diff.size


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """10 log10(1 / mse) at peak 1.0, capped at 100 dB (identical images
    report the cap)."""
    err = mse(a, b)
    if err <= 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, float(10.0 * np.log10(1.0 / err)))


def _window_mean(x: np.ndarray) -> np.ndarray:
    # Padding mode is irrelevant: only valid windows survive the crop.
    m = _SSIM_MARGIN
    return gaussian_blur(x, SSIM_WINDOW, SSIM_SIGMA, mode="constant")[m:-m, m:-m]


def _window_scatter(interior: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Adjoint of ``_window_mean``: embed on the interior and convolve."""
    m = _SSIM_MARGIN
    full = np.zeros(shape)
    full[m:-m, m:-m] = interior
    return gaussian_blur(full, SSIM_WINDOW, SSIM_SIGMA, mode="constant")


def _ssim_fields(la: np.ndarray, lb: np.ndarray):
    mu_x = _window_mean(la)
    mu_y = _window_mean(lb)
    xx = _window_mean(la * la)
    yy = _window_mean(lb * lb)
    xy = _window_mean(la * lb)
    vx = xx - mu_x**2
    vy = yy - mu_y**2
    vxy = xy - mu_x * mu_y
    a1 = 2.0 * mu_x * mu_y + SSIM_C1
    a2 = 2.0 * vxy + SSIM_C2
    b1 = mu_x**2 + mu_y**2 + SSIM_C1
    b2 = vx + vy + SSIM_C2
    s = (a1 * a2) / (b1 * b2)
    return s, mu_x, mu_y, a1, a2, b1, b2


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean SSIM over sliding 11x11 Gaussian windows (sigma 1.5) of the
    luminance images, constants C1 = 0.01^2 and C2 = 0.03^2 at peak 1.

    Only fully valid windows contribute, so both sides must be at least
    11 pixels. Windowed variances are plain weighted second moments (no
    small-sample correction), the classic reference form.
    """
    _check_pair(a, b)
    h, w = np.shape(a)[:2]
    if min(h, w) < SSIM_WINDOW:
        raise ValueError(f"images must be at least {SSIM_WINDOW} pixels per side for SSIM")
    la = np.asarray(a, dtype=np.float64) @ LUMINANCE_WEIGHTS
    lb = np.asarray(b, dtype=np.float64) @ LUMINANCE_WEIGHTS
    s, *_ = _ssim_fields(la, lb)
    return float(s.mean())


def ssim_grad(a: np.ndarray, b: np.ndarray) -> tuple[float, np.ndarray]:
    """SSIM value and its gradient with respect to ``a``."""
    _check_pair(a, b)
    h, w = np.shape(a)[:2]
    if min(h, w) < SSIM_WINDOW:
        raise ValueError(f"images must be at least {SSIM_WINDOW} pixels per side for SSIM")
    la = np.asarray(a, dtype=np.float64) @ LUMINANCE_WEIGHTS
    lb = np.asarray(b, dtype=np.float64) @ LUMINANCE_WEIGHTS
    s, mu_x, mu_y, a1, a2, b1, b2 = _ssim_fields(la, lb)

    inv = 1.0 / (b1 * b2)
    ds_dmu = 2.0 * mu_y * a2 * inv - 2.0 * mu_x * s / b1
    ds_dvx = -s / b2
    ds_dvxy = 2.0 * a1 * inv
    # Fold the variance definitions vx = E[x^2] - mu^2, vxy = E[xy] - mu mu
    # into adjoints of the three raw windowed moments of x.
    w_mu = ds_dmu - 2.0 * mu_x * ds_dvx - mu_y * ds_dvxy
    n = s.size
    dlum = (_window_scatter(w_mu, la.shape)
            + 2.0 * la * _window_scatter(ds_dvx, la.shape)
            + lb * _window_scatter(ds_dvxy, la.shape)) / n
    return float(s.mean()), dlum[..., None] * LUMINANCE_WEIGHTS
