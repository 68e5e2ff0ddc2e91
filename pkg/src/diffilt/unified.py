"""The two unified filters: a cubic-Bezier pixel-wise intensity
mapping (per channel, 4 parameters each) and a kernel-pair local filter
that generalizes sharpening and dehazing into one locally linear form.
"""

from __future__ import annotations

import numpy as np
from scipy import signal

from .image import clamp01, convolve2d, validate_kernel

BPW_RANGE = (-1.0, 1.0)
KBL_RANGE = (-1.0, 1.0)
BPW_SEGMENTS = 8
KBL_KERNEL_SIZE = 9

# Guard against vanishing segment x-extent in the piecewise evaluation.
SEGMENT_EPS = 1e-8


def bpw_control_points(theta1: float, r1: float, theta2: float, r2: float
                       ) -> tuple[np.ndarray, np.ndarray]:
    """Polar-form control points; all-zero parameters put both on the
    diagonal so the curve degenerates to the identity line.

    p1 = [(r1+1)/2 cos((t1+1)pi/4), (r1+1)/2 sin((t1+1)pi/4)]
    p2 = 1 - (the same form in r2, t2)
    """
    for name, v in (("theta1", theta1), ("r1", r1), ("theta2", theta2), ("r2", r2)):
        if not -1.0 <= v <= 1.0:
            raise ValueError(f"{name} must lie in [-1, 1], got {v}")
    rho1 = 0.5 * (r1 + 1.0)
    phi1 = 0.25 * np.pi * (theta1 + 1.0)
    rho2 = 0.5 * (r2 + 1.0)
    phi2 = 0.25 * np.pi * (theta2 + 1.0)
    p1 = np.array([rho1 * np.cos(phi1), rho1 * np.sin(phi1)])
    p2 = np.array([1.0 - rho2 * np.cos(phi2), 1.0 - rho2 * np.sin(phi2)])
    return p1, p2


def bernstein_weights(q: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Cubic Bernstein weights (b1, b2, b3) of C(q) = b1 p1 + b2 p2 + b3."""
    q = np.asarray(q, dtype=np.float64)
    return 3.0 * q * (1.0 - q) ** 2, 3.0 * q**2 * (1.0 - q), q**3


def bezier_point(q: np.ndarray, p1: np.ndarray, p2: np.ndarray) -> np.ndarray:
    """C(q) = 3q(1-q)^2 p1 + 3q^2(1-q) p2 + q^3 [1, 1], anchored at
    [0, 0] and [1, 1]."""
    q = np.asarray(q, dtype=np.float64)
    if (q < 0).any() or (q > 1).any():
        raise ValueError("q must lie in [0, 1]")
    b1, b2, b3 = bernstein_weights(q)
    return (b1[..., None] * np.asarray(p1)
            + b2[..., None] * np.asarray(p2)
            + b3[..., None])


def bpw_curve_knots(channel_params: np.ndarray, segments: int = BPW_SEGMENTS
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Curve samples at q_j = j/L for one channel; both knot arrays are
    non-decreasing with exact endpoints 0 and 1."""
    if segments < 1:
        raise ValueError("segments must be >= 1")
    t1, r1, t2, r2 = np.asarray(channel_params, dtype=np.float64)
    p1, p2 = bpw_control_points(t1, r1, t2, r2)
    pts = bezier_point(np.arange(segments + 1) / segments, p1, p2)
    return pts[:, 0], pts[:, 1]


def bpw_map_values(values: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Evaluate the piecewise-linear chord approximation of the curve.

    Equivalent to sum_j clip(v - x_j, 0, dx_j) * dy_j/dx_j but evaluated
    as knot interpolation, which keeps the endpoints exact even when a
    segment's x-extent collapses.
    """
    return np.interp(values, xs, ys)


def bpw_filter(image: np.ndarray, params: np.ndarray, segments: int = BPW_SEGMENTS
               ) -> np.ndarray:
    """Per-channel monotone Bezier intensity mapping.

    ``params`` holds (theta1, r1, theta2, r2) per channel in R, G, B
    order: 12 values. The mapping fixes 0 and 1 and stays inside [0, 1]
    by the convex hull property.
    """
    p = np.asarray(params, dtype=np.float64)
    if p.size != 12:
        raise ValueError(f"bpw filter expects 12 parameters, got {p.size}")
    p = p.reshape(3, 4)
    out = np.empty_like(image)
    for c in range(3):
        xs, ys = bpw_curve_knots(p[c], segments)
        out[:, :, c] = bpw_map_values(image[:, :, c], xs, ys)
    return clamp01(out)


def conv_per_channel(image: np.ndarray, kernels: np.ndarray) -> np.ndarray:
    """Convolve channel c of an (H, W, 3) image with kernels[c], replicate
    padding. FFT-batched on large images, spatial on small ones."""
    ks = kernels.shape[-1]
    h = ks // 2
    if image.shape[0] * image.shape[1] >= 128 * 128 and ks >= 5:
        pad = np.pad(np.moveaxis(image, 2, 0), ((0, 0), (h, h), (h, h)), mode="edge")
        out = signal.fftconvolve(pad, kernels, mode="valid", axes=(1, 2))
        return np.moveaxis(out, 0, 2)
    out = np.empty_like(image)
    for c in range(image.shape[2]):
        out[:, :, c] = convolve2d(image[:, :, c], kernels[c])
    return out


def kbl_raw(image: np.ndarray, k1: np.ndarray, k2: np.ndarray) -> np.ndarray:
    k1 = np.asarray(k1, dtype=np.float64)
    k2 = np.asarray(k2, dtype=np.float64)
    if k1.shape != k2.shape:
        raise ValueError(f"kernel stacks disagree: {k1.shape} vs {k2.shape}")
    if k1.ndim != 3 or k1.shape[0] != image.shape[2]:
        raise ValueError(
            f"expected one kernel pair per channel, got {k1.shape} for image {image.shape}"
        )
    for c in range(k1.shape[0]):
        validate_kernel(k1[c])
        validate_kernel(k2[c])
    return image * conv_per_channel(image, k1) + conv_per_channel(image, k2) + image


def kbl_filter(image: np.ndarray, k1: np.ndarray, k2: np.ndarray) -> np.ndarray:
    """F = I * Conv(I, K1) + Conv(I, K2) + I per channel (elementwise *),
    clamped only after the full sum.

    ``k1`` and ``k2`` are (3, ksize, ksize) stacks, one kernel pair per
    channel. The declared optimization box keeps weights in [-1, 1]; the
    forward map itself accepts any weights.
    """
    return clamp01(kbl_raw(image, k1, k2))
