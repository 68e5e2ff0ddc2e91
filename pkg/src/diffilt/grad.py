"""Exact parameter derivatives for every filter, plus the
central-difference oracle used to vet them.

Derivatives follow the autodiff clamp convention: clip(x, 0, 1) has
derivative 1 on [0, 1) and 0 outside, so pixels that saturate report an
exact zero. The dark-channel minimum and atmospheric light of the defog
filter are treated as constants with respect to the parameters (exact,
since neither depends on omega) and are detached when an image tangent
flows through a chain.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import classical, unified
from .classical import (
    contrast_enhanced,
    dark_channel,
    default_defog_context,
    sharpen_blur,
)
from .image import clamp01
from .unified import SEGMENT_EPS, bernstein_weights, bpw_curve_knots


def clamp_pass(raw: np.ndarray) -> np.ndarray:
    """Boolean mask of pixels whose clamp derivative is 1 (half-open [0, 1))."""
    return (raw >= 0.0) & (raw < 1.0)


class TangentPlan:
    """Tangent rules of one filter frozen at (image, params): basis(j)
    yields the j-th parameter basis tangent image, push propagates an
    image tangent through the filter. Lets chain adjoints reuse the
    per-stage state across many tangents."""

    def __init__(self, count, basis, push):
        self.count = count
        self.basis = basis
        self.push = push


class ParamFilter:
    """A filter identified by its tag and fixed hyperparameters, exposing
    the forward map and its parameter/image tangent rules."""

    name = "?"

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    @property
    def param_count(self) -> int:
        return self.bounds()[0].size

    def neutral(self) -> np.ndarray:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        """Draw parameters uniformly over the declared range."""
        lo, hi = self.bounds()
        return rng.uniform(lo, hi)

    def sample_interior(self, rng: np.random.Generator, margin: float = 0.05) -> np.ndarray:
        """Draw parameters away from range boundaries (for derivative checks)."""
        lo, hi = self.bounds()
        pad = margin * (hi - lo)
        return rng.uniform(lo + pad, hi - pad)

    def project(self, params: np.ndarray) -> np.ndarray:
        lo, hi = self.bounds()
        return np.clip(params, lo, hi)

    def forward_raw(self, image: np.ndarray, params: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def forward(self, image: np.ndarray, params: np.ndarray) -> np.ndarray:
        return clamp01(self.forward_raw(image, params))

    def jvp(self, image: np.ndarray, params: np.ndarray, direction: np.ndarray) -> np.ndarray:
        """Directional derivative of forward() along a parameter direction."""
        raise NotImplementedError

    def vjp(self, image: np.ndarray, params: np.ndarray, upstream: np.ndarray,
            raw: np.ndarray | None = None) -> np.ndarray:
        """Adjoint: g_k = sum over pixels of upstream * d forward / d p_k.

        ``raw`` lets callers that already ran forward_raw skip its
        recomputation.
        """
        raise NotImplementedError

    def image_jvp(self, image: np.ndarray, params: np.ndarray, tangent: np.ndarray) -> np.ndarray:
        """Directional derivative of forward() along an image tangent."""
        raise NotImplementedError

    def fd_exclusion(self, image: np.ndarray, params: np.ndarray, eps: float):
        """Extra pixels the finite-difference oracle must skip (or None)."""
        return None

    def tangent_plan(self, image: np.ndarray, params: np.ndarray) -> TangentPlan:
        p = self._vec(params)

        def basis(j):
            e = np.zeros(p.size)
            e[j] = 1.0
            return self.jvp(image, p, e)

        return TangentPlan(p.size, basis, lambda t: self.image_jvp(image, p, t))

    def split(self, params: np.ndarray) -> list[np.ndarray]:
        """Per-stage views of a parameter vector (single filters: one part)."""
        return [self._vec(params)]

    def join(self, parts: list[np.ndarray]) -> np.ndarray:
        """Inverse of split."""
        return self._vec(np.concatenate(
            [np.asarray(p, dtype=np.float64).ravel() for p in parts]))

    def _vec(self, params: np.ndarray) -> np.ndarray:
        p = np.asarray(params, dtype=np.float64).ravel()
        if p.size != self.param_count:
            raise ValueError(f"{self.name}: expected {self.param_count} parameters, got {p.size}")
        return p


# ---------------------------------------------------------------------------
# Pixel-wise filters
# ---------------------------------------------------------------------------

class GammaFilter(ParamFilter):
    name = "gamma"

    def bounds(self):
        lo, hi = classical.GAMMA_RANGE
        return np.array([lo]), np.array([hi])

    def neutral(self):
        return np.array([1.0])

    def sample(self, rng):
        # Log-uniform: symmetric coverage of darkening and brightening.
        lo, hi = classical.GAMMA_RANGE
        return np.exp(rng.uniform(np.log(lo), np.log(hi), size=1))

    def forward_raw(self, image, params):
        return classical.gamma_raw(image, self._vec(params)[0])

    def _dgamma(self, image, g):
        raw = classical.gamma_raw(image, g)
        # d/dg I**g = I**g ln I, defined as 0 at I = 0.
        safe = np.where(image > 0, image, 1.0)
        return raw, raw * np.log(safe)

    def jvp(self, image, params, direction):
        g = self._vec(params)[0]
        v = self._vec(direction)[0]
        raw, d = self._dgamma(image, g)
        return np.where(clamp_pass(raw), d * v, 0.0)

    def vjp(self, image, params, upstream, raw=None):
        g = self._vec(params)[0]
        if raw is None:
            raw = classical.gamma_raw(image, g)
        safe = np.where(image > 0, image, 1.0)
        d = raw * np.log(safe)
        u = np.where(clamp_pass(raw), upstream, 0.0)
        return np.array([np.vdot(u, d)])

    def image_jvp(self, image, params, tangent):
        g = self._vec(params)[0]
        raw = classical.gamma_raw(image, g)
        # g I**(g-1), kept finite by defining it 0 at I = 0.
        factor = np.where(image > 0, g * raw / np.where(image > 0, image, 1.0), 0.0)
        return np.where(clamp_pass(raw), factor * tangent, 0.0)

    def tangent_plan(self, image, params):
        g = self._vec(params)[0]
        raw, d = self._dgamma(image, g)
        ok = clamp_pass(raw)
        dparam = np.where(ok, d, 0.0)
        factor = np.where(ok & (image > 0),
                          g * raw / np.where(image > 0, image, 1.0), 0.0)
        return TangentPlan(1, lambda j: dparam, lambda t: factor * t)


class WhiteBalanceFilter(ParamFilter):
    name = "white_balance"

    def bounds(self):
        lo, hi = classical.WHITE_BALANCE_RANGE
        return np.full(3, lo), np.full(3, hi)

    def neutral(self):
        return np.ones(3)

    def forward_raw(self, image, params):
        return classical.white_balance_raw(image, self._vec(params))

    def jvp(self, image, params, direction):
        raw = self.forward_raw(image, params)
        return np.where(clamp_pass(raw), image * self._vec(direction), 0.0)

    def vjp(self, image, params, upstream, raw=None):
        if raw is None:
            raw = self.forward_raw(image, params)
        u = np.where(clamp_pass(raw), upstream, 0.0)
        return np.einsum("hwc,hwc->c", u, image)

    def image_jvp(self, image, params, tangent):
        gains = self._vec(params)
        raw = classical.white_balance_raw(image, gains)
        return np.where(clamp_pass(raw), gains * tangent, 0.0)

    def tangent_plan(self, image, params):
        gains = self._vec(params)
        ok = clamp_pass(classical.white_balance_raw(image, gains))
        masked = np.where(ok, image, 0.0)
        factor = np.where(ok, gains, 0.0)

        def basis(j):
            out = np.zeros_like(image)
            out[:, :, j] = masked[:, :, j]
            return out

        return TangentPlan(3, basis, lambda t: factor * t)


class ContrastFilter(ParamFilter):
    name = "contrast"

    def bounds(self):
        lo, hi = classical.CONTRAST_RANGE
        return np.array([lo]), np.array([hi])

    def neutral(self):
        return np.array([0.0])

    def forward_raw(self, image, params):
        return classical.contrast_raw(image, self._vec(params)[0])

    def jvp(self, image, params, direction):
        raw = self.forward_raw(image, params)
        d = contrast_enhanced(image) - image
        return np.where(clamp_pass(raw), d * self._vec(direction)[0], 0.0)

    def vjp(self, image, params, upstream, raw=None):
        if raw is None:
            raw = self.forward_raw(image, params)
        u = np.where(clamp_pass(raw), upstream, 0.0)
        return np.array([np.vdot(u, contrast_enhanced(image) - image)])

    def image_jvp(self, image, params, tangent):
        alpha = self._vec(params)[0]
        raw = classical.contrast_raw(image, alpha)
        lum = image @ classical.LUMINANCE_WEIGHTS
        dlum = tangent @ classical.LUMINANCE_WEIGHTS
        s = classical.scurve(lum)[..., None]
        sp = classical.scurve_prime(lum)
        den = tangent * s + image * (sp * dlum)[..., None]
        return np.where(clamp_pass(raw), alpha * den + (1.0 - alpha) * tangent, 0.0)

    def tangent_plan(self, image, params):
        alpha = self._vec(params)[0]
        ok = clamp_pass(classical.contrast_raw(image, alpha))
        dparam = np.where(ok, contrast_enhanced(image) - image, 0.0)
        lum = image @ classical.LUMINANCE_WEIGHTS
        s = classical.scurve(lum)[..., None]
        sp = classical.scurve_prime(lum)

        def push(t):
            dlum = t @ classical.LUMINANCE_WEIGHTS
            den = t * s + image * (sp * dlum)[..., None]
            return np.where(ok, alpha * den + (1.0 - alpha) * t, 0.0)

        return TangentPlan(1, lambda j: dparam, push)


class ToneFilter(ParamFilter):
    def __init__(self, segments: int = classical.TONE_SEGMENTS):
        if segments < 1:
            raise ValueError("tone filter needs at least one segment")
        self.segments = segments

    name = "tone"

    def bounds(self):
        lo, hi = classical.TONE_RANGE
        return np.full(self.segments, lo), np.full(self.segments, hi)

    def neutral(self):
        return np.ones(self.segments)

    def _clips(self, image):
        n = self.segments
        return np.stack([np.clip(n * image - j, 0.0, 1.0) for j in range(n)])

    def forward_raw(self, image, params):
        return classical.tone_raw(image, self._vec(params))

    def jvp(self, image, params, direction):
        t = self._vec(params)
        v = self._vec(direction)
        clips = self._clips(image)
        total = t.sum()
        raw = np.tensordot(t, clips, axes=1) / total
        d = (np.tensordot(v, clips, axes=1) - raw * v.sum()) / total
        return np.where(clamp_pass(raw), d, 0.0)

    def vjp(self, image, params, upstream, raw=None):
        t = self._vec(params)
        clips = self._clips(image)
        total = t.sum()
        if raw is None:
            raw = np.tensordot(t, clips, axes=1) / total
        u = np.where(clamp_pass(raw), upstream, 0.0)
        # d raw / d t_k = (c_k - raw) / T
        base = np.vdot(u, raw)
        return np.array([(np.vdot(u, clips[k]) - base) / total for k in range(self.segments)])

    def image_jvp(self, image, params, tangent):
        t = self._vec(params)
        n = self.segments
        total = t.sum()
        raw = classical.tone_raw(image, t)
        idx = np.clip(np.floor(n * image).astype(np.int64), 0, n - 1)
        frac = n * image - idx
        slope = np.where((frac >= 0.0) & (frac < 1.0), n * t[idx] / total, 0.0)
        return np.where(clamp_pass(raw), slope * tangent, 0.0)

    def tangent_plan(self, image, params):
        t = self._vec(params)
        n = self.segments
        total = t.sum()
        clips = self._clips(image)
        raw = np.tensordot(t, clips, axes=1) / total
        ok = clamp_pass(raw)
        idx = np.clip(np.floor(n * image).astype(np.int64), 0, n - 1)
        frac = n * image - idx
        slope = np.where(ok & (frac >= 0.0) & (frac < 1.0), n * t[idx] / total, 0.0)

        def basis(j):
            return np.where(ok, (clips[j] - raw) / total, 0.0)

        return TangentPlan(n, basis, lambda tg: slope * tg)


# ---------------------------------------------------------------------------
# Local filters
# ---------------------------------------------------------------------------

class SharpenFilter(ParamFilter):
    name = "sharpen"

    def bounds(self):
        lo, hi = classical.SHARPEN_RANGE
        return np.array([lo]), np.array([hi])

    def neutral(self):
        return np.array([0.0])

    def forward_raw(self, image, params):
        return classical.sharpen_raw(image, self._vec(params)[0])

    def jvp(self, image, params, direction):
        lam = self._vec(params)[0]
        high = image - sharpen_blur(image)
        raw = image + lam * high
        return np.where(clamp_pass(raw), high * self._vec(direction)[0], 0.0)

    def vjp(self, image, params, upstream, raw=None):
        lam = self._vec(params)[0]
        if raw is not None and lam != 0.0:
            high = (raw - image) / lam
        else:
            high = image - sharpen_blur(image)
            raw = image + lam * high
        u = np.where(clamp_pass(raw), upstream, 0.0)
        return np.array([np.vdot(u, high)])

    def image_jvp(self, image, params, tangent):
        lam = self._vec(params)[0]
        raw = classical.sharpen_raw(image, lam)
        d = (1.0 + lam) * tangent - lam * sharpen_blur(tangent)
        return np.where(clamp_pass(raw), d, 0.0)

    def tangent_plan(self, image, params):
        lam = self._vec(params)[0]
        high = image - sharpen_blur(image)
        ok = clamp_pass(image + lam * high)
        dparam = np.where(ok, high, 0.0)

        def push(t):
            return np.where(ok, (1.0 + lam) * t - lam * sharpen_blur(t), 0.0)

        return TangentPlan(1, lambda j: dparam, push)


class DefogFilter(ParamFilter):
    def __init__(self, window: int = classical.DARK_CHANNEL_WINDOW,
                 floor: float = classical.TRANSMISSION_FLOOR):
        self.window = window
        self.floor = floor

    name = "defog"

    def bounds(self):
        lo, hi = classical.DEFOG_RANGE
        return np.array([lo]), np.array([hi])

    def neutral(self):
        return np.array([0.0])

    def context(self, image):
        return default_defog_context(image, self.window, self.floor)

    def _terms(self, image, omega):
        ctx = self.context(image)
        a = ctx.atmospheric_light
        dark = dark_channel(image / a, self.window)
        t_free = 1.0 - omega * dark
        t = np.maximum(t_free, self.floor)
        raw = (image - a) / t[..., None] + a
        # Gradient is zero where the transmission is floored.
        live = t_free >= self.floor
        domega = (image - a) * (dark * live / t**2)[..., None]
        return raw, domega, t, t_free, dark

    def forward_raw(self, image, params):
        return classical.defog_raw(image, self._vec(params)[0], self.context(image))

    def jvp(self, image, params, direction):
        raw, domega, *_ = self._terms(image, self._vec(params)[0])
        return np.where(clamp_pass(raw), domega * self._vec(direction)[0], 0.0)

    def vjp(self, image, params, upstream, raw=None):
        raw, domega, *_ = self._terms(image, self._vec(params)[0])
        u = np.where(clamp_pass(raw), upstream, 0.0)
        return np.array([np.vdot(u, domega)])

    def image_jvp(self, image, params, tangent):
        # The atmospheric light, dark channel, and transmission are
        # detached: the tangent flows only through the leading I term.
        raw, _, t, _, _ = self._terms(image, self._vec(params)[0])
        return np.where(clamp_pass(raw), tangent / t[..., None], 0.0)

    def tangent_plan(self, image, params):
        raw, domega, t, _, _ = self._terms(image, self._vec(params)[0])
        ok = clamp_pass(raw)
        dparam = np.where(ok, domega, 0.0)
        inv_t = 1.0 / t[..., None]

        def push(tg):
            return np.where(ok, tg * inv_t, 0.0)

        return TangentPlan(1, lambda j: dparam, push)

    def fd_exclusion(self, image, params, eps):
        _, _, _, t_free, dark = self._terms(image, self._vec(params)[0])
        crossing = np.abs(t_free - self.floor) <= 2.0 * eps * dark
        return np.broadcast_to(crossing[..., None], image.shape)


class BpwFilter(ParamFilter):
    def __init__(self, segments: int = unified.BPW_SEGMENTS):
        if segments < 1:
            raise ValueError("bpw filter needs at least one segment")
        self.segments = segments

    name = "bpw"

    def bounds(self):
        lo, hi = unified.BPW_RANGE
        return np.full(12, lo), np.full(12, hi)

    def neutral(self):
        return np.zeros(12)

    def forward_raw(self, image, params):
        return unified.bpw_filter(image, self._vec(params), self.segments)

    def _channel_tables(self, cp):
        """Knots plus their derivatives w.r.t. (theta1, r1, theta2, r2)."""
        t1, r1, t2, r2 = cp
        xs, ys = bpw_curve_knots(cp, self.segments)
        rho1, phi1 = 0.5 * (r1 + 1.0), 0.25 * np.pi * (t1 + 1.0)
        rho2, phi2 = 0.5 * (r2 + 1.0), 0.25 * np.pi * (t2 + 1.0)
        # Control-point Jacobians in (x, y) per parameter.
        dp = np.zeros((4, 2, 2))  # [param, which control point, coord]
        dp[0, 0] = (-rho1 * np.sin(phi1) * np.pi / 4.0, rho1 * np.cos(phi1) * np.pi / 4.0)
        dp[1, 0] = (0.5 * np.cos(phi1), 0.5 * np.sin(phi1))
        dp[2, 1] = (rho2 * np.sin(phi2) * np.pi / 4.0, -rho2 * np.cos(phi2) * np.pi / 4.0)
        dp[3, 1] = (-0.5 * np.cos(phi2), -0.5 * np.sin(phi2))
        q = np.arange(self.segments + 1) / self.segments
        b1, b2, _ = bernstein_weights(q)
        dxs = dp[:, 0, 0, None] * b1 + dp[:, 1, 0, None] * b2
        dys = dp[:, 0, 1, None] * b1 + dp[:, 1, 1, None] * b2
        return xs, ys, dxs, dys

    def _segment_state(self, channel, xs, ys):
        k = np.clip(np.searchsorted(xs, channel, side="right") - 1, 0, self.segments - 1)
        safe = np.maximum(xs[k + 1] - xs[k], SEGMENT_EPS)
        s = (channel - xs[k]) / safe
        slope = (ys[k + 1] - ys[k]) / safe
        return k, s, slope

    def _param_tangents(self, channel, tables):
        """The four d(output)/d(parameter) images of one channel."""
        xs, ys, dxs, dys = tables
        k, s, slope = self._segment_state(channel, xs, ys)
        out = []
        for a in range(4):
            out.append(dys[a][k] * (1.0 - s) + dys[a][k + 1] * s
                       + slope * ((s - 1.0) * dxs[a][k] - s * dxs[a][k + 1]))
        return out

    def jvp(self, image, params, direction):
        p = self._vec(params).reshape(3, 4)
        v = self._vec(direction).reshape(3, 4)
        out = np.zeros_like(image)
        for c in range(3):
            tables = self._channel_tables(p[c])
            raw = unified.bpw_map_values(image[:, :, c], tables[0], tables[1])
            tangents = self._param_tangents(image[:, :, c], tables)
            d = sum(v[c, a] * tangents[a] for a in range(4))
            out[:, :, c] = np.where(clamp_pass(raw), d, 0.0)
        return out

    def vjp(self, image, params, upstream, raw=None):
        p = self._vec(params).reshape(3, 4)
        g = np.zeros((3, 4))
        for c in range(3):
            tables = self._channel_tables(p[c])
            chan_raw = (raw[:, :, c] if raw is not None
                        else unified.bpw_map_values(image[:, :, c], tables[0], tables[1]))
            u = np.where(clamp_pass(chan_raw), upstream[:, :, c], 0.0)
            tangents = self._param_tangents(image[:, :, c], tables)
            for a in range(4):
                g[c, a] = np.vdot(u, tangents[a])
        return g.ravel()

    def image_jvp(self, image, params, tangent):
        p = self._vec(params).reshape(3, 4)
        out = np.zeros_like(image)
        for c in range(3):
            xs, ys, _, _ = self._channel_tables(p[c])
            raw = unified.bpw_map_values(image[:, :, c], xs, ys)
            _, _, slope = self._segment_state(image[:, :, c], xs, ys)
            out[:, :, c] = np.where(clamp_pass(raw), slope * tangent[:, :, c], 0.0)
        return out

    def tangent_plan(self, image, params):
        p = self._vec(params).reshape(3, 4)
        slopes = np.empty_like(image)
        tangents = []
        for c in range(3):
            tables = self._channel_tables(p[c])
            chan = image[:, :, c]
            ok = clamp_pass(unified.bpw_map_values(chan, tables[0], tables[1]))
            _, _, slope = self._segment_state(chan, tables[0], tables[1])
            slopes[:, :, c] = np.where(ok, slope, 0.0)
            tangents.append([np.where(ok, tg, 0.0)
                             for tg in self._param_tangents(chan, tables)])

        def basis(j):
            c, a = divmod(j, 4)
            out = np.zeros_like(image)
            out[:, :, c] = tangents[c][a]
            return out

        return TangentPlan(12, basis, lambda tg: slopes * tg)

    def fd_exclusion(self, image, params, eps):
        # The map has kinks at the knots, and the knots move with the
        # parameters (velocity < 1.1), so skip a 2*eps input neighborhood.
        p = self._vec(params).reshape(3, 4)
        excl = np.zeros(image.shape, dtype=bool)
        for c in range(3):
            xs, _ = bpw_curve_knots(p[c], self.segments)
            dist = np.abs(image[:, :, c][..., None] - xs).min(axis=-1)
            excl[:, :, c] = dist <= 2.0 * eps
        return excl


class KblFilter(ParamFilter):
    def __init__(self, ksize: int = unified.KBL_KERNEL_SIZE):
        if ksize % 2 == 0 or ksize < 1:
            raise ValueError("kbl kernel size must be odd and positive")
        self.ksize = ksize

    name = "kbl"

    def bounds(self):
        lo, hi = unified.KBL_RANGE
        n = 2 * self.ksize**2 * 3
        return np.full(n, lo), np.full(n, hi)

    def neutral(self):
        return np.zeros(2 * self.ksize**2 * 3)

    def sample_interior(self, rng, margin: float = 0.05):
        # Full-range kernels clamp nearly every pixel; small magnitudes
        # keep the derivative comparison informative.
        n = 2 * self.ksize**2 * 3
        return rng.uniform(-0.15, 0.15, size=n)

    def _kernels(self, params):
        return self._vec(params).reshape(3, 2, self.ksize, self.ksize)

    def forward_raw(self, image, params):
        k = self._kernels(params)
        return unified.kbl_raw(image, k[:, 0], k[:, 1])

    def jvp(self, image, params, direction):
        k = self._kernels(params)
        v = self._kernels(direction)
        raw = unified.kbl_raw(image, k[:, 0], k[:, 1])
        d = (image * unified.conv_per_channel(image, v[:, 0])
             + unified.conv_per_channel(image, v[:, 1]))
        return np.where(clamp_pass(raw), d, 0.0)

    def _kernel_grads(self, chan, w1, w2):
        """g[o] = sum_x w(x) * chan_padded(x - o) for both weight images;
        the window stack makes this one einsum per weight."""
        h = self.ksize // 2
        pad = np.pad(chan, h, mode="edge")
        windows = np.lib.stride_tricks.sliding_window_view(pad, chan.shape)
        g1 = np.einsum("abhw,hw->ab", windows, w1)[::-1, ::-1]
        g2 = np.einsum("abhw,hw->ab", windows, w2)[::-1, ::-1]
        return g1, g2

    def vjp(self, image, params, upstream, raw=None):
        k = self._kernels(params)
        if raw is None:
            raw = unified.kbl_raw(image, k[:, 0], k[:, 1])
        u = np.where(clamp_pass(raw), upstream, 0.0)
        g = np.zeros((3, 2, self.ksize, self.ksize))
        for c in range(3):
            chan = image[:, :, c]
            g[c, 0], g[c, 1] = self._kernel_grads(chan, u[:, :, c] * chan, u[:, :, c])
        return g.ravel()

    def image_jvp(self, image, params, tangent):
        k = self._kernels(params)
        raw = unified.kbl_raw(image, k[:, 0], k[:, 1])
        d = (tangent * unified.conv_per_channel(image, k[:, 0])
             + image * unified.conv_per_channel(tangent, k[:, 0])
             + unified.conv_per_channel(tangent, k[:, 1]) + tangent)
        return np.where(clamp_pass(raw), d, 0.0)


# ---------------------------------------------------------------------------
# Sequential composition
# ---------------------------------------------------------------------------

class FilterChain(ParamFilter):
    """Filters applied in order with clamping between stages.

    The parameter vector is the stage vectors concatenated. Gradients are
    exact forward-mode: a parameter's tangent is pushed through the
    remaining stages' image tangent rules.
    """

    def __init__(self, stages: list[ParamFilter], name: str | None = None):
        if not stages:
            raise ValueError("chain needs at least one stage")
        self.stages = list(stages)
        self.name = name or "+".join(st.name for st in stages)

    def bounds(self):
        lows, highs = zip(*(st.bounds() for st in self.stages))
        return np.concatenate(lows), np.concatenate(highs)

    def neutral(self):
        return np.concatenate([st.neutral() for st in self.stages])

    def sample(self, rng):
        return np.concatenate([st.sample(rng) for st in self.stages])

    def sample_interior(self, rng, margin: float = 0.05):
        return np.concatenate([st.sample_interior(rng, margin) for st in self.stages])

    def split(self, params):
        p = self._vec(params)
        parts, off = [], 0
        for st in self.stages:
            parts.append(p[off:off + st.param_count])
            off += st.param_count
        return parts

    def _stage_inputs(self, image, parts):
        xs = [image]
        for st, p in zip(self.stages, parts):
            xs.append(st.forward(xs[-1], p))
        return xs

    def forward_raw(self, image, params):
        parts = self.split(params)
        x = image
        for st, p in zip(self.stages[:-1], parts[:-1]):
            x = st.forward(x, p)
        return self.stages[-1].forward_raw(x, parts[-1])

    def forward(self, image, params):
        parts = self.split(params)
        x = image
        for st, p in zip(self.stages, parts):
            x = st.forward(x, p)
        return x

    def jvp(self, image, params, direction):
        parts = self.split(params)
        dirs = self.split(direction)
        x, t = image, None
        for st, p, v in zip(self.stages, parts, dirs):
            tp = st.jvp(x, p, v)
            t = tp if t is None else tp + st.image_jvp(x, p, t)
            x = st.forward(x, p)
        return t

    def image_jvp(self, image, params, tangent):
        parts = self.split(params)
        x, t = image, tangent
        for st, p in zip(self.stages, parts):
            t = st.image_jvp(x, p, t)
            x = st.forward(x, p)
        return t

    def vjp(self, image, params, upstream, raw=None):
        parts = self.split(params)
        xs = self._stage_inputs(image, parts)
        plans = [st.tangent_plan(xs[i], p)
                 for i, (st, p) in enumerate(zip(self.stages, parts))]
        g = np.empty(self.param_count)
        off = 0
        for i, plan in enumerate(plans):
            for j in range(plan.count):
                t = plan.basis(j)
                for downstream in plans[i + 1:]:
                    t = downstream.push(t)
                g[off + j] = np.vdot(upstream, t)
            off += plan.count
        return g


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

FILTER_NAMES = ("gamma", "white_balance", "contrast", "tone",
                "sharpen", "defog", "bpw", "kbl")


def make_filter(name: str, *, tone_segments: int = classical.TONE_SEGMENTS,
                bpw_segments: int = unified.BPW_SEGMENTS,
                kbl_ksize: int = unified.KBL_KERNEL_SIZE,
                defog_window: int = classical.DARK_CHANNEL_WINDOW,
                defog_floor: float = classical.TRANSMISSION_FLOOR) -> ParamFilter:
    """Build one filter by tag with its fixed hyperparameters."""
    builders = {
        "gamma": GammaFilter,
        "white_balance": WhiteBalanceFilter,
        "contrast": ContrastFilter,
        "tone": lambda: ToneFilter(tone_segments),
        "sharpen": SharpenFilter,
        "defog": lambda: DefogFilter(defog_window, defog_floor),
        "bpw": lambda: BpwFilter(bpw_segments),
        "kbl": lambda: KblFilter(kbl_ksize),
    }
    if name not in builders:
        raise ValueError(f"unknown filter {name!r}; known: {', '.join(FILTER_NAMES)}")
    return builders[name]()


def filter_registry(**hyper) -> dict[str, dict]:
    """Machine-readable parameter registry: name -> arity and per-component
    range, as consumed by the sampling harness."""
    out = {}
    for name in FILTER_NAMES:
        filt = make_filter(name, **hyper)
        lo, hi = filt.bounds()
        out[name] = {
            "count": int(filt.param_count),
            "lower": lo.tolist(),
            "upper": hi.tolist(),
        }
    return out


# ---------------------------------------------------------------------------
# Finite-difference oracle
# ---------------------------------------------------------------------------

DEFAULT_FD_EPS = 1e-4
DEFAULT_FD_TOL = 1e-3


@dataclass
class ParamCheck:
    """Comparison of one parameter's analytic and numeric derivative at
    the worst included pixel."""

    index: int
    analytic: float
    estimate: float
    abs_error: float
    rel_error: float
    passed: bool
    compared_pixels: int

    def to_dict(self):
        return {
            "index": self.index,
            "analytic": self.analytic,
            "estimate": self.estimate,
            "abs_error": self.abs_error,
            "rel_error": self.rel_error,
            "passed": self.passed,
            "compared_pixels": self.compared_pixels,
        }


@dataclass
class GradReport:
    filter_name: str
    eps: float
    tolerance: float
    passed: bool
    max_rel_error: float
    params: list[ParamCheck] = field(default_factory=list)

    def to_dict(self):
        return {
            "filter": self.filter_name,
            "eps": self.eps,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "max_rel_error": self.max_rel_error,
            "params": [p.to_dict() for p in self.params],
        }


def param_jvp(filt: ParamFilter, image: np.ndarray, params: np.ndarray,
              direction: np.ndarray) -> np.ndarray:
    """Directional derivative image of the filter output along a
    parameter direction (clamp treated as identity inside (0, 1))."""
    return filt.jvp(image, params, direction)


def param_vjp(filt: ParamFilter, image: np.ndarray, params: np.ndarray,
              upstream: np.ndarray) -> np.ndarray:
    """Adjoint of param_jvp: gradient vector for an upstream image."""
    if np.shape(upstream) != np.shape(image):
        raise ValueError(f"upstream shape {np.shape(upstream)} != image shape {np.shape(image)}")
    return filt.vjp(image, params, upstream)


def boundary_params(filt: ParamFilter, params: np.ndarray, eps: float = 0.0) -> list[int]:
    """Indices of parameters sitting on (or within eps of) a range bound."""
    p = np.asarray(params, dtype=np.float64).ravel()
    lo, hi = filt.bounds()
    return np.flatnonzero((p <= lo + eps) | (p >= hi - eps)).tolist()


def finite_diff_check(filt: ParamFilter, image: np.ndarray, params: np.ndarray,
                      eps: float = DEFAULT_FD_EPS,
                      tolerance: float = DEFAULT_FD_TOL) -> GradReport:
    """Central differences of the clamped forward map against the analytic
    jvp, parameter by parameter.

    Pixels whose pre-clamp value leaves (0, 1) in any of the three
    evaluations are excluded, as are filter-specific kink neighborhoods.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    p = np.asarray(params, dtype=np.float64).ravel()
    if p.size != filt.param_count:
        raise ValueError(f"expected {filt.param_count} parameters, got {p.size}")
    lo, hi = filt.bounds()
    if (p < lo + eps).any() or (p > hi - eps).any():
        raise ValueError("params must be interior to the declared ranges by at least eps")

    base_raw = filt.forward_raw(image, p)
    extra = filt.fd_exclusion(image, p, eps)
    base_ok = (base_raw > 0.0) & (base_raw < 1.0)
    if extra is not None:
        base_ok &= ~extra

    checks = []
    worst = 0.0
    for k in range(p.size):
        e = np.zeros(p.size)
        e[k] = 1.0
        raw_plus = filt.forward_raw(image, p + eps * e)
        raw_minus = filt.forward_raw(image, p - eps * e)
        numeric = (clamp01(raw_plus) - clamp01(raw_minus)) / (2.0 * eps)
        analytic = filt.jvp(image, p, e)
        include = (base_ok & (raw_plus > 0.0) & (raw_plus < 1.0)
                   & (raw_minus > 0.0) & (raw_minus < 1.0))
        n_inc = int(include.sum())
        if n_inc == 0:
            checks.append(ParamCheck(k, 0.0, 0.0, 0.0, 0.0, True, 0))
            continue
        a = analytic[include]
        n = numeric[include]
        abs_err = np.abs(a - n)
        rel_err = abs_err / np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)
        i = int(np.argmax(rel_err))
        rel_max = float(rel_err[i])
        worst = max(worst, rel_max)
        checks.append(ParamCheck(
            index=k,
            analytic=float(a[i]),
            estimate=float(n[i]),
            abs_error=float(abs_err.max()),
            rel_error=rel_max,
            passed=rel_max < tolerance,
            compared_pixels=n_inc,
        ))
    return GradReport(
        filter_name=filt.name,
        eps=eps,
        tolerance=tolerance,
        passed=all(c.passed for c in checks),
        max_rel_error=worst,
        params=checks,
    )
