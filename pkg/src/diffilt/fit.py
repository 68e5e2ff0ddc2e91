"""Adam-based fitting of filter parameters to match a target image under
a combined MSE + (1 - SSIM) loss.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .grad import ParamFilter
from .metrics import mse, mse_grad, psnr, ssim, ssim_grad


@dataclass
class FitConfig:
    iterations: int = 50
    learning_rate: float = 0.01
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    mse_weight: float = 1.0
    ssim_weight: float = 1.0
    init: str = "neutral"  # "neutral" or "random"
    init_seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.mse_weight < 0 or self.ssim_weight < 0:
            raise ValueError("loss weights must be non-negative")
        if self.mse_weight == 0 and self.ssim_weight == 0:
            raise ValueError("at least one loss weight must be positive")
        if self.init not in ("neutral", "random"):
            raise ValueError(f"init must be 'neutral' or 'random', got {self.init!r}")

    def to_dict(self):
        return {
            "iterations": self.iterations,
            "learning_rate": self.learning_rate,
            "adam_beta1": self.adam_beta1,
            "adam_beta2": self.adam_beta2,
            "adam_eps": self.adam_eps,
            "mse_weight": self.mse_weight,
            "ssim_weight": self.ssim_weight,
            "init": self.init,
            "init_seed": self.init_seed,
        }


@dataclass
class FitTrace:
    """Per-iteration record; index 0 is the initial state, so the length
    is iterations + 1."""

    losses: list[float] = field(default_factory=list)
    psnrs: list[float] = field(default_factory=list)
    params: np.ndarray | None = None
    best_iteration: int = 0
    wall_time: float = 0.0

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["iteration", "loss", "psnr"])
            for i, (loss, p) in enumerate(zip(self.losses, self.psnrs)):
                writer.writerow([i, f"{loss:.9f}", f"{p:.6f}"])

    def to_dict(self):
        return {
            "losses": self.losses,
            "psnrs": self.psnrs,
            "params": None if self.params is None else self.params.tolist(),
            "best_iteration": self.best_iteration,
            "wall_time": self.wall_time,
        }

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def combined_loss(a: np.ndarray, b: np.ndarray, cfg: FitConfig) -> float:
    """mse_weight * mse + ssim_weight * (1 - ssim)."""
    loss = 0.0
    if cfg.mse_weight:
        loss += cfg.mse_weight * mse(a, b)
    if cfg.ssim_weight:
        loss += cfg.ssim_weight * (1.0 - ssim(a, b))
    return loss


def combined_loss_grad(a: np.ndarray, b: np.ndarray, cfg: FitConfig
                       ) -> tuple[float, np.ndarray]:
    """Loss and its gradient with respect to ``a``."""
    loss = 0.0
    grad = np.zeros_like(np.asarray(a, dtype=np.float64))
    if cfg.mse_weight:
        loss += cfg.mse_weight * mse(a, b)
        grad += cfg.mse_weight * mse_grad(a, b)
    if cfg.ssim_weight:
        value, dval = ssim_grad(a, b)
        loss += cfg.ssim_weight * (1.0 - value)
        grad -= cfg.ssim_weight * dval
    return loss, grad


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(m=np.zeros(n), v=np.zeros(n))


def adam_step(state: AdamState, params: np.ndarray, grad: np.ndarray,
              cfg: FitConfig, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """One bias-corrected Adam update, then projection onto the declared
    parameter box. Mutates ``state``; returns the new parameters."""
    g = np.asarray(grad, dtype=np.float64)
    if g.shape != state.m.shape:
        raise ValueError(f"gradient shape {g.shape} != state shape {state.m.shape}")
    state.step += 1
    state.m = cfg.adam_beta1 * state.m + (1.0 - cfg.adam_beta1) * g
    state.v = cfg.adam_beta2 * state.v + (1.0 - cfg.adam_beta2) * g**2
    m_hat = state.m / (1.0 - cfg.adam_beta1**state.step)
    v_hat = state.v / (1.0 - cfg.adam_beta2**state.step)
    stepped = params - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
    return np.clip(stepped, lower, upper)


def fit_filter(filt: ParamFilter, source: np.ndarray, target: np.ndarray,
               cfg: FitConfig | None = None) -> tuple[np.ndarray, FitTrace]:
    """Fit the filter's parameters so that filter(source) matches target.

    Starts from the neutral (identity) parameters unless the config asks
    for a random interior start, runs cfg.iterations Adam steps with
    projection onto the declared ranges, and returns the best-loss
    parameters seen along with a full trace.
    """
    if np.shape(source) != np.shape(target):
        raise ValueError("source and target must have the same shape")
    cfg = cfg or FitConfig()
    if cfg.init == "neutral":
        params = filt.neutral()
    else:
        params = filt.sample_interior(np.random.default_rng(cfg.init_seed))
    lower, upper = filt.bounds()
    state = AdamState.zeros(params.size)
    trace = FitTrace()
    best_loss = np.inf
    best_params = params.copy()
    started = time.perf_counter()

    for iteration in range(cfg.iterations + 1):
        raw = filt.forward_raw(source, params)
        out = np.clip(raw, 0.0, 1.0)
        if iteration < cfg.iterations:
            loss, upstream = combined_loss_grad(out, target, cfg)
        else:
            loss = combined_loss(out, target, cfg)
        trace.losses.append(float(loss))
        trace.psnrs.append(psnr(out, target))
        if loss < best_loss:
            best_loss = loss
            best_params = params.copy()
            trace.best_iteration = iteration
        if iteration == cfg.iterations:
            break
        grad = filt.vjp(source, params, upstream, raw=raw)
        params = adam_step(state, params, grad, cfg, lower, upper)

    trace.params = best_params
    trace.wall_time = time.perf_counter() - started
    return best_params, trace
