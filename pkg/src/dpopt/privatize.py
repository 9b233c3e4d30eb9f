"""Per-sample clipping and Gaussian noising of gradient batches.

The privatized gradient is (sum of clipped rows + N(0, (sigma*C)^2 I)) / B.
The noise vector is drawn once, after the row reduction, so serial and
parallel row processing agree bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import RngStream, gaussian_vector

__all__ = ["ClipConfig", "PrivatizedGradient", "clip_per_sample", "privatize"]


@dataclass(frozen=True)
class ClipConfig:
    """Clip radius C, fixed batch size B, and noise multiplier sigma."""

    clip_norm: float = 1.0
    batch_size: int = 1
    noise_multiplier: float = 0.0

    def __post_init__(self):
        if self.clip_norm <= 0:
            raise ValueError(f"clip_norm must be > 0, got {self.clip_norm}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.noise_multiplier < 0:
            raise ValueError(
                f"noise_multiplier must be >= 0, got {self.noise_multiplier}"
            )


@dataclass(frozen=True)
class PrivatizedGradient:
    """Noised mean gradient plus the fraction of rows that hit the clip."""

    g_tilde: np.ndarray
    clip_fraction: float


def clip_per_sample(grads: np.ndarray, clip_norm: float) -> np.ndarray:
    """Scale each row i by min(1, C / ||g_i||_2).

    Rows with norm <= C (including zero rows) pass through bit for bit; the
    scale factor for them is exactly 1.0.
    """
    if clip_norm <= 0:
        raise ValueError(f"clip_norm must be > 0, got {clip_norm}")
    grads = np.asarray(grads, dtype=float)
    norms = np.linalg.norm(grads, axis=1)
    factors = np.ones_like(norms)
    over = norms > clip_norm
    factors[over] = clip_norm / norms[over]
    return grads * factors[:, None]


def privatize(grads: np.ndarray, cfg: ClipConfig, rng: RngStream) -> PrivatizedGradient:
    """Clip rows to cfg.clip_norm, average, and add scaled Gaussian noise.

    With noise_multiplier == 0 the result equals the clipped mean exactly
    (the noise path is never taken and the stream is not advanced).
    """
    grads = np.asarray(grads, dtype=float)
    if grads.ndim != 2:
        raise ValueError(f"expected a (B, d) gradient matrix, got shape {grads.shape}")
    n_rows, d = grads.shape
    if n_rows != cfg.batch_size:
        raise ValueError(
            f"batch size mismatch: got {n_rows} gradient rows, "
            f"ClipConfig.batch_size={cfg.batch_size}"
        )
    norms = np.linalg.norm(grads, axis=1)
    clipped = clip_per_sample(grads, cfg.clip_norm)
    noise = gaussian_vector(rng, d, cfg.noise_multiplier * cfg.clip_norm)
    g_tilde = (clipped.sum(axis=0) + noise) / cfg.batch_size
    if not np.all(np.isfinite(g_tilde)):
        raise FloatingPointError("privatized gradient contains non-finite entries")
    clip_fraction = float(np.count_nonzero(norms > cfg.clip_norm)) / cfg.batch_size
    return PrivatizedGradient(g_tilde=g_tilde, clip_fraction=clip_fraction)
