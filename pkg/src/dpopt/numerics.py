"""Seeded vector numerics shared by the privatizer, optimizers, and harness.

Everything is float64 numpy; randomness flows through RngStream so any
pipeline is bit-reproducible from (seed, stream_id).
"""

from __future__ import annotations

import numpy as np

__all__ = ["RngStream", "gaussian_vector", "l2_norm", "uniform_ball"]


class RngStream:
    """Deterministic random stream keyed by (seed, stream_id).

    Two streams built from the same pair produce the same draw sequence at
    the bit level; distinct pairs give independent, non-overlapping streams
    (Philox keyed through SeedSequence), so sweeps can hand one stream to
    each run without any coordination.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self.generator = np.random.Generator(np.random.Philox(ss))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


def gaussian_vector(rng: RngStream, d: int, std: float) -> np.ndarray:
    """Draw d i.i.d. N(0, std^2) samples; std == 0 returns exact zeros.

    The zero-noise path does not advance the stream, so switching noise off
    leaves every other draw in a pipeline untouched.
    """
    if d < 1:
        raise ValueError(f"invalid dimension d={d}; need d >= 1")
    if std < 0:
        raise ValueError(f"std must be >= 0, got {std}")
    if std == 0.0:
        return np.zeros(d)
    return std * rng.generator.standard_normal(d)


def l2_norm(v: np.ndarray) -> float:
    """Euclidean norm; 0 exactly iff v is the zero vector."""
    return float(np.linalg.norm(np.asarray(v, dtype=float)))


def uniform_ball(rng: RngStream, n: int, d: int, radius: float) -> np.ndarray:
    """n points uniform in the closed d-ball of the given radius.

    radius == 0 returns zeros without advancing the stream.
    """
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    if radius == 0.0:
        return np.zeros((n, d))
    gen = rng.generator
    x = gen.standard_normal((n, d))
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    r = radius * gen.random((n, 1)) ** (1.0 / d)
    return x * (r / norms)
