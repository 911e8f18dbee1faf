"""Counter-based random streams.

Every random draw in the package flows from a single master seed through
Philox streams keyed by (seed, purpose, stream index). A path's noise is a
pure function of (seed, purpose, path_index) with a fixed draw layout, so
results are independent of worker count and of which paths run in the same
batch, and any single step can be replayed by slicing.
"""

from __future__ import annotations

import numpy as np

# Purpose tags keep logically distinct noise sources on disjoint streams.
PURPOSE_WALK = 1
PURPOSE_SUBORDINATION = 2
PURPOSE_OU = 3
PURPOSE_RADIAL = 4

_INDEX_MASK = (1 << 56) - 1


def stream(seed: int, purpose: int, index: int) -> np.random.Generator:
    """Generator for one (purpose, index) stream under a master seed."""
    if index < 0 or index > _INDEX_MASK:
        raise ValueError(f"stream index out of range: {index}")
    key = np.array(
        [np.uint64(seed & 0xFFFFFFFFFFFFFFFF),
         np.uint64(((purpose & 0xFF) << 56) | index)],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))


def unit_ball_samples(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    """Draw n points uniform on the closed unit ball of R^dim.

    Gaussian direction times U^(1/dim) radius; exactly n*(dim+1) variates are
    consumed (dim normals then one uniform per sample), which fixes the
    stream layout relied on for replay.
    """
    z = rng.standard_normal((n, dim))
    radii = rng.random(n) ** (1.0 / dim)
    norms = np.linalg.norm(z, axis=-1)
    norms = np.where(norms < 1e-300, 1.0, norms)
    return z * (radii / norms)[:, None]


def walk_noise(seed: int, path_index: int, n_steps: int, dim: int) -> np.ndarray:
    """Ball samples (n_steps, dim) driving one walk path."""
    return unit_ball_samples(stream(seed, PURPOSE_WALK, path_index), n_steps, dim)


def walk_noise_block(seed: int, paths: range, n_steps: int, dim: int) -> np.ndarray:
    """Ball samples (len(paths), n_steps, dim) for a contiguous path block."""
    out = np.empty((len(paths), n_steps, dim))
    for i, p in enumerate(paths):
        out[i] = walk_noise(seed, p, n_steps, dim)
    return out
