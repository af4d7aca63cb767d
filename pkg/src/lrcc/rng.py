"""Portable seeded randomness for data generators and experiments.

Every stochastic routine in the package draws from a PCG64 stream and turns
uniforms into Gaussians with Box-Muller, so a (seed, arguments) pair pins the
generated bytes regardless of platform or numpy release. The algorithm
identifier below is recorded in run manifests.
"""

from __future__ import annotations

import numpy as np

RNG_ALGORITHM = "pcg64-boxmuller"


def make_rng(seed: int) -> np.random.Generator:
    """Return the package-wide generator for an integer seed."""
    return np.random.Generator(np.random.PCG64(int(seed)))


def uniform(rng: np.random.Generator, low: float, high: float, size) -> np.ndarray:
    return low + (high - low) * rng.random(size)


def normal(rng: np.random.Generator, size) -> np.ndarray:
    """Standard normal draws via Box-Muller on PCG64 uniforms.

    numpy's own ``standard_normal`` (ziggurat) is not guaranteed stream-stable
    across releases; this transform is.
    """
    shape = (size,) if np.isscalar(size) else tuple(size)
    count = int(np.prod(shape)) if shape else 1
    half = (count + 1) // 2
    # 1 - U lies in (0, 1], keeping the log finite.
    u1 = 1.0 - rng.random(half)
    u2 = rng.random(half)
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    z = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])[:count]
    return z.reshape(shape)
