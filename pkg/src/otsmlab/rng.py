"""Seed discipline: stream identity, seed mixing, and normal draws.

Two rules make every experiment replayable from one base seed:

* sub-seeds come from a SplitMix64 mix of the base seed with integer keys,
  so replicates are independent of execution order and worker count;
* normal variates come from our own Box-Muller transform over the named
  generator's uniforms, so the stream depends only on this module and the
  generator, not on library-internal sampling algorithms.
"""

from __future__ import annotations

import numpy as np

# Recorded in output metadata next to every seed.
PRNG_NAME = "pcg64-boxmuller"

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(state: int) -> int:
    """One SplitMix64 scrambling round (Steele et al. finalizer)."""
    z = (state + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def mix_seed(base: int, *keys: int) -> int:
    """Fold integer keys into a 64-bit sub-seed, one SplitMix64 round each."""
    state = int(base) & _MASK64
    for k in keys:
        state = splitmix64(state ^ (int(k) & _MASK64))
    return splitmix64(state)


def make_generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & _MASK64))


def standard_normal(gen: np.random.Generator, shape) -> np.ndarray:
    """Box-Muller normals over the generator's uniform stream.

    Draws uniforms in pairs (u1 strictly inside (0, 1]) and applies
    z0 = sqrt(-2 ln u1) cos(2 pi u2), z1 = ... sin(...).  Fixed here once;
    never swap in a library sampler, that would silently change streams.
    """
    shape = tuple(int(s) for s in np.atleast_1d(shape))
    n = int(np.prod(shape)) if shape else 1
    pairs = (n + 1) // 2
    u1 = 1.0 - gen.random(pairs)
    u2 = gen.random(pairs)
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    z = np.empty(2 * pairs)
    z[0::2] = radius * np.cos(angle)
    z[1::2] = radius * np.sin(angle)
    return z[:n].reshape(shape)
