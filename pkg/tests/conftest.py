"""Shared helpers: small random problems and an independent projection oracle."""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from otsmlab import BlockSpec, StiefelBlocks, polar_factor


def random_spec(rng: np.random.Generator, max_m: int = 10, max_d: int = 6) -> BlockSpec:
    r = int(rng.integers(1, 4))
    m = int(rng.integers(2, max_m + 1))
    dims = tuple(int(rng.integers(r, max_d + 1)) for _ in range(m))
    return BlockSpec(dims=dims, r=r)


def rotate_frames(frames: StiefelBlocks, seed: int) -> StiefelBlocks:
    """Apply one common r x r orthogonal rotation to every block."""
    r = frames.spec.r
    rng = np.random.default_rng(seed)
    q = np.linalg.qr(rng.standard_normal((r, r)))[0]
    return StiefelBlocks(frames.spec, [b @ q for b in frames])


def projection_oracle(v, hi, total, lo=None):
    """Brute-force KKT solve of min ||x - v|| s.t. lo <= x <= hi, sum x = total.

    Enumerates every assignment of coordinates to {pinned-at-hi, pinned-at-lo,
    free}, solves for the shift on the free set, and keeps the assignment whose
    primal and dual feasibility both check out.  Exponential, so only for
    short vectors; completely independent of the production bisection.
    """
    v = np.asarray(v, dtype=float).ravel()
    n = v.size
    states = (0, 1, 2) if lo is not None else (0, 1)  # 0 free, 1 at hi, 2 at lo
    slack = 1e-9
    best = None
    for assign in itertools.product(states, repeat=n):
        at_hi = np.array([a == 1 for a in assign])
        at_lo = np.array([a == 2 for a in assign])
        free = ~(at_hi | at_lo)
        nfree = int(free.sum())
        fixed = hi * int(at_hi.sum()) + (lo or 0.0) * int(at_lo.sum())
        if nfree == 0:
            if abs(fixed - total) > 1e-7:
                continue
            # pinning at hi needs theta <= v_i - hi, pinning at lo the reverse
            theta_lo = float(np.max(v[at_lo] - lo)) if at_lo.any() else -np.inf
            theta_hi = float(np.min(v[at_hi] - hi)) if at_hi.any() else np.inf
            if theta_lo > theta_hi + slack:
                continue
            x = np.where(at_hi, hi, lo if lo is not None else 0.0)
        else:
            theta = (float(v[free].sum()) + fixed - total) / nfree
            x = v - theta
            ok = True
            if at_hi.any() and np.any(v[at_hi] - theta < hi - slack):
                ok = False  # multiplier for the upper bound must be >= 0
            if ok and at_lo.any() and np.any(v[at_lo] - theta > lo + slack):
                ok = False
            if ok and np.any(x[free] > hi + slack):
                ok = False
            if ok and lo is not None and np.any(x[free] < lo - slack):
                ok = False
            if not ok:
                continue
            x = np.where(at_hi, hi, np.where(at_lo, lo if lo is not None else 0.0, x))
        dist = float(np.sum((x - v) ** 2))
        if best is None or dist < best[0] - 1e-12:
            best = (dist, x)
    assert best is not None, "oracle found no KKT point"
    return best[1]


def random_stiefel(spec: BlockSpec, seed: int) -> StiefelBlocks:
    rng = np.random.default_rng(seed)
    return StiefelBlocks(
        spec, [polar_factor(rng.standard_normal((d, spec.r))) for d in spec.dims]
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20260822)
