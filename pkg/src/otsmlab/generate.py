"""Synthetic problem instances with planted orthonormal structure.

An instance is S = Theta Theta^T + W: a planted rank-r coupling plus a
symmetric Gaussian perturbation.  The paired model zeroes the diagonal
blocks of S (self-coupling removed) but draws the identical noise stream,
so the two models can share seeds replicate for replicate.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .blockspec import BlockSpec, BlockSymMatrix, StiefelBlocks
from .errors import InvalidInput
from .linalg import qr_orthonormalize
from .matio import dump_matrix, load_matrix
from .rng import PRNG_NAME, make_generator, mix_seed, standard_normal

MAXBET = "maxbet"
MAXDIFF = "maxdiff"
MODELS = (MAXBET, MAXDIFF)


def gen_theta(spec: BlockSpec, seed: int) -> StiefelBlocks:
    """Planted frames: per block, QR-orthonormalized standard normals.

    Blocks are drawn in index order from a single stream, so the result is
    a pure function of (spec, seed).
    """
    gen = make_generator(seed)
    blocks = []
    for d in spec.dims:
        raw = standard_normal(gen, (d, spec.r))
        blocks.append(qr_orthonormalize(raw))
    return StiefelBlocks(spec, blocks)


def gen_noise(spec: BlockSpec, sigma: float, seed: int) -> np.ndarray:
    """Symmetric noise: upper triangle (diagonal included) i.i.d. N(0, sigma^2).

    The upper triangle is drawn row-major and mirrored, making W = W^T hold
    bitwise.  sigma = 0 consumes the same stream and returns exact zeros,
    which keeps paired comparisons across noise levels aligned.
    """
    if sigma < 0:
        raise InvalidInput(f"sigma must be nonnegative, got {sigma}")
    D = spec.total_dim
    gen = make_generator(seed)
    draws = sigma * standard_normal(gen, (D * (D + 1)) // 2)
    w = np.zeros((D, D))
    iu = np.triu_indices(D)
    w[iu] = draws
    upper = np.triu(w, k=1)
    w = w + upper.T
    return w


@dataclass
class Instance:
    """A problem instance, optionally carrying its planted factors."""

    spec: BlockSpec
    model: str
    coupling: BlockSymMatrix
    sigma: float
    seed: int | None = None
    ground_truth: StiefelBlocks | None = None
    noise: np.ndarray | None = field(default=None, repr=False)
    prng: str = PRNG_NAME

    def __post_init__(self):
        if self.model not in MODELS:
            raise InvalidInput(f"model must be one of {MODELS}, got {self.model!r}")

    @property
    def s(self) -> np.ndarray:
        return self.coupling.entries


def _zero_diagonal_blocks(spec: BlockSpec, a: np.ndarray) -> np.ndarray:
    out = a.copy()
    for i in range(spec.m):
        sl = spec.block_slice(i)
        out[sl, sl] = 0.0
    return out


def assemble_instance(
    spec: BlockSpec,
    model: str,
    sigma: float,
    seed: int,
    theta: StiefelBlocks | None = None,
    noise: np.ndarray | None = None,
) -> Instance:
    """Build S = Theta Theta^T + W (diagonal blocks zeroed for maxdiff).

    theta and noise default to fresh draws from sub-seeds mix(seed, 1) and
    mix(seed, 2).  The stored S is exactly the assembled array; callers can
    re-run the same expression on the stored factors and compare bitwise.
    """
    if model not in MODELS:
        raise InvalidInput(f"model must be one of {MODELS}, got {model!r}")
    if theta is None:
        theta = gen_theta(spec, mix_seed(seed, 1))
    if noise is None:
        noise = gen_noise(spec, sigma, mix_seed(seed, 2))
    stacked = theta.stacked
    s = stacked @ stacked.T + noise
    if model == MAXDIFF:
        s = _zero_diagonal_blocks(spec, s)
    return Instance(
        spec=spec,
        model=model,
        coupling=BlockSymMatrix(spec, s),
        sigma=float(sigma),
        seed=int(seed),
        ground_truth=theta,
        noise=noise,
    )


def noiseless_optimum(spec: BlockSpec, model: str) -> float:
    """Optimal objective at sigma = 0: m^2 r, or m(m-1) r without diagonals."""
    if model == MAXBET:
        return float(spec.m**2 * spec.r)
    if model == MAXDIFF:
        return float(spec.m * (spec.m - 1) * spec.r)
    raise InvalidInput(f"model must be one of {MODELS}, got {model!r}")


# ---------------------------------------------------------------------------
# Instance directory format: spec.json plus OTSM-MAT payloads.

def dump_instance(inst: Instance, out_dir: str | os.PathLike) -> None:
    os.makedirs(out_dir, exist_ok=True)
    meta = {
        "dims": list(inst.spec.dims),
        "r": inst.spec.r,
        "model": inst.model,
        "sigma": inst.sigma,
        "seed": inst.seed,
        "prng": inst.prng,
    }
    with open(os.path.join(out_dir, "spec.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    dump_matrix(inst.s, os.path.join(out_dir, "S.mat"))
    if inst.ground_truth is not None:
        dump_matrix(inst.ground_truth.stacked, os.path.join(out_dir, "theta.mat"))
    if inst.noise is not None:
        dump_matrix(inst.noise, os.path.join(out_dir, "W.mat"))


def load_instance(in_dir: str | os.PathLike) -> Instance:
    spec_path = os.path.join(in_dir, "spec.json")
    try:
        with open(spec_path, "r", encoding="utf-8") as fh:
            meta = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInput(f"cannot read instance metadata at {spec_path}: {exc}")
    try:
        spec = BlockSpec(tuple(meta["dims"]), int(meta["r"]))
        model = str(meta["model"])
        sigma = float(meta["sigma"])
        seed = meta.get("seed")
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInput(f"malformed instance metadata: {exc}")
    s = load_matrix(os.path.join(in_dir, "S.mat"))
    if s.shape != (spec.total_dim, spec.total_dim):
        raise InvalidInput(
            f"S.mat shape {s.shape} does not match dims {spec.dims}"
        )
    theta = None
    theta_path = os.path.join(in_dir, "theta.mat")
    if os.path.exists(theta_path):
        theta = StiefelBlocks.from_stacked(spec, load_matrix(theta_path))
    noise = None
    noise_path = os.path.join(in_dir, "W.mat")
    if os.path.exists(noise_path):
        noise = load_matrix(noise_path)
        if noise.shape != (spec.total_dim, spec.total_dim):
            raise InvalidInput("W.mat shape does not match dims")
    return Instance(
        spec=spec,
        model=model,
        coupling=BlockSymMatrix(spec, s),
        sigma=sigma,
        seed=None if seed is None else int(seed),
        ground_truth=theta,
        noise=noise,
        prng=str(meta.get("prng", PRNG_NAME)),
    )
