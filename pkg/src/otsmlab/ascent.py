"""Monotone block-coordinate ascent over products of Stiefel frames.

Each sweep updates frames in turn.  The update for block i maximizes a
linear minorant of the blockwise objective: with a shift alpha_i chosen so
S_ii + alpha_i I is positive definite, the surrogate target is

    M_i = sum_j S_ij O_j + alpha_i O_i

and the maximizer over column-orthonormal O_i is the polar factor of M_i.
Positive definiteness of the shifted diagonal block makes every sweep
non-decreasing in the objective (standard minorize-maximize argument).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .blockspec import BlockSpec, BlockSymMatrix, StiefelBlocks
from .errors import GapWarning, InvalidInput
from .generate import gen_theta
from .linalg import op_norm, polar_factor, sym_eig


def objective(s: BlockSymMatrix, frames: StiefelBlocks) -> float:
    """Trace-sum objective sum_ij tr(O_i^T S_ij O_j)."""
    stacked = frames.stacked
    return float(np.trace(stacked.T @ s.entries @ stacked))


def init_spectral(s: BlockSymMatrix, spec: BlockSpec) -> StiefelBlocks:
    """Top-r eigenvector initialization, orthonormalized per block.

    Warns (GapWarning) when the split eigenvalue gap lambda_r - lambda_{r+1}
    is degenerate relative to the spectral scale; the initialization is
    still returned.
    """
    eig = sym_eig(s.entries)
    r = spec.r
    if spec.total_dim > r:
        scale = max(abs(eig.values[0]), abs(eig.values[-1]), 1e-300)
        gap = (eig.values[r - 1] - eig.values[r]) / scale
        if gap <= 1e-12:
            warnings.warn(
                "degenerate spectral gap at the split index; "
                "initialization is arbitrary within the eigenspace",
                GapWarning,
                stacklevel=2,
            )
    top = eig.vectors[:, :r]
    blocks = [polar_factor(top[spec.block_slice(i)]) for i in range(spec.m)]
    return StiefelBlocks(spec, blocks)


@dataclass
class AscentOptions:
    max_sweeps: int = 2000
    tol_objective: float = 1e-12
    tol_stationarity: float = 1e-8
    shift_margin: float = 1e-8  # eta added to the diagonal-block shift
    init: str = "spectral"  # "spectral" | "random" | "warm"
    init_seed: int = 0
    warm_start: StiefelBlocks | None = None
    randomize_order: bool = False
    order_seed: int = 0


@dataclass
class SolveTrace:
    objective_per_sweep: list[float] = field(default_factory=list)
    sweeps_used: int = 0
    converged: bool = False
    stationarity_residual: float = float("nan")
    rank_deficient_updates: int = 0

    def to_jsonable(self) -> dict:
        obj = self.objective_per_sweep
        if len(obj) > 100:
            recorded = {"first": obj[:50], "last": obj[-50:], "count": len(obj)}
        else:
            recorded = {"first": obj, "last": [], "count": len(obj)}
        return {
            "objective_per_sweep": recorded,
            "sweeps_used": self.sweeps_used,
            "converged": self.converged,
            "stationarity_residual": self.stationarity_residual,
            "rank_deficient_updates": self.rank_deficient_updates,
        }


def _initial_frames(s, spec, options) -> StiefelBlocks:
    if options.init == "warm":
        if options.warm_start is None:
            raise InvalidInput("warm init requires warm_start frames")
        if options.warm_start.spec != spec:
            raise InvalidInput("warm_start block shapes do not match the problem")
        return options.warm_start.copy()
    if options.init == "random":
        return gen_theta(spec, options.init_seed)
    if options.init == "spectral":
        return init_spectral(s, spec)
    raise InvalidInput(f"unknown init {options.init!r}")


def _diagonal_shifts(s: BlockSymMatrix, spec: BlockSpec, eta: float) -> np.ndarray:
    shifts = np.empty(spec.m)
    for i in range(spec.m):
        lam_min = float(np.linalg.eigvalsh(s.block(i, i))[0])
        shifts[i] = max(0.0, -lam_min) + eta
    return shifts


def sweep(
    s: BlockSymMatrix,
    frames: StiefelBlocks,
    shifts: np.ndarray,
    order: np.ndarray,
    product: np.ndarray,
) -> int:
    """One in-place Gauss-Seidel pass; returns rank-deficient update count.

    `product` caches S @ stacked(frames) and is updated incrementally as
    blocks change, which keeps a sweep at O(D^2 r) work.
    """
    spec = frames.spec
    deficient = 0
    for i in order:
        sl = spec.block_slice(i)
        target = product[sl] + shifts[i] * frames.blocks[i]
        new_block, flag = polar_factor(target, return_deficient=True)
        if flag:
            deficient += 1
        delta = new_block - frames.blocks[i]
        if np.any(delta):
            product += s.entries[:, sl] @ delta
            frames.blocks[i] = new_block
    return deficient


def solve_block_ascent(
    s: BlockSymMatrix,
    spec: BlockSpec | None = None,
    options: AscentOptions | None = None,
) -> tuple[StiefelBlocks, SolveTrace]:
    """Run sweeps to a stationary point of the trace-sum objective.

    Convergence requires both a relative objective stall (tol_objective)
    and a small stationarity residual

        max_i ||O_i Lambda_i - (S O)_i||_F / (1 + ||S||),

    the distance to the first-order condition with Lambda_i = O_i^T (S O)_i.
    """
    if spec is None:
        spec = s.spec
    options = options or AscentOptions()
    frames = _initial_frames(s, spec, options)
    shifts = _diagonal_shifts(s, spec, options.shift_margin)
    scale = 1.0 + op_norm(s.entries)
    order_rng = (
        np.random.Generator(np.random.PCG64(options.order_seed))
        if options.randomize_order
        else None
    )

    trace = SolveTrace()
    product = s.entries @ frames.stacked
    prev_obj = None
    for _ in range(options.max_sweeps):
        order = np.arange(spec.m)
        if order_rng is not None:
            order_rng.shuffle(order)
        trace.rank_deficient_updates += sweep(s, frames, shifts, order, product)
        # Refresh the cache; incremental updates drift over many sweeps.
        product = s.entries @ frames.stacked
        obj = float(np.trace(frames.stacked.T @ product))
        trace.objective_per_sweep.append(obj)
        trace.sweeps_used += 1
        if prev_obj is not None and abs(obj - prev_obj) <= options.tol_objective * (
            1.0 + abs(obj)
        ):
            residual = _stationarity_residual(frames, product, scale)
            trace.stationarity_residual = residual
            if residual <= options.tol_stationarity:
                trace.converged = True
                break
        prev_obj = obj
    if not trace.converged:
        trace.stationarity_residual = _stationarity_residual(
            frames, s.entries @ frames.stacked, scale
        )
    return frames, trace


def _stationarity_residual(
    frames: StiefelBlocks, product: np.ndarray, scale: float
) -> float:
    worst = 0.0
    for i in range(frames.spec.m):
        sl = frames.spec.block_slice(i)
        block = frames.blocks[i]
        lam = block.T @ product[sl]
        worst = max(worst, float(np.linalg.norm(block @ lam - product[sl])))
    return worst / scale
