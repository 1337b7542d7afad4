"""Block-structured containers for the trace-sum problem.

A problem instance couples m symmetric coupling blocks S_ij (block i having
d_i rows) with m column-orthonormal frames O_i of common width r.  These
containers keep the block bookkeeping (offsets, slices, stacking) in one
place so the solvers can work on plain ndarrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput

# Orthonormality slack accepted when wrapping frames that came from
# finite-precision factorizations.
STIEFEL_TOL = 1e-10


@dataclass(frozen=True)
class BlockSpec:
    """Row partition (d_1, ..., d_m) and common frame width r."""

    dims: tuple[int, ...]
    r: int

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "r", int(self.r))
        if not dims:
            raise InvalidInput("need at least one block")
        if any(d <= 0 for d in dims):
            raise InvalidInput(f"block dims must be positive, got {dims}")
        if self.r <= 0 or self.r > min(dims):
            raise InvalidInput(
                f"r must satisfy 1 <= r <= min(dims); got r={self.r}, dims={dims}"
            )

    @property
    def m(self) -> int:
        return len(self.dims)

    @property
    def total_dim(self) -> int:
        return sum(self.dims)

    @property
    def offsets(self) -> tuple[int, ...]:
        out = [0]
        for d in self.dims:
            out.append(out[-1] + d)
        return tuple(out)

    def block_slice(self, i: int) -> slice:
        off = self.offsets
        return slice(off[i], off[i + 1])


def _check_square(spec: BlockSpec, entries: np.ndarray) -> np.ndarray:
    entries = np.asarray(entries, dtype=float)
    D = spec.total_dim
    if entries.shape != (D, D):
        raise InvalidInput(f"expected a {D}x{D} array, got shape {entries.shape}")
    if not np.all(np.isfinite(entries)):
        raise InvalidInput("matrix has non-finite entries")
    return entries


@dataclass
class BlockSymMatrix:
    """Symmetric D x D matrix with the block partition of `spec`.

    Symmetry is enforced exactly at construction: the stored array is
    (A + A^T)/2, which leaves an already-symmetric input bitwise unchanged.
    """

    spec: BlockSpec
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = _check_square(self.spec, self.entries)
        self.entries = (a + a.T) / 2.0

    def block(self, i: int, j: int) -> np.ndarray:
        return self.entries[self.spec.block_slice(i), self.spec.block_slice(j)]

    def row_block(self, i: int) -> np.ndarray:
        return self.entries[self.spec.block_slice(i), :]

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def frobenius(self) -> float:
        return float(np.linalg.norm(self.entries))


@dataclass
class StiefelBlocks:
    """Tuple of frames O_i, each d_i x r with orthonormal columns."""

    spec: BlockSpec
    blocks: list[np.ndarray] = field(repr=False)

    def __post_init__(self):
        if len(self.blocks) != self.spec.m:
            raise InvalidInput(
                f"expected {self.spec.m} blocks, got {len(self.blocks)}"
            )
        checked = []
        r = self.spec.r
        for i, (d, b) in enumerate(zip(self.spec.dims, self.blocks)):
            b = np.asarray(b, dtype=float)
            if b.shape != (d, r):
                raise InvalidInput(
                    f"block {i} must be {d}x{r}, got shape {b.shape}"
                )
            if not np.all(np.isfinite(b)):
                raise InvalidInput(f"block {i} has non-finite entries")
            defect = np.linalg.norm(b.T @ b - np.eye(r))
            if defect > STIEFEL_TOL:
                raise InvalidInput(
                    f"block {i} is not column-orthonormal (defect {defect:.3e})"
                )
            checked.append(b)
        self.blocks = checked

    @classmethod
    def from_stacked(cls, spec: BlockSpec, stacked: np.ndarray) -> "StiefelBlocks":
        stacked = np.asarray(stacked, dtype=float)
        if stacked.shape != (spec.total_dim, spec.r):
            raise InvalidInput(
                f"stacked frames must be {spec.total_dim}x{spec.r}, "
                f"got {stacked.shape}"
            )
        return cls(spec, [stacked[spec.block_slice(i)].copy() for i in range(spec.m)])

    @property
    def stacked(self) -> np.ndarray:
        return np.vstack(self.blocks)

    def __getitem__(self, i: int) -> np.ndarray:
        return self.blocks[i]

    def __len__(self) -> int:
        return self.spec.m

    def copy(self) -> "StiefelBlocks":
        return StiefelBlocks(self.spec, [b.copy() for b in self.blocks])
