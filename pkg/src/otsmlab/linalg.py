"""Deterministic dense kernels used throughout the package.

Everything here wraps LAPACK (via numpy) and then pins down the freedoms
LAPACK leaves open: eigenvalue ordering, eigenvector and Q-factor signs,
and the completion of polar factors on null directions.  Fixing these once
makes every downstream artifact (solver traces, certificates, CSV output)
reproducible for a given seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleProjection, InvalidInput, RankDeficient

# Relative singular-value cutoff below which a direction counts as null.
_RANK_TOL = 1e-12
# Target accuracy for the box/hyperplane projection's sum constraint.
_PROJ_TOL = 1e-12


def _require_finite(a: np.ndarray, what: str) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise InvalidInput(f"{what} has non-finite entries")
    return a


def _fix_column_signs(q: np.ndarray) -> np.ndarray:
    """Flip columns so each column's largest-magnitude entry is positive.

    Ties in magnitude resolve to the lowest row index (argmax semantics).
    Operates in place and returns q.
    """
    if q.size == 0:
        return q
    lead = np.argmax(np.abs(q), axis=0)
    signs = np.sign(q[lead, np.arange(q.shape[1])])
    signs[signs == 0.0] = 1.0
    q *= signs
    return q


@dataclass
class SymEig:
    """Eigendecomposition of a symmetric matrix, eigenvalues descending."""

    values: np.ndarray
    vectors: np.ndarray

    def top(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        return self.values[:k], self.vectors[:, :k]


def sym_eig(a: np.ndarray) -> SymEig:
    """Full eigendecomposition with a deterministic orientation.

    The input is symmetrized before factorization.  Eigenvalues come back
    in descending order and each eigenvector is flipped so its
    largest-magnitude component is positive (ties to the lowest index).
    """
    a = _require_finite(a, "matrix")
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInput(f"expected a square matrix, got shape {a.shape}")
    w, v = np.linalg.eigh((a + a.T) / 2.0)
    w = w[::-1].copy()
    v = v[:, ::-1].copy()
    _fix_column_signs(v)
    return SymEig(values=w, vectors=v)


def op_norm(a: np.ndarray) -> float:
    """Spectral norm of a symmetric matrix (largest |eigenvalue|)."""
    a = _require_finite(a, "matrix")
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInput(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] == 0:
        return 0.0
    w = np.linalg.eigvalsh((a + a.T) / 2.0)
    return float(np.max(np.abs(w)))


def _orthonormal_completion(basis: np.ndarray, n: int, k: int) -> np.ndarray:
    """k orthonormal columns of R^n orthogonal to the given basis columns.

    Uses the trailing columns of a full Householder QR, which is
    deterministic for a fixed input, then applies the sign convention.
    """
    have = basis.shape[1]
    if have == 0:
        comp = np.eye(n)[:, :k].copy()
    else:
        full, _ = np.linalg.qr(basis, mode="complete")
        comp = full[:, have : have + k].copy()
    return _fix_column_signs(comp)


def polar_factor(m: np.ndarray, return_deficient: bool = False):
    """Orthonormal polar factor of a d x r matrix (d >= r).

    Maximizes tr(Q^T m) over column-orthonormal Q; equals U V^T from the
    thin SVD.  When m is rank deficient the factor is completed on the
    null directions with a deterministic orthonormal completion (trailing
    Householder QR columns, sign-fixed).  With return_deficient=True the
    result is a pair (factor, was_deficient).
    """
    m = _require_finite(m, "matrix")
    if m.ndim != 2 or m.shape[0] < m.shape[1]:
        raise InvalidInput(f"need a tall or square matrix, got shape {m.shape}")
    d, r = m.shape
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    rank = int(np.sum(s > _RANK_TOL * (s[0] if s.size else 0.0)))
    if rank == r:
        q = u @ vt
        return (q, False) if return_deficient else q
    u1 = u[:, :rank]
    v1 = vt[:rank, :].T
    u2 = _orthonormal_completion(u1, d, r - rank)
    v2 = _orthonormal_completion(v1, r, r - rank)
    q = u1 @ v1.T + u2 @ v2.T
    return (q, True) if return_deficient else q


def qr_orthonormalize(m: np.ndarray) -> np.ndarray:
    """Thin QR orthonormalization with positive R diagonal.

    Raises RankDeficient when a diagonal entry of R underflows the rank
    cutoff; the positive-diagonal convention makes the result invariant
    to positive column scalings of the input.
    """
    m = _require_finite(m, "matrix")
    if m.ndim != 2 or m.shape[0] < m.shape[1]:
        raise InvalidInput(f"need a tall or square matrix, got shape {m.shape}")
    q, rmat = np.linalg.qr(m)
    diag = np.diag(rmat)
    scale = float(np.max(np.abs(diag))) if diag.size else 0.0
    if scale == 0.0 or np.min(np.abs(diag)) <= _RANK_TOL * scale:
        raise RankDeficient("input columns are numerically dependent")
    signs = np.sign(diag)
    return q * signs


def project_box_hyperplane(
    v: np.ndarray,
    hi: float,
    total: float,
    lo: float | None = None,
) -> np.ndarray:
    """Euclidean projection of v onto {x : lo <= x_i <= hi, sum x = total}.

    lo=None means no lower bound.  The projection is the clip of v - theta
    for the unique shift theta making the sum correct; theta is found by
    bisection on the monotone sum and the free coordinates then absorb the
    remaining rounding so the sum constraint holds to 1e-12.
    """
    v = _require_finite(v, "vector").ravel()
    n = v.size
    if n == 0:
        raise InvalidInput("cannot project an empty vector")
    hi = float(hi)
    total = float(total)
    lo_eff = -np.inf if lo is None else float(lo)
    if lo is not None and lo_eff > hi:
        raise InfeasibleProjection(f"lo={lo_eff} exceeds hi={hi}")
    if n * hi < total - _PROJ_TOL:
        raise InfeasibleProjection(
            f"sum constraint {total} unreachable under upper bound {hi}"
        )
    if lo is not None and n * lo_eff > total + _PROJ_TOL:
        raise InfeasibleProjection(
            f"sum constraint {total} unreachable above lower bound {lo_eff}"
        )
    if n * hi <= total + _PROJ_TOL:
        return np.full(n, hi)
    if lo is not None and n * lo_eff >= total - _PROJ_TOL:
        return np.full(n, lo_eff)

    def sum_at(theta: float) -> float:
        return float(np.sum(np.clip(v - theta, lo_eff, hi)))

    # sum_at(theta) is continuous, non-increasing, and piecewise linear with
    # kinks where a coordinate hits a bound.  Bisect over the sorted kinks
    # to find the active interval, then solve the linear piece exactly.
    kinks = v - hi if lo is None else np.concatenate((v - hi, v - lo_eff))
    kinks = np.unique(kinks)
    if sum_at(kinks[-1]) > total:
        # Only reachable without a lower bound: every coordinate is free
        # beyond the last kink and the sum decreases with slope -n.
        theta = (float(np.sum(v)) - total) / n
    else:
        left, right = 0, kinks.size - 1
        while right - left > 1:
            mid = (left + right) // 2
            if sum_at(kinks[mid]) > total:
                left = mid
            else:
                right = mid
        mid_theta = 0.5 * (kinks[left] + kinks[right])
        shifted = v - mid_theta
        at_hi = shifted >= hi
        at_lo = shifted <= lo_eff
        free = ~(at_hi | at_lo)
        nfree = int(np.count_nonzero(free))
        if nfree == 0:
            theta = mid_theta
        else:
            fixed = hi * int(np.count_nonzero(at_hi))
            if lo is not None:
                fixed += lo_eff * int(np.count_nonzero(at_lo))
            theta = (float(np.sum(v[free])) + fixed - total) / nfree
    x = np.clip(v - theta, lo_eff, hi)

    # Exact finisher: spread the residual over strictly interior coordinates.
    for _ in range(3):
        resid = total - float(np.sum(x))
        if abs(resid) <= _PROJ_TOL:
            break
        slack = _PROJ_TOL
        free = (x < hi - slack) & (x > lo_eff + slack)
        nfree = int(np.count_nonzero(free))
        if nfree == 0:
            break
        x[free] += resid / nfree
        x = np.clip(x, lo_eff, hi)
    if abs(float(np.sum(x)) - total) > _PROJ_TOL:
        raise InfeasibleProjection("projection failed to meet the sum constraint")
    return x


@dataclass
class AlignmentResult:
    """Best common rotation aligning stacked frames to a reference."""

    rotation: np.ndarray
    residual_per_block: np.ndarray
    max_residual: float
    rank_deficient: bool


def procrustes_align(frames, reference) -> AlignmentResult:
    """Align frames O to reference frames by one common r x r rotation.

    Solves min_Q ||O Q - Theta||_F over orthogonal Q via the polar factor
    of O^T Theta on the stacked matrices, then reports per-block residuals.
    The rank_deficient flag marks a degenerate cross-Gram; the alignment
    is still returned.
    """
    if frames.spec.dims != reference.spec.dims or frames.spec.r != reference.spec.r:
        raise InvalidInput("frames and reference have mismatched block shapes")
    cross = frames.stacked.T @ reference.stacked
    q, deficient = polar_factor(cross, return_deficient=True)
    residuals = np.array(
        [
            float(np.linalg.norm(frames[i] @ q - reference[i]))
            for i in range(frames.spec.m)
        ]
    )
    return AlignmentResult(
        rotation=q,
        residual_per_block=residuals,
        max_residual=float(residuals.max()),
        rank_deficient=deficient,
    )
