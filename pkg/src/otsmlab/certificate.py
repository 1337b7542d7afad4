"""Optimality certificates for trace-sum critical points.

Three layers, all cheap relative to the solve:

* multipliers / qualification: the first-order condition pins
  Lambda_i = O_i^T sum_j S_ij O_j; a usable candidate has every Lambda_i
  symmetric positive semidefinite.
* a sufficient global certificate: with tau_i the smallest eigenvalue of
  sym(Lambda_i), positive semidefiniteness of

      L = blkdiag(O_i Lambda_i O_i^T + tau_i (I - O_i O_i^T)) - S

  proves the candidate is a global maximizer.
* a dual certificate for the Gram relaxation: split S into a range part
  and a complement part at the candidate and check strict margins on both
  restricted operators; success proves the relaxation is tight with the
  candidate's Gram matrix as unique solution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .blockspec import BlockSpec, BlockSymMatrix, StiefelBlocks
from .errors import MissingGroundTruth
from .linalg import op_norm, qr_orthonormalize, sym_eig

DEFAULT_TOL = 1e-6


def _scale(s: BlockSymMatrix) -> float:
    return 1.0 + op_norm(s.entries)


def multipliers(s: BlockSymMatrix, frames: StiefelBlocks) -> list[np.ndarray]:
    """First-order multipliers Lambda_i = O_i^T (S O)_i, unsymmetrized."""
    product = s.entries @ frames.stacked
    return [
        frames.blocks[i].T @ product[frames.spec.block_slice(i)]
        for i in range(frames.spec.m)
    ]


@dataclass
class QualificationReport:
    qualified: bool
    min_eigenvalue: float
    max_asymmetry: float
    tol: float


def qualify_candidate(
    lambdas: list[np.ndarray], tol: float = DEFAULT_TOL
) -> QualificationReport:
    """Check that each multiplier is symmetric PSD within a relative slack.

    Block i passes when ||Lambda_i - Lambda_i^T|| <= tol (1 + ||Lambda_i||)
    and lambda_min(sym(Lambda_i)) >= -tol (1 + ||Lambda_i||).
    """
    qualified = True
    worst_eig = np.inf
    worst_asym = 0.0
    for lam in lambdas:
        norm = op_norm((lam + lam.T) / 2.0)
        slack = tol * (1.0 + norm)
        asym = float(np.linalg.norm(lam - lam.T, 2))
        lam_min = float(np.linalg.eigvalsh((lam + lam.T) / 2.0)[0])
        worst_eig = min(worst_eig, lam_min)
        worst_asym = max(worst_asym, asym)
        if asym > slack or lam_min < -slack:
            qualified = False
    return QualificationReport(
        qualified=qualified,
        min_eigenvalue=float(worst_eig),
        max_asymmetry=worst_asym,
        tol=tol,
    )


@dataclass
class CertificateReport:
    qualified: bool
    lambda_min_l: float
    globally_optimal: bool
    tau: np.ndarray
    tol: float
    scale: float

    def to_jsonable(self) -> dict:
        return {
            "qualified": self.qualified,
            "lambda_min_L": self.lambda_min_l,
            "globally_optimal": self.globally_optimal,
            "tau": [float(t) for t in self.tau],
            "tol": self.tol,
            "scale": self.scale,
        }


def certify_global(
    s: BlockSymMatrix,
    frames: StiefelBlocks,
    lambdas: list[np.ndarray] | None = None,
    tol: float = DEFAULT_TOL,
) -> CertificateReport:
    """Assemble the sufficient-optimality operator L and test L >= 0.

    The verdict is scale-relative: globally_optimal requires qualification
    plus lambda_min(L) >= -tol (1 + ||S||).
    """
    spec = frames.spec
    if lambdas is None:
        lambdas = multipliers(s, frames)
    qual = qualify_candidate(lambdas, tol)
    ell = -s.entries.copy()
    tau = np.empty(spec.m)
    for i in range(spec.m):
        block = frames.blocks[i]
        lam_sym = (lambdas[i] + lambdas[i].T) / 2.0
        tau[i] = float(np.linalg.eigvalsh(lam_sym)[0])
        sl = spec.block_slice(i)
        proj = block @ block.T
        ell[sl, sl] += block @ lam_sym @ block.T + tau[i] * (
            np.eye(spec.dims[i]) - proj
        )
    lam_min_l = float(np.linalg.eigvalsh((ell + ell.T) / 2.0)[0])
    scale = _scale(s)
    return CertificateReport(
        qualified=qual.qualified,
        lambda_min_l=lam_min_l,
        globally_optimal=bool(qual.qualified and lam_min_l >= -tol * scale),
        tau=tau,
        tol=tol,
        scale=scale,
    )


def check_assumption(
    s: BlockSymMatrix,
    frames: StiefelBlocks,
    truth: StiefelBlocks | None,
    tol: float = DEFAULT_TOL,
) -> bool:
    """Does the candidate score at least the planted frames' objective?

    Compares tr(Theta^T S Theta) <= tr(O^T S O) with a relative slack.
    """
    if truth is None:
        raise MissingGroundTruth("planted frames are required for this check")
    stacked = frames.stacked
    ref = truth.stacked
    obj = float(np.trace(stacked.T @ s.entries @ stacked))
    obj_truth = float(np.trace(ref.T @ s.entries @ ref))
    return obj_truth <= obj + tol * (1.0 + abs(obj))


# ---------------------------------------------------------------------------
# Range/complement splitting and the dual certificate.


@dataclass
class PrimalDecomposition:
    s1: BlockSymMatrix
    s2: BlockSymMatrix
    residual_reconstruction: float
    residual_range1: float
    residual_range2: float


def _range_bases(frames: StiefelBlocks) -> tuple[list[np.ndarray], np.ndarray]:
    """Orthonormal bases: per-block range of V_i, and global complement.

    Both come from Householder QR factors (sign-fixed), the package-wide
    deterministic basis choice.
    """
    per_block = [qr_orthonormalize(b) for b in frames.blocks]
    stacked = frames.stacked
    full, _ = np.linalg.qr(stacked, mode="complete")
    comp = full[:, frames.spec.r :].copy()
    if comp.size:
        lead = np.argmax(np.abs(comp), axis=0)
        signs = np.sign(comp[lead, np.arange(comp.shape[1])])
        signs[signs == 0.0] = 1.0
        comp *= signs
    return per_block, comp


def build_primal_decomposition(
    s: BlockSymMatrix, frames: StiefelBlocks
) -> PrimalDecomposition:
    """Split S = S1 + S2 at a candidate: S2 carries the diagonal range part.

    S2 is block diagonal with S2_ii = sym((S V)_i V_i^T); S1 is the exact
    remainder S - S2.  At a stationary candidate S1 annihilates the stacked
    range and each S2_ii lives on the block range; the residual fields
    report how far the input is from that ideal.
    """
    spec = frames.spec
    product = s.entries @ frames.stacked
    s2 = np.zeros_like(s.entries)
    for i in range(spec.m):
        sl = spec.block_slice(i)
        raw = product[sl] @ frames.blocks[i].T
        s2[sl, sl] = (raw + raw.T) / 2.0
    s1 = s.entries - s2

    per_block, comp = _range_bases(frames)
    comp_proj = comp @ comp.T
    range1 = float(np.linalg.norm(comp_proj @ s1 @ comp_proj - s1))
    range2 = 0.0
    for i in range(spec.m):
        sl = spec.block_slice(i)
        proj = per_block[i] @ per_block[i].T
        block = s2[sl, sl]
        range2 = max(range2, float(np.linalg.norm(proj @ block @ proj - block)))
    recon = float(np.linalg.norm(s.entries - s1 - s2))
    return PrimalDecomposition(
        s1=BlockSymMatrix(spec, s1),
        s2=BlockSymMatrix(spec, s2),
        residual_reconstruction=recon,
        residual_range1=range1,
        residual_range2=range2,
    )


@dataclass
class DualCertificate:
    t1: BlockSymMatrix = field(repr=False)
    t2: BlockSymMatrix = field(repr=False)
    shift: float
    margin_t2: float
    margin_t1: float
    residual_t1: float
    residual_t2: float
    residual_reconstruction: float
    verified: bool
    tol: float
    scale: float

    def to_jsonable(self) -> dict:
        return {
            "shift": self.shift,
            "margin_T2": self.margin_t2,
            "margin_T1": self.margin_t1,
            "residual_T1": self.residual_t1,
            "residual_T2": self.residual_t2,
            "residual_reconstruction": self.residual_reconstruction,
            "verified": self.verified,
            "tol": self.tol,
            "scale": self.scale,
        }


def build_dual_certificate(
    s: BlockSymMatrix,
    frames: StiefelBlocks,
    tol: float = DEFAULT_TOL,
) -> DualCertificate:
    """Construct and test the tightness certificate at shift c = m/2.

    T2_ii = S2_ii - c P_i P_i^T must be positive definite on each block
    range; T1 = S1 - c blkdiag(I - P_i P_i^T) must be negative definite on
    the complement of the stacked range.  Margins are the offending
    eigenvalues; verification also requires the structural residuals
    (range leakage and reconstruction error) to sit inside the slack.
    """
    spec = frames.spec
    c = spec.m / 2.0
    decomp = build_primal_decomposition(s, frames)
    per_block, comp = _range_bases(frames)

    t1 = decomp.s1.entries.copy()
    t2 = decomp.s2.entries.copy()
    for i in range(spec.m):
        sl = spec.block_slice(i)
        proj = per_block[i] @ per_block[i].T
        t1[sl, sl] -= c * (np.eye(spec.dims[i]) - proj)
        t2[sl, sl] -= c * proj

    margin_t2 = np.inf
    for i in range(spec.m):
        sl = spec.block_slice(i)
        restricted = per_block[i].T @ t2[sl, sl] @ per_block[i]
        lam_min = float(np.linalg.eigvalsh((restricted + restricted.T) / 2.0)[0])
        margin_t2 = min(margin_t2, lam_min)
    if comp.shape[1] > 0:
        restricted = comp.T @ t1 @ comp
        margin_t1 = float(np.linalg.eigvalsh((restricted + restricted.T) / 2.0)[-1])
    else:
        margin_t1 = -np.inf

    comp_proj = comp @ comp.T
    residual_t1 = float(np.linalg.norm(comp_proj @ t1 @ comp_proj - t1))
    residual_t2 = 0.0
    for i in range(spec.m):
        sl = spec.block_slice(i)
        proj = per_block[i] @ per_block[i].T
        block = t2[sl, sl]
        residual_t2 = max(
            residual_t2, float(np.linalg.norm(proj @ block @ proj - block))
        )
    recon = float(
        np.linalg.norm(t1 + t2 + c * np.eye(spec.total_dim) - s.entries)
    )
    scale = _scale(s)
    slack = tol * scale
    verified = bool(
        margin_t2 > slack
        and margin_t1 < -slack
        and max(residual_t1, residual_t2, recon) <= slack
    )
    return DualCertificate(
        t1=BlockSymMatrix(spec, t1),
        t2=BlockSymMatrix(spec, t2),
        shift=c,
        margin_t2=float(margin_t2),
        margin_t1=float(margin_t1),
        residual_t1=residual_t1,
        residual_t2=residual_t2,
        residual_reconstruction=recon,
        verified=verified,
        tol=tol,
        scale=scale,
    )
