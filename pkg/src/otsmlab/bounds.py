"""Noise-level conditions, thresholds, and consistency bounds.

All quantities here are closed-form reads of (W, Theta, sigma, d, m, r):
no solves happen in this module.  Conventions: ||W|| is the spectral norm,
[W Theta]_i is the i-th row block of W @ stacked(Theta), logs are natural,
and d means D/m when dims are unequal.  Bounds return +inf whenever a
denominator is not strictly positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .blockspec import StiefelBlocks
from .errors import InvalidInput, MissingGroundTruth
from .generate import MAXBET, MAXDIFF, MODELS, Instance
from .linalg import op_norm, procrustes_align


@dataclass
class DiscordanceReport:
    opnorm_ratio: float
    rowblock_ratio: float
    discordant: bool

    def to_jsonable(self) -> dict:
        return {
            "opnorm_ratio": self.opnorm_ratio,
            "rowblock_ratio": self.rowblock_ratio,
            "discordant": self.discordant,
        }


def _rowblock_norms(w: np.ndarray, truth: StiefelBlocks) -> np.ndarray:
    product = w @ truth.stacked
    spec = truth.spec
    return np.array(
        [
            float(np.linalg.norm(product[spec.block_slice(i)]))
            for i in range(spec.m)
        ]
    )


def check_discordance(
    w: np.ndarray, truth: StiefelBlocks, sigma: float
) -> DiscordanceReport:
    """Test the two concentration inequalities on the rescaled noise W/sigma.

    The spectral norm must stay under 3 sqrt(D) and every row block of
    (W/sigma) Theta under 3 sqrt(D r log m).  Ratios above 1 break the
    regime.  With one block the log bound degenerates to zero, so any
    nonzero row-block norm counts as a break.
    """
    if sigma <= 0:
        raise InvalidInput(f"sigma must be positive, got {sigma}")
    spec = truth.spec
    D, m, r = spec.total_dim, spec.m, spec.r
    w = np.asarray(w, dtype=float)
    if w.shape != (D, D):
        raise InvalidInput(f"noise must be {D}x{D}, got {w.shape}")
    scaled = w / sigma
    opnorm_ratio = op_norm(scaled) / (3.0 * math.sqrt(D))
    max_rowblock = float(np.max(_rowblock_norms(scaled, truth)))
    denom = 3.0 * math.sqrt(D * r * math.log(m)) if m > 1 else 0.0
    if denom == 0.0:
        rowblock_ratio = 0.0 if max_rowblock == 0.0 else float("inf")
    else:
        rowblock_ratio = max_rowblock / denom
    return DiscordanceReport(
        opnorm_ratio=float(opnorm_ratio),
        rowblock_ratio=float(rowblock_ratio),
        discordant=bool(opnorm_ratio <= 1.0 and rowblock_ratio <= 1.0),
    )


@dataclass
class SigmaThreshold:
    value: float
    min_m: int
    applicable: bool

    def to_jsonable(self) -> dict:
        return {"value": self.value, "min_m": self.min_m, "applicable": self.applicable}


# (key, constant k, smallest m the guarantee covers)
_THRESHOLDS = (
    ("sdp60", 60.0, 8),
    ("local31", 31.0, 2),
    ("maxdiff_sdp120", 120.0, 10),
    ("maxdiff_local64", 64.0, 4),
)


def sigma_thresholds(m: int, d: int, r: int) -> dict[str, SigmaThreshold]:
    """Noise ceilings m^(1/4) / (k sqrt(d r)) for the four guarantees.

    Values are computed for any m; the `applicable` flag records whether m
    clears the guarantee's stated floor.
    """
    if m < 1 or d < 1 or r < 1:
        raise InvalidInput(f"m, d, r must be positive, got {(m, d, r)}")
    base = m**0.25 / math.sqrt(d * r)
    return {
        key: SigmaThreshold(value=base / k, min_m=floor, applicable=m >= floor)
        for key, k, floor in _THRESHOLDS
    }


@dataclass
class ConditionReport:
    holds: bool
    slack: float
    precondition_ok: bool
    terms: dict

    def to_jsonable(self) -> dict:
        return {
            "holds": self.holds,
            "slack": self.slack,
            "precondition_ok": self.precondition_ok,
            "terms": {k: float(v) for k, v in self.terms.items()},
        }


@dataclass
class DeterministicConditions:
    """The two noise conditions evaluated on a realized (W, Theta) pair.

    cond_sdp_tight: under it the relaxation recovers the planted Gram
    matrix exactly (strict inequality).  cond_local_global: under it every
    qualified candidate no worse than the planted frames is a global
    maximizer (non-strict inequality).  Both as printed, term by term.
    """

    w_opnorm: float
    w_theta_max: float
    cond_sdp_tight: ConditionReport
    cond_local_global: ConditionReport

    def to_jsonable(self) -> dict:
        return {
            "w_opnorm": self.w_opnorm,
            "w_theta_max": self.w_theta_max,
            "cond_sdp_tight": self.cond_sdp_tight.to_jsonable(),
            "cond_local_global": self.cond_local_global.to_jsonable(),
        }


def check_deterministic_conditions(
    w: np.ndarray, truth: StiefelBlocks
) -> DeterministicConditions:
    spec = truth.spec
    m, r = spec.m, spec.r
    w = np.asarray(w, dtype=float)
    if w.shape != (spec.total_dim, spec.total_dim):
        raise InvalidInput(f"noise must be {spec.total_dim} square, got {w.shape}")
    wn = op_norm(w)
    wtheta = float(np.max(_rowblock_norms(w, truth)))
    sq_rm = math.sqrt(r / m)
    head = wtheta + 4.0 * wn**2 * sq_rm

    # Exact relaxation condition: m > 4m (2 head / den) + 2 head
    #                                 + 8 ||W|| sqrt(r/m) + 2 ||W||,
    # with den = m - ||W|| (4 sqrt r + 1) - 1, after the precondition
    # m >= ||W|| (4 sqrt r + 1) + 1.
    gate = wn * (4.0 * math.sqrt(r) + 1.0) + 1.0
    precondition_ok = m >= gate
    den = m - gate
    if wn == 0.0 and wtheta == 0.0:
        rhs = 0.0
    elif den > 0.0:
        rhs = 4.0 * m * (2.0 * head / den) + 2.0 * head + 8.0 * wn * sq_rm + 2.0 * wn
    else:
        rhs = float("inf")
    cond_sdp = ConditionReport(
        holds=bool(precondition_ok and m > rhs),
        slack=float(m - rhs),
        precondition_ok=bool(precondition_ok),
        terms={
            "rhs": rhs,
            "denominator": den,
            "head": head,
        },
    )

    # Local-to-global condition: m >= ||W|| (4 sqrt r + 1) + head
    #     + 2 m head / (m - 4 ||W|| sqrt r) + 16 ||W||^2 r / m.
    den2 = m - 4.0 * wn * math.sqrt(r)
    if wn == 0.0 and wtheta == 0.0:
        rhs2 = 0.0
    elif den2 > 0.0:
        rhs2 = (
            wn * (4.0 * math.sqrt(r) + 1.0)
            + head
            + 2.0 * m * head / den2
            + 16.0 * wn**2 * r / m
        )
    else:
        rhs2 = float("inf")
    cond_local = ConditionReport(
        holds=bool(den2 > 0.0 and m >= rhs2),
        slack=float(m - rhs2),
        precondition_ok=bool(den2 > 0.0),
        terms={
            "rhs": rhs2,
            "denominator": den2,
            "head": head,
        },
    )
    return DeterministicConditions(
        w_opnorm=float(wn),
        w_theta_max=wtheta,
        cond_sdp_tight=cond_sdp,
        cond_local_global=cond_local,
    )


@dataclass
class ConsistencyBounds:
    bound_sdp: float
    bound_local: float

    def to_jsonable(self) -> dict:
        return {"bound_sdp": self.bound_sdp, "bound_local": self.bound_local}


def consistency_bounds(
    sigma: float, d: float, m: int, r: int, model: str = MAXBET
) -> ConsistencyBounds:
    """High-probability estimation-error bounds max_i ||V_i - Theta_i||_F.

    bound_sdp covers the relaxation's rounded solution, bound_local any
    qualified candidate at least as good as the planted frames.  Either
    is +inf when its denominator is not strictly positive (the guarantee
    is vacuous there); sigma = 0 gives 0.
    """
    if model not in MODELS:
        raise InvalidInput(f"model must be one of {MODELS}, got {model!r}")
    if sigma < 0 or d <= 0 or m < 1 or r < 1:
        raise InvalidInput("need sigma >= 0 and positive d, m, r")
    if sigma == 0.0:
        return ConsistencyBounds(bound_sdp=0.0, bound_local=0.0)
    log_m = math.log(m)
    inf = float("inf")
    if model == MAXBET:
        num_sdp = 2.0 * (
            3.0 * sigma * math.sqrt(d * m * r * log_m)
            + 36.0 * sigma**2 * d * math.sqrt(r * m)
        )
        den_sdp = m - 3.0 * sigma * math.sqrt(d * m) * (4.0 * math.sqrt(r) + 1.0) - 1.0
        bound_sdp = num_sdp / den_sdp if den_sdp > 0 else inf

        num_loc = 2.0 * (
            3.0 * sigma * math.sqrt(d * r * log_m / m)
            + 36.0 * sigma**2 * d * math.sqrt(r / m)
        )
        den_loc = 1.0 - 12.0 * sigma * math.sqrt(d * r / m)
        bound_local = num_loc / den_loc if den_loc > 0 else inf
    else:
        if m <= 2:
            return ConsistencyBounds(bound_sdp=inf, bound_local=inf)
        num_sdp = (
            6.0 * sigma * math.sqrt(d * m * r * log_m)
            + 72.0 * sigma**2 * d * m * math.sqrt(r * m) / (m - 2.0)
        )
        den_sdp = m - 12.0 * sigma * math.sqrt(d * m**3 * r) / (m - 2.0)
        bound_sdp = num_sdp / den_sdp if den_sdp > 0 else inf

        root_term = math.sqrt(m) - 2.0 / math.sqrt(m)
        num_loc = 2.0 * (
            3.0 * sigma * math.sqrt(d * r * log_m / m)
            + 36.0 * sigma**2 * d * math.sqrt(r) / root_term
        )
        den_loc = 1.0 - 12.0 * sigma * math.sqrt(d * r) / root_term - 3.0 / m
        bound_local = num_loc / den_loc if den_loc > 0 else inf
    return ConsistencyBounds(bound_sdp=float(bound_sdp), bound_local=float(bound_local))


def estimation_error(frames: StiefelBlocks, truth: StiefelBlocks | None) -> float:
    """max_i ||O_i Q - Theta_i||_F after the best common rotation Q."""
    if truth is None:
        raise MissingGroundTruth("planted frames are required for estimation error")
    return procrustes_align(frames, truth).max_residual


@dataclass
class BoundsReport:
    model: str
    sigma: float
    d: float
    m: int
    r: int
    discordance: DiscordanceReport | None
    conditions: DeterministicConditions | None
    thresholds: dict[str, SigmaThreshold]
    consistency: ConsistencyBounds

    def to_jsonable(self) -> dict:
        return {
            "model": self.model,
            "sigma": self.sigma,
            "d": self.d,
            "m": self.m,
            "r": self.r,
            "discordance": None
            if self.discordance is None
            else self.discordance.to_jsonable(),
            "conditions": None
            if self.conditions is None
            else self.conditions.to_jsonable(),
            "thresholds": {k: v.to_jsonable() for k, v in self.thresholds.items()},
            "consistency": self.consistency.to_jsonable(),
        }


def evaluate_bounds(inst: Instance) -> BoundsReport:
    """Every closed-form diagnostic this module offers, on one instance.

    Noise-dependent parts are skipped (None) when the instance does not
    carry its noise and planted frames.
    """
    spec = inst.spec
    d = spec.total_dim / spec.m
    discordance = None
    conditions = None
    if inst.noise is not None and inst.ground_truth is not None:
        if inst.sigma > 0:
            discordance = check_discordance(inst.noise, inst.ground_truth, inst.sigma)
        conditions = check_deterministic_conditions(inst.noise, inst.ground_truth)
    return BoundsReport(
        model=inst.model,
        sigma=inst.sigma,
        d=d,
        m=spec.m,
        r=spec.r,
        discordance=discordance,
        conditions=conditions,
        thresholds=sigma_thresholds(spec.m, max(int(round(d)), 1), spec.r),
        consistency=consistency_bounds(inst.sigma, d, spec.m, spec.r, inst.model),
    )
