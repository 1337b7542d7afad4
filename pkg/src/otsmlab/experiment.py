"""Replicated experiment grids over (m, sigma) cells.

One replicate = generate an instance from a mixed seed, solve by block
ascent from the spectral start, then score every diagnostic the package
offers.  A cell aggregates counts over replicates; a grid sweeps the
configured m and sigma lists and lands in results.csv / results.json.

Determinism contract: replicate seeds are mix(base_seed, m, sigma_index,
replicate_index), records are reduced in replicate order, and the CSV
writer emits a fixed column set with 17-significant-digit floats, so two
runs with the same config produce identical bytes for any worker count.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

from . import __version__
from .ascent import AscentOptions, solve_block_ascent
from .blockspec import BlockSpec
from .bounds import (
    check_deterministic_conditions,
    check_discordance,
    consistency_bounds,
    estimation_error,
    sigma_thresholds,
)
from .certificate import (
    certify_global,
    check_assumption,
    multipliers,
    qualify_candidate,
)
from .errors import InvalidConfig
from .generate import MAXBET, MODELS, assemble_instance
from .rng import PRNG_NAME, mix_seed
from .sdp import SdpOptions, solve_sdp, tightness_report

CSV_COLUMNS = (
    "m",
    "sigma",
    "replicates",
    "freq_assumption",
    "freq_noise_cond",
    "sigma_below_threshold",
    "freq_certificate",
    "freq_qualified",
    "mean_estimation_error",
    "max_estimation_error",
    "mean_sdp_gap",
    "n_nonconverged",
)


@dataclass
class ExperimentConfig:
    d: int = 5
    r: int = 3
    m_list: tuple[int, ...] = (10, 20, 30)
    sigma_list: tuple[float, ...] = (0.01, 0.10, 1.00, 1.50)
    replicates: int = 100
    model: str = MAXBET
    base_seed: int = 0
    workers: int = 1
    with_sdp: bool = False
    max_sweeps: int = 2000
    tol_objective: float = 1e-12
    tol_stationarity: float = 1e-8
    cert_tol: float = 1e-6
    sdp_tol: float = 1e-7

    def __post_init__(self):
        self.m_list = tuple(int(m) for m in self.m_list)
        self.sigma_list = tuple(float(s) for s in self.sigma_list)
        if self.d < 1 or self.r < 1 or self.r > self.d:
            raise InvalidConfig(f"need 1 <= r <= d, got d={self.d}, r={self.r}")
        if not self.m_list or any(m < 1 for m in self.m_list):
            raise InvalidConfig(f"m_list must hold positive ints, got {self.m_list}")
        if not self.sigma_list or any(s < 0 for s in self.sigma_list):
            raise InvalidConfig(
                f"sigma_list must hold nonnegative values, got {self.sigma_list}"
            )
        if self.replicates < 1:
            raise InvalidConfig(f"replicates must be >= 1, got {self.replicates}")
        if self.model not in MODELS:
            raise InvalidConfig(f"model must be one of {MODELS}, got {self.model!r}")
        if self.workers < 1:
            raise InvalidConfig(f"workers must be >= 1, got {self.workers}")

    @classmethod
    def from_json(cls, path_or_dict) -> "ExperimentConfig":
        if isinstance(path_or_dict, dict):
            raw = dict(path_or_dict)
        else:
            try:
                with open(path_or_dict, "r", encoding="utf-8") as fh:
                    raw = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise InvalidConfig(f"cannot read config: {exc}")
            if not isinstance(raw, dict):
                raise InvalidConfig("config root must be a JSON object")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**raw)
        except (TypeError, ValueError) as exc:
            raise InvalidConfig(f"bad config value: {exc}")

    def to_jsonable(self) -> dict:
        out = asdict(self)
        out["m_list"] = list(self.m_list)
        out["sigma_list"] = list(self.sigma_list)
        return out


@dataclass
class CellResult:
    m: int
    sigma: float
    replicates: int
    freq_assumption: int
    freq_noise_cond: int
    sigma_below_threshold: bool
    freq_certificate: int
    freq_qualified: int
    mean_estimation_error: float
    max_estimation_error: float
    mean_sdp_gap: float | None
    n_nonconverged: int
    wall_time: float
    bound_sdp: float
    bound_local: float
    records: list[dict] = field(default_factory=list, repr=False)

    def to_jsonable(self, with_records: bool = True) -> dict:
        out = {
            "m": self.m,
            "sigma": self.sigma,
            "replicates": self.replicates,
            "freq_assumption": self.freq_assumption,
            "freq_noise_cond": self.freq_noise_cond,
            "sigma_below_threshold": self.sigma_below_threshold,
            "freq_certificate": self.freq_certificate,
            "freq_qualified": self.freq_qualified,
            "mean_estimation_error": self.mean_estimation_error,
            "max_estimation_error": self.max_estimation_error,
            "mean_sdp_gap": self.mean_sdp_gap,
            "n_nonconverged": self.n_nonconverged,
            "wall_time": self.wall_time,
            "bound_sdp": self.bound_sdp,
            "bound_local": self.bound_local,
        }
        if with_records:
            out["records"] = self.records
        return out


def _run_replicate(
    config: ExperimentConfig, m: int, sigma: float, sigma_index: int, rep: int
) -> dict:
    seed = mix_seed(config.base_seed, m, sigma_index, rep)
    spec = BlockSpec((config.d,) * m, config.r)
    inst = assemble_instance(spec, config.model, sigma, seed)
    options = AscentOptions(
        max_sweeps=config.max_sweeps,
        tol_objective=config.tol_objective,
        tol_stationarity=config.tol_stationarity,
    )
    frames, trace = solve_block_ascent(inst.coupling, spec, options)
    lambdas = multipliers(inst.coupling, frames)
    qual = qualify_candidate(lambdas, config.cert_tol)
    cert = certify_global(inst.coupling, frames, lambdas, config.cert_tol)
    assumption = check_assumption(
        inst.coupling, frames, inst.ground_truth, config.cert_tol
    )
    conds = check_deterministic_conditions(inst.noise, inst.ground_truth)
    discordant = None
    if sigma > 0:
        discordant = check_discordance(inst.noise, inst.ground_truth, sigma).discordant
    record = {
        "replicate": rep,
        "seed": seed,
        "objective": trace.objective_per_sweep[-1] if trace.objective_per_sweep else None,
        "converged": trace.converged,
        "sweeps": trace.sweeps_used,
        "qualified": qual.qualified,
        "assumption": assumption,
        "cond_local": conds.cond_local_global.holds,
        "cond_sdp": conds.cond_sdp_tight.holds,
        "certified": cert.globally_optimal,
        "lambda_min_L": cert.lambda_min_l,
        "estimation_error": estimation_error(frames, inst.ground_truth),
        "discordant": discordant,
        "sdp_gap": None,
    }
    if config.with_sdp:
        solution = solve_sdp(
            inst.coupling,
            spec,
            SdpOptions(tol_primal=config.sdp_tol, tol_dual=config.sdp_tol),
        )
        report = tightness_report(solution, inst.coupling, reference=frames)
        record["sdp_gap"] = report.objective_gap
        record["sdp_tight"] = report.tight
        record["sdp_converged"] = solution.converged
    return record


def run_cell(config: ExperimentConfig, m: int, sigma: float) -> CellResult:
    """All replicates of one (m, sigma) cell, reduced in replicate order."""
    if m not in config.m_list:
        raise InvalidConfig(f"m={m} is not in the configured m_list {config.m_list}")
    try:
        sigma_index = config.sigma_list.index(float(sigma))
    except ValueError:
        raise InvalidConfig(
            f"sigma={sigma} is not in the configured sigma_list {config.sigma_list}"
        )
    start = time.perf_counter()
    reps = range(config.replicates)
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            records = list(
                pool.map(
                    _run_replicate,
                    [config] * config.replicates,
                    [m] * config.replicates,
                    [sigma] * config.replicates,
                    [sigma_index] * config.replicates,
                    reps,
                )
            )
    else:
        records = [
            _run_replicate(config, m, sigma, sigma_index, rep) for rep in reps
        ]
    records.sort(key=lambda rec: rec["replicate"])
    wall = time.perf_counter() - start

    thresholds = sigma_thresholds(m, config.d, config.r)
    key = "local31" if config.model == MAXBET else "maxdiff_local64"
    below = bool(sigma <= thresholds[key].value)
    bounds = consistency_bounds(sigma, config.d, m, config.r, config.model)
    errors = [rec["estimation_error"] for rec in records]
    gaps = [rec["sdp_gap"] for rec in records if rec["sdp_gap"] is not None]
    return CellResult(
        m=m,
        sigma=sigma,
        replicates=config.replicates,
        freq_assumption=sum(bool(rec["assumption"]) for rec in records),
        freq_noise_cond=sum(bool(rec["cond_local"]) for rec in records),
        sigma_below_threshold=below,
        freq_certificate=sum(bool(rec["certified"]) for rec in records),
        freq_qualified=sum(bool(rec["qualified"]) for rec in records),
        mean_estimation_error=float(sum(errors) / len(errors)),
        max_estimation_error=float(max(errors)),
        mean_sdp_gap=float(sum(gaps) / len(gaps)) if gaps else None,
        n_nonconverged=sum(not rec["converged"] for rec in records),
        wall_time=wall,
        bound_sdp=bounds.bound_sdp,
        bound_local=bounds.bound_local,
        records=records,
    )


def run_grid(config: ExperimentConfig) -> list[CellResult]:
    return [
        run_cell(config, m, sigma)
        for m in config.m_list
        for sigma in config.sigma_list
    ]


def reproduce_table(
    config: ExperimentConfig | None = None, **overrides
) -> list[CellResult]:
    """The pinned replication grid: d=5, r=3, m in {10,20,30}, four sigmas."""
    config = config or ExperimentConfig()
    if overrides:
        config = replace(config, **overrides)
    return run_grid(config)


# ---------------------------------------------------------------------------
# Serialization.

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "TRUE" if value else "FALSE"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def write_csv(cells: list[CellResult], path) -> None:
    lines = [",".join(CSV_COLUMNS)]
    for cell in cells:
        row = {
            "m": cell.m,
            "sigma": cell.sigma,
            "replicates": cell.replicates,
            "freq_assumption": cell.freq_assumption,
            "freq_noise_cond": cell.freq_noise_cond,
            "sigma_below_threshold": cell.sigma_below_threshold,
            "freq_certificate": cell.freq_certificate,
            "freq_qualified": cell.freq_qualified,
            "mean_estimation_error": cell.mean_estimation_error,
            "max_estimation_error": cell.max_estimation_error,
            "mean_sdp_gap": cell.mean_sdp_gap,
            "n_nonconverged": cell.n_nonconverged,
        }
        lines.append(",".join(_fmt(row[col]) for col in CSV_COLUMNS))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")


def write_json(cells: list[CellResult], config: ExperimentConfig, path) -> None:
    payload = {
        "version": __version__,
        "prng": PRNG_NAME,
        "config": config.to_jsonable(),
        "cells": [cell.to_jsonable(with_records=True) for cell in cells],
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def write_results(cells: list[CellResult], config: ExperimentConfig, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    write_csv(cells, os.path.join(out_dir, "results.csv"))
    write_json(cells, config, os.path.join(out_dir, "results.json"))
