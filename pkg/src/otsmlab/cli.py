"""Command-line front end.

Subcommands: gen, solve, sdp, certify, bounds, table, grid.  Exit codes:
0 on success, 2 on an invalid configuration or malformed input, 3 when
--strict is set and a solver failed to converge.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .ascent import AscentOptions, solve_block_ascent
from .blockspec import BlockSpec, StiefelBlocks
from .bounds import evaluate_bounds
from .certificate import build_dual_certificate, certify_global
from .errors import OtsmError
from .experiment import ExperimentConfig, run_grid, write_results
from .generate import (
    MODELS,
    assemble_instance,
    dump_instance,
    load_instance,
)
from .matio import dump_matrix, load_matrix
from .rng import PRNG_NAME, mix_seed
from .sdp import SdpOptions, solve_sdp

EXIT_OK = 0
EXIT_BAD_CONFIG = 2
EXIT_NOT_CONVERGED = 3


def _write_json(payload: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _parse_dims(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"dims must be comma-separated ints: {text!r}")


def _cmd_gen(args) -> int:
    spec = BlockSpec(args.dims, args.r)
    inst = assemble_instance(spec, args.model, args.sigma, args.seed)
    dump_instance(inst, args.out)
    print(f"wrote instance ({args.model}, D={spec.total_dim}, r={spec.r}) to {args.out}")
    return EXIT_OK


def _load(args):
    return load_instance(args.instance)


def _cmd_solve(args) -> int:
    inst = _load(args)
    options = AscentOptions(max_sweeps=args.max_sweeps)
    frames, trace = solve_block_ascent(inst.coupling, inst.spec, options)
    os.makedirs(args.out, exist_ok=True)
    dump_matrix(frames.stacked, os.path.join(args.out, "O.mat"))
    obj = trace.objective_per_sweep[-1] if trace.objective_per_sweep else float("nan")
    payload = {
        "version": __version__,
        "prng": PRNG_NAME,
        "instance_seed": inst.seed,
        "objective": obj,
        "trace": trace.to_jsonable(),
    }
    _write_json(payload, os.path.join(args.out, "solution.json"))
    print(
        f"objective {obj:.12g} after {trace.sweeps_used} sweeps "
        f"(converged={trace.converged})"
    )
    if args.strict and not trace.converged:
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _cmd_sdp(args) -> int:
    inst = _load(args)
    solution = solve_sdp(inst.coupling, inst.spec, SdpOptions(max_iter=args.max_iters))
    os.makedirs(args.out, exist_ok=True)
    if args.dump_gram:
        dump_matrix(solution.u, os.path.join(args.out, "U.mat"))
    _write_json(
        {"version": __version__, "solution": solution.to_jsonable()},
        os.path.join(args.out, "gram.json"),
    )
    print(
        f"relaxation objective {solution.objective:.12g} in "
        f"{solution.iters} iterations (converged={solution.converged})"
    )
    if args.strict and not solution.converged:
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _cmd_certify(args) -> int:
    inst = _load(args)
    stacked = load_matrix(args.solution)
    frames = StiefelBlocks.from_stacked(inst.spec, stacked)
    report = certify_global(inst.coupling, frames)
    payload = {"version": __version__, "certificate": report.to_jsonable()}
    if args.dual:
        payload["dual_certificate"] = build_dual_certificate(
            inst.coupling, frames
        ).to_jsonable()
    os.makedirs(args.out, exist_ok=True)
    _write_json(payload, os.path.join(args.out, "certificate.json"))
    print(
        f"qualified={report.qualified} lambda_min_L={report.lambda_min_l:.6g} "
        f"globally_optimal={report.globally_optimal}"
    )
    return EXIT_OK


def _cmd_bounds(args) -> int:
    inst = _load(args)
    report = evaluate_bounds(inst)
    os.makedirs(args.out, exist_ok=True)
    _write_json(
        {"version": __version__, "bounds": report.to_jsonable()},
        os.path.join(args.out, "bounds.json"),
    )
    sdp_b = report.consistency.bound_sdp
    loc_b = report.consistency.bound_local
    print(f"bound_sdp={sdp_b:.6g} bound_local={loc_b:.6g}")
    return EXIT_OK


def _grid_config(args) -> ExperimentConfig:
    if args.config:
        config = ExperimentConfig.from_json(args.config)
    else:
        config = ExperimentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["base_seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.model is not None:
        overrides["model"] = args.model
    if getattr(args, "replicates", None) is not None:
        overrides["replicates"] = args.replicates
    if overrides:
        config = ExperimentConfig(**{**config.to_jsonable(), **overrides})
    return config


def _dump_grid_instances(config: ExperimentConfig, out_dir: str) -> int:
    """Regenerate every replicate instance from its mixed seed and dump it.

    Uses the same seed derivation as the grid runner, so the artifacts are
    exactly the instances the run solved.
    """
    count = 0
    root = os.path.join(out_dir, "instances")
    for m in config.m_list:
        spec = BlockSpec((config.d,) * m, config.r)
        for sigma_index, sigma in enumerate(config.sigma_list):
            for rep in range(config.replicates):
                seed = mix_seed(config.base_seed, m, sigma_index, rep)
                inst = assemble_instance(spec, config.model, sigma, seed)
                name = f"{config.model}_m{m}_s{sigma_index}_r{rep}"
                dump_instance(inst, os.path.join(root, name))
                count += 1
    return count


def _run_and_write(config: ExperimentConfig, args) -> int:
    cells = run_grid(config)
    write_results(cells, config, args.out)
    if getattr(args, "keep_instances", False):
        kept = _dump_grid_instances(config, args.out)
        print(f"kept {kept} instance directories under {args.out}/instances")
    for cell in cells:
        print(
            f"m={cell.m} sigma={cell.sigma:g}: assumption {cell.freq_assumption}"
            f"/{cell.replicates}, certificate {cell.freq_certificate}"
            f"/{cell.replicates}, nonconverged {cell.n_nonconverged}"
        )
    print(f"wrote results.csv and results.json to {args.out}")
    if args.strict and any(cell.n_nonconverged for cell in cells):
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _cmd_table(args) -> int:
    return _run_and_write(_grid_config(args), args)


def _cmd_grid(args) -> int:
    if not args.config:
        print("grid requires --config", file=sys.stderr)
        return EXIT_BAD_CONFIG
    return _run_and_write(_grid_config(args), args)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="otsm",
        description="Orthogonal trace-sum maximization laboratory",
    )
    parser.add_argument("--version", action="version", version=f"otsm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic instance directory")
    p.add_argument("--dims", type=_parse_dims, required=True, metavar="D1,D2,...")
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--model", choices=MODELS, default="maxbet")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("solve", help="block-coordinate ascent on an instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-sweeps", type=int, default=2000)
    p.add_argument("--strict", action="store_true")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("sdp", help="solve the Gram-matrix relaxation")
    p.add_argument("--instance", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-iters", type=int, default=5000)
    p.add_argument("--dump-gram", action="store_true")
    p.add_argument("--strict", action="store_true")
    p.set_defaults(func=_cmd_sdp)

    p = sub.add_parser("certify", help="certify a stacked solution matrix")
    p.add_argument("--instance", required=True)
    p.add_argument("--solution", required=True, help="path to an O.mat file")
    p.add_argument("--dual", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_certify)

    p = sub.add_parser("bounds", help="closed-form diagnostics for an instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_bounds)

    for name, helptext in (
        ("table", "run the pinned replication grid"),
        ("grid", "run a custom experiment grid from a config file"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config")
        p.add_argument("--out", required=True)
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--model", choices=MODELS)
        p.add_argument("--replicates", type=int)
        p.add_argument("--keep-instances", action="store_true")
        p.add_argument("--strict", action="store_true")
        p.set_defaults(func=_cmd_table if name == "table" else _cmd_grid)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except OtsmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG


if __name__ == "__main__":
    sys.exit(main())
