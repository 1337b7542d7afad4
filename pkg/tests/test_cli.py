"""End-to-end runs of the command-line front end, in process via main()."""

import json

import numpy as np
import pytest

from otsmlab.cli import EXIT_BAD_CONFIG, EXIT_NOT_CONVERGED, EXIT_OK, main
from otsmlab.generate import assemble_instance, load_instance, noiseless_optimum
from otsmlab.matio import load_matrix
from otsmlab.rng import mix_seed


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture()
def instance_dir(tmp_path):
    path = tmp_path / "inst"
    assert run("gen", "--dims", "3,3,3", "--r", "2", "--seed", "7",
               "--out", path) == EXIT_OK
    return path


def test_version_flag():
    with pytest.raises(SystemExit) as exc:
        run("--version")
    assert exc.value.code == 0


def test_gen_writes_instance_files(instance_dir):
    names = {p.name for p in instance_dir.iterdir()}
    assert {"spec.json", "S.mat", "theta.mat", "W.mat"} <= names
    meta = json.loads((instance_dir / "spec.json").read_text())
    assert meta["dims"] == [3, 3, 3]
    assert meta["seed"] == 7


def test_gen_rejects_bad_rank(tmp_path):
    assert run("gen", "--dims", "2,2", "--r", "5",
               "--out", tmp_path / "x") == EXIT_BAD_CONFIG


def test_solve_reaches_noiseless_optimum(instance_dir, tmp_path, capsys):
    out = tmp_path / "sol"
    assert run("solve", "--instance", instance_dir, "--out", out) == EXIT_OK
    assert "objective" in capsys.readouterr().out
    payload = json.loads((out / "solution.json").read_text())
    assert payload["trace"]["converged"]
    inst = load_instance(instance_dir)
    expected = noiseless_optimum(inst.spec, inst.model)
    assert payload["objective"] == pytest.approx(expected)
    stacked = load_matrix(out / "O.mat")
    assert stacked.shape == (9, 2)


def test_solve_strict_flags_nonconvergence(instance_dir, tmp_path):
    code = run("solve", "--instance", instance_dir, "--out", tmp_path / "s",
               "--max-sweeps", "1", "--strict")
    assert code == EXIT_NOT_CONVERGED


def test_solve_missing_instance_is_bad_config(tmp_path):
    assert run("solve", "--instance", tmp_path / "nope",
               "--out", tmp_path / "o") == EXIT_BAD_CONFIG


def test_certify_solved_instance(instance_dir, tmp_path):
    sol = tmp_path / "sol"
    run("solve", "--instance", instance_dir, "--out", sol)
    out = tmp_path / "cert"
    assert run("certify", "--instance", instance_dir,
               "--solution", sol / "O.mat", "--dual", "--out", out) == EXIT_OK
    payload = json.loads((out / "certificate.json").read_text())
    assert payload["certificate"]["globally_optimal"]
    assert payload["dual_certificate"]["verified"]


def test_certify_without_dual_omits_dual_block(instance_dir, tmp_path):
    sol = tmp_path / "sol"
    run("solve", "--instance", instance_dir, "--out", sol)
    out = tmp_path / "cert"
    run("certify", "--instance", instance_dir, "--solution", sol / "O.mat",
        "--out", out)
    payload = json.loads((out / "certificate.json").read_text())
    assert "dual_certificate" not in payload


def test_sdp_outputs(instance_dir, tmp_path):
    out = tmp_path / "sdp"
    assert run("sdp", "--instance", instance_dir, "--out", out,
               "--dump-gram") == EXIT_OK
    payload = json.loads((out / "gram.json").read_text())
    assert payload["solution"]["converged"]
    u = load_matrix(out / "U.mat")
    assert u.shape == (9, 9)
    inst = load_instance(instance_dir)
    expected = noiseless_optimum(inst.spec, inst.model)
    assert payload["solution"]["objective"] == pytest.approx(expected, rel=1e-5)


def test_bounds_outputs(tmp_path):
    inst = tmp_path / "inst"
    run("gen", "--dims", "3,3,3,3", "--r", "1", "--sigma", "0.05",
        "--seed", "3", "--out", inst)
    out = tmp_path / "b"
    assert run("bounds", "--instance", inst, "--out", out) == EXIT_OK
    payload = json.loads((out / "bounds.json").read_text())
    assert "consistency" in payload["bounds"]
    assert "thresholds" in payload["bounds"]


def _small_config(tmp_path, **extra):
    config = {
        "d": 3,
        "r": 1,
        "m_list": [3],
        "sigma_list": [0.1],
        "replicates": 2,
        "max_sweeps": 200,
    }
    config.update(extra)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    return path


def test_grid_requires_config(tmp_path, capsys):
    assert run("grid", "--out", tmp_path / "g") == EXIT_BAD_CONFIG
    assert "requires --config" in capsys.readouterr().err


def test_grid_runs_config(tmp_path):
    config = _small_config(tmp_path, m_list=[2, 3], sigma_list=[0.1, 0.5])
    out = tmp_path / "g"
    assert run("grid", "--config", config, "--out", out) == EXIT_OK
    lines = (out / "results.csv").read_text().splitlines()
    assert len(lines) == 1 + 4
    payload = json.loads((out / "results.json").read_text())
    assert len(payload["cells"]) == 4


def test_grid_rejects_unknown_config_key(tmp_path):
    config = _small_config(tmp_path)
    raw = json.loads(config.read_text())
    raw["typo_key"] = 1
    config.write_text(json.dumps(raw))
    assert run("grid", "--config", config,
               "--out", tmp_path / "g") == EXIT_BAD_CONFIG


def test_table_with_overrides(tmp_path):
    config = _small_config(tmp_path)
    out = tmp_path / "t"
    assert run("table", "--config", config, "--out", out,
               "--replicates", "3", "--seed", "5",
               "--model", "maxdiff") == EXIT_OK
    lines = (out / "results.csv").read_text().splitlines()
    row = dict(zip(lines[0].split(","), lines[1].split(",")))
    assert row["replicates"] == "3"
    payload = json.loads((out / "results.json").read_text())
    assert payload["config"]["model"] == "maxdiff"
    assert payload["config"]["base_seed"] == 5


def test_keep_instances_regenerates_run_inputs(tmp_path):
    config = _small_config(tmp_path, sigma_list=[0.1, 0.3])
    out = tmp_path / "t"
    assert run("table", "--config", config, "--out", out,
               "--keep-instances") == EXIT_OK
    root = out / "instances"
    dirs = sorted(p.name for p in root.iterdir())
    assert dirs == [
        "maxbet_m3_s0_r0", "maxbet_m3_s0_r1",
        "maxbet_m3_s1_r0", "maxbet_m3_s1_r1",
    ]
    # a kept artifact is bit-identical to a fresh regeneration from its seed
    kept = load_instance(root / "maxbet_m3_s1_r1")
    seed = mix_seed(0, 3, 1, 1)
    assert kept.seed == seed
    fresh = assemble_instance(kept.spec, "maxbet", 0.3, seed)
    assert np.array_equal(kept.s, fresh.s)
    # and it matches the per-replicate record of the same run
    payload = json.loads((out / "results.json").read_text())
    cell = next(c for c in payload["cells"] if c["sigma"] == 0.3)
    assert cell["records"][1]["seed"] == seed


def test_table_strict_passes_when_converged(tmp_path):
    config = _small_config(tmp_path)
    assert run("table", "--config", config, "--out", tmp_path / "t",
               "--strict") == EXIT_OK
