import json
import subprocess
import sys

import pytest

from implicit_extremes import __version__
from implicit_extremes.cli import COMMANDS, main
from implicit_extremes.config import SEED_ENV, ConfigError, ExperimentConfig, parse_loss, resolve_config

PARETO = {
    "dimension": 2,
    "loss": "harmonic",
    "model": {"kind": "pareto", "alphas": [1, 1]},
    "block_size": 200,
    "replicates": 300,
    "top_m": 2,
    "seed": 42,
    "mc_size": 20000,
}
GEOMEAN = dict(PARETO, loss="pow(pos(x1)*pos(x2), 1/2)")


def write(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def run(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# -- config --------------------------------------------------------------------------


def test_config_round_trip_and_hash():
    cfg = ExperimentConfig.from_dict(PARETO)
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.config_hash() == ExperimentConfig.from_dict(dict(PARETO, workers=8)).config_hash()
    assert cfg.config_hash() != ExperimentConfig.from_dict(dict(PARETO, seed=1)).config_hash()


@pytest.mark.parametrize(
    "patch,message",
    [
        ({"dimension": 0}, "dimension"),
        ({"top_m": 500}, "top_m"),
        ({"normalization": "other"}, "normalization"),
        ({"model": {"alphas": [1, 1]}}, "kind"),
        ({"extra": 1}, "unknown"),
        ({"seed": "abc"}, "seed"),
    ],
)
def test_config_validation(patch, message):
    with pytest.raises(ConfigError, match=message):
        ExperimentConfig.from_dict(dict(PARETO, **patch))


def test_config_missing_keys():
    data = dict(PARETO)
    del data["model"]
    with pytest.raises(ConfigError, match="missing"):
        ExperimentConfig.from_dict(data)


def test_seed_precedence():
    data = dict(PARETO)
    data.pop("seed")
    with pytest.raises(ConfigError, match="no seed"):
        resolve_config(data, environ={})
    assert resolve_config(data, environ={SEED_ENV: "7"}).seed == 7
    assert resolve_config(dict(PARETO), environ={SEED_ENV: "7"}).seed == 7
    assert resolve_config(dict(PARETO), {"seed": 9}, environ={SEED_ENV: "7"}).seed == 9
    assert resolve_config(dict(PARETO), environ={}).seed == 42
    with pytest.raises(ConfigError):
        resolve_config(dict(PARETO), environ={SEED_ENV: "x"})


def test_parse_loss_forms():
    assert parse_loss("harmonic", 2)((2.0, 2.0)) == 1.0
    assert parse_loss({"name": "lp-norm", "p": 1}, 2)((1.0, 2.0)) == 3.0
    assert parse_loss({"name": "weighted-sum", "weights": [1, 2]}, 2)((1.0, 1.0)) == 3.0
    assert parse_loss({"name": "harmonic", "scale": 2}, 2)((2.0, 2.0)) == 2.0
    assert parse_loss({"expression": "pos(x1) + pos(x2)"}, 2)((1.0, 2.0)) == 3.0
    assert parse_loss({"name": "elliptical", "matrix": [[1, 0], [0, 1]]}, 2)((3.0, 4.0)) == 5.0
    with pytest.raises(ConfigError):
        parse_loss({"name": "bogus"}, 2)


# -- exit codes ------------------------------------------------------------------------


def test_exit_0_and_csv_format(tmp_path, capsys):
    out = tmp_path / "blocks.csv"
    code, _, err = run(["simulate-implicit-max", "--config", write(tmp_path, PARETO), "--out", str(out)], capsys)
    assert code == 0 and err == ""
    lines = out.read_text().splitlines()
    assert lines[0] == "replicate,rank,coord_1,coord_2,loss_value"
    assert len(lines) == 1 + 300 * 2
    assert lines[1].startswith("0,1,") and lines[2].startswith("0,2,")


def test_seed_flag_and_env(tmp_path, capsys, monkeypatch):
    data = dict(PARETO)
    data.pop("seed")
    cfg = write(tmp_path, data)
    code, _, err = run(["simulate-limit-law", "--config", cfg], capsys)
    assert code == 2 and json.loads(err)["error"] == "config error"
    monkeypatch.setenv(SEED_ENV, "5")
    code, env_out, _ = run(["simulate-limit-law", "--config", cfg], capsys)
    assert code == 0
    code, flag_out, _ = run(["simulate-limit-law", "--config", cfg, "--seed", "5"], capsys)
    assert flag_out == env_out
    code, other, _ = run(["simulate-limit-law", "--config", cfg, "--seed", "6"], capsys)
    assert other != env_out


@pytest.mark.parametrize(
    "data",
    [
        dict(PARETO, loss="x1 + 1"),
        dict(PARETO, loss="pos(x1) +"),
        dict(PARETO, model={"kind": "nope"}),
        dict(PARETO, model={"kind": "pareto"}),
        dict(PARETO, dimension=3),
    ],
    ids=["inhomogeneous", "syntax", "unknown-model", "incomplete-model", "dimension"],
)
def test_exit_2_config_errors(tmp_path, capsys, data):
    code, out, err = run(["simulate-implicit-max", "--config", write(tmp_path, data)], capsys)
    assert code == 2
    diag = json.loads(err)
    assert diag["exit_code"] == 2 and diag["message"]


def test_exit_2_missing_file(tmp_path, capsys):
    code, _, err = run(["check-normalization", "--config", str(tmp_path / "none.json")], capsys)
    assert code == 2


def test_inhomogeneous_loss_witness_in_message(tmp_path, capsys):
    _, _, err = run(["simulate-implicit-max", "--config", write(tmp_path, dict(PARETO, loss="x1 + 1"))], capsys)
    assert "not 1-homogeneous" in json.loads(err)["message"]


def test_exit_3_divergent_normalization(tmp_path, capsys):
    code, _, err = run(["check-normalization", "--config", write(tmp_path, GEOMEAN)], capsys)
    assert code == 3
    diag = json.loads(err)
    assert diag["error"] == "divergent normalization"
    truncated = diag["details"]["truncated_density_integrals"]
    assert truncated[-1][0] == 1e4 and truncated[-1][1] > 10


def test_exit_3_degenerate_block(tmp_path, capsys):
    data = dict(PARETO, loss="min", model={"kind": "breiman", "alpha": 1, "V": {"kind": "point", "value": [1, 0]}})
    code, _, err = run(["simulate-implicit-max", "--config", write(tmp_path, data)], capsys)
    assert code == 3 and json.loads(err)["error"] == "degenerate block"


def test_exit_4_failed_acceptance(tmp_path, capsys):
    # blocks of 2 are far from the limit
    data = dict(PARETO, block_size=2, replicates=5000, top_m=1)
    code, out, err = run(["test-convergence", "--config", write(tmp_path, data)], capsys)
    assert code == 4
    reports = json.loads(out)["reports"]
    assert not reports[0]["pass"]
    assert json.loads(err)["error"] == "acceptance test failed"


def test_test_convergence_report_schema(tmp_path, capsys):
    data = dict(PARETO, block_size=1000, replicates=2000)
    code, out, _ = run(["test-convergence", "--config", write(tmp_path, data)], capsys)
    doc = json.loads(out)
    assert code == 0
    assert doc["version"] == __version__ and len(doc["config_hash"]) == 64
    assert [r["test_name"] for r in doc["reports"]] == ["frechet-radial-ks", "angular-ks", "order-ratio-ks"]
    assert all(r["pass"] and r["seed"] == 42 for r in doc["reports"])


def test_estimate_tilt_and_check_normalization(tmp_path, capsys):
    cfg = write(tmp_path, PARETO)
    code, out, _ = run(["estimate-tilt", "--config", cfg, "--compare-direct"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["estimator"] == "importance"
    assert [r["test_name"] for r in doc["reports"]] == ["tilt-vs-analytic", "tilt-vs-direct"]
    code, out, _ = run(["check-normalization", "--config", cfg], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["C"] == 0.5 and doc["C_method"] == "analytic"


def test_estimate_tilt_functional_params(tmp_path, capsys):
    cfg = write(tmp_path, PARETO)
    code, out, _ = run(
        ["estimate-tilt", "--config", cfg, "--functional", "indicator-box", "--lower", "1,1", "--upper", "5,5"], capsys
    )
    assert code == 0 and json.loads(out)["params"] == {"lower": [1.0, 1.0], "upper": [5.0, 5.0]}
    code, _, _ = run(["estimate-tilt", "--config", cfg, "--functional", "capped-loss", "--lower", "1,1"], capsys)
    assert code == 2


# -- determinism -----------------------------------------------------------------------

LIMIT_MIN = {
    "dimension": 2,
    "loss": "min",
    "model": {"kind": "limit-law", "alphas": [1, 1]},
    "block_size": 50,
    "replicates": 400,
    "top_m": 2,
    "seed": 11,
    "mc_size": 20000,
}


@pytest.mark.parametrize("command", sorted(COMMANDS))
@pytest.mark.parametrize("data", [PARETO, LIMIT_MIN], ids=["pareto", "limit-min"])
def test_byte_identical_across_workers(tmp_path, capsys, command, data):
    cfg = write(tmp_path, data)
    outputs = []
    for workers in ("1", "8", "1"):
        path = tmp_path / f"out_{workers}_{len(outputs)}"
        code = main([command, "--config", cfg, "--out", str(path), "--workers", workers])
        capsys.readouterr()
        assert code == 0
        outputs.append(path.read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]


def test_console_script_entry_point(tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "implicit_extremes.cli", "simulate-order-stats", "--config", write(tmp_path, PARETO)],
        capture_output=True, text=True,
    )
    assert out.returncode == 0
    assert out.stdout.splitlines()[0] == "replicate,rank,coord_1,coord_2,loss_value"
