import csv
import json

import numpy as np
import pytest
import yaml

from otabc.cli import ConfigError, main, parse_config, read_samples_csv
from otabc.exceptions import InvalidInput

DATA = [-0.6, 0.1, 0.4, 0.7, 1.4]

BASE = {
    "experiment": "abc",
    "seed": 3,
    "model": {"name": "normal_location", "params": {"sigma": 1.0}},
    "prior": {"kind": "gaussian", "mean": 0.0, "sd": 1.0},
    "discrepancy": {"kind": "wasserstein", "p": 1},
    "data": {"inline": DATA},
    "n_draws": 5000,
    "epsilon": 0.5,
}


def write_config(tmp_path, cfg, name="run.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg))
    return path


def with_(**changes):
    cfg = json.loads(json.dumps(BASE))
    cfg.update(changes)
    return cfg


def test_validate_ok(tmp_path, capsys):
    assert main(["validate", "--config", str(write_config(tmp_path, BASE))]) == 0
    echoed = json.loads(capsys.readouterr().out)
    assert echoed["epsilon"] == 0.5 and echoed["threads"] == 1


def test_every_violation_reported(tmp_path, capsys):
    cfg = with_(experiment="convergence", seed=-1, epsilonn=3, schedule=[1, 2], regions=[[0, 1]])
    cfg["model"] = {"name": "nope"}
    code = main(["validate", "--config", str(write_config(tmp_path, cfg))])
    err = capsys.readouterr().err
    assert code == 2
    assert "epsilonn: unknown field" in err
    assert "schedule must be strictly decreasing" in err
    assert "seed: must be a nonnegative integer" in err
    assert "unknown model 'nope'" in err


@pytest.mark.parametrize(
    "changes, fragment",
    [
        ({"epsilon": None}, "exactly one of epsilon"),
        ({"epsilon_quantile": 0.1}, "exactly one of epsilon"),
        ({"epsilon": -1.0}, "finite positive"),
        ({"data": {}}, "exactly one of inline, csv, simulate"),
        ({"data": {"csv": "missing.csv"}}, "file not found"),
        ({"prior": {"kind": "uniform", "low": 1, "high": 0}}, "prior"),
        ({"discrepancy": {"kind": "energy"}}, "discrepancy.kind"),
        ({"experiment": "bounds"}, "grid: required"),
        ({"model": {"name": "pref_attach"}}, "outside the parameter space"),
        ({"n_draws": "many"}, "n_draws"),
    ],
)
def test_invalid_configs(changes, fragment):
    cfg = with_(**changes)
    cfg = {k: v for k, v in cfg.items() if v is not None}
    with pytest.raises(ConfigError) as info:
        parse_config(cfg)
    assert fragment in str(info.value)


def test_nested_unknown_field():
    cfg = with_(model={"name": "normal_location", "sigma": 2.0})
    with pytest.raises(ConfigError, match="model.sigma: unknown field"):
        parse_config(cfg)


def test_unreadable_yaml(tmp_path, capsys):
    path = tmp_path / "bad.yaml"
    path.write_text("experiment: [abc\n")
    assert main(["validate", "--config", str(path)]) == 2
    assert "parse error" in capsys.readouterr().err
    assert main(["validate", "--config", str(tmp_path / "none.yaml")]) == 2


def test_run_abc_writes_artifacts(tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--config", str(write_config(tmp_path, BASE)), "--out", str(out)]) == 0
    with open(out / "draws.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 5000
    assert set(rows[0]) == {"draw_index", "theta_1", "discrepancy", "accepted"}
    assert all((r["accepted"] == "1") == (float(r["discrepancy"]) <= 0.5) for r in rows)
    meta = json.loads((out / "run.json").read_text())
    assert meta["n_draws"] == 5000 and meta["seed"] == 3 and meta["epsilon"] == 0.5
    assert meta["n_accepted"] == sum(r["accepted"] == "1" for r in rows)


def test_run_is_byte_identical_across_threads_and_reruns(tmp_path):
    path = write_config(tmp_path, with_(n_draws=10_000))
    outs = [tmp_path / name for name in ("a", "b", "c")]
    assert main(["run", "--config", str(path), "--out", str(outs[0])]) == 0
    assert main(["run", "--config", str(path), "--out", str(outs[1]), "--threads", "4"]) == 0
    assert main(["run", "--config", str(path), "--out", str(outs[2])]) == 0
    ref = (outs[0] / "draws.csv").read_bytes()
    assert all((o / "draws.csv").read_bytes() == ref for o in outs[1:])


def test_quantile_threshold(tmp_path):
    out = tmp_path / "q"
    cfg = with_(epsilon=None, epsilon_quantile=0.1)
    del cfg["epsilon"]
    assert main(["run", "--config", str(write_config(tmp_path, cfg)), "--out", str(out)]) == 0
    meta = json.loads((out / "run.json").read_text())
    assert meta["n_accepted"] >= 500


def test_zero_acceptance_exit_code(tmp_path, capsys):
    path = write_config(tmp_path, with_(epsilon=1e-6, n_draws=500))
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "z")]) == 3
    assert "no draw accepted" in capsys.readouterr().err
    assert (tmp_path / "z" / "draws.csv").exists()


def test_csv_and_simulated_data(tmp_path):
    (tmp_path / "obs.csv").write_text("y\n" + "\n".join(map(str, DATA)) + "\n")
    np.testing.assert_array_equal(read_samples_csv(tmp_path / "obs.csv"), DATA)
    path = write_config(tmp_path, with_(data={"csv": "obs.csv"}))
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "c")]) == 0
    sim = with_(data={"simulate": {"theta": 1.0, "n": 50, "seed": 9}})
    assert main(["run", "--config", str(write_config(tmp_path, sim, "s.yaml")), "--out", str(tmp_path / "s")]) == 0
    (tmp_path / "empty.csv").write_text("y\n")
    with pytest.raises(InvalidInput):
        read_samples_csv(tmp_path / "empty.csv")


def test_convergence_run(tmp_path):
    cfg = with_(experiment="convergence", n_draws=100_000, schedule=[2, 1, 0.5], regions=[[-np.inf, 0.0]])
    del cfg["epsilon"]
    out = tmp_path / "conv"
    assert main(["run", "--config", str(write_config(tmp_path, cfg)), "--out", str(out)]) == 0
    with open(out / "convergence.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [float(r["epsilon"]) for r in rows] == [2.0, 1.0, 0.5]
    assert rows[-1]["region"] == "[-inf,0]"
    errs = [float(r["abs_error"]) for r in rows]
    assert errs[-1] < errs[0]
    meta = json.loads((out / "run.json").read_text())
    assert meta["contract"]["[-inf,0]"]["monotone"]


def test_bounds_run(tmp_path):
    cfg = with_(
        experiment="bounds",
        seed=11,
        model={"name": "normal_location", "params": {"sigma": 2.0}},
        data={"simulate": {"theta": 0.0, "n": 200, "seed": 7, "model": {"name": "normal_location"}}},
        n_draws=20_000,
        grid={"low": -3, "high": 3, "step": 0.1},
        bounds={"eps": 0.3, "m": 10_000, "mc_reps": 100},
    )
    del cfg["epsilon"]
    out = tmp_path / "b"
    assert main(["run", "--config", str(write_config(tmp_path, cfg)), "--out", str(out)]) == 0
    report = json.loads((out / "bounds.json").read_text())
    assert {"part_a", "part_b", "part_c", "part_d", "all_pass"} <= set(report)
    with open(out / "t_map.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 61
    assert (out / "exceedance.csv").exists() and (out / "draws.csv").exists()
