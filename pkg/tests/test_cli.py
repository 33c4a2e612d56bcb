import csv
import json
import os
import subprocess
import sys
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from ksdtransport import cli
from ksdtransport.errors import NumericFailure
from ksdtransport.transport import IAF, init_map


def write_config(tmp_path, data, name="cfg.json"):
    data = {"output_dir": str(tmp_path / "out"), **data}
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


MINIMAL = {"target": {"kind": "gaussian"}, "map": {"kind": "iaf", "shape": {"hidden": 8}},
           "train": {"iterations": 10, "batch": 20}, "eval": {"w1_samples": 200}}


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_train_writes_artifacts(tmp_path):
    cfg = write_config(tmp_path, MINIMAL)
    assert cli.main(["train", "--config", cfg]) == 0
    out = tmp_path / "out"
    rows = read_rows(out / "loss.csv")
    assert rows[0] == ["iteration", "loss"] and len(rows) == 11
    theta = json.loads((out / "theta.json").read_text())
    run = json.loads((out / "run.json").read_text())
    assert run["iterations"] == 10 and run["target_evaluations"] == 200
    assert theta["header"] == run["header"]
    assert theta["header"]["seeds"] == {"train": 0, "eval": 0}
    assert len(theta["theta"]) == IAF(2, 8).param_count
    assert (out / "loss.csv").read_bytes().endswith(b"\n")


def test_train_is_byte_deterministic(tmp_path):
    cfg = write_config(tmp_path, MINIMAL)
    cli.main(["train", "--config", cfg, "--out", str(tmp_path / "a")])
    cli.main(["train", "--config", cfg, "--out", str(tmp_path / "b")])
    a = json.loads((tmp_path / "a" / "theta.json").read_text())
    b = json.loads((tmp_path / "b" / "theta.json").read_text())
    assert a["theta"] == b["theta"]
    # the only difference is the output directory recorded in the header
    a["header"]["config"].pop("output_dir"), b["header"]["config"].pop("output_dir")
    assert a == b
    cli.main(["train", "--config", cfg])
    first = (tmp_path / "out" / "theta.json").read_bytes()
    cli.main(["train", "--config", cfg])
    assert (tmp_path / "out" / "theta.json").read_bytes() == first


def test_kld_with_relu_exits_2(tmp_path, capsys):
    cfg = write_config(tmp_path, {"objective": "kld", "map": {"kind": "relu"}})
    assert cli.main(["train", "--config", cfg]) == 2
    assert "log-determinant" in capsys.readouterr().err


def test_unknown_key_exits_2(tmp_path):
    assert cli.main(["train", "--config", write_config(tmp_path, {"trian": {}})]) == 2


def test_numeric_failure_exits_3(tmp_path, monkeypatch):
    def boom(cfg):
        raise NumericFailure("iteration 4: non-finite gradient")
    monkeypatch.setattr(cli, "run_training", boom)
    assert cli.main(["train", "--config", write_config(tmp_path, MINIMAL)]) == 3


def identity_theta(tmp_path, cfg_path):
    cfg = cli.load_config(cfg_path)
    m = IAF(2, 8)
    blob = {"header": cli.header(cfg), "topology": m.topology(),
            "theta": list(map(float, init_map(m, 0, "identity")))}
    path = tmp_path / "identity.json"
    path.write_text(json.dumps(blob))
    return str(path)


def test_eval_identity_map_near_noise_floor(tmp_path):
    cfg = write_config(tmp_path, {**MINIMAL, "eval": {"w1_samples": 1000}})
    assert cli.main(["eval-w1", "--config", cfg, "--theta", identity_theta(tmp_path, cfg)]) == 0
    metrics = json.loads((tmp_path / "out" / "metrics.json").read_text())
    jsonschema.validate(metrics, cli.metrics_schema())
    assert metrics["w1"] <= 2 * metrics["noise_floor"]
    assert metrics["mode_coverage"] is None
    assert metrics["ksd_discrepancy"] == pytest.approx(np.sqrt(max(metrics["ksd_v"], 0)))


def test_eval_multimodal_reports_coverage(tmp_path):
    cfg = write_config(tmp_path, {**MINIMAL, "target": {"kind": "multimodal"}})
    cli.main(["train", "--config", cfg])
    assert cli.main(["eval-w1", "--config", cfg]) == 0
    metrics = json.loads((tmp_path / "out" / "metrics.json").read_text())
    jsonschema.validate(metrics, cli.metrics_schema())
    assert len(metrics["mode_coverage"]) == 4 and sum(metrics["mode_coverage"]) <= 1.0
    theta = json.loads((tmp_path / "out" / "theta.json").read_text())
    assert metrics["header"] == theta["header"]


def test_eval_topology_mismatch_exits_2(tmp_path, capsys):
    cfg = write_config(tmp_path, MINIMAL)
    cli.main(["train", "--config", cfg])
    other = write_config(tmp_path, {**MINIMAL, "map": {"kind": "iaf", "shape": {"hidden": 9}}}, "other.json")
    code = cli.main(["eval-w1", "--config", other, "--theta", str(tmp_path / "out" / "theta.json")])
    assert code == 2 and "topology" in capsys.readouterr().err


def test_eval_with_gold_samples_file(tmp_path):
    cfg = write_config(tmp_path, MINIMAL)
    theta = identity_theta(tmp_path, cfg)
    gold = tmp_path / "gold.csv"
    cli.write_csv(gold, ["y1", "y2"], np.zeros((200, 2)))
    assert cli.main(["eval-w1", "--config", cfg, "--theta", theta, "--gold-samples", str(gold)]) == 0
    metrics = json.loads((tmp_path / "out" / "metrics.json").read_text())
    assert metrics["noise_floor"] is None
    jsonschema.validate(metrics, cli.metrics_schema())


def test_hmc_rows_header_and_determinism(tmp_path):
    cfg = write_config(tmp_path, {"target": {"kind": "banana"},
                                  "hmc": {"warmup": 100, "samples": 90, "thin": 4, "n_chains": 2}})
    assert cli.main(["hmc", "--config", cfg]) == 0
    rows = read_rows(tmp_path / "out" / "samples.csv")
    assert rows[0] == ["y1", "y2"] and len(rows) - 1 == 2 * (90 // 4)
    first = (tmp_path / "out" / "samples.csv").read_bytes()
    cli.main(["hmc", "--config", cfg])
    assert (tmp_path / "out" / "samples.csv").read_bytes() == first
    info = json.loads((tmp_path / "out" / "hmc.json").read_text())
    assert info["draws"] == 2 * (90 // 4)


def test_sample_subcommand(tmp_path):
    cfg = write_config(tmp_path, MINIMAL)
    cli.main(["train", "--config", cfg])
    assert cli.main(["sample", "--config", cfg, "--n", "37"]) == 0
    assert len(read_rows(tmp_path / "out" / "samples.csv")) == 38
    assert cli.main(["sample", "--config", cfg, "--n", "12", "--source", "gold"]) == 0
    pts = cli.read_samples_csv(tmp_path / "out" / "samples.csv")
    assert pts.shape == (12, 2)


def test_check_passes(capsys):
    assert cli.main(["check"]) == 0
    lines = [l for l in capsys.readouterr().out.splitlines() if l.startswith(("PASS", "FAIL"))]
    assert len(lines) >= 12 and all(l.startswith("PASS") for l in lines)


def test_check_detects_injected_fault():
    env = {**os.environ, "KSDTRANSPORT_FAULT": "imq_grad_sign"}
    res = subprocess.run([sys.executable, "-m", "ksdtransport", "check"], env=env,
                         capture_output=True, text=True, timeout=300)
    assert res.returncode == 1
    assert "FAIL  kernel.grad_y_vs_fd" in res.stdout
