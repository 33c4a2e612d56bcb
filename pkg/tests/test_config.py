import glob
import json
from pathlib import Path

import numpy as np
import pytest

from ksdtransport.config import ExperimentConfig, load_config, parse_config
from ksdtransport.errors import ConfigError, UnsupportedCapability
from ksdtransport.experiment import (build_reference, build_target, build_transport, initial_theta,
                                     run_training)
from ksdtransport.kernel import KernelParams
from ksdtransport.transport import MixtureReference

CONFIGS = sorted(glob.glob(str(Path(__file__).resolve().parents[1] / "configs" / "**" / "*.json"),
                           recursive=True))


def test_defaults_mirror_protocol():
    cfg = parse_config({})
    assert cfg.kernel.params() == KernelParams(c=1.0, lengthscale=0.1, beta=-0.5)
    tc = cfg.train_config()
    assert (tc.optimizer, tc.learning_rate, tc.batch_size) == ("adam", 1e-3, 100)


@pytest.mark.parametrize("data", [
    {"colour": "red"},
    {"kernel": {"ell": 0.1, "gamma": 2}},
    {"train": {"iterations": "many"}},
    {"train": {"iterations": 10.5}},
    {"map": {"pretrain": 1}},
    {"objective": "mmd"},
    {"map": {"kind": "spline"}},
    {"eval": {"gold_standard": "mcmc"}},
    {"optimizer": {"lr": -1.0}},
    {"target": []},
])
def test_invalid_configs_rejected(data):
    with pytest.raises(ConfigError):
        parse_config(data)


def test_kernel_validation_surfaces_as_config_error():
    with pytest.raises(ConfigError):
        parse_config({"kernel": {"beta": 0.5}}).kernel.params()


def test_output_dir_env_override(monkeypatch):
    monkeypatch.setenv("OUTPUT_DIR", "/tmp/elsewhere")
    assert parse_config({"output_dir": "runs/x"}).output_dir == "/tmp/elsewhere"


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_round_trip_through_dict():
    cfg = parse_config({"target": {"kind": "sinusoidal"}, "hmc": {"thin": 3}, "seeds": {"train": 4}})
    again = parse_config(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg


def test_with_seed_sets_both():
    cfg = parse_config({}).with_seed(9)
    assert (cfg.seeds.train, cfg.seeds.eval) == (9, 9)


@pytest.mark.parametrize("path", CONFIGS, ids=lambda p: Path(p).stem)
def test_checked_in_configs_build(path):
    cfg = load_config(path)
    target = build_target(cfg)
    reference = build_reference(cfg)
    tmap = build_transport(cfg, reference, target)
    assert tmap.output_dim == target.dim


def test_table1_grid_is_complete():
    names = {Path(p).stem for p in CONFIGS if "table1" in p}
    for target in ("banana", "sinusoidal", "multimodal"):
        for kind in ("iaf", "stable-iaf", "polynomial", "relu"):
            for obj in ("ksd-u", "ksd-v", "kld"):
                if kind == "relu" and obj == "kld":
                    continue
                assert f"{target}_{kind}_{obj}" in names


def test_mixture_reference_and_map():
    cfg = parse_config({
        "target": {"kind": "multimodal"},
        "reference": {"kind": "gaussian-mixture", "params": {"means": [[2, 2], [-2, -2]]}},
        "map": {"kind": "mixture", "shape": {"base": "iaf", "hidden": 8}},
    })
    ref = build_reference(cfg)
    assert isinstance(ref, MixtureReference) and ref.dim == 3
    tmap = build_transport(cfg, ref, build_target(cfg))
    assert len(tmap.components) == 2
    with pytest.raises(UnsupportedCapability):
        initial_theta(parse_config({**cfg.to_dict(), "map": {**cfg.to_dict()["map"], "pretrain": True}}),
                      tmap, ref)


def test_mismatched_map_and_reference_rejected():
    cfg = parse_config({"reference": {"dim": 3}})
    with pytest.raises(ConfigError):
        build_transport(cfg, build_reference(cfg), build_target(cfg))
    cfg = parse_config({"map": {"kind": "mixture"}})
    with pytest.raises(ConfigError):
        build_transport(cfg, build_reference(cfg), build_target(cfg))


def test_relu_takes_reference_dimension():
    cfg = parse_config({"reference": {"dim": 4}, "map": {"kind": "relu", "shape": {"hidden": [6, 6]}}})
    tmap = build_transport(cfg, build_reference(cfg), build_target(cfg))
    assert (tmap.input_dim, tmap.output_dim, tmap.hidden) == (4, 2, (6, 6))


def test_pretrained_init_runs():
    cfg = parse_config({"map": {"init": "pretrained", "pretrain_iterations": 5, "shape": {"hidden": 4}},
                        "train": {"iterations": 3}})
    run = run_training(cfg)
    assert len(run.report.loss_trace) == 3 and np.all(np.isfinite(run.theta))
