import json

import pytest

from akmeasure.config import ConfigError, RunConfig, apply_overrides, load_config


def test_defaults():
    cfg = RunConfig()
    assert cfg.grid == "auto"
    assert cfg.params.build().K1 == 1.0
    assert cfg.grid_spec.refine == 4


def test_unknown_keys_rejected(tmp_path):
    for data in ({"bogus": 1}, {"params": {"K3": 1}}, {"tolerances": {"x": 1}}, {"psi": {"kind": "gaussian", "w": 1}}):
        with pytest.raises(ConfigError):
            load_config(overrides=[f"{k}={json.dumps(v)}" for k, v in data.items()])


def test_file_and_overrides(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"params": {"t": 2.0}, "seed": 3}))
    cfg = load_config(path, ["params.K1=0.5", "regime=q-only", "psi.q0=1"], seed=11)
    assert cfg.params.t == 2.0 and cfg.params.K1 == 0.5
    assert cfg.regime == "q-only"
    assert cfg.seed == 11
    assert cfg.psi.kind == "gaussian" and cfg.psi.q0 == 1.0


def test_resolved_round_trip():
    cfg = load_config(overrides=['psi={"kind": "superposition", "components": [{"q0": -1}, {"q0": 1}]}'])
    again = RunConfig.model_validate(json.loads(json.dumps(cfg.resolved())))
    assert again == cfg


def test_override_parsing():
    d = apply_overrides({"a": {"b": 1}}, ["a.c=2", "x.y.z=true", "s=hello", "n=null"])
    assert d == {"a": {"b": 1, "c": 2}, "x": {"y": {"z": True}}, "s": "hello", "n": None}
    with pytest.raises(ConfigError):
        apply_overrides({}, ["novalue"])
    with pytest.raises(ConfigError):
        apply_overrides({}, ["=3"])


@pytest.mark.parametrize(
    "overrides",
    [
        ["params.b1=0"],
        ["params.t=-1"],
        ["regime=sequential"],
        ["moments.var_q=1", "psi.q0=0"],
        ['grid={"q": {"min": -1, "max": 1, "count": 8}}'],
        ['grid={"count": 64, "q": {"min": -1, "max": 1, "count": 8}, "Q1": {"min": -1, "max": 1, "count": 8}, "Q2": {"min": -1, "max": 1, "count": 8}}'],
        ["samples=0"],
    ],
)
def test_invalid_configs(overrides):
    with pytest.raises(ConfigError):
        load_config(overrides=overrides)


def test_unreadable_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(bad)
