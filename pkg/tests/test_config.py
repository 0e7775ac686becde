import pytest

from mrer.config import ConfigError, MissionConfig, coerce, load_config, parse_flat
from mrer.prediction import PredictorKind


def test_defaults_validate():
    cfg = MissionConfig().validate()
    assert cfg.strategy == "proid" and cfg.alpha == 2.0 and cfg.ticks == 1000
    assert not cfg.failures_enabled


def test_parse_flat():
    assert parse_flat("a = 1\n\n# note\nb=two  # trailing\n") == {"a": "1", "b": "two"}
    with pytest.raises(ConfigError):
        parse_flat("just words")


@pytest.mark.parametrize("raw,kind,want", [
    ("3", "int", 3), ("2.5", "float", 2.5), ("yes", "bool", True), ("Off", "bool", False),
    ("none", "str | None", None), ("maps/a.txt", "str | None", "maps/a.txt"), (7, "int", 7),
])
def test_coerce(raw, kind, want):
    assert coerce("k", raw, kind) == want


def test_coerce_errors():
    for raw, kind in [("x", "int"), ("maybe", "bool"), ("1e", "float")]:
        with pytest.raises(ConfigError):
            coerce("k", raw, kind)


def test_load_config_overrides(tmp_path):
    f = tmp_path / "c.conf"
    f.write_text("strategy = periodic\nperiod = 50\nn_robots = 4\nfailures_enabled = true\n")
    cfg = load_config(f, period=75, seed=None)
    assert (cfg.strategy, cfg.period, cfg.n_robots, cfg.failures_enabled) == ("periodic", 75, 4, True)
    assert cfg.seed == 0  # None overrides are ignored


def test_unknown_key_and_bad_values(tmp_path):
    with pytest.raises(ConfigError):
        MissionConfig.from_mapping({"colour": "red"})
    for bad in [{"strategy": "greedy"}, {"n_robots": "0"}, {"alpha": "0.5"}, {"period": "0"},
                {"vis_threshold": "0"}, {"sensor_range": "-1"}, {"width": "10"},
                {"predictor": "crystal"}, {"ticks": "-1"}]:
        with pytest.raises(ConfigError):
            MissionConfig.from_mapping(bad)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.conf")


def test_derived_objects():
    cfg = MissionConfig(strategy="proid_safe", weibull_lambda=900, weibull_k=2.0, alpha=1.5)
    s = cfg.relay_strategy()
    assert s.weibull.lam == 900 and s.weibull.k == 2.0 and s.alpha == 1.5
    assert MissionConfig(strategy="proid").relay_strategy().weibull is None
    assert cfg.predictor_kind() == PredictorKind.oracle(8.0, 0.05)
    assert MissionConfig(predictor="null").predictor_kind() == PredictorKind.null()


def test_round_trip_dict():
    cfg = MissionConfig(strategy="final_only", handoff=False)
    assert MissionConfig.from_mapping({k: str(v) for k, v in cfg.to_dict().items()
                                       if v is not None}) == cfg
    assert cfg.replace(seed=9).seed == 9 and cfg.seed == 0
