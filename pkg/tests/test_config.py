import pytest

from hybridml.config import ConfigError, default_config_text, load_config, parse_config
from hybridml.pipeline import describe


def test_defaults_roundtrip():
    cfg = parse_config(default_config_text())
    assert cfg.values == parse_config("").values


def test_learner_configs_follow_seed():
    cfg = parse_config("[run]\nseed = 7\n[rf]\nm_try = 0\n")
    lc = cfg.learner_configs(cfg.seed)
    assert set(lc) == {"BNN", "RF", "GB", "SVM"}
    assert lc["RF"].m_try is None and lc["GB"].seed == 7


@pytest.mark.parametrize("text,path", [
    ("[bnn]\nhidden = zero\n", "bnn.hidden"),
    ("[bnn]\nhidden = 0\n", "bnn.hidden"),
    ("[split]\ntrain = 0.5\n", "split.train"),
    ("[bo]\nbudget = 2\n", "bo.budget"),
    ("[bo]\npolicy = greedy\n", "bo.policy"),
    ("[bo]\ngb_depth_min = 5\n", "bo.gb_depth_min"),
    ("[svm]\nkernel = rbf\n", "svm.kernel"),
    ("[extra]\na = 1\n", "extra"),
    ("[data]\npath = /no/such/file\n", "data.path"),
    ("[ensemble]\nsimplex = maybe\n", "ensemble.simplex"),
])
def test_first_failure_names_key(text, path):
    with pytest.raises(ConfigError, match=path.replace(".", r"\.")):
        parse_config(text)


def test_syntax_error():
    with pytest.raises(ConfigError, match="syntax"):
        parse_config("no section header\n")


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.ini")


def test_describe_default_plan():
    text = describe(parse_config(""))
    for name in ("BNN", "RF", "GB", "SVM", "fig1", "fig2", "fig3", "fig4"):
        assert name in text


def test_describe_without_tuning():
    text = describe(parse_config("[bo]\nenabled = false\n"))
    assert "fig4" not in text and "tune" not in text


def test_overrides():
    cfg = parse_config("").with_overrides(seed=3, out="/tmp/x")
    assert cfg.seed == 3 and str(cfg.out) == "/tmp/x"
    assert parse_config("").seed == 0
