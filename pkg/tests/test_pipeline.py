import hashlib
import time

import pytest

from conftest import write_synthetic_cleveland
from hybridml.cli import main
from hybridml.config import parse_config
from hybridml.pipeline import OutputDir, PipelineError, run_all, run_stages

TINY = """
[data]
path = {path}
[split]
resplits = 2
[bnn]
epochs = 100
n_mc = 50
[rf]
n_trees = 10
[gb]
n_stages = 10
[stacking]
k = 3
epochs = 500
[mi]
permutations = 99
[bo]
budget = 5
seeds = 1
[restart]
trials = 30
"""

TABLES = ("fig1_generalization_error.csv", "fig2_meta_loss.csv",
          "fig3_information_gain.csv", "fig4_ei_trace.csv")


@pytest.fixture
def tiny_config(tmp_path):
    data = write_synthetic_cleveland(tmp_path / "tiny.data")
    ini = tmp_path / "tiny.ini"
    ini.write_text(TINY.format(path=data))
    return ini


def _manifest(root):
    lines = (root / "MANIFEST").read_text().splitlines()
    return lines[0], dict(reversed(l.split("  ", 1)) for l in lines if not l.startswith("#"))


def test_tiny_run_all(tiny_config, tmp_path):
    out = tmp_path / "out"
    cfg = parse_config(tiny_config.read_text()).with_overrides(out=out)
    t0 = time.perf_counter()
    run_all(cfg)
    assert time.perf_counter() - t0 < 10
    for t in TABLES:
        assert len((out / t).read_text().splitlines()) > 1
    for k in ("fig1", "fig2", "fig3", "fig4"):
        assert (out / "plots" / f"{k}.svg").is_file()
    head, entries = _manifest(out)
    assert head == "# complete: true"
    for rel, digest in entries.items():
        assert hashlib.sha256((out / rel).read_bytes()).hexdigest() == digest
    assert set(entries) == {p.relative_to(out).as_posix() for p in out.rglob("*")
                            if p.is_file() and p.name != "MANIFEST"}


def test_tiny_run_is_byte_identical(tiny_config, tmp_path):
    cfg = parse_config(tiny_config.read_text())
    run_all(cfg.with_overrides(out=tmp_path / "a"))
    run_all(cfg.with_overrides(out=tmp_path / "b"))
    for p in (tmp_path / "a").rglob("*.csv"):
        assert p.read_bytes() == (tmp_path / "b" / p.relative_to(tmp_path / "a")).read_bytes()


def test_failure_is_stage_qualified(tiny_config, tmp_path):
    cfg = parse_config(tiny_config.read_text() + "\n[run]\nout = " + str(tmp_path / "o") + "\n")
    cfg.values["stacking"]["k"] = 50
    with pytest.raises(PipelineError, match="^stack:"):
        run_stages(cfg, ["ingest", "stack"])
    head, entries = _manifest(tmp_path / "o")
    assert head == "# complete: false"
    assert "data/split.txt" in entries


def test_output_dir_confinement(tmp_path):
    out = OutputDir(tmp_path / "o")
    with pytest.raises(PipelineError, match="outside"):
        out.write("../escape.txt", "x")


def test_cli_describe_and_errors(tiny_config, tmp_path, capsys):
    assert main(["describe", "--config", str(tiny_config)]) == 0
    assert "BNN, RF, GB, SVM" in capsys.readouterr().out
    bad = tmp_path / "bad.ini"
    bad.write_text("[bnn]\nhidden = -1\n")
    assert main(["describe", "--config", str(bad)]) == 2
    assert "bnn.hidden" in capsys.readouterr().err
    assert main(["train", "--seed", "-1"]) == 2


def test_cli_stage_and_report(tiny_config, tmp_path):
    out = tmp_path / "cli"
    assert main(["ensemble", "--config", str(tiny_config), "--out", str(out), "--seed", "3"]) == 0
    assert (out / "fig1_generalization_error.csv").is_file()
    assert (out / "models" / "bnn.txt").read_text().startswith("# hybridml-model v1")
    (out / "plots" / "fig1.svg").unlink()
    assert main(["report", "--config", str(tiny_config), "--out", str(out)]) == 0
    assert (out / "plots" / "fig1.svg").is_file()


def test_cli_default_config_printout(capsys):
    assert main(["--print-default-config"]) == 0
    text = capsys.readouterr().out
    assert parse_config(text).values == parse_config("").values
