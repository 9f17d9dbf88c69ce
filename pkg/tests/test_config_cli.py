import json

import pytest

from asem import classifier, synthetic
from asem.cli import main
from asem.config import PipelineConfig, dump_config, load_config
from asem.errors import ConfigError, Diverged

SMALL = """\
[paths]
in_domain = in_domain.txt
bank = bank.txt
test = test.tsv
seeds = seeds.ini
pos_lexicon = pos_lexicon.txt
output_dir = out

[embedding]
dim = 16
epochs = 3

[sec]
gamma = 0

[retrieval]
k = 3

[classifier]
epochs = 2
hidden = 8
context_dim = 4
"""


@pytest.fixture(scope="module")
def small_data(tmp_path_factory):
    out = tmp_path_factory.mktemp("small")
    synthetic.generate(out, synthetic.SyntheticConfig(n_in_domain=60, n_bank=150, n_test=40))
    (out / "small.ini").write_text(SMALL, encoding="utf-8")
    return out


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    import os
    for name in list(os.environ):
        if name.startswith("ASEM_"):
            monkeypatch.delenv(name)


def test_defaults():
    cfg = load_config(env={})
    assert (cfg.embedding.dim, cfg.embedding.epochs, cfg.embedding.window, cfg.embedding.negatives) == (200, 10, 10, 5)
    assert cfg.pseudolabel.m == 2
    assert (cfg.classifier.lambda_acd, cfg.classifier.lambda_ate, cfg.classifier.lambda_atp) == (1.0, 0.8, 0.6)
    cfg.validate(check_paths=False)


def test_env_overrides_and_relative_paths(small_data):
    cfg = load_config(small_data / "small.ini", env={"ASEM_SEC__GAMMA": "12.5", "ASEM_SEC__ENABLED": "no",
                                                     "OTHER_THING": "x", "ASEM_NOSEP": "1"})
    assert cfg.sec.gamma == 12.5 and cfg.sec.enabled is False
    assert cfg.embedding.dim == 16
    assert cfg.paths.seeds == str(small_data / "seeds.ini")
    cfg.validate()


@pytest.mark.parametrize("env", [{"ASEM_SEC__GAMMA": "lots"}, {"ASEM_NOPE__X": "1"}, {"ASEM_SEC__NOPE": "1"},
                                 {"ASEM_SEC__ENABLED": "maybe"}])
def test_bad_overrides(env):
    with pytest.raises(ConfigError):
        load_config(env=env)


@pytest.mark.parametrize("section,key,value", [
    ("corpus", "split_ratio", 1.0), ("sec", "gamma", -1.0), ("retrieval", "k", -1), ("pseudolabel", "m", -1),
    ("embedding", "dim", 0), ("classifier", "lambda_acd", -1.0), ("classifier", "token_norm", "max"),
])
def test_validation_rejects(section, key, value):
    cfg = PipelineConfig()
    setattr(getattr(cfg, section), key, value)
    with pytest.raises(ConfigError):
        cfg.validate(check_paths=False)


def test_validation_checks_paths(small_data, tmp_path):
    cfg = load_config(small_data / "small.ini", env={})
    cfg.paths.bank = str(tmp_path / "missing.txt")
    with pytest.raises(ConfigError):
        cfg.validate()
    cfg.retrieval.k = 0  # no bank needed without augmentation
    cfg.paths.bank = ""
    cfg.validate()


def test_dump_and_reload(tmp_path):
    cfg = PipelineConfig()
    cfg.sec.gamma = 7.0
    cfg.paths.output_dir = str(tmp_path / "o")
    dump_config(cfg, tmp_path / "c.ini")
    assert load_config(tmp_path / "c.ini", env={}).to_dict() == cfg.to_dict()


def _run(args, capsys):
    code = main(args)
    return code, capsys.readouterr()


def test_cli_pipeline_success(small_data, tmp_path, capsys):
    code, out = _run(["pipeline", "-c", str(small_data / "small.ini"), "--output-dir", str(tmp_path)], capsys)
    assert code == 0, out.err
    assert "acd" in out.out and "accuracy" in out.out
    report = json.loads((tmp_path / "report.json").read_text())
    assert 0 <= report["metrics"]["test"]["acd"]["accuracy"] <= 1
    assert (tmp_path / "report.txt").exists()


def test_cli_single_stage(small_data, tmp_path, capsys):
    code, out = _run(["pseudo-label", "-c", str(small_data / "small.ini"), "--output-dir", str(tmp_path)], capsys)
    assert code == 0
    assert "pseudo-label" in out.out
    assert list((tmp_path / "pseudo-label").glob("*/initial.tsv"))
    assert not (tmp_path / "train").exists()


def test_cli_config_error(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[sec]\ngamma = banana\n", encoding="utf-8")
    code, out = _run(["pipeline", "-c", str(bad)], capsys)
    assert code == 1 and "config error" in out.err
    code, _ = _run(["pipeline", "-c", str(tmp_path / "missing.ini")], capsys)
    assert code == 1


def test_cli_unknown_encoder_is_config_error(small_data, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("ASEM_RETRIEVAL__ENCODER", "no-such-encoder")
    code, _ = _run(["pipeline", "-c", str(small_data / "small.ini"), "--output-dir", str(tmp_path)], capsys)
    assert code == 1


def test_cli_data_error(small_data, tmp_path, capsys):
    for name in ("in_domain.txt", "bank.txt", "seeds.ini", "pos_lexicon.txt", "small.ini"):
        (tmp_path / name).write_bytes((small_data / name).read_bytes())
    (tmp_path / "test.tsv").write_text("the pizza\tfood\t1:9:pos\n", encoding="utf-8")
    code, out = _run(["pipeline", "-c", str(tmp_path / "small.ini")], capsys)
    assert code == 2 and "load" in out.err


def test_cli_stage_failure(small_data, tmp_path, monkeypatch, capsys):
    def diverge(*args, **kwargs):
        raise Diverged("non-finite loss in epoch 1")

    monkeypatch.setattr(classifier, "train", diverge)
    code, out = _run(["pipeline", "-c", str(small_data / "small.ini"), "--output-dir", str(tmp_path)], capsys)
    assert code == 3 and "train" in out.err


def test_cli_seeds_reports_mean(small_data, tmp_path, capsys):
    code, out = _run(["pipeline", "-c", str(small_data / "small.ini"), "--output-dir", str(tmp_path),
                      "--seeds", "0,1"], capsys)
    assert code == 0
    summary = json.loads((tmp_path / "report.json").read_text())
    a = summary["runs"]["0"]["test"]["acd"]["accuracy"]
    b = summary["runs"]["1"]["test"]["acd"]["accuracy"]
    assert summary["metrics"]["test"]["acd"]["accuracy"] == pytest.approx((a + b) / 2)
    assert json.loads(out.out)["test"]["acd"]["accuracy"] == pytest.approx((a + b) / 2)
    code, _ = _run(["pipeline", "-c", str(small_data / "small.ini"), "--seeds", "x"], capsys)
    assert code == 1


def test_cli_gen_synthetic(tmp_path, capsys):
    code, out = _run(["gen-synthetic", "--out", str(tmp_path / "d"), "--n-in-domain", "10", "--n-bank", "20",
                      "--n-test", "5"], capsys)
    assert code == 0
    assert len((tmp_path / "d" / "test.tsv").read_text().splitlines()) == 5
    assert load_config(tmp_path / "d" / "config.ini", env={}).sec.gamma == 40.0
