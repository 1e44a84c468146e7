import json

import pandas as pd
import pytest

from raresynth import schema as S
from raresynth.cli import main

GC_TOML = """
seed = 0
out = "run"

[data]
source = "fixture"
fixture_rows = 5000
fixture_rate = 0.02

[model]
kind = "GC"

[sample]
n = 300

[sweep]
sizes = [50, 100]
seeds = [0]
"""


def _config(tmp_path, text=GC_TOML, name="run.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _run(cfg, *args):
    return main([args[0], "--config", cfg, "--quiet", *args[1:]])


def test_missing_config_exits_1(tmp_path):
    assert _run(str(tmp_path / "absent.toml"), "train") == 1


@pytest.mark.parametrize("body", [
    'seed = 0\n[model]\nkind = "VAE"\n',
    'seed = 0\n[data]\nsource = "csv"\ninput = "nope.csv"\n',
    'seed = 0\n[evaluate]\ntest_fraction = 1.5\n',
    'seed = 0\n[sweep]\nsizes = [500, 100]\n',
    'seed = [\n',
])
def test_invalid_config_exits_1(tmp_path, body, capsys):
    assert _run(_config(tmp_path, body), "ingest") == 1
    assert "error:" in capsys.readouterr().err


def test_missing_inputs_exit_1(tmp_path):
    cfg = _config(tmp_path)
    assert _run(cfg, "sample") == 1
    assert _run(cfg, "evaluate") == 1
    assert _run(cfg, "report") == 1


def test_runtime_failure_exits_2(tmp_path):
    cfg = _config(tmp_path)
    (tmp_path / "run").mkdir()
    (tmp_path / "run" / "GC.rsyn").write_bytes(b"not a model")
    assert _run(cfg, "sample") == 2


def test_fixture_command(tmp_path):
    cfg = _config(tmp_path)
    assert _run(cfg, "fixture", "--n", "200", "--rate", "0.5") == 0
    raw = pd.read_csv(tmp_path / "run" / "fixture.csv")
    assert len(raw) == 200 and (raw[S.DIVERSION] == 1).sum() == 100
    first = (tmp_path / "run" / "fixture.csv").read_bytes()
    assert _run(cfg, "fixture", "--n", "200", "--rate", "0.5") == 0
    assert (tmp_path / "run" / "fixture.csv").read_bytes() == first


@pytest.fixture(scope="module")
def gc_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = _config(root)
    for cmd in ("ingest", "train", "sample", "evaluate", "sweep"):
        assert _run(cfg, cmd) == 0, cmd
    return root, cfg


def test_pipeline_outputs(gc_run):
    root, _ = gc_run
    out = root / "run"
    div = pd.read_csv(out / "diversions.csv")
    assert div.shape[1] == 14
    sampled = pd.read_csv(out / "sampled.csv")
    recon = pd.read_csv(out / "reconstructed.csv")
    cleaned = pd.read_csv(out / "cleaned.csv")
    assert sampled.shape == (300, 14) and list(sampled.columns) == S.GENERATION_COLUMNS
    assert recon.shape == (300, 31)
    assert cleaned.shape[1] == 31 and len(cleaned) <= 300
    rep = json.loads((out / "report.json").read_text())
    assert 0 <= rep["composite"] <= 1
    sweep = pd.read_csv(out / "sweep.csv")
    assert sweep["size"].tolist() == [50, 100]


def test_evaluate_identical_data(gc_run):
    root, cfg = gc_run
    out = root / "run"
    assert main(["evaluate", "--config", cfg, "--quiet", "--synthetic", str(out / "diversions.csv"),
                 "--out", str(root / "ident")]) == 0
    rep = json.loads((root / "ident" / "report.json").read_text())
    assert 0.75 <= rep["composite"] <= 1


def test_report_charts(gc_run):
    root, cfg = gc_run
    assert _run(cfg, "report") == 0
    for name in ("report.svg", "sweep.svg"):
        assert (root / "run" / name).read_text().startswith("<?xml")


def test_rerun_is_byte_identical(gc_run, tmp_path):
    root, _ = gc_run
    cfg = _config(tmp_path)
    for cmd in ("ingest", "train", "sample", "evaluate", "sweep"):
        assert _run(cfg, cmd) == 0
    for name in ("diversions.csv", "GC.rsyn", "sampled.csv", "cleaned.csv", "report.json", "sweep.csv"):
        assert (tmp_path / "run" / name).read_bytes() == (root / "run" / name).read_bytes(), name


def test_seed_override_changes_output(gc_run, tmp_path):
    root, cfg = gc_run
    assert main(["sample", "--config", cfg, "--quiet", "--seed", "1", "--out", str(tmp_path),
                 "--model", str(root / "run" / "GC.rsyn")]) == 0
    assert (tmp_path / "sampled.csv").read_bytes() != (root / "run" / "sampled.csv").read_bytes()
