import json
from pathlib import Path

import numpy as np
import pytest
import yaml
from jsonschema import validate

from rtsalloc.cli import main, report_schema
from rtsalloc.data import SynthSpec, generate_synthetic, load_csv

ROOT = Path(__file__).resolve().parents[1]
CONSTANT_CFG = ROOT / "configs" / "constant.yaml"

SMALL_BENCH = {
    "seed": 7,
    "datasets": [
        {"name": "a", "synth": {"kind": "sinusoid-trend-noise", "length": 300, "period": 12, "noise_std": 0.4, "seed": 1}},
        {"name": "b", "synth": {"kind": "ar1-noise", "length": 300, "noise_std": 0.4, "seed": 2}},
    ],
    "train": {"M": 24, "H": 12, "epochs": 3, "learning_rate": 0.01, "batch_size": 16},
    "methods": ["predict-only", "rts-pno", "topk-risk:1"],
    "include_oracle": True,
}


def write_cfg(path, doc):
    path.write_text(yaml.safe_dump(doc))
    return path


def tree(path):
    return sorted(p.relative_to(path).as_posix() for p in path.rglob("*"))


def test_synth_constant(tmp_path, capsys):
    assert main(["synth", "--kind", "constant", "--amplitude", "5", "--length", "100", "--out", str(tmp_path)]) == 0
    path = Path(capsys.readouterr().out.strip())
    s = load_csv(path, "price")
    assert len(s) == 100 and set(s.values.tolist()) == {5.0}


def test_synth_roundtrip_and_determinism(tmp_path):
    args = ["synth", "--kind", "ar1-noise", "--noise-std", "0.7", "--length", "300", "--seed", "4", "--name", "s"]
    assert main(args + ["--out", str(tmp_path / "one")]) == 0
    assert main(args + ["--out", str(tmp_path / "two")]) == 0
    a, b = (tmp_path / "one" / "s.csv").read_bytes(), (tmp_path / "two" / "s.csv").read_bytes()
    assert a == b
    expected = generate_synthetic(SynthSpec(kind="ar1-noise", noise_std=0.7, length=300, seed=4))
    assert load_csv(tmp_path / "one" / "s.csv", "price").values.tobytes() == expected.values.tobytes()


def test_synth_invalid_spec(tmp_path, capsys):
    assert main(["synth", "--kind", "ar1-noise", "--ar-coefficient", "1.5", "--out", str(tmp_path)]) != 0
    assert "ar_coefficient" in capsys.readouterr().err
    assert tree(tmp_path) == []


def test_train_constant_fixture(tmp_path):
    assert main(["train", "--config", str(CONSTANT_CFG), "--out", str(tmp_path)]) == 0
    assert tree(tmp_path) == ["history.csv", "model.json", "policy.json"]
    rows = (tmp_path / "history.csv").read_text().splitlines()
    assert float(rows[-1].split(",")[1]) < 1e-6


def test_train_pno_history_has_mean_r(tmp_path):
    doc = dict(SMALL_BENCH, train=dict(SMALL_BENCH["train"], method="rts-pno", epochs=4))
    cfg = write_cfg(tmp_path / "c.yaml", doc)
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "out")]) == 0
    rows = (tmp_path / "out" / "history.csv").read_text().splitlines()
    assert rows[0].split(",")[-1] == "mean_r"
    assert len(rows) == 5 and all(r.split(",")[-1] for r in rows[1:])


def test_train_malformed_config(tmp_path, capsys):
    doc = dict(SMALL_BENCH, train=dict(SMALL_BENCH["train"], gamma=1.5))
    cfg = write_cfg(tmp_path / "c.yaml", doc)
    out = tmp_path / "out"
    assert main(["train", "--config", str(cfg), "--out", str(out)]) != 0
    assert "gamma" in capsys.readouterr().err
    assert not out.exists() or tree(out) == []


def test_unknown_config_key(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.yaml", dict(SMALL_BENCH, learning_rate=0.1))
    assert main(["bench", "--config", str(cfg), "--out", str(tmp_path / "o")]) != 0
    assert "learning_rate" in capsys.readouterr().err


def test_eval_with_oracle_deterministic(tmp_path):
    ck = tmp_path / "ck"
    doc = dict(SMALL_BENCH, train=dict(SMALL_BENCH["train"], method="rts-pno"))
    cfg = write_cfg(tmp_path / "c.yaml", doc)
    assert main(["train", "--config", str(cfg), "--out", str(ck)]) == 0
    args = ["eval", "--checkpoint", str(ck), "--config", str(cfg), "--methods", "policy,topk-forecast:1",
            "--include-oracle"]
    assert main(args + ["--out", str(tmp_path / "e1")]) == 0
    assert main(args + ["--out", str(tmp_path / "e2")]) == 0
    b1, b2 = (tmp_path / "e1" / "report.json").read_bytes(), (tmp_path / "e2" / "report.json").read_bytes()
    assert b1 == b2
    doc = json.loads(b1)
    validate(doc, report_schema())
    rows = {r["method"]: r for r in doc["reports"]}
    assert set(rows) == {"rts-pno", "topk-forecast:1", "oracle"}
    assert rows["oracle"]["regret"] == 0


def test_eval_from_csv(tmp_path):
    ck = tmp_path / "ck"
    assert main(["train", "--config", str(CONSTANT_CFG), "--out", str(ck)]) == 0
    assert main(["synth", "--kind", "constant", "--amplitude", "3", "--length", "80", "--name", "flat",
                 "--out", str(tmp_path)]) == 0
    assert main(["eval", "--checkpoint", str(ck), "--csv", str(tmp_path / "flat.csv"), "--out", str(tmp_path / "e")]) == 0
    doc = json.loads((tmp_path / "e" / "report.json").read_text())
    validate(doc, report_schema())
    assert doc["reports"][0]["regret"] == 0


def test_eval_missing_checkpoint(tmp_path, capsys):
    assert main(["eval", "--checkpoint", str(tmp_path / "nope"), "--config", str(CONSTANT_CFG),
                 "--out", str(tmp_path / "e")]) != 0
    assert capsys.readouterr().err.startswith("error:")


def test_bench_outputs_and_reproducible(tmp_path, monkeypatch):
    cfg = write_cfg(tmp_path / "c.yaml", SMALL_BENCH)
    work = tmp_path / "cwd"
    work.mkdir()
    monkeypatch.chdir(work)
    assert main(["bench", "--config", str(cfg), "--out", str(tmp_path / "b1")]) == 0
    assert main(["bench", "--config", str(cfg), "--out", str(tmp_path / "b2")]) == 0
    assert tree(work) == []
    files = ["grid.csv", "mean_r.csv", "per_slot_regret.csv", "rank_table.csv", "report.json"]
    assert tree(tmp_path / "b1") == files
    for name in files:
        assert (tmp_path / "b1" / name).read_bytes() == (tmp_path / "b2" / name).read_bytes()
    doc = json.loads((tmp_path / "b1" / "report.json").read_text())
    validate(doc, report_schema())
    assert {(r["dataset"], r["method"]) for r in doc["reports"]} == {
        (d, m) for d in ("a", "b") for m in ("predict-only", "rts-pno", "topk-risk:1", "oracle")
    }
    ranks = doc["rank_table"]["regret"]
    assert ranks["oracle"] == 1.0
    assert np.isclose(sum(ranks.values()), 1 + 2 + 3 + 4)
    mean_r = (tmp_path / "b1" / "mean_r.csv").read_text().splitlines()
    assert sum(1 for row in mean_r if ",rts-pno," in row) == 2 * 3


def test_bench_seed_override_changes_report(tmp_path):
    cfg = write_cfg(tmp_path / "c.yaml", SMALL_BENCH)
    assert main(["bench", "--config", str(cfg), "--out", str(tmp_path / "b1")]) == 0
    assert main(["bench", "--config", str(cfg), "--out", str(tmp_path / "b2"), "--seed", "8"]) == 0
    assert (tmp_path / "b1" / "report.json").read_bytes() != (tmp_path / "b2" / "report.json").read_bytes()


def test_bench_needs_two_methods(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.yaml", dict(SMALL_BENCH, methods=["predict-only"], include_oracle=False))
    assert main(["bench", "--config", str(cfg), "--out", str(tmp_path / "o")]) != 0
    assert "methods" in capsys.readouterr().err


@pytest.mark.parametrize("path", sorted((ROOT / "configs").glob("*.yaml")))
def test_bundled_configs_parse(path):
    from rtsalloc.config import load_config

    cfg = load_config(path)
    assert cfg.methods
