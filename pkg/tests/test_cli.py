from __future__ import annotations

import hashlib
import json
from pathlib import Path

import pytest

from spectral_shift.cli import main
from spectral_shift.measures import PARRY_CONVENTION

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write_config(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc), encoding="utf-8")
    return str(p)


GOLDEN = {"type": "sft", "edges": [["a", 0, 0], ["b", 0, 1], ["c", 1, 0]]}


def test_lang_csv_has_header_and_lf(tmp_path):
    out = tmp_path / "lang.csv"
    assert main(["lang", "--config", str(CONFIGS / "golden_mean.json"), "--max-level", "4", "--out", str(out)]) == 0
    raw = out.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    assert lines[0].startswith("level") or "word" in lines[0]
    assert len(lines) == 1 + sum([1, 3, 5, 8, 13])


def test_lang_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    cfg = str(CONFIGS / "sturmian_fibonacci.json")
    main(["lang", "--config", cfg, "--max-level", "10", "--out", str(a)])
    main(["lang", "--config", cfg, "--max-level", "10", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_measure_json(tmp_path, capsys):
    assert main(["measure", "--config", str(CONFIGS / "bernoulli.json"), "--max-level", "2", "--format", "json"]) == 0
    recs = json.loads(capsys.readouterr().out)
    assert sum(r["mu"] for r in recs if r["level"] == 2) == pytest.approx(1.0)


def test_dirac_entries(tmp_path, capsys):
    cfg = write_config(tmp_path, {"subshift": {"type": "sft", "edges": [["0", 0, 0], ["1", 0, 0]]}, "N": 2})
    assert main(["dirac", "--config", cfg, "--format", "json"]) == 0
    recs = json.loads(capsys.readouterr().out)
    assert sum(r["entry"] for r in recs if r["row"] == r["col"]) == pytest.approx(0 + 1 + 2 + 2)


def test_commutator_summary(tmp_path, capsys):
    cfg = write_config(tmp_path, {"subshift": {"type": "sft", "edges": [["0", 0, 0], ["1", 0, 0]]}, "N": 2})
    assert main(["commutator", "--config", cfg, "--function", "xi:0", "--N", "1"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["lip"] == pytest.approx(0.5)
    assert doc["measure_convention"] == PARRY_CONVENTION and len(doc["config_sha256"]) == 64


def test_summability_command(capsys):
    assert main(["summability", "--config", str(CONFIGS / "golden_mean.json"), "--s", "0.681212", "--N", "60"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["verdict"] == {"0.681212": "converging"}


def test_experiment_writes_artifacts_with_provenance(tmp_path, capsys):
    cfg = str(CONFIGS / "sturmian_witness.json")
    assert main(["experiment", "--config", cfg, "--out-dir", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "sturmian_witness.json").read_text())
    assert doc["verdict"] == "unbounded"
    assert doc["measure_convention"] == PARRY_CONVENTION
    canon = json.dumps(json.loads(Path(cfg).read_text()), sort_keys=True, separators=(",", ":"))
    assert doc["config_sha256"] == hashlib.sha256(canon.encode()).hexdigest()
    assert b"\r\n" not in (tmp_path / "sturmian_witness.csv").read_bytes()


def test_run_is_byte_identical_across_thread_counts(tmp_path, capsys):
    cfg = write_config(
        tmp_path,
        {"subshift": GOLDEN, "N": 5, "experiments": [{"name": "complexity", "N": 12}, {"name": "commutant"}, {"name": "du_norm", "N_max": 3}]},
    )
    one, many = tmp_path / "one", tmp_path / "many"
    assert main(["run", "--config", cfg, "--out-dir", str(one)]) == 0
    out1 = capsys.readouterr().out
    assert main(["--threads", "3", "run", "--config", cfg, "--out-dir", str(many)]) == 0
    out2 = capsys.readouterr().out
    assert out1 == out2
    for f in sorted(p.name for p in one.iterdir()):
        assert (one / f).read_bytes() == (many / f).read_bytes()


def test_verify_passes_and_detects_perturbation(tmp_path, capsys):
    cfg = str(CONFIGS / "bernoulli.json")
    assert main(["verify", "--config", cfg]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["failed"] == 0 and doc["passed"] >= 10
    assert main(["verify", "--config", cfg, "--perturb-mu", "01:1e-3"]) == 4
    captured = capsys.readouterr()
    failed = {r["name"] for r in json.loads(captured.out)["invariants"] if r["status"] == "fail"}
    assert {"total_mass", "additivity"} <= failed
    assert "FAIL" in captured.err


def test_verify_sturmian(capsys):
    assert main(["verify", "--config", str(CONFIGS / "sturmian_fibonacci.json")]) == 0


@pytest.mark.parametrize(
    "doc,needle",
    [
        ({"subshift": GOLDEN, "alpha": [0, 2, 1, 3, 4, 5, 6]}, "strictly increasing"),
        ({"subshift": {"type": "sft", "vertices": [0]}}, "malformed"),
        ({"subshift": GOLDEN, "N": 1}, "N must be"),
        ({"subshift": GOLDEN, "colour": 1}, "unknown config keys"),
        ({"subshift": {"type": "sturmian", "partial_quotients": [1, 0, 2]}}, "positive"),
    ],
)
def test_invalid_input_exit_code(tmp_path, capsys, doc, needle):
    assert main(["lang", "--config", write_config(tmp_path, doc)]) == 2
    assert needle in capsys.readouterr().err


def test_bad_json_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{not json", encoding="utf-8")
    assert main(["lang", "--config", str(p)]) == 2
    assert main(["lang", "--config", str(tmp_path / "missing.json")]) == 2


def test_precision_exit_code(tmp_path, capsys):
    cfg = write_config(tmp_path, {"subshift": {"type": "sturmian", "partial_quotients": [1, 1, 1]}, "N": 6})
    assert main(["lang", "--config", cfg]) == 3
    assert "error:" in capsys.readouterr().err


def test_bad_perturbation_spec(capsys):
    assert main(["verify", "--config", str(CONFIGS / "bernoulli.json"), "--perturb-mu", "01"]) == 2
