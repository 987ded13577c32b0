import hashlib
import json
from pathlib import Path

import pytest

from repboot.cli import run

GOLDEN = Path(__file__).parent / "golden"
FAST = {"forest": {"n_outer": 2, "m_vertical": 1},
        "chain": {"k": 3, "n_hidden": 1, "train": {"epochs": 10, "learning_rate": 0.02}}}


@pytest.fixture
def work(tmp_path):
    (tmp_path / "cfg.json").write_text(json.dumps(FAST))
    return tmp_path


def _digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def test_help_exits_zero(capsys):
    assert run(["--help"]) == 0
    assert "generate" in capsys.readouterr().out
    for cmd in ("generate", "credibility", "train", "predict", "importance", "evaluate", "sweep"):
        assert run([cmd, "--help"]) == 0


def test_usage_errors_exit_two(capsys):
    assert run(["frobnicate"]) == 2
    assert run(["generate", "--out", "x.json", "--bogus"]) == 2
    assert "usage" in capsys.readouterr().err


def test_domain_error_exits_one(work, capsys):
    assert run(["train", str(work / "missing.json"), "--out", str(work / "m.json"),
                "--seed", "1"]) == 1
    err = capsys.readouterr().err.strip()
    assert err.startswith("error:") and "\n" not in err
    bad = work / "bad.json"
    bad.write_text('{"format_version": 1, "lvl_count": 3, "schema": {"indicators": []},'
                   ' "samples": [{"topology": {"services": [{"service_id": "a",'
                   ' "indicators": {"Provider/x": {"type_tag": "U", "rating": 0.1}}}],'
                   ' "edges": []}}]}')
    assert run(["evaluate", str(bad), "--seed", "1"]) == 1
    assert "Provider/x" in capsys.readouterr().err


def test_generate_twice_identical(work, capsys):
    args = ["--seed", "7", "generate", "--n", "12", "--services", "3"]
    assert run(args + ["--out", str(work / "a.json")]) == 0
    assert run(args + ["--out", str(work / "b.json")]) == 0
    assert _digest(work / "a.json") == _digest(work / "b.json")


def test_missing_seed_is_drawn_and_reported(work, capsys):
    assert run(["generate", "--n", "3", "--out", str(work / "c.json")]) == 0
    assert "seed:" in capsys.readouterr().err


def _diamond_model(work):
    corpus = work / "diamond.json"
    model = work / "diamond_model.json"
    assert run(["generate", "--seed", "3", "--n", "30", "--services", "4", "--pattern", "Hybrid",
                "--out", str(corpus)]) == 0
    assert run(["train", str(corpus), "--seed", "3", "--config", str(work / "cfg.json"),
                "--out", str(model)]) == 0
    return corpus, model


def test_predict_diamond_golden(work, capsys):
    corpus, model = _diamond_model(work)
    capsys.readouterr()
    before = _digest(corpus)
    assert run(["predict", str(model), str(corpus)]) == 0
    out = capsys.readouterr().out
    assert _digest(corpus) == before
    first = out.splitlines()[:5]
    for line in first:
        bp = line.rsplit(", ", 1)[1].rstrip(")")
        assert len(bp.split(".")[1]) == 4
    golden = (GOLDEN / "predict_diamond.txt").read_text().splitlines()
    assert first == golden


def test_predict_single_sample_document(work, capsys):
    corpus, model = _diamond_model(work)
    sample = json.loads(corpus.read_text())["samples"][0]
    (work / "one.json").write_text(json.dumps(sample))
    capsys.readouterr()
    assert run(["predict", str(model), str(work / "one.json"), "--json"]) == 0
    rows = json.loads(capsys.readouterr().out)["predictions"]
    assert len(rows) == 1 and 0 < rows[0]["bp"] <= 1


def test_credibility_command(work, capsys):
    graph = work / "g.json"
    graph.write_text(json.dumps({"raters": ["a", "b"], "endorsements": [
        {"from": "a", "to": "b", "weight": 1}, {"from": "b", "to": "a", "weight": 1}]}))
    assert run(["credibility", str(graph), "--json"]) == 0
    assert json.loads(capsys.readouterr().out) == {"credibility": {"a": 1.0, "b": 1.0}}


def _pipeline(work, tag):
    """Every subcommand once with --json; returns the concatenated stdout."""
    d = work / tag
    d.mkdir()
    cfg = str(work / "cfg.json")
    steps = [
        ["generate", "--n", "16", "--services", "3", "--out", str(d / "c.json")],
        ["train", str(d / "c.json"), "--config", cfg, "--out", str(d / "m.json")],
        ["train", str(d / "c.json"), "--config", cfg, "--method", "tfrb",
         "--out", str(d / "t.json")],
        ["predict", str(d / "m.json"), str(d / "c.json")],
        ["predict", str(d / "t.json"), str(d / "c.json")],
        ["importance", str(d / "c.json"), "--config", cfg],
        ["evaluate", str(d / "c.json"), "--config", cfg, "--k-folds", "2", "--histogram"],
        ["sweep", "--axis", "lvl_count", "--values", "3", "--methods", "tfrb,min",
         "--config", cfg, "--k-folds", "2", "--n", "10", "--services", "2"],
    ]
    for s in steps:
        assert run(s + ["--seed", "5", "--json"]) == 0
    return [_digest(d / f) for f in ("c.json", "m.json", "t.json")]


def test_pipeline_rerun_is_byte_identical(work, capsys):
    a = _pipeline(work, "one")
    out_a = capsys.readouterr().out.replace(str(work / "one"), "<dir>")
    b = _pipeline(work, "two")
    out_b = capsys.readouterr().out.replace(str(work / "two"), "<dir>")
    assert a == b
    assert out_a == out_b
    # every --json output is a parseable JSON document
    decoder = json.JSONDecoder()
    i = 0
    n_docs = 0
    while i < len(out_a):
        _, i = decoder.raw_decode(out_a, i)
        while i < len(out_a) and out_a[i].isspace():
            i += 1
        n_docs += 1
    assert n_docs == 8


def test_lvl_flag_mismatch(work, capsys):
    corpus, _ = _diamond_model(work)
    assert run(["importance", str(corpus), "--lvl", "3", "--seed", "1"]) == 1
