"""End-to-end tests for the command line interface."""

import csv
import json
from pathlib import Path

import pytest

from dtdmn.cli import main
from dtdmn.manifest import read_manifest

DATA = Path(__file__).parent / "data"

# small model settings shared by every training command in this file
TINY = [
    "--set", "num_topics=3", "--set", "num_discourse=2",
    "--set", "hidden_size=8", "--set", "memory_embedding=8",
    "--set", "word_embedding=8", "--set", "factor_hidden=7",
    "--set", "max_len=20", "--set", "batch_size=8",
    "--set", "max_epochs=2", "--set", "patience=2",
]


def run(argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    """Synthesize a small corpus and build it once for the whole module."""
    root = tmp_path_factory.mktemp("cli")
    synth, built = root / "synth", root / "corpus"
    assert run(["synthesize", "--moots", 6, "--out", synth, "--seed", 5, "--quiet"]) == 0
    assert run(["build-corpus", "--input", synth / "posts.jsonl",
                "--min-count", 2, "--out", built, "--seed", 5, "--quiet"]) == 0
    return built


@pytest.fixture(scope="module")
def model_dir(corpus_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("model")
    args = ["train", "--pairs", corpus_dir / "pairs.jsonl",
            "--vocab", corpus_dir / "vocab.txt", "--out", out,
            "--seed", 3, "--quiet"] + TINY
    assert run(args) == 0
    return out


def test_synthesize_outputs_and_rerun_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert run(["synthesize", "--moots", 3, "--out", out, "--seed", 7, "--quiet"]) == 0
    for name in ("posts.jsonl", "truth.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    record = read_manifest(a / "manifest.json")
    assert record["command"] == "synthesize"
    assert record["seed"] == 7
    assert record["outputs"] == read_manifest(b / "manifest.json")["outputs"]
    assert record["config"]["moots"] == 3


def test_build_corpus_matches_golden_fixture(tmp_path):
    out = tmp_path / "built"
    assert run(["build-corpus", "--input", DATA / "mini_posts.jsonl",
                "--min-count", 1, "--out", out, "--seed", 13, "--quiet"]) == 0
    for name in ("vocab.txt", "pairs.jsonl", "stats.json"):
        assert (out / name).read_bytes() == (DATA / "golden_mini" / name).read_bytes()
    # hand-enumerated expectations behind those bytes
    record = json.loads((out / "pairs.jsonl").read_text())
    assert record["pair_id"] == "fix1/a2|fix1/b2"
    assert record["split"] == "train"
    assert record["positive_conv"]["label"] is True
    assert record["negative_conv"]["label"] is False
    vocab_lines = (out / "vocab.txt").read_text().splitlines()
    assert len(vocab_lines) == 33
    assert vocab_lines[:5] == ["<pad>", "<unk>", "<quote>", "<digit>", "<url>"]
    assert vocab_lines[17] == "the"
    stats = json.loads((out / "stats.json").read_text())
    assert stats["pairs"] == 1 and stats["turns"] == 4
    assert stats["avg_words_per_turn"] == 51.0


def test_build_corpus_malformed_input_names_line(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"post_id":"p1","parent_id":null,"moot_id":"m",'
                   '"author":"a","body":"hi"}\n')
    assert run(["build-corpus", "--input", bad, "--out", tmp_path / "out"]) == 1
    err = capsys.readouterr().err
    assert "error" in err and "bad.jsonl:1" in err and "delta" in err


def test_build_corpus_empty_input(tmp_path, capsys):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    out = tmp_path / "out"
    with pytest.warns(UserWarning, match="vocabulary is empty"):
        assert run(["build-corpus", "--input", empty, "--out", out]) == 0
    assert "no pairs" in capsys.readouterr().err
    assert (out / "pairs.jsonl").read_text() == ""
    assert len((out / "vocab.txt").read_text().splitlines()) == 5
    assert json.loads((out / "stats.json").read_text())["pairs"] == 0


def test_train_writes_artifacts(model_dir):
    for name in ("model.npz", "training_log.csv", "config.txt", "manifest.json"):
        assert (model_dir / name).exists()
    config_lines = (model_dir / "config.txt").read_text().splitlines()
    values = dict(line.split(" = ") for line in config_lines)
    assert values["num_topics"] == "3"
    assert values["seed"] == "3"
    assert values["variant"] == "full"
    with open(model_dir / "training_log.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2
    record = read_manifest(model_dir / "manifest.json")
    assert set(record["outputs"]) == {"model.npz", "training_log.csv", "config.txt"}


def test_eval_writes_metrics_and_predictions(corpus_dir, model_dir, tmp_path):
    outs = []
    for name in ("e1", "e2"):
        out = tmp_path / name
        assert run(["eval", "--model", model_dir / "model.npz",
                    "--pairs", corpus_dir / "pairs.jsonl",
                    "--vocab", corpus_dir / "vocab.txt",
                    "--split", "test", "--out", out, "--quiet"]) == 0
        outs.append(out)
    with open(outs[0] / "metrics.csv") as fh:
        row = next(csv.DictReader(fh))
    assert row["variant"] == "full"
    assert 0.0 <= float(row["accuracy"]) <= 1.0
    assert int(row["n_pairs"]) > 0
    preds = [json.loads(l) for l in (outs[0] / "predictions.jsonl").read_text().splitlines()]
    assert len(preds) == int(row["n_pairs"])
    assert all(p["predicted_winner"] in (p["first"], p["second"]) for p in preds)
    # rerun is byte-identical apart from the manifest
    assert (outs[0] / "metrics.csv").read_bytes() == (outs[1] / "metrics.csv").read_bytes()
    assert ((outs[0] / "predictions.jsonl").read_bytes()
            == (outs[1] / "predictions.jsonl").read_bytes())


def test_eval_seed_changes_presentation(corpus_dir, model_dir, tmp_path):
    outs = []
    for seed in (1, 2):
        out = tmp_path / f"s{seed}"
        assert run(["eval", "--model", model_dir / "model.npz",
                    "--pairs", corpus_dir / "pairs.jsonl",
                    "--vocab", corpus_dir / "vocab.txt",
                    "--seed", seed, "--out", out, "--quiet"]) == 0
        outs.append((out / "predictions.jsonl").read_text())
    firsts = [[json.loads(l)["first"] for l in text.splitlines()] for text in outs]
    assert firsts[0] != firsts[1]


def test_interpret_writes_artifacts(corpus_dir, model_dir, tmp_path):
    out = tmp_path / "interp"
    assert run(["interpret", "--model", model_dir / "model.npz",
                "--pairs", corpus_dir / "pairs.jsonl",
                "--vocab", corpus_dir / "vocab.txt",
                "--split", "test", "--top-words", 5, "--out", out, "--quiet"]) == 0
    report = json.loads((out / "top_words.json").read_text())
    assert len(report["topics"]) == 3 and len(report["discourse"]) == 2
    assert all(len(words) == 5 for words in report["topics"])
    assignment = json.loads((out / "assignment_map.json").read_text())
    assert all(v["source"] in ("topic", "discourse") for v in assignment.values())
    with open(out / "topic_histogram.csv") as fh:
        hist = list(csv.DictReader(fh))
    assert {r["side"] for r in hist} == {"negative", "positive"}
    with open(out / "discourse_effect.csv") as fh:
        effects = list(csv.DictReader(fh))
    assert {r["factor_id"] for r in effects} == {"0", "1"}


def test_ablate_writes_variant_metrics(corpus_dir, tmp_path):
    out = tmp_path / "ablate"
    args = ["ablate", "--pairs", corpus_dir / "pairs.jsonl",
            "--vocab", corpus_dir / "vocab.txt", "--out", out,
            "--variants", "full,no_memory", "--seed", 3, "--quiet"] + TINY
    args[args.index("max_epochs=2")] = "max_epochs=1"
    assert run(args) == 0
    with open(out / "metrics.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["variant"] for r in rows] == ["full", "no_memory", "lr_tfidf"]
    assert (out / "model_full.npz").exists()
    assert (out / "model_no_memory.npz").exists()
    assert float(rows[2]["accuracy"]) > 0.0


def test_grid_search_writes_grid(corpus_dir, tmp_path):
    out = tmp_path / "grid"
    args = ["grid-search", "--pairs", corpus_dir / "pairs.jsonl",
            "--vocab", corpus_dir / "vocab.txt", "--out", out,
            "--topics", "2,3", "--seed", 3, "--quiet"] + TINY
    args[args.index("max_epochs=2")] = "max_epochs=1"
    assert run(args) == 0
    with open(out / "grid.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["num_topics"] for r in rows] == ["2", "3"]
    assert all(0.0 <= float(r["val_accuracy"]) <= 1.0 for r in rows)


def test_config_file_and_override_precedence(corpus_dir, tmp_path):
    config = tmp_path / "conf.txt"
    config.write_text("num_topics = 4\nmax_epochs = 1\nbatch_size = 8\n"
                      "hidden_size = 8\nmemory_embedding = 8\nword_embedding = 8\n"
                      "factor_hidden = 7\nmax_len = 20\nnum_discourse = 2\n")
    out = tmp_path / "train"
    assert run(["train", "--pairs", corpus_dir / "pairs.jsonl",
                "--vocab", corpus_dir / "vocab.txt", "--out", out,
                "--config", config, "--set", "num_topics=2",
                "--variant", "no_discourse", "--seed", 9, "--quiet"]) == 0
    values = dict(line.split(" = ")
                  for line in (out / "config.txt").read_text().splitlines())
    assert values["num_topics"] == "2"  # --set beats the file
    assert values["variant"] == "no_discourse"
    assert values["seed"] == "9"
    assert values["max_epochs"] == "1"


def test_bad_override_and_bad_variant(tmp_path, capsys, corpus_dir):
    base = ["train", "--pairs", corpus_dir / "pairs.jsonl",
            "--vocab", corpus_dir / "vocab.txt", "--out", tmp_path / "x"]
    assert run(base + ["--set", "nope=3"]) == 1
    assert "nope" in capsys.readouterr().err
    assert run(base + ["--set", "num_topics=abc"]) == 1
    assert "num_topics" in capsys.readouterr().err
    args = ["ablate", "--pairs", corpus_dir / "pairs.jsonl",
            "--vocab", corpus_dir / "vocab.txt", "--out", tmp_path / "y",
            "--variants", "full,bogus"]
    assert run(args) == 1
    assert "bogus" in capsys.readouterr().err


def test_missing_file_is_reported(tmp_path, capsys):
    assert run(["eval", "--model", tmp_path / "nope.npz",
                "--pairs", tmp_path / "nope.jsonl",
                "--vocab", tmp_path / "nope.txt",
                "--out", tmp_path / "out"]) == 1
    assert "nope.npz" in capsys.readouterr().err
