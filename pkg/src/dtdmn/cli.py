"""Command line interface.

One executable, ``dtdmn``, with a subcommand per pipeline stage:

* ``synthesize``: generate a synthetic debate corpus with known structure
* ``build-corpus``: posts or transcripts -> vocabulary + paired dataset
* ``train``: fit one model on a paired dataset
* ``eval``: score a trained model on one split
* ``interpret``: factor and memory interpretation artifacts
* ``ablate``: train and compare addressing variants plus a linear baseline
* ``grid-search``: validation sweep over topic counts

Every command writes its artifacts into ``--out`` together with a
``manifest.json`` recording arguments, seed, and content digests.
Reruns with the same inputs and seed reproduce every artifact
byte-for-byte except the manifest timestamp and wall-clock columns.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import analysis, corpus, manifest, synthetic, trainer
from . import model as M
from .config import ModelConfig, VARIANTS, parse_config_file, parse_override, write_config_file


def _warn(message: str) -> None:
    print(f"dtdmn: warning: {message}", file=sys.stderr)


def _say(args, message: str) -> None:
    if not args.quiet:
        print(message)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest_args(args) -> dict:
    skip = {"func", "quiet"}
    return {k: v for k, v in vars(args).items() if k not in skip}


def _resolve_config(args, vocab_size: int) -> ModelConfig:
    values: dict = {}
    if getattr(args, "config", None):
        values.update(parse_config_file(args.config))
    for item in getattr(args, "set", None) or []:
        key, value = parse_override(item)
        values[key] = value
    if getattr(args, "variant", None):
        values["variant"] = args.variant
    if args.seed is not None:
        values["seed"] = args.seed
    values["vocab_size"] = vocab_size
    return ModelConfig(**values)


def _load_dataset(args, max_len: int) -> tuple[corpus.Vocabulary, corpus.DatasetSplit]:
    vocab = corpus.Vocabulary.load(args.vocab)
    split = corpus.load_pairs_jsonl(args.pairs, vocab, max_len)
    return vocab, split


def _pick_split(split: corpus.DatasetSplit, name: str) -> list[corpus.ConversationPair]:
    if name == "all":
        return split.all_pairs()
    return getattr(split, name)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_synthesize(args) -> int:
    out = _out_dir(args)
    seed = args.seed if args.seed is not None else 13
    config = synthetic.SynthConfig(moots=args.moots, clusters=args.clusters,
                                   permute_labels=args.permute_labels)
    posts, truth = synthetic.generate(config, seed)
    posts_path, truth_path = out / "posts.jsonl", out / "truth.json"
    synthetic.write_posts_jsonl(posts, posts_path)
    synthetic.write_truth_json(truth, truth_path)
    manifest.write_manifest(out, "synthesize", _manifest_args(args), seed,
                            inputs=[], outputs=[posts_path, truth_path],
                            config=dataclasses.asdict(config))
    _say(args, f"wrote {len(posts)} posts across {config.moots} moots to {posts_path}")
    return 0


def cmd_build_corpus(args) -> int:
    out = _out_dir(args)
    seed = args.seed if args.seed is not None else 13
    if args.format == "cmv":
        posts = corpus.read_posts_jsonl(args.input)
        conversations = corpus.flatten_forest(posts)
    else:
        cases = corpus.read_court_jsonl(args.input)
        conversations = []
        for case_id in sorted(cases):
            conversations.extend(corpus.court_conversations(case_id, cases[case_id]))
    pairs = corpus.build_pairs(conversations, jaccard_threshold=args.jaccard)
    if not pairs:
        _warn("no pairs could be built from the input; writing empty outputs")
    split = corpus.split_dataset(pairs, seed=seed)
    vocab = corpus.build_vocabulary(corpus.training_token_lists(split),
                                    min_count=args.min_count)

    vocab_path, pairs_path, stats_path = out / "vocab.txt", out / "pairs.jsonl", out / "stats.json"
    vocab.save(vocab_path)
    corpus.write_pairs_jsonl(pairs_path, split, vocab)
    stats = corpus.corpus_stats(conversations, vocab, pairs)
    stats.update(train_pairs=len(split.train), val_pairs=len(split.val),
                 test_pairs=len(split.test))
    stats_path.write_text(json.dumps(stats, sort_keys=True, indent=2) + "\n")
    manifest.write_manifest(out, "build-corpus", _manifest_args(args), seed,
                            inputs=[args.input],
                            outputs=[vocab_path, pairs_path, stats_path])
    _say(args, f"{stats['conversations']} conversations, {stats['pairs']} pairs "
               f"(train {len(split.train)} / val {len(split.val)} / test {len(split.test)}), "
               f"vocabulary {stats['vocab_size']}")
    return 0


def cmd_train(args) -> int:
    out = _out_dir(args)
    vocab = corpus.Vocabulary.load(args.vocab)
    config = _resolve_config(args, vocab_size=len(vocab))
    split = corpus.load_pairs_jsonl(args.pairs, vocab, config.max_len)
    if not split.train:
        _warn("training split is empty; saving the untrained model")
    model = M.Model.create(config)
    log_path = out / "training_log.csv"
    result = trainer.train_model(model, split, quiet=args.quiet, log_path=log_path)
    model_path, config_path = out / "model.npz", out / "config.txt"
    M.save_model(model, model_path)
    write_config_file(config_path, config)
    manifest.write_manifest(out, "train", _manifest_args(args), config.seed,
                            inputs=[args.pairs, args.vocab],
                            outputs=[model_path, log_path, config_path],
                            config=dataclasses.asdict(config))
    _say(args, f"best epoch {result.best_epoch}, "
               f"val accuracy {result.best_val_accuracy:.4f}, saved {model_path}")
    return 0


def cmd_eval(args) -> int:
    out = _out_dir(args)
    model = M.load_model(args.model)
    seed = args.seed if args.seed is not None else model.config.seed
    vocab, split = _load_dataset(args, model.config.max_len)
    pairs = _pick_split(split, args.split)
    if not pairs:
        _warn(f"split {args.split!r} has no pairs")
    result = analysis.evaluate(model, pairs, seed=seed)
    metrics_path, preds_path = out / "metrics.csv", out / "predictions.jsonl"
    analysis.write_metrics_csv([{
        "variant": model.config.variant, "accuracy": result.accuracy,
        "f1": result.f1, "n_pairs": result.n_pairs,
    }], metrics_path)
    analysis.write_predictions_jsonl(result.records, preds_path)
    manifest.write_manifest(out, "eval", _manifest_args(args), seed,
                            inputs=[args.model, args.pairs, args.vocab],
                            outputs=[metrics_path, preds_path],
                            config=dataclasses.asdict(model.config))
    _say(args, f"{args.split}: accuracy {result.accuracy:.4f}, "
               f"macro F1 {result.f1:.4f} over {result.n_pairs} pairs")
    return 0


def cmd_interpret(args) -> int:
    out = _out_dir(args)
    model = M.load_model(args.model)
    seed = args.seed if args.seed is not None else model.config.seed
    vocab, split = _load_dataset(args, model.config.max_len)
    pairs = _pick_split(split, args.split)
    if not pairs:
        _warn(f"split {args.split!r} has no pairs")

    words_path = out / "top_words.json"
    report = analysis.top_word_report(model, vocab, n=args.top_words)
    words_path.write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")

    assign_path = out / "assignment_map.json"
    assignment = analysis.assignment_map(model, vocab)
    assign_path.write_text(json.dumps(assignment, sort_keys=True, indent=2) + "\n")

    hist_path = out / "topic_histogram.csv"
    analysis.write_histogram_csv(
        analysis.strong_topic_histogram(model, pairs), hist_path)

    outputs = [words_path, assign_path, hist_path]
    if model.config.variant == "no_memory":
        _warn("skipping discourse effects: the model has no memory addressing")
    else:
        effect_path = out / "discourse_effect.csv"
        analysis.write_effect_csv(
            analysis.discourse_effect_over_turns(model, pairs), effect_path)
        outputs.append(effect_path)
    manifest.write_manifest(out, "interpret", _manifest_args(args), seed,
                            inputs=[args.model, args.pairs, args.vocab],
                            outputs=outputs,
                            config=dataclasses.asdict(model.config))
    _say(args, f"wrote {len(outputs)} interpretation artifacts to {out}")
    return 0


def cmd_ablate(args) -> int:
    out = _out_dir(args)
    vocab = corpus.Vocabulary.load(args.vocab)
    base = _resolve_config(args, vocab_size=len(vocab))
    split = corpus.load_pairs_jsonl(args.pairs, vocab, base.max_len)
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    for v in variants:
        if v not in VARIANTS:
            raise ValueError(f"variants must come from {VARIANTS}, got {v!r}")

    rows, outputs = [], []
    for v in variants:
        config = base.with_overrides(variant=v)
        model = M.Model.create(config)
        log_path = out / f"log_{v}.csv"
        trainer.train_model(model, split, quiet=args.quiet, log_path=log_path)
        model_path = out / f"model_{v}.npz"
        M.save_model(model, model_path)
        outputs.extend([model_path, log_path])
        result = analysis.evaluate(model, split.test, seed=config.seed)
        rows.append({"variant": v, "accuracy": result.accuracy,
                     "f1": result.f1, "n_pairs": result.n_pairs})
        _say(args, f"{v}: test accuracy {result.accuracy:.4f}, macro F1 {result.f1:.4f}")
    if args.baseline:
        rows.append(analysis.lr_tfidf_baseline(split, seed=base.seed))
        _say(args, f"lr_tfidf: test accuracy {rows[-1]['accuracy']:.4f}")
    metrics_path = out / "metrics.csv"
    analysis.write_metrics_csv(rows, metrics_path)
    outputs.append(metrics_path)
    manifest.write_manifest(out, "ablate", _manifest_args(args), base.seed,
                            inputs=[args.pairs, args.vocab], outputs=outputs,
                            config=dataclasses.asdict(base))
    return 0


def cmd_grid_search(args) -> int:
    out = _out_dir(args)
    vocab = corpus.Vocabulary.load(args.vocab)
    base = _resolve_config(args, vocab_size=len(vocab))
    split = corpus.load_pairs_jsonl(args.pairs, vocab, base.max_len)
    topics = [int(t) for t in args.topics.split(",") if t.strip()]
    if not topics:
        raise ValueError("--topics needs at least one topic count")
    rows = trainer.grid_search(base, split, topics, quiet=args.quiet)
    grid_path = out / "grid.csv"
    with open(grid_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("num_topics,val_accuracy,val_f1,best_epoch\n")
        for row in rows:
            fh.write(f"{row['num_topics']},{row['val_accuracy']:.6f},"
                     f"{row['val_f1']:.6f},{row['best_epoch']}\n")
    manifest.write_manifest(out, "grid-search", _manifest_args(args), base.seed,
                            inputs=[args.pairs, args.vocab], outputs=[grid_path],
                            config=dataclasses.asdict(base))
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dtdmn",
        description="Topic-discourse memory networks for pairwise persuasion prediction.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", required=True, help="artifact directory")
    common.add_argument("--seed", type=int, default=None, help="master seed")
    common.add_argument("--quiet", action="store_true", help="suppress progress output")

    fit = argparse.ArgumentParser(add_help=False)
    fit.add_argument("--pairs", required=True, help="pairs.jsonl from build-corpus")
    fit.add_argument("--vocab", required=True, help="vocab.txt from build-corpus")
    fit.add_argument("--config", default=None, help="key = value config file")
    fit.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="config override, repeatable")

    p = sub.add_parser("synthesize", parents=[common],
                       help="generate a synthetic debate corpus")
    p.add_argument("--moots", type=int, default=200)
    p.add_argument("--clusters", type=int, default=3)
    p.add_argument("--permute-labels", action="store_true",
                   help="assign outcomes by coin flip, independent of content")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("build-corpus", parents=[common],
                       help="build vocabulary and paired dataset from raw records")
    p.add_argument("--input", required=True, help="jsonl file of posts or transcripts")
    p.add_argument("--format", choices=("cmv", "court"), default="cmv")
    p.add_argument("--min-count", type=int, default=10,
                   help="vocabulary frequency threshold")
    p.add_argument("--jaccard", type=float, default=0.5,
                   help="minimum token-support overlap for a pair")
    p.set_defaults(func=cmd_build_corpus)

    p = sub.add_parser("train", parents=[common, fit], help="train one model")
    p.add_argument("--variant", choices=VARIANTS, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="evaluate a trained model")
    p.add_argument("--model", required=True, help="model.npz checkpoint")
    p.add_argument("--pairs", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--split", choices=("train", "val", "test", "all"), default="test")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("interpret", parents=[common],
                       help="write interpretation artifacts for a trained model")
    p.add_argument("--model", required=True, help="model.npz checkpoint")
    p.add_argument("--pairs", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--split", choices=("train", "val", "test", "all"), default="test")
    p.add_argument("--top-words", type=int, default=10)
    p.set_defaults(func=cmd_interpret)

    p = sub.add_parser("ablate", parents=[common, fit],
                       help="train and compare addressing variants")
    p.add_argument("--variants", default=",".join(VARIANTS),
                   help="comma-separated variant names")
    p.add_argument("--no-baseline", dest="baseline", action="store_false",
                   help="skip the tfidf logistic-regression baseline")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("grid-search", parents=[common, fit],
                       help="validation sweep over topic counts")
    p.add_argument("--topics", required=True, help="comma-separated topic counts")
    p.set_defaults(func=cmd_grid_search)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as e:
        print(f"dtdmn: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
