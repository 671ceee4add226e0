"""Evaluation, baselines, and interpretation tools.

Evaluation presents each stored pair in a randomized order (drawn from the
``eval_order`` substream) and asks the model which conversation wins, so a
model cannot score well by exploiting the stored positive-first layout.
Interpretation utilities expose what the trained factors learned: top words
per topic and per discourse role, strong-topic usage histograms, and the
effect of isolated memory rows on the predicted outcome.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import factor_encoder as fe
from . import model as M
from . import predictor as pred
from .autodiff import Tensor
from .corpus import Conversation, ConversationPair, DatasetSplit, Vocabulary
from .rng import substream


def presentation_flips(seed: int, n: int) -> np.ndarray:
    """Boolean array: True presents the stored negative conversation first."""
    return substream(seed, "eval_order").random(n) < 0.5


def accuracy_score(gold: list[bool], predicted: list[bool]) -> float:
    if not gold:
        return 0.0
    return float(np.mean(np.asarray(gold) == np.asarray(predicted)))


def macro_f1(gold: list[bool], predicted: list[bool]) -> float:
    """Mean of the per-class F1 scores over the two outcome classes."""
    if not gold:
        return 0.0
    gold_arr = np.asarray(gold)
    pred_arr = np.asarray(predicted)
    scores = []
    for cls in (True, False):
        tp = np.sum((gold_arr == cls) & (pred_arr == cls))
        fp = np.sum((gold_arr != cls) & (pred_arr == cls))
        fn = np.sum((gold_arr == cls) & (pred_arr != cls))
        denom = 2 * tp + fp + fn
        scores.append(2 * tp / denom if denom else 0.0)
    return float(np.mean(scores))


@dataclass
class EvalResult:
    accuracy: float
    f1: float
    n_pairs: int
    records: list[dict]


def evaluate(model: M.Model, pairs: list[ConversationPair], seed: int) -> EvalResult:
    """Score pairs under randomized presentation order.

    The decision rule picks the first-presented conversation on a tie, so
    randomizing which side goes first keeps ties uninformative on average.
    """
    flips = presentation_flips(seed, len(pairs))
    gold, predicted, records = [], [], []
    for pair, flip in zip(pairs, flips):
        first, second = ((pair.negative, pair.positive) if flip
                         else (pair.positive, pair.negative))
        y_first, y_second = M.predict_pair(model, first, second)
        first_predicted = pred.first_wins(y_first, y_second)
        first_is_winner = first is pair.positive
        gold.append(first_is_winner)
        predicted.append(first_predicted)
        records.append({
            "pair_id": pair.pair_id,
            "first": first.conv_id,
            "second": second.conv_id,
            "score_first": y_first,
            "score_second": y_second,
            "predicted_winner": first.conv_id if first_predicted else second.conv_id,
            "gold_winner": pair.positive.conv_id,
            "correct": bool(first_predicted == first_is_winner),
        })
    return EvalResult(accuracy=accuracy_score(gold, predicted),
                      f1=macro_f1(gold, predicted),
                      n_pairs=len(pairs), records=records)


def write_predictions_jsonl(records: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True, separators=(",", ":")) + "\n")


def write_metrics_csv(rows: list[dict], path) -> None:
    """Rows of {variant, accuracy, f1, n_pairs} with stable formatting."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["variant", "accuracy", "f1", "n_pairs"])
        for row in rows:
            writer.writerow([row["variant"], f"{row['accuracy']:.6f}",
                             f"{row['f1']:.6f}", row["n_pairs"]])


# ---------------------------------------------------------------------------
# factor interpretation
# ---------------------------------------------------------------------------


def top_words(dist_rows: np.ndarray, vocab: Vocabulary, n: int = 10) -> list[list[str]]:
    """Highest-probability words per row; ties resolve lexicographically."""
    out = []
    for row in dist_rows:
        order = sorted(range(len(row)), key=lambda i: (-row[i], vocab.itos[i]))
        out.append([vocab.itos[i] for i in order[:n]])
    return out


def top_word_report(model: M.Model, vocab: Vocabulary, n: int = 10) -> dict:
    return {
        "topics": top_words(fe.topic_word_distributions(model.factor), vocab, n),
        "discourse": top_words(fe.discourse_word_distributions(model.factor), vocab, n),
    }


def strong_topics(z_row: np.ndarray, threshold: float = 0.2) -> list[int]:
    """Indices of topics whose share of the turn exceeds the threshold."""
    return [int(i) for i in np.flatnonzero(z_row > threshold)]


def conversation_factors(model: M.Model, conv: Conversation) -> tuple[np.ndarray, np.ndarray]:
    """Evaluation-mode (z, d) rows for each turn, without the sequence pass."""
    with ad.no_grad():
        batch = M.stack_conversations([conv])
        out = fe.forward(model.factor, batch.bows,
                         temperature=model.config.gumbel_temperature, hard=True)
        return out.z.data, out.d.data


def strong_topic_histogram(model: M.Model, pairs: list[ConversationPair],
                           threshold: float = 0.2) -> list[dict]:
    """Distribution of strong-topic counts per turn, split by pair side."""
    counts: dict[str, dict[int, int]] = {"positive": {}, "negative": {}}
    totals = {"positive": 0, "negative": 0}
    for pair in pairs:
        for side, conv in (("positive", pair.positive), ("negative", pair.negative)):
            z, _ = conversation_factors(model, conv)
            for row in z:
                k = len(strong_topics(row, threshold))
                counts[side][k] = counts[side].get(k, 0) + 1
                totals[side] += 1
    rows = []
    for side in ("negative", "positive"):
        for count in sorted(counts[side]):
            rows.append({
                "side": side,
                "count": count,
                "frequency": counts[side][count] / totals[side],
            })
    return rows


def write_histogram_csv(rows: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["side", "count", "frequency"])
        for row in rows:
            writer.writerow([row["side"], row["count"], f"{row['frequency']:.6f}"])


def prefix_scores(model: M.Model, reads: np.ndarray) -> np.ndarray:
    """Score each prefix of a read sequence [T, E] with the predictor head."""
    T = reads.shape[0]
    scores = np.zeros(T)
    with ad.no_grad():
        tensor = Tensor(reads[None, :, :])
        for t in range(T):
            window = ad.take(tensor, (slice(None), slice(0, t + 1)))
            summary, _ = pred.summarize(model.predictor, window)
            scores[t] = float(pred.score(model.predictor, summary).data[0, 0])
    return scores


def masked_factor_effect(model: M.Model, conv: Conversation) -> np.ndarray:
    """Per-prefix outcome effect of each memory row in isolation, [T, R].

    Entry (t, i) squashes through a logistic the score the predictor gives
    the first t+1 turns when every addressing weight except row i is zeroed.
    A row that never matters sits near the logistic of the empty-memory
    score; rows the predictor relies on move it toward 0 or 1.
    """
    if model.config.variant == "no_memory":
        raise ValueError("masked factor effects need a memory variant")
    R = model.config.weight_size
    T = conv.num_turns
    effects = np.zeros((T, R))
    for i in range(R):
        mask = np.zeros(R)
        mask[i] = 1.0
        out = M.forward_conversation(model, conv, weight_mask=mask)
        effects[:, i] = _logistic(prefix_scores(model, out.reads))
    return effects


def _logistic(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def discourse_effect_over_turns(model: M.Model,
                                pairs: list[ConversationPair]) -> list[dict]:
    """Average isolated effect of each discourse row by turn position.

    Rows: factor_id (discourse role index), turn_bucket (1-based turn
    position), mean_effect, n.
    """
    K, D = model.config.num_topics, model.config.num_discourse
    sums: dict[tuple[int, int], float] = {}
    ns: dict[tuple[int, int], int] = {}
    for pair in pairs:
        for conv in (pair.positive, pair.negative):
            effects = masked_factor_effect(model, conv)
            for t in range(effects.shape[0]):
                for role in range(D):
                    key = (role, t + 1)
                    sums[key] = sums.get(key, 0.0) + effects[t, K + role]
                    ns[key] = ns.get(key, 0) + 1
    rows = []
    for role, bucket in sorted(sums):
        rows.append({
            "factor_id": role,
            "turn_bucket": bucket,
            "mean_effect": sums[(role, bucket)] / ns[(role, bucket)],
            "n": ns[(role, bucket)],
        })
    return rows


def write_effect_csv(rows: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["factor_id", "turn_bucket", "mean_effect", "n"])
        for row in rows:
            writer.writerow([row["factor_id"], row["turn_bucket"],
                             f"{row['mean_effect']:.6f}", row["n"]])


def assignment_map(model: M.Model, vocab: Vocabulary) -> dict:
    """Assign each vocabulary word to its better-explaining side.

    A word's topic probability is the best any single topic gives it, and
    likewise for discourse roles; ties go to the topic side.
    """
    topics = fe.topic_word_distributions(model.factor)
    roles = fe.discourse_word_distributions(model.factor)
    p_topic = topics.max(axis=0)
    p_role = roles.max(axis=0)
    out = {}
    for idx, token in enumerate(vocab.itos):
        source, confidence = fe.word_assignment(float(p_topic[idx]), float(p_role[idx]))
        out[token] = {"source": source, "confidence": round(confidence, 6)}
    return out


# ---------------------------------------------------------------------------
# logistic-regression baseline over tfidf difference features
# ---------------------------------------------------------------------------


def _conv_text(conv: Conversation) -> str:
    return " ".join(token for turn in conv.turn_tokens for token in turn)


def lr_tfidf_baseline(split: DatasetSplit, seed: int) -> dict:
    """L1 logistic regression on tfidf(first) - tfidf(second) features.

    Training pairs get their own presentation randomization; test pairs use
    the same presentation stream as model evaluation, so both see the same
    first/second layout.
    """
    from sklearn.feature_extraction.text import TfidfVectorizer
    from sklearn.linear_model import LogisticRegression

    if not split.train or not split.test:
        return {"variant": "lr_tfidf", "accuracy": 0.0, "f1": 0.0,
                "n_pairs": len(split.test)}

    def arrange(pairs: list[ConversationPair], flips: np.ndarray):
        firsts, seconds, labels = [], [], []
        for pair, flip in zip(pairs, flips):
            first, second = ((pair.negative, pair.positive) if flip
                             else (pair.positive, pair.negative))
            firsts.append(_conv_text(first))
            seconds.append(_conv_text(second))
            labels.append(first is pair.positive)
        return firsts, seconds, np.asarray(labels)

    train_flips = substream(seed, "baseline").random(len(split.train)) < 0.5
    tr_first, tr_second, tr_y = arrange(split.train, train_flips)
    te_first, te_second, te_y = arrange(split.test,
                                        presentation_flips(seed, len(split.test)))

    vec = TfidfVectorizer(ngram_range=(1, 2), token_pattern=r"[^ ]+", lowercase=False)
    vec.fit(tr_first + tr_second)
    x_train = vec.transform(tr_first) - vec.transform(tr_second)
    x_test = vec.transform(te_first) - vec.transform(te_second)
    clf = LogisticRegression(penalty="l1", solver="liblinear", C=1.0,
                             random_state=0)
    clf.fit(x_train, tr_y)
    pred_y = clf.predict(x_test)
    return {
        "variant": "lr_tfidf",
        "accuracy": accuracy_score(list(te_y), list(pred_y)),
        "f1": macro_f1(list(te_y), list(pred_y)),
        "n_pairs": len(split.test),
    }
