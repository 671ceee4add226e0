"""Paired argumentation corpus construction.

Pipeline: threaded debate posts -> root-to-leaf conversation paths ->
winning/losing pairs matched on vocabulary overlap -> moot-level splits ->
vocabulary -> encoded turns (bag-of-words + id sequence). A court-transcript
adapter maps each case to one conversation per side so the same pairing
machinery applies.

All iteration orders are sorted so the pipeline is deterministic given the
input bytes and the seed.
"""

from __future__ import annotations

import json
import re
import string
import warnings
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .rng import substream

PAD, UNK, QUOTE, DIGIT, URL = "<pad>", "<unk>", "<quote>", "<digit>", "<url>"
RESERVED = (PAD, UNK, QUOTE, DIGIT, URL)
PAD_ID, UNK_ID = 0, 1

MIN_TURN_WORDS = 50  # a reply this short or shorter is not a turn
MIN_TURNS = 2
MIN_CHALLENGERS = 10

# ---------------------------------------------------------------------------
# text normalization
# ---------------------------------------------------------------------------

_BLOCKQUOTE = re.compile(r"^[ \t]*(?:>|&gt;).*$", re.MULTILINE)
_INLINE_QUOTE = re.compile(r'"[^"\n]+"')
_URL = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
_DIGITS = re.compile(r"\d+")
# tags, words (letters with internal apostrophes), or any single non-space char
_TOKEN = re.compile(r"(<quote>|<digit>|<url>)|([^\W\d_]+(?:'[^\W\d_]+)*)|(\S)", re.UNICODE)

_ASCII_WORD = re.compile(r"[a-z]+(?:'[a-z]+)*\Z")
_ASCII_PUNCT = set(string.punctuation)


def normalize_text(text: str) -> list[str]:
    """Normalize a raw post body into a token list.

    Replacement precedence: quoted material first (whole block-quote lines,
    then inline double-quoted spans), then links, then digit runs; each
    becomes a single generic tag token. The remainder is lowercased and
    split into words and single punctuation marks. Tokens containing
    anything outside ASCII letters/punctuation are dropped as non-English.
    """
    text = _BLOCKQUOTE.sub(f" {QUOTE} ", text)
    text = _INLINE_QUOTE.sub(f" {QUOTE} ", text)
    text = _URL.sub(f" {URL} ", text)
    text = _DIGITS.sub(f" {DIGIT} ", text)
    text = text.lower()
    tokens: list[str] = []
    for tag, word, punct in _TOKEN.findall(text):
        if tag:
            tokens.append(tag)
        elif word:
            if _ASCII_WORD.fullmatch(word):
                tokens.append(word)
        elif punct in _ASCII_PUNCT:
            tokens.append(punct)
    return tokens


def _raw_word_count(body: str) -> int:
    return len(body.split())


# ---------------------------------------------------------------------------
# vocabulary
# ---------------------------------------------------------------------------


@dataclass
class Vocabulary:
    itos: list[str]
    stoi: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.stoi = {t: i for i, t in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            raise ValueError("vocabulary contains duplicate tokens")

    def __len__(self) -> int:
        return len(self.itos)

    def id(self, token: str) -> int:
        return self.stoi.get(token, UNK_ID)

    def save(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.itos) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        itos = Path(path).read_text().splitlines()
        if itos[: len(RESERVED)] != list(RESERVED):
            raise ValueError(f"vocabulary file {path} does not start with the reserved symbols")
        return cls(itos)


def build_vocabulary(token_lists, min_count: int = 10) -> Vocabulary:
    """Count tokens (training portion only) and keep those seen >= min_count.

    Reserved symbols occupy the first indices regardless of count; the rest
    are ordered by descending count, ties broken lexicographically.
    """
    counts: Counter[str] = Counter()
    for tokens in token_lists:
        counts.update(t for t in tokens if t not in RESERVED)
    kept = sorted((t for t, c in counts.items() if c >= min_count),
                  key=lambda t: (-counts[t], t))
    if not kept:
        warnings.warn("vocabulary is empty apart from reserved symbols "
                      f"(min_count={min_count} exceeds every token count)")
    return Vocabulary(list(RESERVED) + kept)


# ---------------------------------------------------------------------------
# record types
# ---------------------------------------------------------------------------


@dataclass
class RawPost:
    post_id: str
    parent_id: str | None
    moot_id: str
    author: str
    body: str
    delta: bool = False


@dataclass
class EncodedArgument:
    """One turn, model-ready: full bag-of-words plus a padded id sequence."""

    bow: np.ndarray  # [V] float64 counts over the whole turn
    seq: np.ndarray  # [max_len] int64, padded with PAD_ID
    mask: np.ndarray  # [max_len] float64, 1.0 at real tokens
    length: int  # number of real positions in seq

    def validate(self, vocab_size: int, max_len: int) -> None:
        assert self.bow.shape == (vocab_size,) and self.bow.sum() > 0
        assert self.seq.shape == (max_len,) and self.mask.shape == (max_len,)
        assert int(self.mask.sum()) == self.length > 0


@dataclass
class Conversation:
    conv_id: str
    moot_id: str
    label: bool  # True when this path persuaded / this side won
    turn_tokens: list[list[str]]
    turns: list[EncodedArgument] | None = None

    @property
    def num_turns(self) -> int:
        return len(self.turn_tokens)

    def token_support(self) -> set[str]:
        support: set[str] = set()
        for tokens in self.turn_tokens:
            support.update(tokens)
        return support

    def truncated(self, num_turns: int) -> "Conversation":
        return Conversation(
            conv_id=self.conv_id,
            moot_id=self.moot_id,
            label=self.label,
            turn_tokens=self.turn_tokens[:num_turns],
            turns=self.turns[:num_turns] if self.turns is not None else None,
        )


@dataclass
class ConversationPair:
    pair_id: str
    moot_id: str
    positive: Conversation  # the persuading side
    negative: Conversation  # same length after truncation

    def validate(self, threshold: float = 0.5) -> None:
        assert self.positive.label and not self.negative.label
        assert self.positive.num_turns == self.negative.num_turns >= MIN_TURNS
        assert jaccard(self.positive.token_support(), self.negative.token_support()) >= threshold


@dataclass
class DatasetSplit:
    train: list[ConversationPair]
    val: list[ConversationPair]
    test: list[ConversationPair]
    seed: int

    def all_pairs(self) -> list[ConversationPair]:
        return self.train + self.val + self.test


# ---------------------------------------------------------------------------
# tree flattening (threaded debates)
# ---------------------------------------------------------------------------


def flatten_tree(posts: list[RawPost],
                 min_challengers: int = MIN_CHALLENGERS,
                 min_words: int = MIN_TURN_WORDS,
                 min_turns: int = MIN_TURNS) -> list[Conversation]:
    """Flatten one discussion tree into root-to-leaf conversations.

    The root states the opinion; its author's own replies are not turns.
    Discussions with fewer than ``min_challengers`` distinct repliers or
    without any persuaded outcome are dropped entirely. Replies of
    ``min_words`` words or fewer (raw whitespace count) are dropped as
    turns, as are replies whose normalized token list comes out empty;
    paths left with fewer than ``min_turns`` turns are dropped.
    """
    if not posts:
        return []
    by_id = {p.post_id: p for p in posts}
    if len(by_id) != len(posts):
        dupes = [pid for pid, c in Counter(p.post_id for p in posts).items() if c > 1]
        raise ValueError(f"duplicate post id {dupes[0]!r}")
    roots = [p for p in posts if p.parent_id is None]
    if len(roots) != 1:
        names = ", ".join(sorted(p.post_id for p in roots)) or "none"
        raise ValueError(f"discussion must have exactly one root post, found: {names}")
    root = roots[0]
    for p in posts:
        if p.parent_id is not None and p.parent_id not in by_id:
            raise ValueError(f"post {p.post_id!r} references missing parent {p.parent_id!r}")

    children: dict[str, list[str]] = {p.post_id: [] for p in posts}
    for p in posts:
        if p.parent_id is not None:
            children[p.parent_id].append(p.post_id)
    for kids in children.values():
        kids.sort()

    # reachability from the root also guards against parent cycles
    reached: set[str] = set()
    stack = [root.post_id]
    while stack:
        pid = stack.pop()
        if pid in reached:
            continue
        reached.add(pid)
        stack.extend(children[pid])
    unreachable = sorted(set(by_id) - reached)
    if unreachable:
        raise ValueError(f"post {unreachable[0]!r} is unreachable from the root (cycle?)")

    challengers = {p.author for p in posts if p.parent_id is not None and p.author != root.author}
    if len(challengers) < min_challengers:
        return []
    if not any(p.delta for p in posts if p.parent_id is not None):
        return []

    conversations = []
    for leaf_id in sorted(pid for pid, kids in children.items() if not kids and pid != root.post_id):
        path = []
        pid: str | None = leaf_id
        while pid is not None and pid != root.post_id:
            path.append(by_id[pid])
            pid = by_id[pid].parent_id
        path.reverse()
        label = any(p.delta for p in path)
        turn_tokens = []
        for p in path:
            if p.author == root.author:
                continue
            if _raw_word_count(p.body) <= min_words:
                continue
            tokens = normalize_text(p.body)
            if tokens:
                turn_tokens.append(tokens)
        if len(turn_tokens) < min_turns:
            continue
        conversations.append(Conversation(
            conv_id=f"{root.moot_id}/{leaf_id}",
            moot_id=root.moot_id,
            label=label,
            turn_tokens=turn_tokens,
        ))
    return conversations


def flatten_forest(posts: list[RawPost],
                   min_challengers: int = MIN_CHALLENGERS,
                   min_words: int = MIN_TURN_WORDS,
                   min_turns: int = MIN_TURNS) -> list[Conversation]:
    """Flatten a file's worth of posts, one tree per moot id.

    Posts are grouped by ``moot_id`` and each group is flattened on its
    own, so structural errors report the offending discussion. Groups are
    processed in sorted moot order to keep output order deterministic.
    """
    by_moot: dict[str, list[RawPost]] = {}
    for post in posts:
        by_moot.setdefault(post.moot_id, []).append(post)
    conversations: list[Conversation] = []
    for moot_id in sorted(by_moot):
        try:
            conversations.extend(flatten_tree(
                by_moot[moot_id], min_challengers=min_challengers,
                min_words=min_words, min_turns=min_turns))
        except ValueError as e:
            raise ValueError(f"moot {moot_id!r}: {e}") from None
    return conversations


# ---------------------------------------------------------------------------
# court transcript adapter
# ---------------------------------------------------------------------------


def court_conversations(case_id: str, sides: dict[str, dict],
                        min_words: int = MIN_TURN_WORDS,
                        min_turns: int = MIN_TURNS) -> list[Conversation]:
    """Map one court case to one conversation per side.

    ``sides`` maps side name to {"utterances": [...], "winner_side": ...}.
    The winning side's conversation is the positive one. Utterance filters
    match the debate-tree rules so downstream code sees one shape of data.
    """
    if len(sides) != 2:
        raise ValueError(f"case {case_id!r} needs exactly 2 sides, got {sorted(sides)}")
    winners = {info["winner_side"] for info in sides.values()}
    if len(winners) != 1 or next(iter(winners)) not in sides:
        raise ValueError(f"case {case_id!r} has inconsistent winner_side {sorted(winners)}")
    winner = next(iter(winners))
    conversations = []
    for side in sorted(sides):
        turn_tokens = []
        for utterance in sides[side]["utterances"]:
            if _raw_word_count(utterance) <= min_words:
                continue
            tokens = normalize_text(utterance)
            if tokens:
                turn_tokens.append(tokens)
        if len(turn_tokens) < min_turns:
            continue
        conversations.append(Conversation(
            conv_id=f"{case_id}/{side}",
            moot_id=case_id,
            label=(side == winner),
            turn_tokens=turn_tokens,
        ))
    return conversations


# ---------------------------------------------------------------------------
# pairing
# ---------------------------------------------------------------------------


def jaccard(a, b) -> float:
    """Jaccard similarity of two bag-of-words supports.

    Accepts count vectors, token iterables, sets, or count dicts. Two empty
    bags count as identical (similarity 1.0).
    """
    sa, sb = _support(a), _support(b)
    if not sa and not sb:
        return 1.0
    return len(sa & sb) / len(sa | sb)


def _support(x) -> set:
    if isinstance(x, np.ndarray):
        return set(np.nonzero(x)[0].tolist())
    if isinstance(x, (set, frozenset)):
        return set(x)
    if isinstance(x, dict):
        return {k for k, v in x.items() if v}
    return set(x)


def build_pairs(conversations: list[Conversation],
                jaccard_threshold: float = 0.5) -> list[ConversationPair]:
    """Pair every winning conversation with every losing one per moot.

    A pair is dropped when the negative has fewer turns than the positive;
    otherwise the negative is truncated to the positive's length and the
    pair is kept when the aligned Jaccard similarity clears the threshold,
    so every emitted pair satisfies the overlap bound as stored.
    """
    by_moot: dict[str, list[Conversation]] = {}
    for conv in conversations:
        by_moot.setdefault(conv.moot_id, []).append(conv)
    pairs = []
    for moot_id in sorted(by_moot):
        convs = sorted(by_moot[moot_id], key=lambda c: c.conv_id)
        positives = [c for c in convs if c.label]
        negatives = [c for c in convs if not c.label]
        for pos in positives:
            for neg in negatives:
                if neg.num_turns < pos.num_turns:
                    continue
                neg_cut = neg.truncated(pos.num_turns)
                if jaccard(pos.token_support(), neg_cut.token_support()) < jaccard_threshold:
                    continue
                pairs.append(ConversationPair(
                    pair_id=f"{pos.conv_id}|{neg.conv_id}",
                    moot_id=moot_id,
                    positive=pos,
                    negative=neg_cut,
                ))
    return pairs


# ---------------------------------------------------------------------------
# splits
# ---------------------------------------------------------------------------


def split_dataset(pairs: list[ConversationPair], seed: int) -> DatasetSplit:
    """Split pairs by moot: 20% of moots to test, then 20% of the rest to val.

    Splitting whole moots keeps paired conversations from one discussion out
    of two splits. Counts use floor, so tiny corpora degrade toward train
    (a single moot lands wholly in train, with a warning).
    """
    moots = sorted({p.moot_id for p in pairs})
    order = substream(seed, "corpus").permutation(len(moots))
    shuffled = [moots[i] for i in order]
    n_test = int(len(moots) * 0.2)
    test_moots = set(shuffled[:n_test])
    pool = shuffled[n_test:]
    n_val = int(len(pool) * 0.2)
    val_moots = set(pool[:n_val])
    buckets: dict[str, list[ConversationPair]] = {"train": [], "val": [], "test": []}
    for pair in sorted(pairs, key=lambda p: p.pair_id):
        if pair.moot_id in test_moots:
            buckets["test"].append(pair)
        elif pair.moot_id in val_moots:
            buckets["val"].append(pair)
        else:
            buckets["train"].append(pair)
    for name in ("train", "val", "test"):
        if pairs and not buckets[name]:
            warnings.warn(f"{name} split is empty ({len(moots)} moots, {len(pairs)} pairs)")
    return DatasetSplit(train=buckets["train"], val=buckets["val"], test=buckets["test"], seed=seed)


# ---------------------------------------------------------------------------
# encoding
# ---------------------------------------------------------------------------


def encode_argument(tokens: list[str], vocab: Vocabulary, max_len: int) -> EncodedArgument:
    """Encode one turn: bag-of-words over every token, ids truncated to max_len.

    Unknown tokens count under the unknown symbol; the bag is computed before
    truncation so long turns keep their full lexical profile.
    """
    if not tokens:
        raise ValueError("cannot encode an empty turn")
    ids = np.array([vocab.id(t) for t in tokens], dtype=np.int64)
    bow = np.zeros(len(vocab))
    np.add.at(bow, ids, 1.0)
    length = min(len(ids), max_len)
    seq = np.full(max_len, PAD_ID, dtype=np.int64)
    seq[:length] = ids[:length]
    mask = np.zeros(max_len)
    mask[:length] = 1.0
    return EncodedArgument(bow=bow, seq=seq, mask=mask, length=length)


def encode_conversation(conv: Conversation, vocab: Vocabulary, max_len: int) -> None:
    conv.turns = [encode_argument(tokens, vocab, max_len) for tokens in conv.turn_tokens]


def encode_split(split: DatasetSplit, vocab: Vocabulary, max_len: int) -> None:
    for pair in split.all_pairs():
        encode_conversation(pair.positive, vocab, max_len)
        encode_conversation(pair.negative, vocab, max_len)


def training_token_lists(split: DatasetSplit) -> list[list[str]]:
    """Token lists feeding the vocabulary: distinct train-split conversations.

    A conversation appearing in several pairs is counted once, in its
    longest stored (least truncated) instance.
    """
    best: dict[str, Conversation] = {}
    for pair in split.train:
        for conv in (pair.positive, pair.negative):
            kept = best.get(conv.conv_id)
            if kept is None or conv.num_turns > kept.num_turns:
                best[conv.conv_id] = conv
    lists = []
    for conv_id in sorted(best):
        lists.extend(best[conv_id].turn_tokens)
    return lists


# ---------------------------------------------------------------------------
# stats
# ---------------------------------------------------------------------------


def corpus_stats(conversations: list[Conversation], vocab: Vocabulary,
                 pairs: list[ConversationPair]) -> dict:
    turns = sum(c.num_turns for c in conversations)
    words = sum(len(t) for c in conversations for t in c.turn_tokens)
    return {
        "moots": len({c.moot_id for c in conversations}),
        "conversations": len(conversations),
        "turns": turns,
        "avg_words_per_turn": round(words / turns, 2) if turns else 0.0,
        "vocab_size": len(vocab),
        "pairs": len(pairs),
    }


# ---------------------------------------------------------------------------
# file I/O
# ---------------------------------------------------------------------------


def read_posts_jsonl(path: str | Path) -> list[RawPost]:
    posts = []
    for lineno, record in _iter_jsonl(path):
        _require(record, lineno, path, "post_id", str)
        _require(record, lineno, path, "moot_id", str)
        _require(record, lineno, path, "author", str)
        _require(record, lineno, path, "body", str)
        _require(record, lineno, path, "delta", bool)
        parent = record.get("parent_id")
        if parent is not None and not isinstance(parent, str):
            raise ValueError(f"{path}:{lineno}: parent_id must be a string or null")
        posts.append(RawPost(
            post_id=record["post_id"], parent_id=parent, moot_id=record["moot_id"],
            author=record["author"], body=record["body"], delta=record["delta"],
        ))
    return posts


def read_court_jsonl(path: str | Path) -> dict[str, dict[str, dict]]:
    """Read court records into {case_id: {side: {...}}}."""
    cases: dict[str, dict[str, dict]] = {}
    for lineno, record in _iter_jsonl(path):
        _require(record, lineno, path, "case_id", str)
        _require(record, lineno, path, "side", str)
        _require(record, lineno, path, "winner_side", str)
        utterances = record.get("utterances")
        if not isinstance(utterances, list) or not all(isinstance(u, str) for u in utterances):
            raise ValueError(f"{path}:{lineno}: utterances must be a list of strings")
        if record["side"] not in ("petitioner", "respondent"):
            raise ValueError(f"{path}:{lineno}: side must be petitioner|respondent")
        entry = cases.setdefault(record["case_id"], {})
        if record["side"] in entry:
            raise ValueError(f"{path}:{lineno}: duplicate side {record['side']!r} "
                             f"for case {record['case_id']!r}")
        entry[record["side"]] = {
            "utterances": utterances, "winner_side": record["winner_side"],
        }
    return cases


def _iter_jsonl(path: str | Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise ValueError(f"{path}:{lineno}: malformed JSON ({e.msg})") from None
            if not isinstance(record, dict):
                raise ValueError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, record


def _require(record: dict, lineno: int, path, key: str, typ) -> None:
    if key not in record:
        raise ValueError(f"{path}:{lineno}: missing field {key!r}")
    if not isinstance(record[key], typ):
        raise ValueError(f"{path}:{lineno}: field {key!r} must be {typ.__name__}")


def write_pairs_jsonl(path: str | Path, split: DatasetSplit, vocab: Vocabulary) -> None:
    """Write every pair with embedded token ids, ordered train/val/test."""
    with open(path, "w", encoding="utf-8") as fh:
        for split_name in ("train", "val", "test"):
            for pair in getattr(split, split_name):
                record = {
                    "pair_id": pair.pair_id,
                    "moot_id": pair.moot_id,
                    "split": split_name,
                    "positive_conv": _conv_record(pair.positive, vocab),
                    "negative_conv": _conv_record(pair.negative, vocab),
                }
                fh.write(json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n")


def _conv_record(conv: Conversation, vocab: Vocabulary) -> dict:
    return {
        "conv_id": conv.conv_id,
        "moot_id": conv.moot_id,
        "label": conv.label,
        "turns": [
            {"tokens": tokens, "ids": [vocab.id(t) for t in tokens]}
            for tokens in conv.turn_tokens
        ],
    }


def load_pairs_jsonl(path: str | Path, vocab: Vocabulary, max_len: int,
                     seed: int = 0) -> DatasetSplit:
    """Rebuild a DatasetSplit (with encoded turns) from a pairs file."""
    buckets: dict[str, list[ConversationPair]] = {"train": [], "val": [], "test": []}
    for lineno, record in _iter_jsonl(path):
        try:
            pair = ConversationPair(
                pair_id=record["pair_id"],
                moot_id=record["moot_id"],
                positive=_conv_from_record(record["positive_conv"]),
                negative=_conv_from_record(record["negative_conv"]),
            )
            buckets[record["split"]].append(pair)
        except KeyError as e:
            raise ValueError(f"{path}:{lineno}: missing field {e.args[0]!r}") from None
    split = DatasetSplit(train=buckets["train"], val=buckets["val"],
                         test=buckets["test"], seed=seed)
    encode_split(split, vocab, max_len)
    return split


def _conv_from_record(record: dict) -> Conversation:
    return Conversation(
        conv_id=record["conv_id"],
        moot_id=record["moot_id"],
        label=bool(record["label"]),
        turn_tokens=[turn["tokens"] for turn in record["turns"]],
    )
