"""Synthetic debate corpus with planted topical and rhetorical structure.

Each generated discussion ("moot") has a root opinion, four challenger
threads, and a handful of short throwaway replies that only exist so the
discussion clears the minimum-challenger bar. Challenger threads come in
two styles:

* focused: every turn argues on the moot's focus topic;
* drifting: each turn abandons the focus for a random other cluster
  with probability ``drift_rate``, so the topical thread is
  inconsistent across turns.

Both sides carry the same number of marker words per turn and slip out
of rhetorical phase (openers where counters belong and vice versa) at
the same marginal rate, so neither marker counts nor slip counts give
the label away. The slips differ only in *when* they happen: a drifting
turn slips exactly when its content drifts, a focused turn slips at
random. Reading that correlation requires tracking the topical and
rhetorical threads jointly; the topical drift itself is the dominant
signal. In the default labelling the focused side earns the persuaded
outcome. With ``permute_labels`` the winning side is a fair coin per
moot, independent of content; a model scoring content can do no better
than chance on such a corpus.

All words are lowercase pseudo-words built from fixed stems, so the
ground truth behind every token is known exactly and recorded in a
manifest next to the posts.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import MIN_TURN_WORDS, RawPost
from .rng import substream

# Stems for topical clusters; generation supports at most this many clusters.
CLUSTER_STEMS = (
    "quark", "vortex", "glymph", "brindle", "corvid",
    "marlow", "penrose", "tindal",
)

FILLER_STEM = "fill"
OPENING_STEM = "salvo"
COUNTER_STEM = "rebut"

FOCUSED = "focused"
DRIFTING = "drifting"

OP_AUTHOR = "op"
OP_REPLY = "noted i will reflect on this more"
ASIDE_REPLY = "thanks this is a thought provoking point"


def _suffixed(stem: str, count: int) -> list[str]:
    """Deterministic pseudo-words: stem plus a two-letter suffix."""
    letters = "abcdefghijklmnopqrstuvwxyz"
    pairs = itertools.product(letters, repeat=2)
    return [stem + a + b for a, b in itertools.islice(pairs, count)]


@dataclass
class SynthConfig:
    """Knobs for the generated corpus.

    Turn lengths are raw word counts and must exceed the corpus
    short-reply cutoff or every turn would be filtered out.
    """

    moots: int = 200
    clusters: int = 3
    words_per_cluster: int = 12
    filler_words: int = 36
    markers_per_side: int = 6
    focused_paths: int = 2
    drifting_paths: int = 2
    path_turns: int = 4
    extra_challengers: int = 7
    content_share: float = 0.35
    drift_rate: float = 0.5
    word_concentration: float = 0.85
    markers_per_turn: int = 14  # near content mass, so rhetorical phase is a major factor
    min_turn_len: int = 62
    max_turn_len: int = 80
    permute_labels: bool = False

    def __post_init__(self) -> None:
        if not 1 <= self.clusters <= len(CLUSTER_STEMS):
            raise ValueError(
                f"clusters must be in [1, {len(CLUSTER_STEMS)}], got {self.clusters}")
        if self.min_turn_len <= MIN_TURN_WORDS:
            raise ValueError(
                f"min_turn_len must exceed {MIN_TURN_WORDS}, got {self.min_turn_len}")
        if self.max_turn_len < self.min_turn_len:
            raise ValueError("max_turn_len must be >= min_turn_len")
        if self.path_turns < 3:
            # short paths have token supports too small for the pairing
            # overlap filter
            raise ValueError(f"path_turns must be >= 3, got {self.path_turns}")
        for name in ("content_share", "drift_rate", "word_concentration"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        content = round(self.content_share * self.min_turn_len)
        if self.markers_per_turn + content > self.min_turn_len:
            raise ValueError("markers plus content words exceed the shortest turn")


@dataclass
class WordPools:
    clusters: dict[str, list[str]]
    fillers: list[str]
    openers: list[str]
    counters: list[str]
    stems: list[str] = field(init=False)

    def __post_init__(self) -> None:
        self.stems = list(self.clusters)


def build_pools(config: SynthConfig) -> WordPools:
    clusters = {
        stem: _suffixed(stem, config.words_per_cluster)
        for stem in CLUSTER_STEMS[:config.clusters]
    }
    return WordPools(
        clusters=clusters,
        fillers=_suffixed(FILLER_STEM, config.filler_words),
        openers=_suffixed(OPENING_STEM, config.markers_per_side),
        counters=_suffixed(COUNTER_STEM, config.markers_per_side),
    )


def _pick(rng: np.random.Generator, words: list[str], count: int) -> list[str]:
    if count <= 0:
        return []
    idx = rng.integers(0, len(words), size=count)
    return [words[i] for i in idx]


def make_turn(rng: np.random.Generator, style: str, focus: str, turn_index: int,
              pools: WordPools, config: SynthConfig) -> str:
    """One challenger turn: content, phase markers, and filler, shuffled.

    Every turn takes a stance cluster and draws its content words from
    it with probability ``word_concentration``, scattering the rest over
    the other clusters. A focused turn's stance is always the moot's
    focus; a drifting turn trades the focus for one random other cluster
    with probability ``drift_rate``. Marker words are in rhetorical
    phase (openers on the first turn, counters afterwards) unless the
    turn slips: a drifting turn slips exactly when its stance drifts,
    a focused turn slips independently at the same ``drift_rate``. Slip
    counts therefore match across sides and only the coupling between
    slips and drift separates the marker streams.
    """
    length = int(rng.integers(config.min_turn_len, config.max_turn_len + 1))
    n_content = round(config.content_share * length)

    if style == FOCUSED:
        stance = focus
        slipped = rng.random() < config.drift_rate
    elif style == DRIFTING:
        others = [s for s in pools.stems if s != focus] or [focus]
        slipped = rng.random() < config.drift_rate
        stance = others[int(rng.integers(0, len(others)))] if slipped else focus
    else:
        raise ValueError(f"unknown turn style {style!r}")

    in_phase = pools.openers if turn_index == 0 else pools.counters
    off_phase = pools.counters if turn_index == 0 else pools.openers
    markers = off_phase if slipped else in_phase

    spread = [s for s in pools.stems if s != stance] or [stance]
    words: list[str] = []
    for _ in range(n_content):
        if rng.random() < config.word_concentration:
            cluster = stance
        else:
            cluster = spread[int(rng.integers(0, len(spread)))]
        pool = pools.clusters[cluster]
        words.append(pool[int(rng.integers(0, len(pool)))])

    words.extend(_pick(rng, markers, config.markers_per_turn))
    words.extend(_pick(rng, pools.fillers, length - len(words)))
    rng.shuffle(words)
    return " ".join(words)


def _root_body(rng: np.random.Generator, focus: str, pools: WordPools) -> str:
    words = _pick(rng, pools.clusters[focus], 12) + _pick(rng, pools.fillers, 28)
    rng.shuffle(words)
    return " ".join(words)


def _path_turns(rng: np.random.Generator, style: str,
                config: SynthConfig) -> int:
    """Turns per challenger path.

    Both styles use the same turn count, so pairing truncation is a
    no-op and path length carries no label information.
    """
    del rng, style
    return config.path_turns


def generate(config: SynthConfig, seed: int) -> tuple[list[RawPost], dict]:
    """Generate posts plus a ground-truth manifest, all from one substream."""
    rng = substream(seed, "synth")
    pools = build_pools(config)
    posts: list[RawPost] = []
    moot_focus: dict[str, str] = {}
    delta_side: dict[str, str] = {}

    styles = [FOCUSED] * config.focused_paths + [DRIFTING] * config.drifting_paths
    for i in range(config.moots):
        moot_id = f"m{i:04d}"
        focus = pools.stems[int(rng.integers(0, len(pools.stems)))]
        moot_focus[moot_id] = focus
        if config.permute_labels:
            side = FOCUSED if rng.random() < 0.5 else DRIFTING
        else:
            side = FOCUSED
        delta_side[moot_id] = side

        posts.append(RawPost(
            post_id=f"{moot_id}-root", parent_id=None, moot_id=moot_id,
            author=OP_AUTHOR, body=_root_body(rng, focus, pools), delta=False))

        for j, style in enumerate(styles):
            turns = _path_turns(rng, style, config)
            author = f"{moot_id}-c{j}"
            parent = f"{moot_id}-root"
            for k in range(turns):
                post_id = f"{moot_id}-p{j}k{k}"
                posts.append(RawPost(
                    post_id=post_id, parent_id=parent, moot_id=moot_id,
                    author=author, body=make_turn(rng, style, focus, k, pools, config),
                    delta=(k == turns - 1 and style == side)))
                if k < turns - 1:
                    reply_id = f"{post_id}x"
                    posts.append(RawPost(
                        post_id=reply_id, parent_id=post_id, moot_id=moot_id,
                        author=OP_AUTHOR, body=OP_REPLY, delta=False))
                    parent = reply_id

        for n in range(config.extra_challengers):
            posts.append(RawPost(
                post_id=f"{moot_id}-f{n}", parent_id=f"{moot_id}-root",
                moot_id=moot_id, author=f"{moot_id}-g{n}",
                body=ASIDE_REPLY, delta=False))

    truth = {
        "seed": seed,
        "permuted": config.permute_labels,
        "clusters": pools.clusters,
        "opening_markers": pools.openers,
        "counter_markers": pools.counters,
        "fillers": pools.fillers,
        "moot_focus": moot_focus,
        "delta_side": delta_side,
    }
    return posts, truth


def conv_style(conv_id: str, config: SynthConfig) -> str:
    """Recover the planted style of a flattened conversation from its id.

    Conversation ids end in the leaf post id ``<moot>-p<j>k<k>``; path
    index ``j`` enumerates focused paths first.
    """
    leaf = conv_id.rsplit("/", 1)[-1]
    tag = leaf.rsplit("-p", 1)[-1]
    j = int(tag.split("k", 1)[0])
    return FOCUSED if j < config.focused_paths else DRIFTING


def write_posts_jsonl(posts: list[RawPost], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in posts:
            record = {
                "post_id": p.post_id, "parent_id": p.parent_id,
                "moot_id": p.moot_id, "author": p.author,
                "body": p.body, "delta": p.delta,
            }
            fh.write(json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n")


def write_truth_json(truth: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(truth, sort_keys=True, indent=2) + "\n")
