"""Tests for the synthetic debate generator."""

import collections

import pytest

from dtdmn import synthetic
from dtdmn.corpus import build_pairs, flatten_forest, read_posts_jsonl
from dtdmn.synthetic import (
    DRIFTING,
    FOCUSED,
    SynthConfig,
    build_pools,
    conv_style,
    generate,
    write_posts_jsonl,
    write_truth_json,
)


@pytest.fixture(scope="module")
def small():
    config = SynthConfig(moots=6)
    posts, truth = generate(config, seed=5)
    return config, posts, truth


@pytest.fixture(scope="module")
def small_convs(small):
    _, posts, _ = small
    return flatten_forest(posts)


def test_same_seed_is_byte_identical(tmp_path, small):
    config, posts, truth = small
    again_posts, again_truth = generate(config, seed=5)
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    write_posts_jsonl(posts, a)
    write_posts_jsonl(again_posts, b)
    assert a.read_bytes() == b.read_bytes()
    ta, tb = tmp_path / "a.json", tmp_path / "b.json"
    write_truth_json(truth, ta)
    write_truth_json(again_truth, tb)
    assert ta.read_bytes() == tb.read_bytes()


def test_different_seed_differs(small):
    config, posts, _ = small
    other, _ = generate(config, seed=6)
    assert [p.body for p in other] != [p.body for p in posts]


def test_posts_roundtrip_through_reader(tmp_path, small):
    _, posts, _ = small
    path = tmp_path / "posts.jsonl"
    write_posts_jsonl(posts, path)
    assert read_posts_jsonl(path) == posts


def test_flattens_to_four_conversations_per_moot(small, small_convs):
    config, _, _ = small
    per_moot = collections.Counter(c.moot_id for c in small_convs)
    assert len(per_moot) == config.moots
    assert all(n == 4 for n in per_moot.values())


def test_pairing_keeps_every_cross_pair(small, small_convs):
    config, _, _ = small
    pairs = build_pairs(small_convs)
    assert len(pairs) == 4 * config.moots
    for pair in pairs:
        pair.validate()


def test_labels_follow_planted_side(small, small_convs):
    config, _, truth = small
    for conv in small_convs:
        style = conv_style(conv.conv_id, config)
        assert conv.label == (style == truth["delta_side"][conv.moot_id])
        assert truth["delta_side"][conv.moot_id] == FOCUSED


def test_turn_lengths_in_range(small, small_convs):
    config, posts, _ = small
    challenger = [p for p in posts if p.author.endswith(("c0", "c1", "c2", "c3"))]
    for p in challenger:
        assert config.min_turn_len <= len(p.body.split()) <= config.max_turn_len
    for conv in small_convs:
        assert conv.num_turns == config.path_turns


def _dominant_cluster(tokens, cluster_of):
    counts = collections.Counter(cluster_of[t] for t in tokens if t in cluster_of)
    return counts.most_common(1)[0][0]


def test_marker_counts_and_slip_coupling(small, small_convs):
    config, _, truth = small
    openers = set(truth["opening_markers"])
    counters = set(truth["counter_markers"])
    cluster_of = {w: stem for stem, words in truth["clusters"].items() for w in words}
    slips = {FOCUSED: [], DRIFTING: []}
    for conv in small_convs:
        style = conv_style(conv.conv_id, config)
        focus = truth["moot_focus"][conv.moot_id]
        for k, tokens in enumerate(conv.turn_tokens):
            n_open = sum(t in openers for t in tokens)
            n_counter = sum(t in counters for t in tokens)
            # every turn carries exactly one marker family, full count
            assert sorted((n_open, n_counter)) == [0, config.markers_per_turn]
            slipped = (n_open > 0) != (k == 0)
            drifted = _dominant_cluster(tokens, cluster_of) != focus
            if style == FOCUSED:
                # focused turns never drift; their slips are independent
                assert not drifted
            else:
                # drifting turns slip exactly when the stance drifts
                assert slipped == drifted
            slips[style].append(slipped)
    # both sides slip sometimes but not always, at similar rates
    for style, flags in slips.items():
        assert 0 < sum(flags) < len(flags)
    rates = {s: sum(f) / len(f) for s, f in slips.items()}
    assert abs(rates[FOCUSED] - rates[DRIFTING]) < 0.25


def test_focused_turns_stay_on_topic(small, small_convs):
    config, _, truth = small
    cluster_of = {w: stem for stem, words in truth["clusters"].items() for w in words}
    shares = {FOCUSED: [], DRIFTING: []}
    for conv in small_convs:
        style = conv_style(conv.conv_id, config)
        focus = truth["moot_focus"][conv.moot_id]
        content = [cluster_of[t] for ts in conv.turn_tokens for t in ts if t in cluster_of]
        shares[style].append(sum(c == focus for c in content) / len(content))
    focused = sum(shares[FOCUSED]) / len(shares[FOCUSED])
    drifting = sum(shares[DRIFTING]) / len(shares[DRIFTING])
    assert focused >= 0.7
    assert drifting <= focused - 0.2


def test_manifest_matches_pools(small):
    config, posts, truth = small
    pools = build_pools(config)
    assert truth["clusters"] == pools.clusters
    assert truth["opening_markers"] == pools.openers
    assert truth["counter_markers"] == pools.counters
    assert truth["fillers"] == pools.fillers
    assert set(truth["moot_focus"]) == {p.moot_id for p in posts}
    assert all(f in pools.clusters for f in truth["moot_focus"].values())
    assert truth["seed"] == 5
    assert truth["permuted"] is False


def test_permuted_labels_are_independent_of_style():
    config = SynthConfig(moots=40, permute_labels=True)
    posts, truth = generate(config, seed=9)
    sides = collections.Counter(truth["delta_side"].values())
    assert sides[FOCUSED] > 0 and sides[DRIFTING] > 0
    convs = flatten_forest(posts)
    for conv in convs:
        assert conv.num_turns == 4
        style = conv_style(conv.conv_id, config)
        assert conv.label == (style == truth["delta_side"][conv.moot_id])
    assert len(build_pairs(convs)) == 4 * config.moots
    assert truth["permuted"] is True


def test_config_validation():
    with pytest.raises(ValueError, match="clusters"):
        SynthConfig(clusters=0)
    with pytest.raises(ValueError, match="min_turn_len"):
        SynthConfig(min_turn_len=40)
    with pytest.raises(ValueError, match="drift_rate"):
        SynthConfig(drift_rate=1.5)
    with pytest.raises(ValueError, match="unknown turn style"):
        pools = build_pools(SynthConfig())
        rng = synthetic.substream(0, "synth")
        synthetic.make_turn(rng, "meandering", "quark", 0, pools, SynthConfig())


def test_conv_style_parses_ids():
    config = SynthConfig()
    assert conv_style("m0003/m0003-p0k2", config) == FOCUSED
    assert conv_style("m0003/m0003-p1k1", config) == FOCUSED
    assert conv_style("m0003/m0003-p2k3", config) == DRIFTING
    assert conv_style("m0003/m0003-p3k2", config) == DRIFTING
