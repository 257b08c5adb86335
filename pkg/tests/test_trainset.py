from collections import Counter

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from apiembed.corpus import WordApiTuple
from apiembed.trainset import (
    fis_reorder,
    make_training_text,
    mine_pairs,
    read_training_text,
    sequence_strategy,
    shuffle_strategy,
)
from oracles import fis_pairs

OPEN = "java.io.File#open"
EXISTS = "java.io.File#exists"
READ = "java.io.Reader#read"
CLOSE = "java.io.Stream#close"

# (open, File#open) co-occur in all three tuples
FIS_CORPUS = [
    WordApiTuple(("open", "file"), (EXISTS, OPEN)),
    WordApiTuple(("read", "open"), (OPEN, READ)),
    WordApiTuple(("open", "stream", "close"), (CLOSE, OPEN)),
]


class TestShuffle:
    def test_permutations(self):
        text = shuffle_strategy([WordApiTuple(("w1", "w2"), ("a1",))], copies=2, seed=3)
        assert len(text) == 2
        assert all(sorted(line) == ["a1", "w1", "w2"] for line in text.lines)

    def test_two_tokens(self):
        text = shuffle_strategy([WordApiTuple(("w",), ("a",))], copies=10, seed=0)
        assert len(text) == 10
        assert {tuple(line) for line in text.lines} <= {("w", "a"), ("a", "w")}

    def test_deterministic(self):
        tuples = [WordApiTuple(tuple(f"w{i}" for i in range(6)), ("a1", "a2", "a3"))] * 4
        assert shuffle_strategy(tuples, 10, 7).lines == shuffle_strategy(tuples, 10, 7).lines
        assert shuffle_strategy(tuples, 10, 7).lines != shuffle_strategy(tuples, 10, 8).lines

    def test_per_tuple_streams(self):
        # a tuple's permutations depend on (seed, its index), not on the other tuples
        t = WordApiTuple(tuple(f"w{i}" for i in range(6)), ("a1", "a2"))
        a = shuffle_strategy([WordApiTuple(("x", "y"), ("b",)), t], 3, 5).lines[3:]
        b = shuffle_strategy([WordApiTuple(tuple("pqrstuv"), ("c", "d", "e")), t], 3, 5).lines[3:]
        assert a == b

    def test_copies_validated(self):
        with pytest.raises(ValueError):
            shuffle_strategy([], copies=0)

    def test_file(self, tmp_path):
        text = shuffle_strategy(FIS_CORPUS, 10, 1)
        text.write(tmp_path / "train.txt")
        assert read_training_text(tmp_path / "train.txt") == text.lines
        assert (tmp_path / "train.txt").read_text().count("\n") == 30


class TestSequence:
    def test_words_then_apis(self):
        assert sequence_strategy([WordApiTuple(("w1", "w2"), ("a1", "a2"))]).lines == [["w1", "w2", "a1", "a2"]]

    def test_single(self):
        assert sequence_strategy([WordApiTuple(("w",), ("a",))]).lines == [["w", "a"]]

    def test_empty(self):
        assert sequence_strategy([]).lines == []


class TestFis:
    def test_pairs_match_oracle(self):
        fis = mine_pairs(FIS_CORPUS, support=0.1)
        frequent, conf = fis_pairs(FIS_CORPUS, 0.1)
        assert fis.pair_count == frequent
        assert {p: fis.confidence(*p) for p in fis.pair_count} == conf

    def test_reordered_lines(self):
        # File#open: confidence 1 with every partner, pair count 3 with "open" wins;
        # Stream#close: close/stream tie on confidence and count, "close" sorts first
        assert fis_reorder(FIS_CORPUS, support=0.1).lines == [
            ["open", OPEN, "file", EXISTS],
            ["read", READ, "open", OPEN],
            ["open", OPEN, "stream", "close", CLOSE],
        ]

    def test_open_always_follows(self):
        for line in fis_reorder(FIS_CORPUS, support=0.1).lines:
            assert line[line.index("open") + 1] == OPEN

    def test_support_domain(self):
        with pytest.raises(ValueError):
            fis_reorder(FIS_CORPUS, support=1.1)
        with pytest.raises(ValueError):
            fis_reorder(FIS_CORPUS, support=0.0)

    def test_no_frequent_pair_unchanged(self):
        # each pair is seen once out of three tuples: below support 0.5
        tuples = [WordApiTuple(("x", "y"), ("b#1",)), WordApiTuple(("p", "q"), ("c#2",)), WordApiTuple(("r", "s"), ("d#3", "e#4"))]
        assert fis_reorder(tuples, support=0.5).lines == sequence_strategy(tuples).lines

    def test_shuffle_keeps_anchors(self):
        text = fis_reorder(FIS_CORPUS * 5, support=0.1, then_shuffle=True, seed=4)
        assert len(text) == 15
        for line in text.lines:
            i = line.index("open")
            assert line[i + 1] == OPEN

    def test_shared_anchor_keeps_api_order(self):
        tuples = [WordApiTuple(("open", "now"), ("a#2", "b#1", "a#1"))] * 2
        line = fis_reorder(tuples, support=0.1).lines[0]
        # every pair has confidence 1 and count 2; "now" < "open" lexicographically
        assert line == ["open", "now", "a#2", "b#1", "a#1"]


def test_unknown_strategy():
    with pytest.raises(ValueError):
        make_training_text(FIS_CORPUS, "random")


_tuples = st.lists(
    st.builds(
        WordApiTuple,
        st.lists(st.sampled_from("abcdefg"), min_size=1, max_size=6).map(tuple),
        st.lists(st.sampled_from(["x#1", "y#2", "z#3", "u#4"]), min_size=1, max_size=4).map(tuple),
    ),
    min_size=1,
    max_size=12,
)


@given(_tuples, st.sampled_from(["shuffle", "sequence", "fis", "fis+shuffle"]), st.integers(0, 2**16))
def test_multisets_preserved(tuples, strategy, seed):
    text = make_training_text(tuples, strategy, copies=3, seed=seed, support=0.2)
    per = 3 if strategy == "shuffle" else 1
    assert len(text) == per * len(tuples)
    for i, line in enumerate(text.lines):
        assert Counter(line) == Counter(tuples[i // per].tokens())


@given(_tuples)
def test_fis_identity_above_max_support(tuples):
    pairs, _ = fis_pairs(tuples, 0.0)
    top = max(pairs.values()) / len(tuples)
    assume(top < 0.99)
    assert fis_reorder(tuples, (top + 1) / 2).lines == sequence_strategy(tuples).lines
