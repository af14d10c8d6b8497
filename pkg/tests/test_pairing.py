import numpy as np
import pytest

from app.models.headline import BinningScheme, DEFAULT_LOWER_BOUNDS, REFERENCE_RANK_COUNTS, PairDataset
from app.services.pairing import (
    chronological_split,
    generate_pairs,
    group_by_rank,
    pair_id_array,
    rank_of,
    ranks_of,
    split_indices,
    split_pairs,
)
from app.utils.errors import ConfigError, DataError
from tests.conftest import make_headline


@pytest.mark.parametrize("clicks,expected", [(150, 1), (0, 0), (100, 1), (99, 0), (100000, 6), (10**9, 6)])
def test_rank_of_default_scheme(scheme, clicks, expected):
    assert rank_of(clicks, scheme) == expected


def test_rank_of_every_bound(scheme):
    for k, bound in enumerate(DEFAULT_LOWER_BOUNDS):
        assert rank_of(bound, scheme) == k
        if bound > 0:
            assert rank_of(bound - 1, scheme) == k - 1


def test_rank_of_is_monotone(scheme):
    clicks = np.arange(0, 200000, 37)
    ranks = ranks_of(clicks, scheme)
    assert np.all(np.diff(ranks) >= 0)
    assert [rank_of(int(c), scheme) for c in clicks[:500]] == list(ranks[:500])


def test_rank_of_negative_clicks(scheme):
    with pytest.raises(DataError):
        rank_of(-1, scheme)


def test_reference_histogram_reproduced(scheme):
    # un titolo per ogni conteggio di riferimento, con clic al limite inferiore del rank
    clicks = np.repeat(DEFAULT_LOWER_BOUNDS, REFERENCE_RANK_COUNTS)
    counts = np.bincount(ranks_of(clicks, scheme), minlength=scheme.n_ranks)
    assert list(counts) == REFERENCE_RANK_COUNTS
    assert counts.sum() == 3305


def test_invalid_scheme():
    with pytest.raises(ValueError):
        BinningScheme(lower_bounds=(5, 10))
    with pytest.raises(ValueError):
        BinningScheme(lower_bounds=(0, 10, 10))


def test_worked_example_pairs(three_rank_scheme):
    x1, x2, x3 = make_headline(1, 5), make_headline(2, 50), make_headline(3, 500)
    pairs = generate_pairs([x1, x2, x3], three_rank_scheme, M=1, rng=np.random.default_rng(0))
    assert set(pairs.as_tuples()) == {(1, 2), (1, 3), (2, 3)}


def test_single_rank_gives_no_pairs(scheme):
    headlines = [make_headline(i, 100 + i) for i in range(6)]
    assert len(generate_pairs(headlines, scheme, M=3, rng=np.random.default_rng(0))) == 0


def _brute_force_count(headlines, scheme, M):
    ranks = [rank_of(h.clicks, scheme) for h in headlines]
    sizes = {r: ranks.count(r) for r in set(ranks)}
    return sum(min(M, sizes[r]) for own in ranks for r in sizes if r > own)


def test_pair_counts_match_brute_force(three_rank_scheme):
    rng = np.random.default_rng(123)
    for trial in range(200):
        n = int(rng.integers(1, 15))
        M = int(rng.integers(1, 4))
        clicks = rng.choice([1, 5, 20, 60, 150, 999], size=n)
        headlines = [make_headline(i, int(c)) for i, c in enumerate(clicks)]
        pairs = generate_pairs(headlines, three_rank_scheme, M, np.random.default_rng(trial))
        assert len(pairs) == _brute_force_count(headlines, three_rank_scheme, M)
        for low, high in pairs.as_tuples():
            assert rank_of(int(clicks[low]), three_rank_scheme) < rank_of(int(clicks[high]), three_rank_scheme)


def test_pairs_are_unique_and_deterministic(tiny_corpus, three_rank_scheme):
    first = generate_pairs(tiny_corpus.headlines, three_rank_scheme, 2, np.random.default_rng(7))
    second = generate_pairs(tiny_corpus.headlines, three_rank_scheme, 2, np.random.default_rng(7))
    assert first.as_tuples() == second.as_tuples()
    assert len(set(first.as_tuples())) == len(first)


def test_pair_id_array_matches_dataset(tiny_corpus, three_rank_scheme):
    array = pair_id_array(tiny_corpus.headlines, three_rank_scheme, 2, np.random.default_rng(7))
    dataset = generate_pairs(tiny_corpus.headlines, three_rank_scheme, 2, np.random.default_rng(7))
    assert array.dtype == np.int64
    assert array.shape == (len(dataset), 2)
    assert [tuple(row) for row in array.tolist()] == dataset.as_tuples()


def test_generate_pairs_errors(scheme):
    with pytest.raises(DataError):
        generate_pairs([], scheme, 2, np.random.default_rng(0))
    with pytest.raises(ConfigError):
        generate_pairs([make_headline(0, 1)], scheme, 0, np.random.default_rng(0))


def test_group_by_rank_sorted(tiny_corpus, three_rank_scheme):
    groups = group_by_rank(tiny_corpus.headlines, three_rank_scheme)
    assert groups[0] == [0, 1, 5, 8, 10]
    assert all(ids == sorted(ids) for ids in groups.values())


def test_chronological_split_basic():
    headlines = [make_headline(i, 1, day=9 - i) for i in range(10)]
    train, test = chronological_split(headlines, 0.8)
    assert [h.day for h in train] == list(range(8))
    assert [h.day for h in test] == [8, 9]


def test_chronological_split_reference_size():
    headlines = [make_headline(i, 1, day=i // 5, d=2) for i in range(3305)]
    train, test = chronological_split(headlines, 0.8)
    assert (len(train), len(test)) == (2644, 661)


def test_chronological_split_tie_break_by_id():
    headlines = [make_headline(3, 1, day=0), make_headline(1, 1, day=0), make_headline(2, 1, day=1)]
    train, test = chronological_split(headlines, 0.5)
    assert [h.id for h in train] == [1, 3]
    assert [h.id for h in test] == [2]


def test_chronological_split_errors():
    with pytest.raises(ConfigError):
        chronological_split([make_headline(0, 1), make_headline(1, 1)], 1.0)
    with pytest.raises(DataError):
        chronological_split([make_headline(0, 1)], 0.5)


def test_chronological_split_empty_test_side_names_fraction_and_size():
    headlines = [make_headline(i, 1, day=i) for i in range(4)]
    with pytest.raises(DataError) as excinfo:
        chronological_split(headlines, 0.9)
    message = str(excinfo.value)
    assert "train_fraction=0.9" in message
    assert "n=4" in message


def test_chronological_split_empty_train_side():
    with pytest.raises(DataError):
        chronological_split([], 0.5)


def test_split_pairs_partition():
    pairs = PairDataset.from_tuples([(i, i + 100) for i in range(50)])
    train, val = split_pairs(pairs, 0.1, np.random.default_rng(0))
    assert (len(train), len(val)) == (45, 5)
    assert set(train.as_tuples()) | set(val.as_tuples()) == set(pairs.as_tuples())
    assert not set(train.as_tuples()) & set(val.as_tuples())


def test_split_pairs_zero_fraction():
    pairs = PairDataset.from_tuples([(0, 1), (0, 2)])
    train, val = split_pairs(pairs, 0.0, np.random.default_rng(0))
    assert len(train) == 2 and len(val) == 0


def test_split_indices_matches_split_pairs():
    pairs = PairDataset.from_tuples([(i, i + 100) for i in range(20)])
    train_idx, val_idx = split_indices(len(pairs), 0.25, np.random.default_rng(3))
    train, val = split_pairs(pairs, 0.25, np.random.default_rng(3))
    assert [pairs.as_tuples()[i] for i in train_idx] == train.as_tuples()
    assert [pairs.as_tuples()[i] for i in val_idx] == val.as_tuples()
