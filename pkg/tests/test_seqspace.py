import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from iopkit.errors import InvalidLabelError
from iopkit.seqspace import (
    PermutationLabel,
    index_to_perm,
    label_from_str,
    label_to_str,
    perm_to_index,
    permutation_mask,
    tokens_to_str,
    vocab_for,
)


def lexicographic_rank(ids):
    """Oracle: position of the id sequence among all sorted permutations."""
    ordered = sorted(itertools.permutations(sorted(ids)))
    return ordered.index(tuple(ids))


def test_vocab_n3():
    v = vocab_for(3)
    assert v.tokens == ((0, 1), (0, 2), (1, 2))
    assert v.size == 3
    assert v.num_classes == 6


def test_vocab_n4():
    v = vocab_for(4)
    assert v.size == 6
    assert v.num_classes == 720


def test_identity_order_is_rank_zero():
    label = PermutationLabel(n=3, tokens=((0, 1), (0, 2), (1, 2)))
    assert perm_to_index(label) == 0


def test_reversed_order_rank():
    label = PermutationLabel(n=3, tokens=((1, 2), (0, 2), (0, 1)))
    assert perm_to_index(label) == 5
    assert lexicographic_rank(label.token_ids()) == 5


def test_n4_identity_and_class_count():
    v = vocab_for(4)
    label = PermutationLabel(n=4, tokens=v.tokens)
    assert perm_to_index(label) == 0
    assert v.num_classes == math.factorial(6)


def test_rank_matches_oracle_for_all_n3_perms():
    v = vocab_for(3)
    for perm in itertools.permutations(v.tokens):
        label = PermutationLabel(n=3, tokens=perm)
        assert perm_to_index(label) == lexicographic_rank(label.token_ids())


def test_index_to_perm_first_and_last():
    v = vocab_for(3)
    assert index_to_perm(0, v).tokens == v.tokens
    assert index_to_perm(5, v).tokens == tuple(reversed(v.tokens))


def test_index_range_errors():
    v = vocab_for(3)
    with pytest.raises(ValueError):
        index_to_perm(-1, v)
    with pytest.raises(ValueError):
        index_to_perm(6, v)


@pytest.mark.parametrize("n", [3, 4])
def test_bijection_exhaustive(n):
    v = vocab_for(n)
    for idx in range(v.num_classes):
        assert perm_to_index(index_to_perm(idx, v)) == idx


def test_invalid_labels_rejected():
    with pytest.raises(InvalidLabelError):
        PermutationLabel(n=3, tokens=((0, 1), (0, 1), (1, 2)))
    with pytest.raises(InvalidLabelError):
        PermutationLabel(n=3, tokens=((0, 1), (0, 2)))
    with pytest.raises(InvalidLabelError):
        PermutationLabel(n=3, tokens=((0, 1), (0, 2), (1, 3)))


def test_mask_examples():
    assert permutation_mask([], 3).tolist() == [True, True, True]
    assert permutation_mask([1], 3).tolist() == [True, False, True]
    assert permutation_mask([0, 2], 3).tolist() == [False, True, False]


@given(
    m=st.sampled_from([3, 6]),
    seed=st.integers(min_value=0, max_value=2**32 - 1),
)
def test_greedy_masked_decoding_is_a_permutation(m, seed):
    rng = np.random.default_rng(seed)
    logits = rng.normal(size=(m, m))
    emitted = []
    for step in range(m):
        step_logits = logits[step].copy()
        step_logits[~permutation_mask(emitted, m)] = -np.inf
        emitted.append(int(np.argmax(step_logits)))
    assert sorted(emitted) == list(range(m))


def test_forced_final_token():
    mask = permutation_mask([0, 1], 3)
    assert mask.tolist() == [False, False, True]
    assert int(np.argmax(np.where(mask, 0.0, -np.inf))) == 2


def test_token_string_round_trip():
    label = PermutationLabel(n=3, tokens=((0, 1), (1, 2), (0, 2)))
    text = label_to_str(label)
    assert text == "12 23 13"
    assert label_from_str(text, 3) == label


def test_token_str_rendering():
    assert tokens_to_str([(0, 1), (2, 3)]) == "12 34"
