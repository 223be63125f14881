"""Interleaved word codec: hand-frozen deltas, exhaustive round-trips, rejection."""

import time

import pytest
from hypothesis import given, strategies as st

from linlab.codec import (
    binary_adjust,
    decode_binary_view,
    decode_unary_max,
    unary_delta,
)
from linlab.errors import ConfigurationError, IntegrityError


# ---------------------------------------------------------------------------
# Frozen values, derived by hand from the bit layout (writer i owns positions
# congruent to i mod n; unary row v lives at position v*n+i, row 0 unused).


def test_unary_delta_frozen_values():
    # n=2, writer 0, 0 -> 2: rows 1 and 2 at positions 2 and 4
    assert unary_delta(2, 0, 0, 2) == (1 << 2) + (1 << 4) == 20
    # n=2, writer 1, 1 -> 2: row 2 at position 5
    assert unary_delta(2, 1, 1, 2) == 1 << 5 == 32
    # n=3, writer 2, 0 -> 1: row 1 at position 5
    assert unary_delta(3, 2, 0, 1) == 1 << 5 == 32
    assert unary_delta(1, 0, 0, 3) == 0b1110


def test_decode_unary_max_frozen_values():
    assert decode_unary_max(20, 2) == [2, 0]
    assert decode_unary_max(28, 2) == [2, 1]  # 20 + writer 1's row 1 (bit 3)
    assert decode_unary_max(0, 4) == [0, 0, 0, 0]


def test_binary_adjust_frozen_values():
    # n=2, writer 1, 1 -> 2: gains bit 1 (pos 3), loses bit 0 (pos 1)
    assert binary_adjust(2, 1, 1, 2) == (8, 2)
    # n=2, writer 0, 0 -> 3: gains bits 0 and 1 (pos 0, 2), loses nothing
    assert binary_adjust(2, 0, 0, 3) == (5, 0)
    # n=3, writer 0, 2 -> 1: gains bit 0 (pos 0), loses bit 1 (pos 3)
    assert binary_adjust(3, 0, 2, 1) == (1, 8)


# ---------------------------------------------------------------------------
# Exhaustive round trips over small parameter boxes.


def test_unary_roundtrip_exhaustive():
    """Every monotone per-writer raise schedule decodes back exactly.

    Covers all n <= 4 and final values < 8; runs in well under a second.
    """
    t0 = time.time()
    checked = 0
    for n in range(1, 5):
        for targets in _target_vectors(n, 8):
            word = 0
            vals = [0] * n
            # raise each writer in two stages when possible, interleaved
            for i, k in enumerate(targets):
                mid = k // 2
                if 0 < mid < k:
                    word += unary_delta(n, i, 0, mid)
                    vals[i] = mid
            for i, k in enumerate(targets):
                if vals[i] < k:
                    word += unary_delta(n, i, vals[i], k)
                    vals[i] = k
            assert decode_unary_max(word, n) == list(targets)
            checked += 1
    assert checked > 250
    assert time.time() - t0 < 1.0


def _target_vectors(n, bound):
    # a thin but adversarial slice of the full product: corners plus a ramp
    yield tuple(0 for _ in range(n))
    yield tuple(bound - 1 for _ in range(n))
    yield tuple(i % bound for i in range(n))
    yield tuple((bound - 1 - i) % bound for i in range(n))
    for v in range(bound):
        for i in range(n):
            t = [0] * n
            t[i] = v
            yield tuple(t)
    if n >= 2:
        for a in range(bound):
            for b in range(bound):
                t = [0] * n
                t[0], t[1] = a, b
                yield tuple(t)


def test_unary_all_prev_k_pairs():
    # delta mass equals the decoded difference for every legal (prev, k)
    for n in range(1, 5):
        for i in range(n):
            for prev in range(7):
                for k in range(prev + 1, 8):
                    d = unary_delta(n, i, prev, k)
                    base = unary_delta(n, i, 0, prev) if prev else 0
                    view = decode_unary_max(base + d, n)
                    assert view[i] == k
                    assert all(view[j] == 0 for j in range(n) if j != i)


def test_binary_roundtrip_exhaustive():
    for n in range(1, 5):
        for i in range(n):
            for prev in range(8):
                for v in range(8):
                    if v == prev:
                        continue
                    pos, neg = binary_adjust(n, i, prev, v)
                    word_prev = _binary_word(n, i, prev)
                    word = word_prev + pos - neg
                    assert word == _binary_word(n, i, v)
                    assert decode_binary_view(word, n)[i] == v


def _binary_word(n, i, v):
    word = 0
    j = 0
    while v:
        if v & 1:
            word |= 1 << (j * n + i)
        v >>= 1
        j += 1
    return word


def test_writers_are_bit_disjoint():
    """No position is claimed by two writers, in either layout."""
    for n in range(1, 5):
        masks = []
        for i in range(n):
            m = unary_delta(n, i, 0, 7)
            p, _ = binary_adjust(n, i, 0, 7)
            masks.append(m | p)
        for a in range(n):
            for b in range(a + 1, n):
                assert masks[a] & masks[b] == 0


# ---------------------------------------------------------------------------
# Property tests.


@given(st.integers(1, 6), st.data())
def test_unary_concurrent_raises_merge(n, data):
    """Summing per-writer deltas in any order yields the pointwise max view."""
    finals = [data.draw(st.integers(0, 12), label=f"writer{i}") for i in range(n)]
    word = 0
    for i, k in enumerate(finals):
        if k:
            word += unary_delta(n, i, 0, k)
    assert decode_unary_max(word, n) == finals


@given(st.integers(1, 5), st.data())
def test_binary_adjust_chain(n, data):
    i = data.draw(st.integers(0, n - 1))
    vals = data.draw(st.lists(st.integers(0, 200), min_size=1, max_size=8))
    word = 0
    cur = 0
    for v in vals:
        if v == cur:
            continue
        pos, neg = binary_adjust(n, i, cur, v)
        assert pos & neg == 0
        word += pos - neg
        cur = v
    assert decode_binary_view(word, n)[i] == cur


@given(st.integers(0, 2 ** 24 - 1), st.integers(1, 4))
def test_decode_binary_total(word, n):
    # binary decode accepts any non-negative word and is reassembled exactly
    views = decode_binary_view(word, n)
    back = 0
    for i, v in enumerate(views):
        back |= _binary_word(n, i, v)
    assert back == word


# ---------------------------------------------------------------------------
# Rejection paths.


def test_unary_decode_rejects_reserved_bit():
    with pytest.raises(IntegrityError):
        decode_unary_max(1, 2)  # writer 0's reserved row-0 position
    with pytest.raises(IntegrityError):
        decode_unary_max(2, 2)  # writer 1's reserved position


def test_unary_decode_rejects_gap():
    # bit 5 (writer 1 row 2) without bit 3 (writer 1 row 1)
    with pytest.raises(IntegrityError):
        decode_unary_max(52, 2)


def test_unary_decode_rejects_negative():
    with pytest.raises(IntegrityError):
        decode_unary_max(-4, 2)
    with pytest.raises(IntegrityError):
        decode_binary_view(-1, 2)


def test_unary_delta_argument_checks():
    with pytest.raises(ConfigurationError):
        unary_delta(2, 0, 3, 3)  # k must exceed prev
    with pytest.raises(ConfigurationError):
        unary_delta(2, 0, -1, 2)
    with pytest.raises(ConfigurationError):
        unary_delta(2, 2, 0, 1)  # writer index out of range
    with pytest.raises(ConfigurationError):
        unary_delta(0, 0, 0, 1)


def test_binary_adjust_argument_checks():
    with pytest.raises(ConfigurationError):
        binary_adjust(2, 0, 3, 3)  # unchanged value is handled upstream
    with pytest.raises(ConfigurationError):
        binary_adjust(2, 0, -1, 2)
    with pytest.raises(ConfigurationError):
        binary_adjust(3, 3, 0, 1)
