"""Interleaved bit encodings over one unbounded integer word.

n writers share a single add-only word. Writer i owns every bit position
congruent to i mod n, and two layouts are used:

* unary: writer i represents value v by setting positions 1*n+i .. v*n+i
  (one bit per unit; position 0*n+i stays unused, value 0 sets nothing).
  Raising a value from prev to k adds sum(2**(v*n+i) for v in prev+1..k),
  so concurrent raises never collide and the word only grows.
* binary: bit j of writer i's current value lives at position j*n+i.
  Changing prev -> v adds the positive adjustment for newly set bits and
  subtracts the adjustment for cleared ones.

Decoders recover the per-writer view from a raw word and reject words that
no sequence of adjustments can produce.
"""

from __future__ import annotations

from .errors import ConfigurationError, IntegrityError


def _check_writer(n: int, i: int) -> None:
    if n < 1:
        raise ConfigurationError(f"need at least one writer, got n={n}")
    if not 0 <= i < n:
        raise ConfigurationError(f"writer index {i} outside 0..{n - 1}")


def unary_delta(n: int, i: int, prev: int, k: int) -> int:
    """Added word mass when writer i raises its unary value prev -> k."""
    _check_writer(n, i)
    if prev < 0 or k <= prev:
        raise ConfigurationError(f"unary raise needs k > prev >= 0, got prev={prev} k={k}")
    total = 0
    for v in range(prev + 1, k + 1):
        total += 1 << (v * n + i)
    return total


def decode_unary_max(raw: int, n: int) -> list[int]:
    """Per-writer maxima from a unary word; IntegrityError on gaps or stray bits."""
    if n < 1:
        raise ConfigurationError(f"need at least one writer, got n={n}")
    if raw < 0:
        raise IntegrityError("negative word")
    values = []
    for i in range(n):
        if raw >> i & 1:
            raise IntegrityError(f"writer {i}: reserved position {i} is set")
        v = 0
        while raw >> ((v + 1) * n + i) & 1:
            v += 1
        # nothing above the contiguous run may be set
        pos = (v + 2) * n + i
        rest = raw >> pos
        while rest:
            if rest & 1:
                raise IntegrityError(f"writer {i}: unary run of length {v} "
                                     f"but position {pos} is set")
            rest >>= n
            pos += n
        values.append(v)
    return values


def binary_adjust(n: int, i: int, prev_val: int, v: int) -> tuple[int, int]:
    """(positive, negative) word adjustments for writer i changing prev_val -> v."""
    _check_writer(n, i)
    if prev_val < 0 or v < 0:
        raise ConfigurationError("binary layout holds non-negative values only")
    if v == prev_val:
        raise ConfigurationError("binary adjust requires a changed value; "
                                 "equal values take the zero-add path upstream")
    pos = neg = 0
    gained = v & ~prev_val
    lost = prev_val & ~v
    j = 0
    while gained or lost:
        if gained & 1:
            pos += 1 << (j * n + i)
        if lost & 1:
            neg += 1 << (j * n + i)
        gained >>= 1
        lost >>= 1
        j += 1
    return pos, neg


def decode_binary_view(raw: int, n: int) -> list[int]:
    """Per-writer values from a binary word."""
    if n < 1:
        raise ConfigurationError(f"need at least one writer, got n={n}")
    if raw < 0:
        raise IntegrityError("negative word")
    values = [0] * n
    j = 0
    while raw:
        for i in range(n):
            if raw & (1 << i):
                values[i] |= 1 << j
        raw >>= n
        j += 1
    return values
