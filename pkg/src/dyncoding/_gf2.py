"""Compiled GF(2) row operations on bit-packed rows.

A row of ``width`` bits is stored as ``words`` little-endian uint64 words,
bit j of the vector being bit (j % 64) of word j // 64.  Rows of a basis are
kept sorted by pivot column; ``pw``/``pm`` hold each pivot's word index and
single-bit mask.
"""

from __future__ import annotations

import numpy as np
from numba import njit

ONE = np.uint64(1)
ZERO = np.uint64(0)


def words_for(width: int) -> int:
    return max(1, -(-width // 64))


def to_words(value: int, words: int) -> np.ndarray:
    return np.frombuffer(value.to_bytes(8 * words, "little"), dtype=np.uint64).copy()


def from_words(arr: np.ndarray) -> int:
    return int.from_bytes(arr.tobytes(), "little")


@njit(cache=True)
def insert(rows, pw, pm, rank, v):
    """Reduce v against the basis and add it if non-zero; returns the new rank."""
    nw = v.shape[0]
    for i in range(rank):
        if v[pw[i]] & pm[i]:
            for j in range(nw):
                v[j] ^= rows[i, j]
    lead = -1
    for j in range(nw):
        if v[j] != ZERO:
            lead = j
            break
    if lead < 0:
        return rank
    x = v[lead]
    m = x & (~x + ONE)
    for i in range(rank):
        if rows[i, lead] & m:
            for j in range(nw):
                rows[i, j] ^= v[j]
    pos = rank
    for i in range(rank):
        if pw[i] > lead or (pw[i] == lead and pm[i] > m):
            pos = i
            break
    for i in range(rank, pos, -1):
        for j in range(nw):
            rows[i, j] = rows[i - 1, j]
        pw[i] = pw[i - 1]
        pm[i] = pm[i - 1]
    for j in range(nw):
        rows[pos, j] = v[j]
    pw[pos] = lead
    pm[pos] = m
    return rank + 1


@njit(cache=True)
def reduces_to_zero(rows, pw, pm, rank, v):
    nw = v.shape[0]
    w = v.copy()
    for i in range(rank):
        if w[pw[i]] & pm[i]:
            for j in range(nw):
                w[j] ^= rows[i, j]
    for j in range(nw):
        if w[j] != ZERO:
            return False
    return True


@njit(cache=True)
def combine(rows, rank, sel, out):
    """out = XOR of rows i whose bit i is set in the little-endian words ``sel``."""
    nw = out.shape[0]
    for j in range(nw):
        out[j] = ZERO
    for i in range(rank):
        if (sel[i >> 6] >> np.uint64(i & 63)) & ONE:
            for j in range(nw):
                out[j] ^= rows[i, j]
