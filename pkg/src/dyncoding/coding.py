"""Coded vectors, incremental Gaussian elimination, sensing and decoding.

A coded vector is a coefficient header in F_q^k followed by a payload in
F_q^d'.  Internally a vector has a *raw* form used on the hot path: for q=2
an ``int`` whose bit ``j`` is symbol ``j`` (header symbols occupy bits
``0..k-1``), for larger q a tuple of symbols.  Row reduction treats the
header and payload as one vector of width ``k + d'``.
"""

from __future__ import annotations

import random
from bisect import bisect_left
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from . import _gf2
from .finite_field import FieldElement, FieldSpec, ff_inv, pack_token, unpack_token

Raw = Union[int, tuple]


class DimensionMismatch(ValueError):
    """A vector's length disagrees with the basis it is inserted into."""


class PreconditionViolated(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Token:
    """A d-bit token; ``value`` holds the bits MSB first."""

    origin: int
    seq: int
    value: int
    d: int

    @property
    def id(self) -> tuple[int, int]:
        return (self.origin, self.seq)

    def bit_list(self) -> list[int]:
        return [(self.value >> (self.d - 1 - i)) & 1 for i in range(self.d)]


@dataclass(frozen=True)
class CodedVector:
    coeffs: tuple[FieldElement, ...]
    payload: tuple[FieldElement, ...]

    @property
    def width(self) -> int:
        return len(self.coeffs) + len(self.payload)

    def symbols(self) -> tuple[FieldElement, ...]:
        return self.coeffs + self.payload

    def is_zero(self) -> bool:
        return not any(self.coeffs) and not any(self.payload)

    def to_raw(self, field: FieldSpec) -> Raw:
        return symbols_to_raw(self.symbols(), field)

    @classmethod
    def from_raw(cls, raw: Raw, field: FieldSpec, k: int, dprime: int) -> "CodedVector":
        syms = raw_to_symbols(raw, field, k + dprime)
        return cls(tuple(syms[:k]), tuple(syms[k:]))


def symbols_to_raw(symbols: Sequence[int], field: FieldSpec) -> Raw:
    if field.q == 2:
        value = 0
        for j, s in enumerate(symbols):
            if s:
                value |= 1 << j
        return value
    return tuple(int(s) % field.q for s in symbols)


def raw_to_symbols(raw: Raw, field: FieldSpec, width: int) -> list[int]:
    if field.q == 2:
        return [(raw >> j) & 1 for j in range(width)]
    return list(raw)


def source_vector(index: int, bits: Sequence[int], field: FieldSpec, k: int) -> CodedVector:
    """The pristine vector e_index ++ pack(bits); ``index`` is 0-based."""
    if not 0 <= index < k:
        raise ValueError(f"index {index} outside batch of size {k}")
    coeffs = [0] * k
    coeffs[index] = 1
    return CodedVector(tuple(coeffs), tuple(pack_token(bits, field)))


def source_raw(index: int, payload_symbols: Sequence[int], field: FieldSpec, k: int) -> Raw:
    if field.q == 2:
        value = 1 << index
        for j, s in enumerate(payload_symbols):
            if s:
                value |= 1 << (k + j)
        return value
    head = [0] * k
    head[index] = 1
    return tuple(head) + tuple(payload_symbols)


def payload_bits_to_raw_symbols(value: int, nbits: int, field: FieldSpec) -> list[int]:
    """Pack an nbits-wide integer (MSB first) into payload symbols."""
    bits = [(value >> (nbits - 1 - i)) & 1 for i in range(nbits)]
    return pack_token(bits, field)


class KnowledgeBasis:
    """Reduced row-echelon basis of everything a node has received.

    Rows are normalised (leading coefficient 1) and every pivot column is
    zero in all other rows, so two bases with the same span hold the same
    rows.  Rows are kept sorted by pivot column.  Over GF(2) the rows live
    bit-packed in a uint64 matrix and are reduced by compiled kernels.
    """

    def __init__(self, field: FieldSpec, k: int, dprime: int):
        self.field = field
        self.k = k
        self.dprime = dprime
        self.width = k + dprime
        self._rank = 0
        if field.q == 2:
            slots = max(1, self.width)
            self._nw = _gf2.words_for(self.width)
            self._mat = np.zeros((slots, self._nw), dtype=np.uint64)
            self._pw = np.zeros(slots, dtype=np.int64)
            self._pm = np.zeros(slots, dtype=np.uint64)
        else:
            self._pivs: list[int] = []
            self._rows: list[tuple] = []

    @property
    def rank(self) -> int:
        return self._rank

    @property
    def full(self) -> bool:
        return self._rank >= self.k

    def copy(self) -> "KnowledgeBasis":
        other = KnowledgeBasis(self.field, self.k, self.dprime)
        other._rank = self._rank
        if self.field.q == 2:
            other._mat = self._mat.copy()
            other._pw = self._pw.copy()
            other._pm = self._pm.copy()
        else:
            other._pivs = list(self._pivs)
            other._rows = list(self._rows)
        return other

    def pivots(self) -> list[int]:
        if self.field.q == 2:
            return [64 * int(w) + int(m).bit_length() - 1 for w, m in zip(self._pw[: self._rank], self._pm[: self._rank])]
        return list(self._pivs)

    def raw_rows(self) -> list[Raw]:
        """Rows in ascending pivot order."""
        if self.field.q == 2:
            return [_gf2.from_words(self._mat[i]) for i in range(self._rank)]
        return list(self._rows)

    @property
    def rows(self) -> list[CodedVector]:
        return [CodedVector.from_raw(r, self.field, self.k, self.dprime) for r in self.raw_rows()]

    def _check(self, v: CodedVector) -> None:
        if len(v.coeffs) != self.k or len(v.payload) != self.dprime:
            raise DimensionMismatch(
                f"vector has shape ({len(v.coeffs)}, {len(v.payload)}), basis expects ({self.k}, {self.dprime})"
            )

    def insert(self, v: CodedVector) -> bool:
        """Insert a vector; returns True iff the rank grew."""
        self._check(v)
        return self.insert_raw(v.to_raw(self.field))

    def insert_raw(self, v: Raw) -> bool:
        if self.field.q == 2:
            if v < 0 or v >> self.width:
                raise DimensionMismatch(f"raw vector wider than {self.width} bits")
            if not v:
                return False
            new = _gf2.insert(self._mat, self._pw, self._pm, self._rank, _gf2.to_words(v, self._nw))
            grew = new > self._rank
            self._rank = new
            return grew
        if len(v) != self.width:
            raise DimensionMismatch(f"raw vector of length {len(v)}, basis width {self.width}")
        return self._insert_gfq(list(v))

    def _insert_gfq(self, v: list[int]) -> bool:
        q = self.field.q
        for p, row in zip(self._pivs, self._rows):
            c = v[p]
            if c:
                v = [(a - c * b) % q for a, b in zip(v, row)]
        lead = next((j for j, a in enumerate(v) if a), None)
        if lead is None:
            return False
        inv = ff_inv(v[lead], self.field)
        v = tuple((a * inv) % q for a in v)
        rows = self._rows
        for i, row in enumerate(rows):
            c = row[lead]
            if c:
                rows[i] = tuple((a - c * b) % q for a, b in zip(row, v))
        pos = bisect_left(self._pivs, lead)
        self._pivs.insert(pos, lead)
        rows.insert(pos, v)
        self._rank += 1
        return True

    def insert_words(self, words: np.ndarray) -> bool:
        """GF(2) only: insert a bit-packed row as produced by :meth:`random_words`."""
        new = _gf2.insert(self._mat, self._pw, self._pm, self._rank, words.copy())
        grew = new > self._rank
        self._rank = new
        return grew

    def random_words(self, rng: random.Random) -> np.ndarray | None:
        """GF(2) only: :meth:`random_raw` as bit-packed words, same coins."""
        rank = self._rank
        if not rank:
            return None
        sel = np.frombuffer(rng.getrandbits(rank).to_bytes(8 * _gf2.words_for(rank), "little"), dtype=np.uint64)
        out = np.empty(self._nw, dtype=np.uint64)
        _gf2.combine(self._mat, rank, sel, out)
        return out

    def contains_raw(self, v: Raw) -> bool:
        if self.field.q == 2:
            if v >> self.width:
                raise DimensionMismatch(f"raw vector wider than {self.width} bits")
            return bool(_gf2.reduces_to_zero(self._mat, self._pw, self._pm, self._rank, _gf2.to_words(v, self._nw)))
        return not self.copy().insert_raw(v)

    def random_raw(self, rng: random.Random) -> Raw | None:
        """Uniform random combination of the canonical rows; None iff rank 0.

        Over GF(2) row i is selected by bit i of ``getrandbits(rank)``.
        """
        rank = self._rank
        if not rank:
            return None
        if self.field.q == 2:
            return _gf2.from_words(self.random_words(rng))
        q = self.field.q
        acc = [0] * self.width
        for row in self._rows:
            c = rng.randrange(q)
            if c:
                acc = [(a + c * b) % q for a, b in zip(acc, row)]
        return tuple(acc)

    def senses(self, mu: Sequence[int]) -> bool:
        if len(mu) != self.k:
            raise DimensionMismatch(f"mu has length {len(mu)}, expected {self.k}")
        q = self.field.q
        if q == 2:
            mask = symbols_to_raw(mu, self.field)
            return any(bin(row & mask).count("1") & 1 for row in self.raw_rows())
        return any(sum(a * b for a, b in zip(row[: self.k], mu)) % q for row in self._rows)

    def decoded_payloads(self) -> dict[int, list[int]]:
        """Map 0-based index i -> payload symbols, for every e_i in the header span."""
        out: dict[int, list[int]] = {}
        k = self.k
        if self.field.q == 2:
            hmask = (1 << k) - 1
            for p, row in zip(self.pivots(), self.raw_rows()):
                if (row & hmask) == 1 << p:
                    payload = row >> k
                    out[p] = [(payload >> j) & 1 for j in range(self.dprime)]
            return out
        for p, row in zip(self._pivs, self._rows):
            if p < k and all(row[j] == (1 if j == p else 0) for j in range(k)):
                out[p] = list(row[k:])
        return out

    def canonical(self) -> tuple:
        return tuple(self.raw_rows())


def basis_insert(basis: KnowledgeBasis, v: CodedVector) -> KnowledgeBasis:
    """Value-style insert: returns a new basis and leaves the input untouched."""
    out = basis.copy()
    out.insert(v)
    return out


def random_combination(basis: KnowledgeBasis, rng: random.Random) -> CodedVector | None:
    raw = basis.random_raw(rng)
    if raw is None:
        return None
    return CodedVector.from_raw(raw, basis.field, basis.k, basis.dprime)


def senses(basis: KnowledgeBasis, mu: Sequence[int]) -> bool:
    return basis.senses(mu)


def decode_tokens(basis: KnowledgeBasis, d: int | None = None) -> dict[int, list[int]]:
    """Decoded token bits keyed by 0-based index."""
    field = basis.field
    if d is None:
        d = basis.dprime * field.pack_bits
    return {i: unpack_token(p, d, field) for i, p in basis.decoded_payloads().items()}


def sensing_transfer_trial(basis: KnowledgeBasis, mu: Sequence[int], rng: random.Random) -> bool:
    """Send one random combination to a fresh node; does the recipient sense mu?"""
    if not basis.senses(mu):
        raise PreconditionViolated("basis does not sense mu")
    raw = basis.random_raw(rng)
    fresh = KnowledgeBasis(basis.field, basis.k, basis.dprime)
    fresh.insert_raw(raw)
    return fresh.senses(mu)


def wire_bits(k: int, dprime: int, field: FieldSpec) -> int:
    """Bits occupied by one coded vector on the wire."""
    return (k + dprime) * field.sym_bits


def encode_wire(v: CodedVector, field: FieldSpec) -> str:
    """Header first, each symbol big-endian in ``sym_bits`` bits."""
    w = field.sym_bits
    return "".join(format(s, f"0{w}b") for s in v.symbols())


def decode_wire(bits: str, field: FieldSpec, k: int, dprime: int) -> CodedVector:
    w = field.sym_bits
    if len(bits) != (k + dprime) * w:
        raise DimensionMismatch(f"wire string has {len(bits)} bits, expected {(k + dprime) * w}")
    syms = [int(bits[i:i + w], 2) for i in range(0, len(bits), w)]
    if any(s >= field.q for s in syms):
        raise ValueError("wire symbol outside the field")
    return CodedVector(tuple(syms[:k]), tuple(syms[k:]))
