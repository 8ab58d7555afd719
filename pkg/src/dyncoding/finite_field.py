"""Arithmetic in the prime field F_q and packing of bit strings into symbols."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

FieldElement = int

MAX_MODULUS = 2**32


class ZeroInverse(ZeroDivisionError):
    """Raised when inverting the zero element."""


def is_prime(q: int) -> bool:
    if q < 2:
        return False
    if q < 4:
        return True
    if q % 2 == 0:
        return False
    f = 3
    while f * f <= q:
        if q % f == 0:
            return False
        f += 2
    return True


@dataclass(frozen=True)
class FieldSpec:
    """Parameters of F_q.

    ``sym_bits`` is the wire width of one symbol (ceil(log2 q)); ``pack_bits``
    is how many payload bits one symbol carries losslessly (floor(log2 q)).
    """

    q: int = 2
    sym_bits: int = field(init=False)
    pack_bits: int = field(init=False)

    def __post_init__(self) -> None:
        if not isinstance(self.q, int) or not 2 <= self.q < MAX_MODULUS:
            raise ValueError(f"field size must be an integer in [2, 2^32), got {self.q!r}")
        if not is_prime(self.q):
            raise ValueError(f"field size {self.q} is not prime")
        object.__setattr__(self, "sym_bits", (self.q - 1).bit_length())
        object.__setattr__(self, "pack_bits", self.q.bit_length() - 1)

    def element(self, value: int) -> FieldElement:
        if not 0 <= value < self.q:
            raise ValueError(f"{value} is not an element of F_{self.q}")
        return value

    def symbols_for(self, d: int) -> int:
        """Number of symbols pack_token produces for a d-bit token."""
        return -(-d // self.pack_bits)


GF2 = FieldSpec(2)


def ff_add(a: FieldElement, b: FieldElement, spec: FieldSpec) -> FieldElement:
    return (a + b) % spec.q


def ff_sub(a: FieldElement, b: FieldElement, spec: FieldSpec) -> FieldElement:
    return (a - b) % spec.q


def ff_mul(a: FieldElement, b: FieldElement, spec: FieldSpec) -> FieldElement:
    return (a * b) % spec.q


def ff_inv(a: FieldElement, spec: FieldSpec) -> FieldElement:
    if a % spec.q == 0:
        raise ZeroInverse(f"0 has no inverse in F_{spec.q}")
    # Fermat: a^(q-2) is the inverse for prime q.
    return pow(a, spec.q - 2, spec.q)


def pack_token(bits: Sequence[int], spec: FieldSpec) -> list[FieldElement]:
    """Split a bit vector into symbols of ``spec.pack_bits`` bits, MSB first.

    The final symbol is zero-padded on the right.
    """
    d = len(bits)
    if d < 1:
        raise ValueError("token must have at least one bit")
    w = spec.pack_bits
    out = []
    for start in range(0, d, w):
        chunk = list(bits[start:start + w])
        chunk += [0] * (w - len(chunk))
        value = 0
        for bit in chunk:
            value = (value << 1) | (1 if bit else 0)
        out.append(value)
    return out


def unpack_token(symbols: Sequence[FieldElement], d: int, spec: FieldSpec) -> list[int]:
    w = spec.pack_bits
    if len(symbols) != spec.symbols_for(d):
        raise ValueError(f"expected {spec.symbols_for(d)} symbols for d={d}, got {len(symbols)}")
    bits = []
    for value in symbols:
        if not 0 <= value < (1 << w):
            raise ValueError(f"symbol {value} does not hold {w} payload bits")
        bits.extend((value >> (w - 1 - i)) & 1 for i in range(w))
    return bits[:d]


def int_to_bits(value: int, d: int) -> list[int]:
    return [(value >> (d - 1 - i)) & 1 for i in range(d)]


def bits_to_int(bits: Sequence[int]) -> int:
    value = 0
    for bit in bits:
        value = (value << 1) | (1 if bit else 0)
    return value


__all__ = [
    "FieldElement",
    "FieldSpec",
    "GF2",
    "ZeroInverse",
    "bits_to_int",
    "ff_add",
    "ff_inv",
    "ff_mul",
    "ff_sub",
    "int_to_bits",
    "is_prime",
    "pack_token",
    "unpack_token",
]
