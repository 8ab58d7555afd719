"""Indexed broadcast by random linear network coding."""

from __future__ import annotations

import random

from ..coding import KnowledgeBasis, Token, source_raw
from ..finite_field import bits_to_int, pack_token, unpack_token
from ..simulator import BudgetExceeded, Message, Node
from .common import CompletionFlag, RunParams, Tag


def indexed_basis(params: RunParams, k: int, index_of: dict, tokens: list[Token]) -> KnowledgeBasis:
    """A basis holding the pristine vectors of ``tokens`` at their agreed indices."""
    field = params.field
    basis = KnowledgeBasis(field, k, field.symbols_for(params.d))
    for tok in tokens:
        basis.insert_raw(source_raw(index_of[tok.id], pack_token(tok.bit_list(), field), field, k))
    return basis


def decode_indexed(basis: KnowledgeBasis, ids: list[tuple], d: int) -> dict:
    """Token id -> value for every index whose unit vector lies in the header span."""
    field = basis.field
    return {ids[i]: bits_to_int(unpack_token(p, d, field)) for i, p in basis.decoded_payloads().items()}


class RlncNode(Node):
    """Broadcasts a fresh random combination of its basis every round.

    ``ids`` lists the token ids in index order; it is the pre-agreed index
    map the protocol assumes.  Nodes stop one quiet completion window after
    everyone is full, or after ``rlnc_cap * (n + k)`` rounds at the latest.
    """

    def __init__(self, uid: int, params: RunParams, ids: list[tuple], tokens: list[Token], rng: random.Random):
        super().__init__(uid)
        self.params = params
        self.ids = ids
        self.k = len(ids)
        self.rng = rng
        index_of = {tid: i for i, tid in enumerate(ids)}
        self.basis = indexed_basis(params, self.k, index_of, tokens)
        self.bits = self.basis.width * params.field.sym_bits
        self._packed = params.field.q == 2
        if self.k and self.bits > params.b:
            raise BudgetExceeded(f"coded vector of {self.bits} bits exceeds b={params.b}")
        self.stop_at = params.constants.rlnc_cap * (params.n + self.k)
        self.done_flag = CompletionFlag(params.epoch)
        if self.k == 0:
            self.terminated = True

    def phase(self) -> str:
        return "rlnc"

    def emit(self, t: int) -> Message | None:
        # Over GF(2) the body is the bit-packed word array; otherwise a symbol tuple.
        basis = self.basis
        body = basis.random_words(self.rng) if self._packed else basis.random_raw(self.rng)
        msg = None if body is None else Message(Tag.CODED, body, self.bits)
        return self.done_flag.outgoing(msg, not self.basis.full)

    def receive(self, t: int, msgs: list[Message]) -> None:
        basis = self.basis
        for m in self.done_flag.incoming(msgs):
            if basis.full:
                break
            if m.tag == Tag.CODED:
                if self._packed:
                    basis.insert_words(m.body)
                else:
                    basis.insert_raw(m.body)
        if self.done_flag.window_end(t) or t + 1 >= self.stop_at:
            self.terminated = True

    def rank(self) -> int:
        return self.basis.rank

    def known_count(self) -> int:
        return self.basis.rank

    def known(self) -> dict:
        return decode_indexed(self.basis, self.ids, self.params.d)
