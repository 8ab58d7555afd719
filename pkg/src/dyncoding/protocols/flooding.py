"""Token-forwarding baseline: flood the smallest undelivered tokens per epoch."""

from __future__ import annotations

from bisect import bisect_left, insort

from ..coding import Token
from ..simulator import Message, Node
from .common import RunParams, Tag


class TokenNode(Node):
    """Shared bookkeeping for protocols that end up holding whole tokens."""

    def __init__(self, uid: int, params: RunParams, tokens: list[Token]):
        super().__init__(uid)
        self.params = params
        self.tokens: dict[tuple, Token] = {tok.id: tok for tok in tokens}
        self._values = {tok.id: tok.value for tok in tokens}
        self.delivered: set = set()
        self._und_ids = sorted(self.tokens)

    def learn(self, tok: Token) -> None:
        tid = tok.id
        if tid not in self.tokens:
            self.tokens[tid] = tok
            self._values[tid] = tok.value
            insort(self._und_ids, tid)

    def deliver(self, tid: tuple) -> None:
        if tid in self.tokens and tid not in self.delivered:
            self.delivered.add(tid)
            ids = self._und_ids
            del ids[bisect_left(ids, tid)]

    def undelivered(self) -> list[Token]:
        """Known, undelivered tokens in id order."""
        tokens = self.tokens
        return [tokens[i] for i in self._und_ids]

    def undelivered_count(self) -> int:
        return len(self._und_ids)

    def known(self) -> dict:
        return self._values

    def known_count(self) -> int:
        return len(self.tokens)

    def rank(self) -> int:
        return len(self.tokens)


class FloodNode(TokenNode):
    """Per epoch of E rounds, rebroadcast the ``cap`` smallest undelivered tokens.

    After E >= n - 1 rounds the globally smallest ``cap`` undelivered tokens
    have reached everyone, so every node marks the same tokens delivered.  An
    epoch in which a node neither sends nor hears a token means no node had
    any left; all nodes see that at once and stop.
    """

    def __init__(self, uid: int, params: RunParams, tokens: list[Token], epoch: int | None = None):
        super().__init__(uid, params, tokens)
        self.cap = params.forward_cap
        self.E = epoch or params.epoch
        self.active_this_epoch = False
        self.epochs = 0

    def phase(self) -> str:
        return f"flood:{self.epochs}"

    def _batch(self) -> list[Token]:
        tokens = self.tokens
        return [tokens[i] for i in self._und_ids[: self.cap]]

    def emit(self, t: int) -> Message | None:
        batch = self._batch()
        if not batch:
            return None
        self.active_this_epoch = True
        return Message(Tag.TOKENS, tuple(batch), len(batch) * self.params.token_bits)

    def receive(self, t: int, msgs: list[Message]) -> None:
        for m in msgs:
            if m.tag == Tag.TOKENS:
                self.active_this_epoch = True
                for tok in m.body:
                    self.learn(tok)
        if (t + 1) % self.E == 0:
            self._end_epoch()

    def _end_epoch(self) -> None:
        self.epochs += 1
        if not self.active_this_epoch:
            self.terminated = True
            return
        for tok in self._batch():
            self.deliver(tok.id)
        self.active_this_epoch = False
