"""Run parameters shared by all nodes and the message tags on the wire."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from enum import IntEnum

from ..coding import Token
from ..finite_field import FieldSpec
from ..simulator import BudgetExceeded, Constants, Message, RunConfig, log2_ceil


class Tag(IntEnum):
    TOKENS = 1
    TOKENS_MORE = 2  # token list; sender saw undelivered tokens somewhere
    CODED = 3
    CHUNK = 4
    MAX_COUNT = 5
    PRIORITY = 6
    PRIORITY_MORE = 7
    LUBY_MAX = 8
    LUBY_DEACTIVATE = 9
    TREE = 10
    UP = 11
    DOWN = 12
    IDLE = 13
    COUNT_RANGE = 14


class StallDetected(RuntimeError):
    pass


@dataclass(frozen=True)
class RunParams:
    """Everything a node may know in advance: n, k-independent sizes, constants."""

    n: int
    d: int
    b: int
    q: int
    T: int
    constants: Constants
    uid_bits: int
    seq_bits: int

    @classmethod
    def from_config(cls, config: RunConfig, holdings) -> "RunParams":
        per_node = max((len(h) for h in holdings), default=0)
        return cls(
            n=config.n,
            d=config.d,
            b=config.b,
            q=config.q,
            T=config.T,
            constants=config.constants,
            uid_bits=max(1, log2_ceil(config.n)),
            seq_bits=log2_ceil(per_node),
        )

    @cached_property
    def field(self) -> FieldSpec:
        return FieldSpec(self.q)

    @property
    def id_bits(self) -> int:
        return self.uid_bits + self.seq_bits

    @property
    def token_bits(self) -> int:
        """A token on the wire: its id followed by its d bits."""
        return self.id_bits + self.d

    @property
    def epoch(self) -> int:
        return max(1, self.constants.c_epoch * self.n)

    @property
    def forward_cap(self) -> int:
        return self.b // self.token_bits

    @property
    def count_bits(self) -> int:
        return max(1, log2_ceil(self.n + 1))


def encode_token(tok: Token, params: RunParams) -> int:
    """id || bits as one integer of ``params.token_bits`` bits."""
    ident = (tok.origin << params.seq_bits) | tok.seq
    return (ident << params.d) | tok.value


def decode_token(word: int, params: RunParams) -> Token:
    value = word & ((1 << params.d) - 1)
    ident = word >> params.d
    seq = ident & ((1 << params.seq_bits) - 1)
    origin = ident >> params.seq_bits
    return Token(origin, seq, value, params.d)


@dataclass(frozen=True)
class BlockLayout:
    """How a coded vector of ``capacity`` bits is split into header and blocks.

    A block carries up to ``per_block`` tokens (id and bits each) behind a
    small count field holding ``tokens - 1``; the header has room for
    ``max_blocks`` coefficients.
    """

    capacity: int
    per_block: int
    count_field: int
    max_blocks: int
    payload_bits: int
    payload_symbols: int

    @classmethod
    def plan(cls, capacity_bits: int, params: RunParams) -> "BlockLayout":
        field = params.field
        tb = params.token_bits
        g = 1
        while True:
            nxt = g + 1
            if (nxt - 1).bit_length() + nxt * tb > capacity_bits // 2:
                break
            g = nxt
        cf = (g - 1).bit_length()
        payload_bits = cf + g * tb
        payload_symbols = field.symbols_for(payload_bits)
        max_blocks = (capacity_bits - payload_symbols * field.sym_bits) // field.sym_bits
        if max_blocks < 1:
            raise BudgetExceeded(
                f"{capacity_bits}-bit vectors cannot hold a coefficient and a {payload_bits}-bit block"
            )
        return cls(capacity_bits, g, cf, max_blocks, payload_bits, payload_symbols)

    @property
    def batch_tokens(self) -> int:
        return self.per_block * self.max_blocks

    def pack(self, tokens: list[Token], params: RunParams) -> int:
        if not 1 <= len(tokens) <= self.per_block:
            raise ValueError(f"block holds 1..{self.per_block} tokens, got {len(tokens)}")
        word = len(tokens) - 1
        for tok in tokens:
            word = (word << params.token_bits) | encode_token(tok, params)
        word <<= (self.per_block - len(tokens)) * params.token_bits
        return word

    def unpack(self, word: int, params: RunParams) -> list[Token]:
        tb = params.token_bits
        count = (word >> (self.per_block * tb)) + 1
        out = []
        for i in range(count):
            shift = (self.per_block - 1 - i) * tb
            out.append(decode_token((word >> shift) & ((1 << tb) - 1), params))
        return out


class CompletionFlag:
    """Detects, one window late, that every node has finished decoding.

    A node that is busy at any point of a window, or hears a flagged
    message during it, flags every message for the rest of the window.  A
    busy node flags from the window's first round on, so with windows of at
    least n - 1 rounds the flag reaches everyone; a window in which a node
    neither raised nor heard the flag is quiet at all nodes at once.  The
    flag rides in the tag byte, so it costs no body bits.
    """

    def __init__(self, window: int):
        self.window = window
        self.raised = False
        self.heard = False

    def outgoing(self, msg: Message | None, busy: bool) -> Message | None:
        if busy:
            self.raised = True
        if not (self.raised or self.heard):
            return msg
        if msg is None:
            return Message(Tag.IDLE, None, 0, True)
        return Message(msg.tag, msg.body, msg.bits, True)

    def incoming(self, msgs: list) -> list:
        if not self.heard:
            for m in msgs:
                if m.flag:
                    self.heard = True
                    break
        return msgs

    def window_end(self, tau: int) -> bool:
        """Call after round ``tau`` of the stage; True when that round closed a quiet window."""
        if (tau + 1) % self.window:
            return False
        quiet = not (self.raised or self.heard)
        self.raised = self.heard = False
        return quiet
