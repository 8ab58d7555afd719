"""Coded broadcast stages: plain RLNC and T-stable patch sharing.

A stage is owned by one node and is stepped with the number of rounds
since the stage began.  Stages longer than one round assume the stage
start is aligned to a multiple of T, so each T-block has one topology.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from ..coding import KnowledgeBasis
from ..simulator import Message
from .common import RunParams, Tag
from .patches import (
    Chunker,
    Convergecast,
    PatchBuilder,
    TreeBroadcast,
    build_rounds,
    mis_phases,
    patch_radius,
)


@dataclass(frozen=True)
class StagePlan:
    """Schedule of one coded stage; identical at every node."""

    mode: str  # "single" or "patch"
    T: int
    chunks: int
    chunk_syms: int
    addressed: bool
    D: int = 0
    phases: int = 0
    build: int = 0

    @property
    def capacity_syms(self) -> int:
        return self.chunk_syms * self.chunks

    @property
    def meta_len(self) -> int:
        if self.mode == "single":
            return self.chunks
        return 5 * self.chunks + 4 * self.D

    @property
    def metas_per_block(self) -> int:
        if self.mode == "single":
            return self.T // self.chunks
        return (self.T - self.build) // self.meta_len

    @property
    def effective_radius(self) -> int:
        return self.D if self.mode == "patch" else 1


def plan_stage(params: RunParams, chunks: int = 0) -> StagePlan:
    """Pick patch mode when a patch build plus one meta-round fits in T rounds.

    Otherwise every node is its own patch and meta-rounds reduce to sending
    one long vector over ``chunks`` rounds.
    """
    sym = params.field.sym_bits
    T = params.T
    if T == 1:
        return StagePlan("single", 1, 1, params.b // sym, addressed=False)
    chunk_syms = (params.b - params.uid_bits) // sym
    D = patch_radius(params)
    phases = mis_phases(params)
    build = build_rounds(D, phases)
    prio_bits = params.constants.priority_factor * params.uid_bits
    fits = prio_bits + params.uid_bits <= params.b and 2 * params.uid_bits + D.bit_length() <= params.b
    if fits and chunk_syms >= 1:
        tv = chunks or (T - build - 4 * D) // 5
        if tv >= 1 and build + 5 * tv + 4 * D <= T:
            return StagePlan("patch", T, tv, chunk_syms, True, D, phases, build)
    tv = chunks or T
    if tv == 1:
        return StagePlan("single", T, 1, params.b // sym, addressed=False)
    return StagePlan("single", T, tv, chunk_syms, addressed=True)


class CodedStage:
    """Node-local share/pass machinery over a KnowledgeBasis."""

    def __init__(self, uid: int, params: RunParams, plan: StagePlan, basis: KnowledgeBasis, rng: random.Random):
        self.uid = uid
        self.params = params
        self.plan = plan
        self.basis = basis
        self.rng = rng
        self.sym_bits = params.field.sym_bits
        self.addr_bits = params.uid_bits if plan.addressed else 0
        self.chunker = Chunker(params.q, basis.width, plan.chunk_syms)
        if self.chunker.count > plan.chunks:
            raise ValueError(f"vectors need {self.chunker.count} chunks, plan allows {plan.chunks}")
        self.whole_bits = basis.width * self.sym_bits
        self._metas = plan.metas_per_block
        self._chunk_bits = [self.addr_bits + self.chunker.chunk_len(c) * self.sym_bits for c in range(self.chunker.count)]
        self.builder: PatchBuilder | None = None
        self._outgoing: list | None = None
        self._inbox: dict = {}
        self._up: Convergecast | None = None
        self._down: TreeBroadcast | None = None
        self.patch_vector = None
        self.meta_rounds_done = 0

    # -- plain RLNC -----------------------------------------------------------

    def _rlnc_emit(self) -> Message | None:
        raw = self.basis.random_raw(self.rng)
        if raw is None:
            return None
        return Message(Tag.CODED, raw, self.whole_bits)

    def _rlnc_receive(self, msgs) -> None:
        basis = self.basis
        for m in msgs:
            if basis.full:
                return
            if m.tag == Tag.CODED:
                basis.insert_raw(m.body)

    # -- dispatch ---------------------------------------------------------------

    def emit(self, tau: int) -> Message | None:
        plan = self.plan
        if plan.mode == "single" and plan.chunks == 1:
            return self._rlnc_emit()
        pos = tau % plan.T
        if plan.mode == "single":
            j, s = divmod(pos, plan.chunks)
            if j >= self._metas:
                return None
            if s == 0:
                raw = self.basis.random_raw(self.rng)
                self._outgoing = None if raw is None else self.chunker.split(raw)
                self._inbox = {}
            return self._pass_emit(s)
        if pos < plan.build:
            if pos == 0:
                self.builder = PatchBuilder(self.uid, self.params, plan.D, plan.phases, self.rng)
            return self.builder.emit(pos)
        j, mu = divmod(pos - plan.build, plan.meta_len)
        if j >= self._metas:
            return None
        return self._meta_emit(mu)

    def receive(self, tau: int, msgs) -> None:
        plan = self.plan
        if plan.mode == "single" and plan.chunks == 1:
            self._rlnc_receive(msgs)
            return
        pos = tau % plan.T
        if plan.mode == "single":
            j, s = divmod(pos, plan.chunks)
            if j >= self._metas:
                return
            self._pass_receive(s, msgs)
            if s == plan.chunks - 1:
                self._pass_finish()
                self.meta_rounds_done += 1
            return
        if pos < plan.build:
            self.builder.receive(pos, msgs)
            return
        j, mu = divmod(pos - plan.build, plan.meta_len)
        if j >= self._metas:
            return
        self._meta_receive(mu, msgs)

    # -- pass: one vector over several rounds ----------------------------------

    def _pass_emit(self, s: int) -> Message | None:
        if self._outgoing is None or s >= len(self._outgoing):
            return None
        return Message(Tag.CHUNK, (self.uid, self._outgoing[s]), self._chunk_bits[s])

    def _pass_receive(self, s: int, msgs) -> None:
        for m in msgs:
            if m.tag == Tag.CHUNK:
                sender, part = m.body
                self._inbox.setdefault(sender, {})[s] = part

    def _pass_finish(self) -> None:
        count = self.chunker.count
        for sender in sorted(self._inbox):
            parts = self._inbox[sender]
            if len(parts) == count and not self.basis.full:
                self.basis.insert_raw(self.chunker.join([parts[c] for c in range(count)]))
        self._inbox = {}

    # -- patch meta-round: share, pass, share ----------------------------------

    def _segment(self, mu: int) -> tuple[str, int]:
        S = self.chunker.count + self.plan.D
        tv = self.plan.chunks
        if mu < S:
            return "up1", mu
        if mu < 2 * S:
            return "down1", mu - S
        if mu < 2 * S + tv:
            return "pass", mu - 2 * S
        if mu < 3 * S + tv:
            return "up2", mu - 2 * S - tv
        if mu < 4 * S + tv:
            return "down2", mu - 3 * S - tv
        return "idle", 0

    def _meta_emit(self, mu: int) -> Message | None:
        seg, s = self._segment(mu)
        b = self.builder
        if seg in ("up1", "up2"):
            if s == 0:
                own = self.basis.random_raw(self.rng)
                if own is None:
                    own = self.chunker.join([self.chunker.zero(c) for c in range(self.chunker.count)])
                self._up = Convergecast(self.uid, b.depth, b.parent, self.plan.D, self.chunker, own)
            return self._up.outgoing(s, self.params.uid_bits, self.sym_bits)
        if seg in ("down1", "down2"):
            if s == 0:
                root_value = self._up.result() if b.parent is None else None
                self._down = TreeBroadcast(self.uid, b.depth, b.parent, self.plan.D, self.chunker, root_value)
            return self._down.outgoing(s, self.params.uid_bits, self.sym_bits)
        if seg == "pass":
            if s == 0:
                self._outgoing = None if self.patch_vector is None else self.chunker.split(self.patch_vector)
                self._inbox = {}
            return self._pass_emit(s)
        return None

    def _meta_receive(self, mu: int, msgs) -> None:
        seg, s = self._segment(mu)
        S = self.chunker.count + self.plan.D
        if seg in ("up1", "up2"):
            self._up.absorb(s, msgs)
            return
        if seg in ("down1", "down2"):
            self._down.absorb(s, msgs)
            if s == S - 1:
                vec = self._down.result()
                self.patch_vector = vec
                if vec is not None and not self.basis.full:
                    self.basis.insert_raw(vec)
                if seg == "down2":
                    self.meta_rounds_done += 1
            return
        if seg == "pass":
            self._pass_receive(s, msgs)
            if s == self.plan.chunks - 1:
                self._pass_finish()
