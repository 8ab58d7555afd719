"""Indexed broadcast for T-stable networks with share-pass-share meta-rounds."""

from __future__ import annotations

import random

from ..coding import Token
from ..simulator import BudgetExceeded, Message, Node, log2_ceil
from .coded import CodedStage, StagePlan
from .common import CompletionFlag, RunParams
from .rlnc import decode_indexed, indexed_basis


def patch_share_cap(params: RunParams) -> int:
    """C * (n + b * T^2) * ceil(log2 n) rounds."""
    logn = max(1, log2_ceil(params.n))
    return params.constants.patch_cap * (params.n + params.b * params.T**2) * logn


class PatchShareNode(Node):
    """Indexed broadcast of pre-agreed items over one long-running coded stage.

    Vectors span ``plan.chunks`` rounds, so they may be up to
    ``plan.capacity_syms`` symbols wide.  Nodes stop one quiet completion
    window after everyone is full, or at the round cap.
    """

    def __init__(
        self,
        uid: int,
        params: RunParams,
        plan: StagePlan,
        ids: list[tuple],
        tokens: list[Token],
        rng: random.Random,
    ):
        super().__init__(uid)
        self.params = params
        self.plan = plan
        self.ids = ids
        index_of = {tid: i for i, tid in enumerate(ids)}
        basis = indexed_basis(params, len(ids), index_of, tokens)
        if ids and basis.width > plan.capacity_syms:
            raise BudgetExceeded(
                f"{basis.width}-symbol vectors exceed the {plan.capacity_syms}-symbol capacity of one meta-round"
            )
        self.stage = CodedStage(uid, params, plan, basis, rng)
        self.stop_at = patch_share_cap(params)
        self.done_flag = CompletionFlag(params.epoch)
        if not ids:
            self.terminated = True

    @property
    def basis(self):
        return self.stage.basis

    def phase(self) -> str:
        return "patch_share"

    def emit(self, t: int) -> Message | None:
        return self.done_flag.outgoing(self.stage.emit(t), not self.stage.basis.full)

    def receive(self, t: int, msgs: list[Message]) -> None:
        self.stage.receive(t, self.done_flag.incoming(msgs))
        if self.done_flag.window_end(t) or t + 1 >= self.stop_at:
            self.terminated = True

    def rank(self) -> int:
        return self.stage.basis.rank

    def known_count(self) -> int:
        return self.stage.basis.rank

    def known(self) -> dict:
        return decode_indexed(self.stage.basis, self.ids, self.params.d)

    def run_extras(self, nodes) -> dict:
        plan = self.plan
        return {
            "plan": plan.mode,
            "chunks": plan.chunks,
            "capacity_syms": plan.capacity_syms,
            "D": plan.D,
            "meta_rounds": max(getattr(n.stage, "meta_rounds_done", 0) for n in nodes),
        }
