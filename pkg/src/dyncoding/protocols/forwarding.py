"""Gathering protocols: random-forward, greedy-forward and priority-forward.

Every node runs the same schedule of stages; stage lengths depend only on
n, the shared round counter and values that were flooded for a full epoch,
so all nodes switch stages in the same round.

One iteration of greedy-forward is::

    forward (E rounds)   random tokens plus a "tokens remain" flag
    count   (E rounds)   max-flood of (undelivered count, uid)
    coded   (aligned)    the leader's smallest tokens, in blocks, by RLNC,
                         until a window of E rounds passes with every node full

The batch size is known to everyone after the count stage (it is a
function of the flooded count), so no separate descriptor epoch is run.
Priority-forward replaces forward/count by a priority-indexing stage once
the identified count is small.
"""

from __future__ import annotations

import random

from ..coding import KnowledgeBasis, Token, source_raw
from ..coding import payload_bits_to_raw_symbols
from ..finite_field import bits_to_int, unpack_token
from ..simulator import BudgetExceeded, Message, log2_ceil
from .coded import CodedStage, StagePlan, plan_stage
from .common import BlockLayout, CompletionFlag, RunParams, StallDetected, Tag
from .flooding import TokenNode

FORWARD, COUNT, CODED, PRIO, DONE = "forward", "count", "coded", "prio", "done"


def single_round_plan(params: RunParams) -> StagePlan:
    return StagePlan("single", 1, 1, params.b // params.field.sym_bits, addressed=False)


class GatherNode(TokenNode):
    """One node of random-, greedy- or priority-forward.

    ``mode`` is ``"random"`` (one forward and count stage, then stop),
    ``"greedy"``, ``"priority"`` (greedy until the identified count drops
    below half a batch) or ``"indexed"`` (priority indexing from the start).
    ``plan`` fixes how coded stages use the channel; a one-round plan gives
    the plain protocols, longer plans the T-stable variants.
    """

    def __init__(
        self,
        uid: int,
        params: RunParams,
        tokens: list[Token],
        rng: random.Random,
        mode: str = "greedy",
        plan: StagePlan | None = None,
    ):
        super().__init__(uid, params, tokens)
        self.rng = rng
        self.mode = mode
        self.plan = plan or single_round_plan(params)
        self.layout = BlockLayout.plan(self.plan.capacity_syms * params.field.sym_bits, params)
        self.g = self.layout.per_block
        self.B_tok = self.layout.batch_tokens
        self.E = params.epoch
        self.cap = params.forward_cap
        if self.cap < 1:
            raise BudgetExceeded(f"a {params.token_bits}-bit token does not fit in b={params.b}")
        self.count_msg_bits = params.count_bits + params.uid_bits
        if mode != "indexed" and self.count_msg_bits > params.b:
            raise BudgetExceeded(f"count announcement needs {self.count_msg_bits} bits > b={params.b}")
        # Priority indexing: (priority, owner uid, block seq) triples.
        self.prio_bits = params.constants.priority_factor * max(1, log2_ceil(params.n))
        self.bseq_bits = log2_ceil(-(-params.n // self.g))
        self.triple_bits = self.prio_bits + params.uid_bits + self.bseq_bits
        self.per_msg = params.b // self.triple_bits
        if mode in ("priority", "indexed") and self.per_msg < 1:
            raise BudgetExceeded(f"a {self.triple_bits}-bit priority announcement does not fit in b={params.b}")
        self.iteration = 0
        self.log: list[dict] = []
        self.stage = ""
        self.stage_end = 0
        self.prio_mode = mode == "indexed"
        self._coded: CodedStage | None = None
        self._coded_start = 0
        self._start(PRIO if self.prio_mode else FORWARD, 0)

    # -- schedule ---------------------------------------------------------------

    def phase(self) -> str:
        return f"{self.stage}:{self.iteration}"

    def rank(self) -> int:
        extra = self._coded.basis.rank if self._coded is not None else 0
        return len(self.tokens) + extra

    def _start(self, stage: str, t: int) -> None:
        self.stage = stage
        if stage == FORWARD:
            self.flag = False
            self.stage_end = t + self.E
        elif stage == COUNT:
            self.best = (self.undelivered_count(), -self.uid)
            self.stage_end = t + self.E
        elif stage == PRIO:
            self._prio_setup()
            self.stage_end = t + self.E
        elif stage == DONE:
            self.terminated = True

    def emit(self, t: int) -> Message | None:
        stage = self.stage
        if stage == FORWARD:
            return self._forward_emit()
        if stage == COUNT:
            return Message(Tag.MAX_COUNT, self.best, self.count_msg_bits)
        if stage == CODED:
            tau = t - self._coded_start
            if tau < 0:
                return None
            return self._done_flag.outgoing(self._coded.emit(tau), not self._coded.basis.full)
        if stage == PRIO:
            return self._prio_emit()
        return None

    def receive(self, t: int, msgs: list[Message]) -> None:
        stage = self.stage
        if stage == FORWARD:
            for m in msgs:
                if m.tag == Tag.TOKENS_MORE:
                    self.flag = True
                    for tok in m.body:
                        self.learn(tok)
        elif stage == COUNT:
            for m in msgs:
                if m.tag == Tag.MAX_COUNT and m.body > self.best:
                    self.best = m.body
        elif stage == CODED:
            tau = t - self._coded_start
            if tau >= 0:
                self._coded.receive(tau, self._done_flag.incoming(msgs))
                if self._done_flag.window_end(tau):
                    self._finish(t + 1)
                    return
        elif stage == PRIO:
            for m in msgs:
                if m.tag == Tag.PRIORITY:
                    self.prio_active = True
                    self.prio_known.update(m.body)
        if t + 1 == self.stage_end:
            self._finish(t + 1)

    def _finish(self, now: int) -> None:
        stage = self.stage
        if stage == FORWARD:
            if not self.flag:
                self._start(DONE, now)
            else:
                self._start(COUNT, now)
        elif stage == COUNT:
            count, neg_uid = self.best
            self.log.append({"iteration": self.iteration, "leader": -neg_uid, "count": count})
            if self.mode == "random":
                self._start(DONE, now)
            elif self.mode == "priority" and count < self.B_tok / 2:
                self.prio_mode = True
                self._start(PRIO, now)
            else:
                self._greedy_batch(-neg_uid, count, now)
        elif stage == CODED:
            self._coded_finish()
            self.iteration += 1
            self._start(PRIO if self.prio_mode else FORWARD, now)
        elif stage == PRIO:
            self._prio_epoch_end(now)

    # -- forward stage ------------------------------------------------------------

    def _forward_emit(self) -> Message | None:
        und = self._und_ids
        if und:
            self.flag = True
            tokens = self.tokens
            picks = [tokens[i] for i in self.rng.sample(und, min(self.cap, len(und)))]
            return Message(Tag.TOKENS_MORE, tuple(picks), len(picks) * self.params.token_bits)
        if self.flag:
            return Message(Tag.TOKENS_MORE, (), 0)
        return None

    # -- coded stage ----------------------------------------------------------------

    def _coded_rounds(self, m: int) -> int:
        """Typical length of a coded stage over m blocks; sizes the round cap only."""
        plan = self.plan
        metas = self.params.constants.c_code * (self.params.n + m)
        if plan.mode == "single" and plan.chunks == 1:
            return metas
        return -(-metas // plan.metas_per_block) * plan.T

    def _begin_coded(self, m: int, sources: list[tuple[int, list[Token]]], now: int) -> None:
        """Start RLNC over ``m`` blocks; ``sources`` are this node's (index, block) pairs."""
        field = self.params.field
        lay = self.layout
        basis = KnowledgeBasis(field, m, lay.payload_symbols)
        for idx, block in sources:
            word = lay.pack(block, self.params)
            basis.insert_raw(source_raw(idx, payload_bits_to_raw_symbols(word, lay.payload_bits, field), field, m))
        self._coded = CodedStage(self.uid, self.params, self.plan, basis, self.rng)
        self._done_flag = CompletionFlag(self.E)
        T = self.plan.T
        self._coded_start = -(-now // T) * T
        self.stage = CODED
        self.stage_end = -1  # ends on a quiet completion window

    def _greedy_batch(self, leader: int, count: int, now: int) -> None:
        s = min(self.B_tok, count)
        if s == 0:
            raise StallDetected(f"iteration {self.iteration}: tokens remain but the identified node has none")
        m = -(-s // self.g)
        sources = []
        if self.uid == leader:
            chosen = self.undelivered()[:s]
            sources = [(j, chosen[j * self.g:(j + 1) * self.g]) for j in range(m)]
        self._begin_coded(m, sources, now)

    def _coded_finish(self) -> None:
        basis = self._coded.basis
        field = self.params.field
        lay = self.layout
        for _, payload in basis.decoded_payloads().items():
            word = bits_to_int(unpack_token(payload, lay.payload_bits, field))
            for tok in lay.unpack(word, self.params):
                self.learn(tok)
                self.deliver(tok.id)
        if self.log:
            self.log[-1].setdefault("blocks", basis.k)
            self.log[-1].setdefault("coded_metas", self._coded.meta_rounds_done)
        if not basis.full:
            self.log.append({"iteration": self.iteration, "incomplete_rank": basis.rank, "blocks": basis.k})
        self._coded = None

    # -- priority indexing ------------------------------------------------------------

    def _prio_setup(self) -> None:
        und = self.undelivered()
        g = self.g
        self.my_blocks = {j: und[j * g:(j + 1) * g] for j in range(-(-len(und) // g))}
        mine = sorted((self.rng.getrandbits(self.prio_bits), self.uid, j) for j in self.my_blocks)
        self.prio_known: set = set(mine[: self.layout.max_blocks])
        self.prio_final: list = []
        self.prio_active = False
        self.prio_epochs = 0

    def _prio_candidates(self) -> list:
        done = set(self.prio_final)
        return sorted(x for x in self.prio_known if x not in done)

    def _prio_emit(self) -> Message | None:
        want = min(self.per_msg, self.layout.max_blocks - len(self.prio_final))
        cand = self._prio_candidates()[:want]
        if not cand:
            return None
        self.prio_active = True
        return Message(Tag.PRIORITY, tuple(cand), len(cand) * self.triple_bits)

    def _prio_epoch_end(self, now: int) -> None:
        self.prio_epochs += 1
        if not self.prio_active:
            if not self.prio_final:
                self._start(DONE, now)
                return
            self._prio_launch(now)
            return
        want = min(self.per_msg, self.layout.max_blocks - len(self.prio_final))
        fresh = self._prio_candidates()[:want]
        self.prio_final.extend(fresh)
        self.prio_active = False
        if len(self.prio_final) >= self.layout.max_blocks or len(fresh) < self.per_msg:
            self._prio_launch(now)
        else:
            self.stage_end = now + self.E

    def _prio_launch(self, now: int) -> None:
        order = sorted(self.prio_final)
        self.log.append({"iteration": self.iteration, "priority_blocks": len(order), "index_epochs": self.prio_epochs})
        sources = [(i, self.my_blocks[j]) for i, (_, owner, j) in enumerate(order) if owner == self.uid]
        self._begin_coded(len(order), sources, now)

    # -- reporting --------------------------------------------------------------------

    def run_extras(self, nodes) -> dict:
        counts = [e["count"] for e in self.log if "count" in e]
        return {
            "iterations": self.iteration,
            "leader_counts": counts,
            "first_leader": next((e["leader"] for e in self.log if "leader" in e), None),
            "priority_iterations": sum(1 for e in self.log if "priority_blocks" in e),
            "incomplete_batches": sum(1 for e in self.log if "incomplete_rank" in e),
            "plan": self.plan.mode,
            "batch_tokens": self.B_tok,
        }
