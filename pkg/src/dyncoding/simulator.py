"""Deterministic round engine for anonymous broadcast under an adaptive adversary.

Each round the engine (1) shows the adversary the nodes' state from the end
of the previous round and fixes G(t); (2) lets every node emit one message,
without any topology input; (3) checks each message against the bit budget;
(4) hands every node the multiset of its neighbours' messages; (5) asks the
omniscient observer whether every node holds every token.
"""

from __future__ import annotations

import random
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Callable, NamedTuple, Optional, Sequence

import numpy as np

from .coding import Token
from .dynamics import Adversary, AdversarySpec, ObservableState, Topology

TAG_BITS = 8

PLACEMENTS = ("one-per-node", "all-at-node-0", "adversarial-random")
PROTOCOLS = (
    "flood_forward",
    "rlnc_broadcast",
    "random_forward",
    "greedy_forward",
    "priority_forward",
    "patch_share",
    "tstable",
)
GATHERINGS = ("greedy", "priority", "patch")


class InvalidConfig(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class BudgetExceeded(RuntimeError):
    pass


class DecodeMismatch(RuntimeError):
    pass


@dataclass(frozen=True)
class Constants:
    """Every hidden constant the asymptotic analysis leaves open."""

    c_epoch: int = 1
    rlnc_cap: int = 16
    c_code: int = 2
    gather_slack: float = 0.5
    c_D: int = 4
    mis_phase_factor: int = 4
    priority_factor: int = 3
    patch_cap: int = 8


@dataclass(frozen=True)
class RunConfig:
    n: int = 8
    k: int = 8
    d: int = 8
    b: int = 64
    q: int = 2
    T: int = 1
    protocol: str = "rlnc_broadcast"
    adversary: AdversarySpec = AdversarySpec()
    constants: Constants = Constants()
    master_seed: int = 0
    round_cap: int = 0
    placement: str = "one-per-node"
    gathering: str = "greedy"
    chunks: int = 0
    trace: bool = False
    run_to_termination: bool = True

    def validate(self) -> "RunConfig":
        if self.n < 1:
            raise InvalidConfig("n", "need at least one node")
        if not 0 <= self.k <= self.n:
            raise InvalidConfig("k", f"need 0 <= k <= n, got k={self.k}, n={self.n}")
        if self.d < 1:
            raise InvalidConfig("d", "tokens need at least one bit")
        if self.d > self.b:
            raise InvalidConfig("d", f"token size {self.d} exceeds message size {self.b}")
        if self.b < self.d + log2_ceil(self.n):
            raise InvalidConfig("b", f"need b >= d + ceil(log2 n) = {self.d + log2_ceil(self.n)}")
        if self.T < 1:
            raise InvalidConfig("T", "stability period must be >= 1")
        if self.protocol not in PROTOCOLS:
            raise InvalidConfig("protocol", f"unknown protocol {self.protocol!r}")
        if self.placement not in PLACEMENTS:
            raise InvalidConfig("placement", f"unknown placement {self.placement!r}")
        if self.gathering not in GATHERINGS:
            raise InvalidConfig("gathering", f"unknown gathering {self.gathering!r}")
        if self.chunks < 0 or self.chunks > self.T:
            raise InvalidConfig("chunks", f"chunk count must lie in [0, T={self.T}]")
        if self.adversary.T != self.T and self.adversary.kind != "static_random":
            raise InvalidConfig("adversary", f"adversary period {self.adversary.T} differs from T={self.T}")
        try:
            from .finite_field import FieldSpec

            FieldSpec(self.q)
        except ValueError as exc:
            raise InvalidConfig("q", str(exc)) from None
        return self


def log2_ceil(x: int) -> int:
    return max(0, (x - 1).bit_length()) if x > 0 else 0


@dataclass
class RunRecord:
    completion_round: Optional[int]
    self_termination_round: Optional[int]
    total_bits_sent: int
    rounds_executed: int
    failure_reason: Optional[str] = None
    trace: list = field(default_factory=list)
    message_bits: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.failure_reason is None and self.completion_round is not None

    def to_json(self) -> dict:
        return asdict(self)


class Message(NamedTuple):
    """A broadcast: 8-bit tag plus ``bits`` body bits; ``body`` is the decoded content.

    ``flag`` is the tag byte's high bit, kept as its own field so receivers
    can test the tag without masking.
    """

    tag: int
    body: Any
    bits: int
    flag: bool = False

    @property
    def total_bits(self) -> int:
        return TAG_BITS + self.bits


def stream(master_seed: int, *path: int) -> random.Random:
    """Independent generator for one (stream kind, index) path under a master seed."""
    ss = np.random.SeedSequence([master_seed & 0xFFFFFFFFFFFFFFFF, *path])
    words = ss.generate_state(4, np.uint32)
    seed = 0
    for w in words:
        seed = (seed << 32) | int(w)
    return random.Random(seed)


STREAM_NODE = 1
STREAM_ADVERSARY = 2
STREAM_PLACEMENT = 3


def place_tokens(config: RunConfig) -> list[list[Token]]:
    """Initial token holdings per node, drawn from the placement stream."""
    rng = stream(config.master_seed, STREAM_PLACEMENT)
    holdings: list[list[Token]] = [[] for _ in range(config.n)]
    for i in range(config.k):
        if config.placement == "one-per-node":
            holder = i
        elif config.placement == "all-at-node-0":
            holder = 0
        else:
            holder = rng.randrange(config.n)
        value = rng.getrandbits(config.d)
        holdings[holder].append(Token(holder, len(holdings[holder]), value, config.d))
    return holdings


def observer_complete(known: Sequence[dict], global_tokens: dict) -> bool:
    """True iff every node's token map equals the global one, bit for bit."""
    return all(node_known == global_tokens for node_known in known)


class Node:
    """Base class for a node-local protocol state machine."""

    def __init__(self, uid: int):
        self.uid = uid
        self.terminated = False

    def emit(self, t: int) -> Message | None:
        raise NotImplementedError

    def receive(self, t: int, msgs: list[Message]) -> None:
        raise NotImplementedError

    def rank(self) -> int:
        return len(self.known())

    def phase(self) -> str:
        return ""

    def known(self) -> dict:
        raise NotImplementedError

    def known_count(self) -> int:
        return len(self.known())


def observe(nodes: Sequence[Node]) -> ObservableState:
    return ObservableState(
        ranks=tuple(node.rank() for node in nodes),
        phases=tuple(node.phase() for node in nodes),
    )


def simulate(
    nodes: Sequence[Node],
    adversary: Adversary,
    budget_bits: int,
    global_tokens: dict,
    round_cap: int,
    *,
    trace: bool = False,
    run_to_termination: bool = True,
    record_messages: bool = False,
    on_round_start: Callable[[int, Sequence[Node]], None] | None = None,
    phase_check: bool = False,
) -> RunRecord:
    n = len(nodes)
    k = len(global_tokens)
    total_bits = 0
    completion: int | None = None
    termination: int | None = None
    trace_rows: list = []
    msg_rows: list = []
    failure = None

    def check_complete() -> bool:
        if any(node.known_count() != k for node in nodes):
            return False
        if not observer_complete([node.known() for node in nodes], global_tokens):
            raise DecodeMismatch("a node holds every token id but with wrong bits")
        return True

    if check_complete():
        completion = 0
    if all(node.terminated for node in nodes):
        termination = 0

    t = 0
    while t < round_cap:
        if completion is not None and (termination is not None or not run_to_termination):
            break
        if on_round_start is not None:
            on_round_start(t, nodes)
        obs = observe(nodes) if adversary.observes else None
        topo = adversary.next_topology(t, obs)
        if topo.n != n:
            raise ValueError(f"topology has {topo.n} nodes, network has {n}")
        msgs = [None if node.terminated else node.emit(t) for node in nodes]
        if phase_check:
            tags = {node.phase() for node in nodes if not node.terminated}
            if len(tags) > 1:
                raise AssertionError(f"round {t}: nodes disagree on phase {sorted(tags)}")
        round_bits = [0] * n
        for uid, msg in enumerate(msgs):
            if msg is None:
                continue
            bits = msg.bits
            if bits > budget_bits:
                raise BudgetExceeded(f"round {t}: node {uid} sent {bits} body bits, budget is {budget_bits}")
            round_bits[uid] = TAG_BITS + bits
            total_bits += TAG_BITS + bits
        adj = topo.adjacency()
        for uid, node in enumerate(nodes):
            if not node.terminated:
                node.receive(t, [msgs[w] for w in adj[uid] if msgs[w] is not None])
        t += 1
        if trace:
            trace_rows.append((t - 1, topo.fingerprint(), tuple(node.rank() for node in nodes)))
        if record_messages:
            msg_rows.append(round_bits)
        if completion is None and check_complete():
            completion = t
        if termination is None and all(node.terminated for node in nodes):
            termination = t
            if completion is None:
                failure = "TerminatedIncomplete"
                break

    if completion is None and failure is None:
        failure = "RoundCapExceeded"
    return RunRecord(
        completion_round=completion,
        self_termination_round=termination,
        total_bits_sent=total_bits,
        rounds_executed=t,
        failure_reason=failure,
        trace=trace_rows,
        message_bits=msg_rows,
    )


def format_trace(record: RunRecord) -> str:
    """One line per round: index, topology hash, comma-separated ranks."""
    lines = [f"{t} {h:016x} {','.join(map(str, ranks))}" for t, h, ranks in record.trace]
    return "\n".join(lines) + ("\n" if lines else "")


def build_trial(config: RunConfig):
    """Nodes, adversary, budget, global tokens and round cap for one trial."""
    from .protocols import make_nodes

    config.validate()
    holdings = place_tokens(config)
    nodes, budget, global_tokens, cap = make_nodes(config, holdings)
    spec = config.adversary
    adversary = Adversary(spec, config.n, stream(config.master_seed, STREAM_ADVERSARY, spec.seed))
    round_cap = config.round_cap or cap
    return nodes, adversary, budget, global_tokens, round_cap


def run_trial(config: RunConfig, **engine_kwargs) -> RunRecord:
    nodes, adversary, budget, global_tokens, round_cap = build_trial(config)
    record = simulate(
        nodes,
        adversary,
        budget,
        global_tokens,
        round_cap,
        trace=config.trace,
        run_to_termination=config.run_to_termination,
        **engine_kwargs,
    )
    extras = getattr(nodes[0], "run_extras", None)
    if extras is not None:
        record.extras.update(extras(nodes))
    return record


def with_seed(config: RunConfig, seed: int) -> RunConfig:
    return replace(config, master_seed=seed, adversary=replace(config.adversary, seed=seed))
