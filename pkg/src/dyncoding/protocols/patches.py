"""Patches: Luby's MIS on the D-th graph power, nearest-leader trees, and
pipelined convergecast along those trees.

All of it runs as per-node state machines exchanging b-bit messages, so
the same code serves the patch-sharing protocol (inside the engine) and
:func:`build_patches` (driven directly over one fixed topology).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Sequence

from ..dynamics import Topology
from ..simulator import BudgetExceeded, Message, log2_ceil
from .common import RunParams, Tag


class MISFailure(RuntimeError):
    """Luby phases ran out with some node still undecided."""


def patch_radius(params: RunParams) -> int:
    """D = max(1, floor(T / (c_D * ceil(log2 n))))."""
    logn = max(1, log2_ceil(params.n))
    return max(1, params.T // (params.constants.c_D * logn))


def mis_phases(params: RunParams) -> int:
    return max(1, params.constants.mis_phase_factor * log2_ceil(params.n))


def build_rounds(D: int, phases: int) -> int:
    return phases * 2 * D + D


class PatchBuilder:
    """One node's view of patch construction for a single stable block.

    Rounds ``[0, 2*D*phases)`` run Luby phases (D rounds of max-flooding
    priorities of active nodes, then D rounds of deactivation flooding);
    the following D rounds flood an incrementing (leader, depth)
    broadcast from which each node picks its leader and parent.
    """

    def __init__(self, uid: int, params: RunParams, D: int, phases: int, rng: random.Random):
        self.uid = uid
        self.params = params
        self.D = D
        self.phases = phases
        self.rng = rng
        self.prio_bits = params.constants.priority_factor * max(1, log2_ceil(params.n))
        self.active = True
        self.in_mis = False
        self.best: tuple | None = None
        self.mine: tuple | None = None
        self.radius = -1
        self.sent_radius = -1
        self.leader: int | None = None
        self.depth: int | None = None
        self.parent: int | None = None
        self._tree_pending = False
        self.decided_phase: int | None = None

    @property
    def total_rounds(self) -> int:
        return build_rounds(self.D, self.phases)

    def _luby_bits(self) -> int:
        return self.prio_bits + self.params.uid_bits

    def emit(self, tau: int) -> Message | None:
        D = self.D
        luby_len = 2 * D * self.phases
        if tau < luby_len:
            phase, sub = divmod(tau, 2 * D)
            if sub == 0:
                self.radius = -1
                self.sent_radius = -1
                if self.active:
                    self.mine = (self.rng.getrandbits(self.prio_bits), self.uid)
                    self.best = self.mine
                else:
                    self.mine = None
                    self.best = None
            if sub < D:
                if self.best is None:
                    return None
                return Message(Tag.LUBY_MAX, self.best, self._luby_bits())
            if sub == D and self.active and self.best == self.mine:
                self.in_mis = True
                self.active = False
                self.decided_phase = phase
                self.radius = D
            if self.radius >= 1 and self.sent_radius < self.radius:
                self.sent_radius = self.radius
                return Message(Tag.LUBY_DEACTIVATE, self.radius - 1, max(1, D.bit_length()))
            return None
        r = tau - luby_len
        if r == 0:
            if self.active:
                raise MISFailure(f"node {self.uid} undecided after {self.phases} Luby phases")
            if self.in_mis:
                self.leader, self.depth, self.parent = self.uid, 0, None
                self._tree_pending = True
        if self._tree_pending:
            self._tree_pending = False
            bits = 2 * self.params.uid_bits + max(1, D.bit_length())
            return Message(Tag.TREE, (self.leader, self.depth, self.uid), bits)
        return None

    def receive(self, tau: int, msgs: Sequence[Message]) -> None:
        D = self.D
        luby_len = 2 * D * self.phases
        if tau < luby_len:
            sub = tau % (2 * D)
            if sub < D:
                for m in msgs:
                    if m.tag == Tag.LUBY_MAX and (self.best is None or m.body > self.best):
                        self.best = m.body
            else:
                for m in msgs:
                    if m.tag == Tag.LUBY_DEACTIVATE and m.body > self.radius:
                        self.radius = m.body
                        if self.active:
                            self.active = False
                            self.decided_phase = tau // (2 * D)
            return
        if self.leader is not None:
            return
        offers = [m.body for m in msgs if m.tag == Tag.TREE]
        if not offers:
            return
        depth, leader = min((dep, lead) for lead, dep, _ in offers)
        self.parent = min(s for lead, dep, s in offers if lead == leader and dep == depth)
        self.leader = leader
        self.depth = depth + 1
        self._tree_pending = True


@dataclass
class PatchAssignment:
    D: int
    leader: list[int]
    parent: list[int | None]
    depth: list[int]
    mis: list[int]
    rounds: int
    phases_used: int
    bits_sent: int = 0

    def members(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for v, lead in enumerate(self.leader):
            out.setdefault(lead, []).append(v)
        return out


def build_patches(params: RunParams, topo: Topology, rng_for) -> PatchAssignment:
    """Run the distributed construction on one fixed topology.

    ``rng_for(uid)`` supplies each node's random stream.  Messages are
    checked against the budget ``params.b``.
    """
    D = patch_radius(params)
    phases = mis_phases(params)
    builders = [PatchBuilder(u, params, D, phases, rng_for(u)) for u in range(topo.n)]
    adj = topo.adjacency()
    bits = drive(builders, adj, builders[0].total_rounds if builders else 0, params.b)
    missing = [b.uid for b in builders if b.leader is None]
    if missing:
        raise MISFailure(f"nodes {missing[:5]} never joined a patch")
    used = max((b.decided_phase or 0) for b in builders) + 1 if builders else 0
    return PatchAssignment(
        D=D,
        leader=[b.leader for b in builders],
        parent=[b.parent for b in builders],
        depth=[b.depth for b in builders],
        mis=[b.uid for b in builders if b.in_mis],
        rounds=builders[0].total_rounds if builders else 0,
        phases_used=used,
        bits_sent=bits,
    )


def drive(machines: Sequence, adj: list[list[int]], rounds: int, budget: int) -> int:
    """Step per-node machines synchronously over a static adjacency."""
    total = 0
    for tau in range(rounds):
        out = [m.emit(tau) for m in machines]
        for uid, msg in enumerate(out):
            if msg is not None:
                if msg.bits > budget:
                    raise BudgetExceeded(f"step {tau}: node {uid} sent {msg.bits} bits > {budget}")
                total += msg.total_bits
        for uid, m in enumerate(machines):
            m.receive(tau, [out[w] for w in adj[uid] if out[w] is not None])
    return total


# -- vector chunks ----------------------------------------------------------


@dataclass(frozen=True)
class Chunker:
    """Splits raw vectors of ``width`` symbols into chunks of ``chunk_syms``."""

    q: int
    width: int
    chunk_syms: int

    @property
    def count(self) -> int:
        return -(-self.width // self.chunk_syms) if self.width else 0

    def split(self, raw) -> list:
        cs = self.chunk_syms
        if self.q == 2:
            mask = (1 << cs) - 1
            return [(raw >> (c * cs)) & mask for c in range(self.count)]
        return [tuple(raw[c * cs:(c + 1) * cs]) for c in range(self.count)]

    def join(self, chunks: Sequence):
        if self.q == 2:
            out = 0
            for c, part in enumerate(chunks):
                out |= part << (c * self.chunk_syms)
            return out
        flat: list = []
        for part in chunks:
            flat.extend(part)
        return tuple(flat)

    def chunk_len(self, c: int) -> int:
        return min(self.chunk_syms, self.width - c * self.chunk_syms)

    def add(self, a, b):
        if self.q == 2:
            return a ^ b
        return tuple((x + y) % self.q for x, y in zip(a, b))

    def zero(self, c: int):
        if self.q == 2:
            return 0
        return (0,) * self.chunk_len(c)


class Convergecast:
    """Pipelined summation of per-node vectors up a tree of depth <= D.

    A node at depth j transmits its cumulative chunk c at step c + D - j and
    receives its children's chunk c one step earlier, so the root holds
    every summed chunk after T_v + D - 1 steps.
    """

    def __init__(self, uid: int, depth: int, parent: int | None, D: int, chunker: Chunker, own):
        self.uid = uid
        self.depth = depth
        self.parent = parent
        self.D = D
        self.chunker = chunker
        self.acc = chunker.split(own)

    @property
    def steps(self) -> int:
        return self.chunker.count + self.D

    def outgoing(self, step: int, addr_bits: int, sym_bits: int) -> Message | None:
        if self.parent is None:
            return None
        c = step - (self.D - self.depth)
        if not 0 <= c < self.chunker.count:
            return None
        bits = addr_bits + self.chunker.chunk_len(c) * sym_bits
        return Message(Tag.UP, (self.parent, self.acc[c]), bits)

    def absorb(self, step: int, msgs: Sequence[Message]) -> None:
        c = step - (self.D - self.depth - 1)
        if not 0 <= c < self.chunker.count:
            return
        for m in msgs:
            if m.tag == Tag.UP and m.body[0] == self.uid:
                self.acc[c] = self.chunker.add(self.acc[c], m.body[1])

    def result(self):
        return self.chunker.join(self.acc)


class TreeBroadcast:
    """Pipelined push of the root's vector down the tree, one chunk per step."""

    def __init__(self, uid: int, depth: int, parent: int | None, D: int, chunker: Chunker, value=None):
        self.uid = uid
        self.depth = depth
        self.parent = parent
        self.D = D
        self.chunker = chunker
        self.parts: list = chunker.split(value) if value is not None else [None] * chunker.count

    @property
    def steps(self) -> int:
        return self.chunker.count + self.D

    def outgoing(self, step: int, addr_bits: int, sym_bits: int) -> Message | None:
        if self.depth >= self.D:
            return None
        c = step - self.depth
        if not 0 <= c < self.chunker.count or self.parts[c] is None:
            return None
        return Message(Tag.DOWN, (self.uid, self.parts[c]), addr_bits + self.chunker.chunk_len(c) * sym_bits)

    def absorb(self, step: int, msgs: Sequence[Message]) -> None:
        if self.parent is None:
            return
        c = step - self.depth + 1
        if not 0 <= c < self.chunker.count:
            return
        for m in msgs:
            if m.tag == Tag.DOWN and m.body[0] == self.parent:
                self.parts[c] = m.body[1]

    def result(self):
        if any(p is None for p in self.parts):
            return None
        return self.chunker.join(self.parts)


def pipelined_patch_sum(
    parent: Sequence[int | None],
    depth: Sequence[int],
    D: int,
    chunker: Chunker,
    vectors: Sequence,
    addr_bits: int = 0,
    sym_bits: int = 1,
    budget: int | None = None,
    adj: list[list[int]] | None = None,
):
    """Convergecast then broadcast over a forest given by ``parent``.

    Returns (per-node received patch sums, steps used).  ``adj`` is the
    full communication graph; by default only tree edges are wired, which
    gives the same result because UP/DOWN traffic is addressed.
    """
    n = len(parent)
    if adj is None:
        adj = [[] for _ in range(n)]
        for v, p in enumerate(parent):
            if p is not None:
                adj[v].append(p)
                adj[p].append(v)
    ups = [Convergecast(v, depth[v], parent[v], D, chunker, vectors[v]) for v in range(n)]
    steps = chunker.count + D
    cap = budget if budget is not None else 1 << 62
    for s in range(steps):
        out = [u.outgoing(s, addr_bits, sym_bits) for u in ups]
        for msg in out:
            if msg is not None and msg.bits > cap:
                raise BudgetExceeded(f"convergecast chunk of {msg.bits} bits")
        for v, u in enumerate(ups):
            u.absorb(s, [out[w] for w in adj[v] if out[w] is not None])
    downs = [
        TreeBroadcast(v, depth[v], parent[v], D, chunker, ups[v].result() if parent[v] is None else None)
        for v in range(n)
    ]
    for s in range(steps):
        out = [t.outgoing(s, addr_bits, sym_bits) for t in downs]
        for v, t in enumerate(downs):
            t.absorb(s, [out[w] for w in adj[v] if out[w] is not None])
    return [t.result() for t in downs], 2 * steps
