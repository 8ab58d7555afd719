"""Per-round topologies chosen by an adversary, with T-stability.

The adversary may look at node state from previous rounds
(:class:`ObservableState`) but is always consulted before nodes draw the
current round's randomness; the engine enforces that ordering.
"""

from __future__ import annotations

import random
import struct
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

ADVERSARY_KINDS = ("static_random", "fresh_random", "rotating_path", "rank_sorted_path", "custom")


class DisconnectedTopology(ValueError):
    pass


def _norm(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class Topology:
    n: int
    edges: frozenset

    def __post_init__(self) -> None:
        for u, v in self.edges:
            if u == v:
                raise ValueError(f"self-loop at {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge {u}-{v} outside [0, {self.n})")
            if u > v:
                raise ValueError(f"edge {u}-{v} not normalised")

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Topology":
        return cls(n, frozenset(_norm(u, v) for u, v in edges))

    @classmethod
    def path(cls, order: Sequence[int]) -> "Topology":
        return cls.from_edges(len(order), zip(order, order[1:]))

    def adjacency(self) -> list[list[int]]:
        """Neighbour lists in ascending order; computed once and shared, do not mutate."""
        adj = self.__dict__.get("_adj")
        if adj is None:
            adj = [[] for _ in range(self.n)]
            for u, v in sorted(self.edges):
                adj[u].append(v)
                adj[v].append(u)
            object.__setattr__(self, "_adj", adj)
        return adj

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def fingerprint(self) -> int:
        return fnv1a_64(self.sorted_edges())


def fnv1a_64(edges: Iterable[tuple[int, int]]) -> int:
    """FNV-1a over each edge packed as two little-endian uint32."""
    h = 0xCBF29CE484222325
    for u, v in edges:
        for byte in struct.pack("<II", u, v):
            h ^= byte
            h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def verify_connected(topo: Topology) -> bool:
    if topo.n <= 1:
        return True
    adj = topo.adjacency()
    seen = [False] * topo.n
    seen[0] = True
    queue = deque([0])
    count = 1
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if not seen[w]:
                seen[w] = True
                count += 1
                queue.append(w)
    return count == topo.n


def random_spanning_tree(n: int, rng: random.Random) -> list[tuple[int, int]]:
    """Uniform spanning tree of K_n by the Aldous-Broder random walk."""
    if n <= 1:
        return []
    visited = [False] * n
    cur = rng.randrange(n)
    visited[cur] = True
    remaining = n - 1
    edges = []
    rand = rng.random
    m = n - 1
    while remaining:
        # int(random() * m) instead of randrange: same walk law, far cheaper.
        nxt = int(rand() * m)
        if nxt >= cur:
            nxt += 1
        if not visited[nxt]:
            visited[nxt] = True
            edges.append(_norm(cur, nxt))
            remaining -= 1
        cur = nxt
    return edges


def gen_random_connected(n: int, rng: random.Random, p_extra: float = 0.0) -> Topology:
    if n < 1:
        raise ValueError("n must be at least 1")
    edges = set(random_spanning_tree(n, rng))
    if p_extra > 0:
        for u in range(n):
            for v in range(u + 1, n):
                if (u, v) not in edges and rng.random() < p_extra:
                    edges.add((u, v))
    return Topology(n, frozenset(edges))


@dataclass(frozen=True)
class ObservableState:
    """What the adversary may see: node state as of the end of the last round."""

    ranks: tuple[int, ...]
    decoded: tuple[frozenset, ...] = ()
    phases: tuple[str, ...] = ()


@dataclass(frozen=True)
class AdversarySpec:
    kind: str = "fresh_random"
    T: int = 1
    seed: int = 0
    p_extra: float = 0.0
    schedule: tuple = field(default=(), compare=False)

    def __post_init__(self) -> None:
        if self.kind not in ADVERSARY_KINDS:
            raise ValueError(f"unknown adversary kind {self.kind!r}")
        if self.T < 1:
            raise ValueError("stability period T must be >= 1")


class Adversary:
    """Stateful topology source for one trial.

    ``rng`` is the adversary's private random stream; node randomness never
    reaches it.
    """

    def __init__(self, spec: AdversarySpec, n: int, rng: random.Random):
        self.spec = spec
        self.n = n
        self.rng = rng
        self._block = -1
        self._topo: Topology | None = None
        self._fixed: Topology | None = None
        self._ring: list[int] | None = None

    @property
    def observes(self) -> bool:
        """Whether topology choices depend on node state at all."""
        return self.spec.kind == "rank_sorted_path"

    def next_topology(self, t: int, obs: ObservableState | None) -> Topology:
        if t < 0:
            raise ValueError("round index must be non-negative")
        block = t // self.spec.T
        if block != self._block or self._topo is None:
            self._topo = self._make(block, obs)
            self._block = block
            if not verify_connected(self._topo):
                raise DisconnectedTopology(f"adversary produced a disconnected graph in block {block}")
        return self._topo

    def _make(self, block: int, obs: ObservableState | None) -> Topology:
        n, kind = self.n, self.spec.kind
        if kind == "static_random":
            if self._fixed is None:
                self._fixed = gen_random_connected(n, self.rng, self.spec.p_extra)
            return self._fixed
        if kind == "fresh_random":
            return gen_random_connected(n, self.rng, self.spec.p_extra)
        if kind == "rotating_path":
            if self._ring is None:
                self._ring = list(range(n))
                self.rng.shuffle(self._ring)
            # Ring with one missing edge; the gap advances one slot per block.
            cut = block % max(n, 1)
            order = self._ring[cut + 1:] + self._ring[: cut + 1]
            return Topology.path(order)
        if kind == "rank_sorted_path":
            ranks = obs.ranks if obs is not None else (0,) * n
            return Topology.path(rank_sorted_order(ranks))
        sched = self.spec.schedule
        if not sched:
            raise ValueError("custom adversary needs a schedule")
        edges = sched[min(block, len(sched) - 1)]
        return Topology.from_edges(n, edges)


def rank_sorted_order(ranks: Sequence[int]) -> list[int]:
    """Nodes by ascending rank, ties by UID."""
    return sorted(range(len(ranks)), key=lambda u: (ranks[u], u))


def next_topology(adv: Adversary, t: int, obs: ObservableState | None) -> Topology:
    return adv.next_topology(t, obs)


def load_schedule(path: str | Path) -> tuple[int, tuple]:
    """Read a schedule file: ``n=<int>`` then one line of ``u-v`` pairs per block."""
    lines = Path(path).read_text().splitlines()
    return parse_schedule(lines)


def parse_schedule(lines: Sequence[str]) -> tuple[int, tuple]:
    lines = [ln.strip() for ln in lines]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or not lines[0].startswith("n="):
        raise ValueError("schedule must start with a line 'n=<int>'")
    n = int(lines[0][2:])
    blocks = []
    for lineno, ln in enumerate(lines[1:], start=2):
        edges = []
        for pair in ln.split():
            try:
                u, v = (int(x) for x in pair.split("-"))
            except ValueError:
                raise ValueError(f"line {lineno}: bad edge {pair!r}") from None
            edges.append(_norm(u, v))
        blocks.append(tuple(edges))
    if not blocks:
        # A single-node network has no edges at all.
        blocks.append(())
    return n, tuple(blocks)


def format_schedule(n: int, blocks: Sequence[Iterable[tuple[int, int]]]) -> str:
    out = [f"n={n}"]
    for edges in blocks:
        out.append(" ".join(f"{u}-{v}" for u, v in sorted(_norm(a, b) for a, b in edges)))
    return "\n".join(out) + "\n"
