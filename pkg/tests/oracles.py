"""Independent reference computations used by the tests.

Nothing here imports the row-reduction code under test: spans are
enumerated by brute force, graph facts come from networkx.
"""

from __future__ import annotations

import itertools
from typing import Iterable, Sequence

import networkx as nx


def span_gf2(vectors: Iterable[int]) -> frozenset[int]:
    """Every XOR combination of the given bit-vectors."""
    span = {0}
    for v in vectors:
        if v not in span:
            span |= {s ^ v for s in span}
    return frozenset(span)


def span_gfq(vectors: Sequence[Sequence[int]], q: int, width: int) -> frozenset[tuple]:
    """Every F_q combination, by enumerating all coefficient tuples."""
    out = set()
    vecs = [tuple(v) for v in vectors]
    for coeffs in itertools.product(range(q), repeat=len(vecs)):
        acc = [0] * width
        for c, v in zip(coeffs, vecs):
            if c:
                acc = [(a + c * x) % q for a, x in zip(acc, v)]
        out.add(tuple(acc))
    return frozenset(out)


def rank_from_span(span_size: int, q: int) -> int:
    r = 0
    while q**r < span_size:
        r += 1
    assert q**r == span_size
    return r


def senses_bruteforce_gf2(span: frozenset[int], mu: Sequence[int], k: int) -> bool:
    """Some span member's header has odd overlap with mu."""
    mask = sum(1 << j for j, m in enumerate(mu) if m)
    hmask = (1 << k) - 1
    return any(bin(v & hmask & mask).count("1") % 2 for v in span)


def inverse_bruteforce(a: int, q: int) -> int:
    return next(x for x in range(1, q) if (a * x) % q == 1)


def to_nx(n: int, edges: Iterable[tuple[int, int]]) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(range(n))
    g.add_edges_from(edges)
    return g


def graph_power(g: nx.Graph, D: int) -> nx.Graph:
    return nx.power(g, D) if g.number_of_edges() else g.copy()


def check_patches(g: nx.Graph, D: int, leader, parent, depth, mis) -> list[str]:
    """All violated patch properties, as messages; empty when the assignment is sound."""
    problems = []
    gd = graph_power(g, D)
    mis_set = set(mis)
    for u, v in itertools.combinations(mis, 2):
        if gd.has_edge(u, v):
            problems.append(f"MIS nodes {u},{v} adjacent in G^{D}")
    for v in g.nodes:
        if v not in mis_set and not any(w in mis_set for w in gd.neighbors(v)):
            problems.append(f"node {v} has no MIS node within distance {D}")
    groups: dict[int, list[int]] = {}
    for v, lead in enumerate(leader):
        groups.setdefault(lead, []).append(v)
    if set(groups) != mis_set:
        problems.append("patch leaders differ from the MIS")
    for lead, members in groups.items():
        sub = g.subgraph(members)
        if not nx.is_connected(sub):
            problems.append(f"patch {lead} is disconnected")
        # A connected graph smaller than D/2 is one whole patch.
        if len(members) < min(D / 2, g.number_of_nodes()):
            problems.append(f"patch {lead} has {len(members)} < D/2 members")
        for v in members:
            if depth[v] > D:
                problems.append(f"node {v} at depth {depth[v]} > D")
            p = parent[v]
            if v == lead:
                if p is not None or depth[v] != 0:
                    problems.append(f"leader {v} has a parent")
            elif p is None or not g.has_edge(v, p) or leader[p] != lead or depth[p] != depth[v] - 1:
                problems.append(f"node {v} has a bad tree parent {p}")
    return problems


def gen_connected_nx(n: int, rng, extra: int = 0) -> nx.Graph:
    """A random connected graph built without the code under test."""
    g = nx.random_labeled_tree(n, seed=rng.randrange(2**32)) if n > 1 else to_nx(1, [])
    for _ in range(extra):
        u, v = rng.randrange(n), rng.randrange(n)
        if u != v:
            g.add_edge(u, v)
    return g
