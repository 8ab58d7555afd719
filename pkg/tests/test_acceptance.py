"""Acceptance suite: one test (or two parts) per criterion, with its tolerance.

Each test records what it measured; the terminal summary prints one
PASS/FAIL line per criterion.
"""

from __future__ import annotations

import itertools
import math
import os
import random
import statistics
import time
from dataclasses import replace

import networkx as nx
import pytest

from dyncoding.coding import CodedVector, KnowledgeBasis, sensing_transfer_trial
from dyncoding.dynamics import Adversary, AdversarySpec, Topology, gen_random_connected
from dyncoding.finite_field import FieldSpec, ff_add, ff_inv, ff_mul, int_to_bits, is_prime, pack_token, unpack_token
from dyncoding.harness import fit_scaling, parse_spec, run_experiment
from dyncoding.protocols import Chunker, RunParams, build_patches, patch_share_cap, pipelined_patch_sum, unknown_n_wrapper
from dyncoding.protocols.unknown_n import estimate_budget
from dyncoding.simulator import Constants, RunConfig, build_trial, log2_ceil, run_trial, simulate, with_seed
from oracles import check_patches, inverse_bruteforce, rank_from_span, senses_bruteforce_gf2, span_gf2, to_nx

ADVERSARIES = ("static_random", "fresh_random", "rotating_path", "rank_sorted_path")


def cfg(adversary="fresh_random", **kw) -> RunConfig:
    base = RunConfig(**kw)
    return replace(base, adversary=AdversarySpec(adversary, T=base.T))


JOBS = os.cpu_count() or 1


def medians(spec_text: str) -> dict:
    rows, _ = run_experiment(parse_spec(spec_text), jobs=JOBS)
    return {r.key: r for r in rows}


# -- 1 -------------------------------------------------------------------------------


@pytest.mark.criterion(1, "exact algebra suite under 10 s")
def test_c1_algebra(record_property):
    start = time.perf_counter()
    rng = random.Random(1)
    for q in (2, 3, 5, 7, 13):
        f = FieldSpec(q)
        for _ in range(10_000):
            a, b, c = (rng.randrange(q) for _ in range(3))
            assert ff_add(a, b, f) == ff_add(b, a, f) and ff_mul(a, b, f) == ff_mul(b, a, f)
            assert ff_add(ff_add(a, b, f), c, f) == ff_add(a, ff_add(b, c, f), f)
            assert ff_mul(ff_mul(a, b, f), c, f) == ff_mul(a, ff_mul(b, c, f), f)
            assert ff_mul(a, ff_add(b, c, f), f) == ff_add(ff_mul(a, b, f), ff_mul(a, c, f), f)
    for q in filter(is_prime, range(2, 102)):
        assert all(ff_inv(a, FieldSpec(q)) == inverse_bruteforce(a, q) for a in range(1, q))
    for q in (2, 5):
        f = FieldSpec(q)
        for d in range(1, 17):
            for value in range(1 << d):
                bits = int_to_bits(value, d)
                assert unpack_token(pack_token(bits, f), d, f) == bits
    # Echelon invariants and span equality against enumeration, k + d' <= 12.
    checked = 0
    for k, dp in ((6, 6), (4, 8), (10, 2), (12, 0)):
        for _ in range(25):
            basis = KnowledgeBasis(FieldSpec(2), k, dp)
            raws = []
            for _ in range(rng.randrange(1, 16)):
                raw = rng.getrandbits(k + dp)
                basis.insert_raw(raw)
                raws.append(raw)
            span = span_gf2(raws)
            assert span_gf2(basis.raw_rows()) == span
            assert basis.rank == rank_from_span(len(span), 2)
            pivs = basis.pivots()
            assert pivs == sorted(set(pivs))
            for i, (p, row) in enumerate(zip(pivs, basis.raw_rows())):
                assert row & ((1 << (p + 1)) - 1) == 1 << p
                assert all(not (other >> p) & 1 for j, other in enumerate(basis.raw_rows()) if j != i)
            checked += 1
    # Senses against the exhaustive oracle, k <= 5.
    mus = list(itertools.product((0, 1), repeat=5))
    for _ in range(200):
        basis = KnowledgeBasis(FieldSpec(2), 5, 3)
        raws = [rng.getrandbits(8) for _ in range(rng.randrange(0, 6))]
        for raw in raws:
            basis.insert_raw(raw)
        span = span_gf2(raws)
        assert all(basis.senses(mu) == senses_bruteforce_gf2(span, mu, 5) for mu in mus)
    elapsed = time.perf_counter() - start
    record_property("measured", f"{checked} span checks, 200x32 sensing checks, {elapsed:.1f} s")
    assert elapsed < 10


# -- 2 -------------------------------------------------------------------------------


@pytest.mark.criterion(2, "sensing transfer frequency >= 1 - 1/q - 0.02")
def test_c2_sensing_transfer(record_property):
    start = time.perf_counter()
    freqs = {}
    for q in (2, 3, 5):
        field = FieldSpec(q)
        rng = random.Random(100 + q)
        hits = 0
        trials = 10_000
        for _ in range(trials):
            k = rng.randrange(1, 7)
            basis = KnowledgeBasis(field, k, 2)
            while basis.rank == 0:
                for _ in range(rng.randrange(1, k + 1)):
                    header = tuple(rng.randrange(q) for _ in range(k))
                    # A zero header adds rank without letting the basis sense anything.
                    if any(header):
                        basis.insert(CodedVector(header, (rng.randrange(q), 0)))
            while True:
                mu = [rng.randrange(q) for _ in range(k)]
                if basis.senses(mu):
                    break
            hits += sensing_transfer_trial(basis, mu, rng)
        freqs[q] = hits / trials
    elapsed = time.perf_counter() - start
    record_property("measured", ", ".join(f"q={q}: {f:.3f}" for q, f in freqs.items()) + f", {elapsed:.1f} s")
    for q, f in freqs.items():
        assert f >= 1 - 1 / q - 0.02
    assert elapsed < 10


# -- 3 -------------------------------------------------------------------------------


@pytest.mark.criterion(3, "indexed RLNC broadcast completes in linear time")
def test_c3_rlnc_linear(record_property):
    start = time.perf_counter()
    worst, ratios = [], {}
    for adv in ADVERSARIES:
        meds = {}
        for n in (32, 64, 128):
            rows = medians(
                f"protocol=rlnc_broadcast\nn={n}\nk={n}\nd=1\nb={n + 1}\nadversary={adv}\n"
                "trials=100\nrun_to_termination=false\n"
            )
            (row,) = rows.values()
            assert row.failures == 0, (adv, n)
            assert row.max <= 16 * (2 * n), (adv, n, row.max)
            worst.append(row.max / (2 * n))
            meds[n] = row.median
        ratios[adv] = (meds[64] / meds[32], meds[128] / meds[64])
    elapsed = time.perf_counter() - start
    record_property(
        "measured",
        "growth " + ", ".join(f"{a}: {r[0]:.2f}/{r[1]:.2f}" for a, r in ratios.items())
        + f"; worst max/(n+k) {max(worst):.2f}; {elapsed:.0f} s",
    )
    for adv, rs in ratios.items():
        assert all(1.5 <= r <= 3.0 for r in rs), (adv, rs)
    assert elapsed < 120


# -- 4 -------------------------------------------------------------------------------


@pytest.mark.criterion(4, "random-forward gathers >= 0.5*sqrt(bk/d) tokens or all")
def test_c4_gathering(record_property):
    start = time.perf_counter()
    n = k = 100
    d, b = 8, 64
    need = 0.5 * math.sqrt(b * k / d)
    good, counts = 0, []
    for seed in range(100):
        rec = run_trial(with_seed(cfg(n=n, k=k, d=d, b=b, protocol="random_forward"), seed))
        top = rec.extras["leader_counts"][0]
        counts.append(top)
        good += top >= need or top == k
    elapsed = time.perf_counter() - start
    record_property("measured", f"{good}/100 trials, min {min(counts)} vs {need:.1f} needed, {elapsed:.0f} s")
    assert good >= 95
    assert elapsed < 60


# -- 5 -------------------------------------------------------------------------------


@pytest.mark.criterion(5, "greedy <= 0.5 x flooding")
def test_c5a_greedy_beats_flooding(record_property):
    start = time.perf_counter()
    text = "n=64\nk=64\nd=8\nb=128\nadversary=fresh_random\ntrials=20\nrun_to_termination=false\nprotocol={}\n"
    (flood,) = medians(text.format("flood_forward")).values()
    (greedy,) = medians(text.format("greedy_forward")).values()
    ratio = greedy.median / flood.median
    elapsed = time.perf_counter() - start
    record_property("measured", f"{greedy.median} vs {flood.median} rounds, ratio {ratio:.3f}, {elapsed:.0f} s")
    assert flood.failures == greedy.failures == 0
    assert ratio <= 0.5


@pytest.mark.criterion(5, "b-sweep exponent <= -1.5, whole criterion under 5 min")
def test_c5b_b_scaling(record_property):
    start = time.perf_counter()
    rows, _ = run_experiment(parse_spec(
        "protocol=greedy_forward\nn=128\nk=128\nd=8\nb=32,64,128,256\nadversary=fresh_random\n"
        "trials=10\nrun_to_termination=false\n"
    ), jobs=JOBS)
    slope = fit_scaling(rows, "b")
    elapsed = time.perf_counter() - start
    record_property("measured", f"medians {[r.median for r in rows]}, exponent {slope:.2f}, {elapsed:.0f} s")
    assert all(r.failures == 0 for r in rows)
    assert slope <= -1.5
    assert elapsed < 300


# -- 6 -------------------------------------------------------------------------------


@pytest.mark.criterion(6, "patch construction exact on 50 topologies")
def test_c6_patches(record_property):
    start = time.perf_counter()
    n, T = 256, 64
    logn = log2_ceil(n)
    params = RunParams(n=n, d=8, b=64, q=2, T=T, constants=Constants(), uid_bits=logn, seq_bits=0)
    rng = random.Random(6)
    violations, sizes = 0, []
    for i in range(50):
        if i % 2:
            topo = gen_random_connected(n, rng, p_extra=rng.choice([0.0, 0.01, 0.03]))
        else:
            adv = Adversary(AdversarySpec("rotating_path", T=T), n, random.Random(i))
            topo = adv.next_topology(T * i, None)
        g = to_nx(n, topo.edges)
        assert nx.is_connected(g)
        pa = build_patches(params, topo, lambda u, i=i: random.Random(i * 10_000 + u))
        problems = check_patches(g, pa.D, pa.leader, pa.parent, pa.depth, pa.mis)
        violations += len(problems)
        sizes.extend(len(m) for m in pa.members().values())
    elapsed = time.perf_counter() - start
    record_property("measured", f"D={pa.D}, {violations} violations, smallest patch {min(sizes)}, {elapsed:.0f} s")
    assert violations == 0
    assert elapsed < 60


# -- 7 -------------------------------------------------------------------------------


def _random_forest(rng, n):
    parent, depth = [None] * n, [0] * n
    order = list(range(n))
    rng.shuffle(order)
    roots = max(1, n // rng.randrange(2, 8))
    for i, v in enumerate(order):
        if i >= roots:
            p = order[rng.randrange(i)]
            parent[v], depth[v] = p, depth[p] + 1
    return parent, depth


@pytest.mark.criterion(7, "pipelined convergecast equals direct sum on 1000 instances")
def test_c7_convergecast(record_property):
    start = time.perf_counter()
    rng = random.Random(7)
    mismatches = 0
    for _ in range(1000):
        q = rng.choice([2, 3, 5])
        n = rng.randrange(1, 40)
        parent, depth = _random_forest(rng, n)
        D = max(depth) + rng.randrange(0, 3)
        width = rng.randrange(1, 48)
        chunker = Chunker(q, width, rng.randrange(1, 12))
        if q == 2:
            vecs = [rng.getrandbits(width) for _ in range(n)]
        else:
            vecs = [tuple(rng.randrange(q) for _ in range(width)) for _ in range(n)]
        # A full graph with extra non-tree edges: addressing must ignore them.
        adj = [set() for _ in range(n)]
        for v, p in enumerate(parent):
            if p is not None:
                adj[v].add(p)
                adj[p].add(v)
        for _ in range(n):
            a, b = rng.randrange(n), rng.randrange(n)
            if a != b:
                adj[a].add(b)
                adj[b].add(a)
        got, _ = pipelined_patch_sum(parent, depth, D, chunker, vecs, adj=[sorted(s) for s in adj])
        root = list(range(n))
        for v in range(n):
            r = v
            while parent[r] is not None:
                r = parent[r]
            root[v] = r
        for v in range(n):
            members = [u for u in range(n) if root[u] == root[v]]
            if q == 2:
                want = 0
                for u in members:
                    want ^= vecs[u]
            else:
                want = tuple(sum(vecs[u][j] for u in members) % q for j in range(width))
            mismatches += got[v] != want
    elapsed = time.perf_counter() - start
    record_property("measured", f"{mismatches} mismatches, {elapsed:.1f} s")
    assert mismatches == 0
    assert elapsed < 10


# -- 8 -------------------------------------------------------------------------------


@pytest.mark.criterion(8, "patch-share within 8(n+bT^2)log n, 20/20")
def test_c8a_patch_share_bound(record_property):
    start = time.perf_counter()
    n, b, T = 256, 16, 16
    # The largest k whose coded vectors (k + d' symbols) fit one T-round meta-round.
    k, d = 120, 8
    bound = 8 * (n + b * T * T) * math.ceil(math.log2(n))
    rounds = []
    for seed in range(20):
        c = with_seed(cfg("rotating_path", n=n, k=k, d=d, b=b, T=T, protocol="patch_share", run_to_termination=False), seed)
        rec = run_trial(c)
        assert rec.ok, rec.failure_reason
        rounds.append(rec.completion_round)
    elapsed = time.perf_counter() - start
    record_property("measured", f"max {max(rounds)} of bound {bound}, median {statistics.median(rounds)}, {elapsed:.0f} s")
    assert max(rounds) <= bound
    assert bound == patch_share_cap(RunParams(n, d, b, 2, T, Constants(), 8, 0))


@pytest.mark.criterion(8, "T=8 median <= 1/4 of T=1 median")
def test_c8b_tstable_speedup(record_property):
    start = time.perf_counter()
    rows, _ = run_experiment(parse_spec(
        "protocol=tstable\ngathering=greedy\nn=128\nk=128\nd=8\nb=16\nT=1,8\nadversary=rotating_path\n"
        "trials=5\nrun_to_termination=false\n"
    ), jobs=JOBS)
    by_T = {r.T: r for r in rows}
    ratio = by_T[8].median / by_T[1].median
    elapsed = time.perf_counter() - start
    record_property("measured", f"T=8 {by_T[8].median} vs T=1 {by_T[1].median}, ratio {ratio:.2f}, {elapsed:.0f} s")
    assert by_T[1].failures == by_T[8].failures == 0
    assert ratio <= 0.25


# -- 9 -------------------------------------------------------------------------------

ENGINE_CONFIGS = [
    dict(protocol="rlnc_broadcast", n=24, k=24, d=1, b=25, adversary="rank_sorted_path"),
    dict(protocol="rlnc_broadcast", n=16, k=8, d=4, b=3 * 10 + 1, q=5, adversary="fresh_random"),
    dict(protocol="flood_forward", n=20, k=20, d=8, b=32, adversary="static_random"),
    dict(protocol="random_forward", n=20, k=20, d=8, b=64, adversary="fresh_random"),
    dict(protocol="greedy_forward", n=24, k=24, d=4, b=40, adversary="rotating_path"),
    dict(protocol="priority_forward", n=24, k=24, d=4, b=64, adversary="fresh_random"),
    dict(protocol="patch_share", n=32, k=20, d=4, b=16, T=8, adversary="rotating_path"),
    dict(protocol="tstable", n=32, k=32, d=8, b=16, T=8, adversary="rotating_path"),
    dict(protocol="tstable", gathering="patch", n=16, k=16, d=4, b=24, T=64, adversary="rotating_path",
         constants=Constants(c_D=16, mis_phase_factor=1)),
    dict(protocol="greedy_forward", n=12, k=12, d=8, b=32, adversary="rank_sorted_path", placement="adversarial-random"),
]


def _engine_cfg(kw, seed):
    kw = dict(kw)
    adv = kw.pop("adversary")
    return with_seed(cfg(adv, **kw, trace=True), seed)


@pytest.mark.criterion(9, "engine contracts: replay, budget, adversary ordering, decode exactness")
def test_c9_engine_contracts(record_property):
    checks = 0
    for i, kw in enumerate(ENGINE_CONFIGS):
        c = _engine_cfg(kw, seed=900 + i)
        first, second = run_trial(c), run_trial(c)
        assert first == second, kw
        nodes, adv, budget, tokens, cap = build_trial(c)
        rec = simulate(nodes, adv, budget, tokens, cap, trace=True, record_messages=True)
        assert rec.trace == first.trace
        assert max(max(r) for r in rec.message_bits) <= c.b + 8
        assert rec.total_bits_sent == sum(map(sum, rec.message_bits))
        if rec.ok:
            assert all(node.known() == tokens for node in nodes)
        # Swap every node's coins at round t0; G(t0) must not move.
        for t0 in (0, len(first.trace) // 3):
            def perturb(t, ns, t0=t0):
                if t == t0:
                    for u, node in enumerate(ns):
                        node.rng = random.Random(77_000 + u)
            nodes, adv, budget, tokens, cap = build_trial(c)
            alt = simulate(nodes, adv, budget, tokens, cap, trace=True, on_round_start=perturb)
            upto = min(t0 + 1, len(alt.trace), len(first.trace))
            assert [r[1] for r in alt.trace[:upto]] == [r[1] for r in first.trace[:upto]]
            checks += 1
    record_property("measured", f"{len(ENGINE_CONFIGS)} configs, {checks} perturbation replays")


# -- 10 ------------------------------------------------------------------------------


@pytest.mark.criterion(10, "unknown-n wrapper counts exactly within 2x the final budget")
def test_c10_unknown_n(record_property):
    start = time.perf_counter()
    summary = []
    for n in (1, 2, 13, 40):
        rec = unknown_n_wrapper(n, master_seed=n)
        attempts = rec.extras["attempts"]
        prefix = sum(a["budget"] for a in attempts[:-1])
        assert rec.extras["count"] == n
        assert rec.rounds_executed <= 2 * rec.extras["final_budget"] + prefix
        assert attempts[-1]["budget"] == estimate_budget(attempts[-1]["n_hat"], 64)
        summary.append(f"n={n}: {rec.rounds_executed} rounds, n_hat={attempts[-1]['n_hat']}")
    elapsed = time.perf_counter() - start
    record_property("measured", "; ".join(summary) + f"; {elapsed:.1f} s")
    assert elapsed < 60
