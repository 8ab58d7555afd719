"""Counting nodes without knowing n: guess n_hat = 2, 4, 8, ... and restart on failure.

Each node floods its own label with :class:`FloodNode` using epochs of
n_hat rounds.  An estimate fails when some node hears more than n_hat
labels, the run outlives its budget, or the nodes end with different label
sets.  Matching sets are correct: every node's own label is in its set.
"""

from __future__ import annotations

from ..coding import Token
from ..dynamics import Adversary, AdversarySpec
from ..simulator import (
    STREAM_ADVERSARY,
    STREAM_PLACEMENT,
    Constants,
    RunRecord,
    simulate,
    stream,
)
from .common import RunParams
from .flooding import FloodNode

LABEL_BITS = 16


def estimate_params(n_hat: int, b: int, constants: Constants = Constants()) -> RunParams:
    return RunParams(n=n_hat, d=1, b=b, q=2, T=1, constants=constants, uid_bits=LABEL_BITS, seq_bits=0)


def estimate_budget(n_hat: int, b: int) -> int:
    """Flooding n_hat labels takes ceil(n_hat / cap) epochs plus a quiet one; one spare epoch."""
    cap = estimate_params(n_hat, b).forward_cap
    return (-(-n_hat // cap) + 2) * n_hat


def draw_labels(n: int, master_seed: int) -> list[int]:
    rng = stream(master_seed, STREAM_PLACEMENT)
    return rng.sample(range(1 << LABEL_BITS), n)


def unknown_n_wrapper(
    n: int,
    b: int = 64,
    adversary: AdversarySpec = AdversarySpec(kind="fresh_random"),
    master_seed: int = 0,
    max_estimate: int = 1 << LABEL_BITS,
) -> RunRecord:
    """Count the nodes of a hidden-size network; ``extras`` lists every estimate tried."""
    if n < 1:
        raise ValueError("network needs at least one node")
    labels = draw_labels(n, master_seed)
    tokens = {lab: Token(lab, 0, 0, 1) for lab in labels}
    truth = {t.id: t.value for t in tokens.values()}
    attempts = []
    total_rounds = 0
    total_bits = 0
    n_hat = 2
    found = None
    while n_hat <= max_estimate:
        params = estimate_params(n_hat, b)
        if params.forward_cap < 1:
            raise ValueError(f"b={b} cannot carry a {params.token_bits}-bit label")
        budget = estimate_budget(n_hat, b)
        nodes = [FloodNode(u, params, [tokens[labels[u]]]) for u in range(n)]
        adv = Adversary(adversary, n, stream(master_seed, STREAM_ADVERSARY, n_hat))
        rec = simulate(nodes, adv, b, truth, budget, run_to_termination=True)
        sets = [frozenset(node.tokens) for node in nodes]
        reason = None
        if any(len(s) > n_hat for s in sets):
            reason = "count exceeds estimate"
        elif rec.self_termination_round is None:
            reason = "budget expired"
        elif len(set(sets)) != 1:
            reason = "nodes disagree"
        total_rounds += rec.rounds_executed
        total_bits += rec.total_bits_sent
        attempts.append(
            {"n_hat": n_hat, "budget": budget, "rounds": rec.rounds_executed, "failure": reason}
        )
        if reason is None:
            found = len(sets[0])
            break
        n_hat *= 2
    return RunRecord(
        completion_round=total_rounds if found is not None else None,
        self_termination_round=total_rounds if found is not None else None,
        total_bits_sent=total_bits,
        rounds_executed=total_rounds,
        failure_reason=None if found is not None else "EstimateLimit",
        extras={"count": found, "attempts": attempts, "final_budget": attempts[-1]["budget"]},
    )
