"""Node state machines for every dissemination protocol, plus run helpers."""

from __future__ import annotations

from dataclasses import replace

from ..simulator import STREAM_NODE, Message, Node, RunConfig, RunRecord, run_trial, stream
from .coded import CodedStage, StagePlan, plan_stage
from .common import BlockLayout, RunParams, StallDetected, Tag
from .flooding import FloodNode, TokenNode
from .forwarding import GatherNode, single_round_plan
from .patch_share import PatchShareNode, patch_share_cap
from .patches import (
    Chunker,
    MISFailure,
    PatchAssignment,
    build_patches,
    patch_radius,
    pipelined_patch_sum,
)
from .rlnc import RlncNode
from .unknown_n import estimate_budget, unknown_n_wrapper

GATHER_MODES = {"greedy": "greedy", "priority": "priority", "patch": "indexed"}


def make_nodes(config: RunConfig, holdings):
    """Nodes for ``config.protocol``; returns (nodes, budget, global tokens, default round cap)."""
    params = RunParams.from_config(config, holdings)
    n, k = config.n, config.k
    all_tokens = sorted(tok for h in holdings for tok in h)
    global_tokens = {tok.id: tok.value for tok in all_tokens}
    ids = [tok.id for tok in all_tokens]
    rngs = [stream(config.master_seed, STREAM_NODE, u) for u in range(n)]
    proto = config.protocol

    if proto == "flood_forward":
        nodes = [FloodNode(u, params, holdings[u]) for u in range(n)]
        epochs = -(-k // max(1, params.forward_cap)) + 2
        cap = 2 * epochs * params.epoch
    elif proto == "rlnc_broadcast":
        nodes = [RlncNode(u, params, ids, holdings[u], rngs[u]) for u in range(n)]
        cap = params.constants.rlnc_cap * (n + k) + 1
    elif proto == "patch_share":
        plan = plan_stage(params, config.chunks)
        nodes = [PatchShareNode(u, params, plan, ids, holdings[u], rngs[u]) for u in range(n)]
        cap = patch_share_cap(params) + 1
    else:
        if proto == "random_forward":
            mode, plan = "random", None
        elif proto == "greedy_forward":
            mode, plan = "greedy", None
        elif proto == "priority_forward":
            mode, plan = "priority", None
        else:  # tstable
            mode, plan = GATHER_MODES[config.gathering], plan_stage(params, config.chunks)
        nodes = [GatherNode(u, params, holdings[u], rngs[u], mode, plan) for u in range(n)]
        cap = gather_round_cap(nodes[0], k)
    return nodes, config.b, global_tokens, cap


def gather_round_cap(node: GatherNode, k: int) -> int:
    """Rounds for k + 2 worst-case iterations, each delivering at least one token."""
    E = node.E
    index_epochs = -(-node.layout.max_blocks // max(1, node.per_msg)) + 1
    iteration = 2 * E + index_epochs * E + node.plan.T + node._coded_rounds(node.layout.max_blocks)
    return (k + 2) * iteration


# -- step helpers: one round of a node's state machine -------------------------


def node_step(node: Node, t: int, received: list[Message]) -> Message | None:
    """Deliver round t's inbox, then produce the message for round t + 1."""
    node.receive(t, received)
    return None if node.terminated else node.emit(t + 1)


flood_forward_step = node_step
rlnc_broadcast_step = node_step
random_forward_phase = node_step


# -- whole-run helpers -----------------------------------------------------------


def _run(config: RunConfig, protocol: str, **kw) -> RunRecord:
    return run_trial(replace(config, protocol=protocol, **kw))


def greedy_forward_run(config: RunConfig) -> RunRecord:
    return _run(config, "greedy_forward")


def priority_forward_run(config: RunConfig) -> RunRecord:
    return _run(config, "priority_forward")


def patch_share_run(config: RunConfig) -> RunRecord:
    return _run(config, "patch_share")


def tstable_token_dissemination(config: RunConfig, gathering: str | None = None) -> RunRecord:
    return _run(config, "tstable", gathering=gathering or config.gathering)


__all__ = [
    "BlockLayout",
    "Chunker",
    "CodedStage",
    "FloodNode",
    "GatherNode",
    "MISFailure",
    "PatchAssignment",
    "PatchShareNode",
    "RlncNode",
    "RunParams",
    "StagePlan",
    "StallDetected",
    "Tag",
    "TokenNode",
    "build_patches",
    "estimate_budget",
    "flood_forward_step",
    "greedy_forward_run",
    "make_nodes",
    "patch_radius",
    "patch_share_cap",
    "patch_share_run",
    "pipelined_patch_sum",
    "plan_stage",
    "priority_forward_run",
    "random_forward_phase",
    "rlnc_broadcast_step",
    "single_round_plan",
    "tstable_token_dissemination",
    "unknown_n_wrapper",
]
