"""Simulator and protocol library for dissemination in adversarial dynamic networks."""

from __future__ import annotations

from .coding import CodedVector, KnowledgeBasis, Token
from .dynamics import Adversary, AdversarySpec, DisconnectedTopology, Topology
from .finite_field import FieldSpec
from .simulator import (
    BudgetExceeded,
    Constants,
    InvalidConfig,
    RunConfig,
    RunRecord,
    run_trial,
)

__version__ = "0.1.0"

__all__ = [
    "Adversary",
    "AdversarySpec",
    "BudgetExceeded",
    "CodedVector",
    "Constants",
    "DisconnectedTopology",
    "FieldSpec",
    "InvalidConfig",
    "KnowledgeBasis",
    "RunConfig",
    "RunRecord",
    "Token",
    "Topology",
    "run_trial",
]
