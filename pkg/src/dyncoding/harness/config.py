"""Experiment files: flat ``key=value`` lines, lists written as ``a,b,c``.

Example::

    protocol=rlnc_broadcast
    n=32,64
    k=32
    d=1
    b=129
    adversary=fresh_random
    trials=20

Keys with several values become sweep axes; only the run parameters in
:data:`SWEEP_KEYS` may be swept.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from ..dynamics import ADVERSARY_KINDS, AdversarySpec, load_schedule
from ..simulator import Constants, InvalidConfig, RunConfig

SWEEP_KEYS = ("n", "k", "d", "b", "T", "q", "protocol", "adversary")
INT_KEYS = ("n", "k", "d", "b", "q", "T", "master_seed", "seed", "round_cap", "chunks", "trials")
STR_KEYS = ("protocol", "adversary", "placement", "gathering", "out", "schedule")
BOOL_KEYS = ("trace", "run_to_termination")
FLOAT_KEYS = ("p_extra",)
CONSTANT_KEYS = tuple(f.name for f in fields(Constants))
KNOWN_KEYS = INT_KEYS + STR_KEYS + BOOL_KEYS + FLOAT_KEYS + CONSTANT_KEYS


@dataclass
class ExperimentSpec:
    base: RunConfig
    axes: dict[str, list] = field(default_factory=dict)
    trials: int = 1
    out: str | None = None

    def points(self) -> list[tuple[tuple, RunConfig]]:
        """Every sweep point as (key, validated config), in axis order."""
        names = [k for k in SWEEP_KEYS if k in self.axes]
        out = []
        for combo in itertools.product(*(self.axes[k] for k in names)):
            cfg = self.base
            for name, value in zip(names, combo):
                cfg = apply_key(cfg, name, value)
            cfg = replace(cfg, adversary=replace(cfg.adversary, T=cfg.T))
            try:
                cfg.validate()
            except InvalidConfig as exc:
                point = ", ".join(f"{k}={v}" for k, v in zip(names, combo))
                raise InvalidConfig(exc.field, f"sweep point ({point or 'base'}) rejected: {exc}") from None
            out.append((point_key(cfg), cfg))
        return out


def point_key(cfg: RunConfig) -> tuple:
    return (cfg.protocol, cfg.adversary.kind, cfg.n, cfg.k, cfg.d, cfg.b, cfg.q, cfg.T)


def _convert(key: str, raw: str) -> Any:
    raw = raw.strip()
    if key in CONSTANT_KEYS:
        kind = type(getattr(Constants(), key))
    else:
        kind = int if key in INT_KEYS else float if key in FLOAT_KEYS else None
    try:
        if kind is int:
            return int(raw, 0)
        if kind is float:
            return float(raw)
    except ValueError:
        raise InvalidConfig(key, f"expected a number, got {raw!r}") from None
    if key in BOOL_KEYS:
        low = raw.lower()
        if low not in ("true", "false", "1", "0", "yes", "no"):
            raise InvalidConfig(key, f"expected a boolean, got {raw!r}")
        return low in ("true", "1", "yes")
    return raw


def apply_key(cfg: RunConfig, key: str, value: Any) -> RunConfig:
    if key == "adversary":
        if value not in ADVERSARY_KINDS:
            raise InvalidConfig("adversary", f"unknown adversary {value!r}")
        return replace(cfg, adversary=replace(cfg.adversary, kind=value))
    if key == "p_extra":
        return replace(cfg, adversary=replace(cfg.adversary, p_extra=value))
    if key == "seed":
        return replace(cfg, master_seed=value)
    if key in CONSTANT_KEYS:
        return replace(cfg, constants=replace(cfg.constants, **{key: value}))
    return replace(cfg, **{key: value})


def parse_spec(text: str, base_dir: str | Path = ".") -> ExperimentSpec:
    values: dict[str, list] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfig(f"line {lineno}", f"expected key=value, got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise InvalidConfig(key, "unknown key")
        items = [_convert(key, item) for item in raw.split(",")] if raw else []
        if not items:
            raise InvalidConfig(key, "empty value")
        if len(items) > 1 and key not in SWEEP_KEYS:
            raise InvalidConfig(key, "only n, k, d, b, T, q, protocol and adversary may take several values")
        values[key] = items

    cfg = RunConfig(adversary=AdversarySpec())
    trials, out = 1, None
    schedule = None
    for key, items in values.items():
        if key == "trials":
            trials = items[0]
        elif key == "out":
            out = items[0]
        elif key == "schedule":
            schedule = Path(base_dir) / items[0]
        elif len(items) == 1:
            cfg = apply_key(cfg, key, items[0])
    if schedule is not None:
        try:
            n, blocks = load_schedule(schedule)
        except (OSError, ValueError) as exc:
            raise InvalidConfig("schedule", str(exc)) from None
        cfg = replace(cfg, adversary=replace(cfg.adversary, kind="custom", schedule=blocks))
        if "n" not in values:
            cfg = replace(cfg, n=n)
    if trials < 1:
        raise InvalidConfig("trials", "need at least one trial")
    axes = {k: v for k, v in values.items() if k in SWEEP_KEYS and len(v) > 1}
    spec = ExperimentSpec(cfg, axes, trials, out)
    spec.points()
    return spec


def load_spec(path: str | Path) -> ExperimentSpec:
    path = Path(path)
    return parse_spec(path.read_text(), base_dir=path.parent)
