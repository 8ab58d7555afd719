"""Trial batteries over sweep points, summary statistics and scaling fits."""

from __future__ import annotations

import csv
import io
import json
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from ..simulator import RunConfig, RunRecord, run_trial, with_seed
from .config import ExperimentSpec, point_key

CSV_COLUMNS = (
    "protocol", "adversary", "n", "k", "d", "b", "q", "T",
    "trials", "failures", "min", "median", "p95", "max", "mean_bits", "seed0",
)


class InsufficientData(ValueError):
    pass


@dataclass(frozen=True)
class SummaryRow:
    protocol: str
    adversary: str
    n: int
    k: int
    d: int
    b: int
    q: int
    T: int
    trials: int
    failures: int
    min: int | None
    median: float | None
    p95: int | None
    max: int | None
    mean_bits: float
    seed0: int

    @property
    def key(self) -> tuple:
        return (self.protocol, self.adversary, self.n, self.k, self.d, self.b, self.q, self.T)

    def value(self, axis: str):
        return getattr(self, axis)

    def csv_fields(self) -> list[str]:
        return ["" if getattr(self, c) is None else str(getattr(self, c)) for c in CSV_COLUMNS]


def p95_nearest_rank(values: Sequence[int]) -> int:
    ordered = sorted(values)
    return ordered[max(0, math.ceil(0.95 * len(ordered)) - 1)]


def summarize(cfg: RunConfig, records: Sequence[RunRecord], seed0: int) -> SummaryRow:
    """Statistics over successful completions; bits are averaged over all trials."""
    done = [r.completion_round for r in records if r.ok]
    failures = len(records) - len(done)
    mean_bits = sum(r.total_bits_sent for r in records) / len(records) if records else 0.0
    protocol, adversary, n, k, d, b, q, T = point_key(cfg)
    return SummaryRow(
        protocol, adversary, n, k, d, b, q, T,
        trials=len(records),
        failures=failures,
        min=min(done) if done else None,
        median=statistics.median(done) if done else None,
        p95=p95_nearest_rank(done) if done else None,
        max=max(done) if done else None,
        mean_bits=mean_bits,
        seed0=seed0,
    )


def _run_one(cfg: RunConfig) -> RunRecord:
    try:
        return run_trial(cfg)
    except Exception as exc:  # a crashing trial is a failed trial, with its reason kept
        return RunRecord(None, None, 0, 0, failure_reason=f"{type(exc).__name__}: {exc}")


def trial_configs(cfg: RunConfig, trials: int, master_seed: int) -> list[RunConfig]:
    return [with_seed(cfg, master_seed + i) for i in range(trials)]


def run_experiment(
    spec: ExperimentSpec,
    jobs: int = 1,
    master_seed: int | None = None,
    out: str | Path | None = None,
) -> tuple[list[SummaryRow], list[dict]]:
    """Run every sweep point; returns summary rows and the per-trial records.

    Trial i of a point uses seed ``master_seed + i``.  With ``out`` set, the
    CSV goes there and the per-trial JSON next to it (``.json`` suffix).
    """
    points = spec.points()
    base_seed = spec.base.master_seed if master_seed is None else master_seed
    jobs_list = [(key, c) for key, cfg in points for c in trial_configs(cfg, spec.trials, base_seed)]
    configs = [c for _, c in jobs_list]
    if jobs > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_one, configs))
    else:
        records = [_run_one(c) for c in configs]

    by_point: dict[tuple, list] = {}
    for (key, cfg), rec in zip(jobs_list, records):
        by_point.setdefault(key, []).append((cfg, rec))
    rows, trial_dump = [], []
    for key in sorted(by_point):
        entries = by_point[key]
        cfg0 = entries[0][0]
        rows.append(summarize(cfg0, [r for _, r in entries], cfg0.master_seed))
        for cfg, rec in entries:
            trial_dump.append({"point": list(key), "seed": cfg.master_seed, "record": trial_json(rec)})
    target = out or spec.out
    if target is not None:
        write_outputs(rows, trial_dump, target)
    return rows, trial_dump


def trial_json(rec: RunRecord) -> dict:
    data = rec.to_json()
    data.pop("trace", None)
    data.pop("message_bits", None)
    return data


def rows_to_csv(rows: Sequence[SummaryRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in sorted(rows, key=lambda r: r.key):
        writer.writerow(row.csv_fields())
    return buf.getvalue()


def write_outputs(rows: Sequence[SummaryRow], trials: list[dict], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(rows_to_csv(rows))
    path.with_suffix(".json").write_text(json.dumps(trials, indent=1, sort_keys=True) + "\n")


def recompute_rows(trials: list[dict]) -> list[SummaryRow]:
    """Rebuild summary rows from per-trial JSON, as a consistency check."""
    grouped: dict[tuple, list] = {}
    for entry in trials:
        grouped.setdefault(tuple(entry["point"]), []).append(entry)
    rows = []
    for key in sorted(grouped):
        entries = grouped[key]
        protocol, adversary, n, k, d, b, q, T = key
        recs = [RunRecord(**{**e["record"], "trace": [], "message_bits": []}) for e in entries]
        cfg = RunConfig(n=n, k=k, d=d, b=b, q=q, T=T, protocol=protocol)
        cfg = replace(cfg, adversary=replace(cfg.adversary, kind=adversary, T=T))
        rows.append(summarize(cfg, recs, min(e["seed"] for e in entries)))
    return rows


def fit_scaling(rows: Sequence[SummaryRow], axis: str) -> float:
    """Least-squares slope of log(median rounds) against log(axis value)."""
    pts = [(float(r.value(axis)), float(r.median)) for r in rows if r.median is not None and r.median > 0]
    xs = sorted({x for x, _ in pts})
    if len(xs) < 3:
        raise InsufficientData(f"need at least 3 sweep points along {axis!r}, have {len(xs)}")
    if any(x <= 0 for x in xs):
        raise InsufficientData(f"axis {axis!r} has non-positive values")
    lx = np.log([x for x, _ in pts])
    ly = np.log([y for _, y in pts])
    slope, _ = np.polyfit(lx, ly, 1)
    return float(slope)
