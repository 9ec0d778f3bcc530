"""Result files: JSON records, summary/aggregate CSVs, per-run learning curves."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .runner import RunResult
from .sweep import aggregate

CURVE_WINDOW = 100


def rolling_rate(rewards, window: int = CURVE_WINDOW) -> np.ndarray:
    """Success rate over the last ``window`` rounds; shorter prefixes use what exists."""
    r = np.asarray(rewards, dtype=float)
    c = np.concatenate([[0.0], np.cumsum(r)])
    n = np.arange(1, len(r) + 1)
    lo = np.maximum(n - window, 0)
    return (c[n] - c[lo]) / (n - lo)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def write_report(results: list[RunResult], out_dir, failures: list[dict] | None = None) -> Path:
    """Write every artefact for a set of runs; returns ``out_dir``.

    ``results.json`` omits wall-clock durations so identical seeds give identical bytes.
    Timings live in ``timings.csv``.
    """
    if not results:
        raise ValueError("no results to report")
    out = Path(out_dir)
    (out / "curves").mkdir(parents=True, exist_ok=True)
    records = [r.to_dict() for r in results]
    payload = {"runs": records, "failures": failures or []}
    (out / "results.json").write_text(json.dumps(payload, indent=1, sort_keys=True), encoding="utf-8")

    cps = sorted({cp for r in results for cp in r.checkpoints})
    _write_csv(
        out / "summary.csv",
        ["run_id", "setting", "attacker", "engine", "seed"] + [f"rate_{cp}" for cp in cps],
        [[r.run_id, r.setting, r.attacker, r.engine_kind, r.seed]
         + [r.checkpoints.get(cp, "") for cp in cps] for r in results],
    )
    for r in results:
        curve = rolling_rate(r.rewards)
        _write_csv(out / "curves" / f"{r.run_id}.csv", ["round", "rate"],
                   [[i + 1, float(v)] for i, v in enumerate(curve)])
    _write_csv(out / "timings.csv", ["run_id", "seconds"], [[r.run_id, f"{r.duration:.3f}"] for r in results])

    table = aggregate(results)
    if table:
        header = list(table[0].keys())
        for row in table[1:]:
            header += [k for k in row if k not in header]
        _write_csv(out / "aggregate.csv", header, [[row.get(k, "") for k in header] for row in table])
    return out


def load_results(path) -> list[RunResult]:
    """Read ``results.json`` (or a directory holding it) back into ``RunResult`` objects."""
    p = Path(path)
    if p.is_dir():
        p = p / "results.json"
    payload = json.loads(p.read_text(encoding="utf-8"))
    return [RunResult.from_dict(d) for d in payload["runs"]]
