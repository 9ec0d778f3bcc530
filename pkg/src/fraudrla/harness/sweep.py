"""Sweeps over attacker x engine x partition x seed, with aggregation."""

from __future__ import annotations

import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..core import ConfigError
from .config import RunConfig, from_flat, parse_flat, parse_value
from .runner import RunResult, run_attack

log = logging.getLogger(__name__)

ATTACKER_SHORTHAND = "sweep.attacker"
PARTITION_SHORTHAND = "sweep.partition"


@dataclass
class SweepSpec:
    configs: list[RunConfig]

    def __post_init__(self):
        if not self.configs:
            raise ConfigError("a sweep needs at least one run")
        seen = set()
        for c in self.configs:
            key = (repr(c.replace(seed=0)), c.seed)
            if key in seen:
                raise ConfigError(f"duplicate run (seed {c.seed}) in sweep")
            seen.add(key)


@dataclass
class SweepOutcome:
    results: list[RunResult]
    failures: list[dict] = field(default_factory=list)
    table: list[dict] = field(default_factory=list)


def _attacker_overrides(token: str) -> dict:
    """``ppo`` or ``mimicry:<family>[:<train_size>|full]``."""
    parts = str(token).strip().split(":")
    if parts[0] == "ppo":
        return {"attacker.kind": "ppo"}
    if parts[0] != "mimicry" or len(parts) not in (2, 3):
        raise ConfigError(f"bad attacker token {token!r}")
    out = {"attacker.kind": "mimicry", "attacker.family": parts[1]}
    if len(parts) == 3:
        out["attacker.train_size"] = None if parts[2] == "full" else int(parts[2])
    return out


def _partition_overrides(token: str) -> dict:
    """``<known>/<unknown>`` fractions, e.g. ``0.25/0``."""
    try:
        known, unknown = (float(x) for x in str(token).split("/"))
    except ValueError:
        raise ConfigError(f"bad partition token {token!r}; expected known/unknown") from None
    return {"partition.known": known, "partition.unknown": unknown}


def parse_sweep(text: str) -> SweepSpec:
    """Flat config plus ``sweep.<key> = a | b | c`` axes, expanded as a grid.

    ``sweep.attacker`` and ``sweep.partition`` accept the shorthands above.
    """
    flat = {}
    axes: list[list[dict]] = []
    raw_lines = {}
    for line in text.splitlines():
        body = line.split("#", 1)[0]
        if "=" in body and body.strip().startswith("sweep."):
            k, v = (p.strip() for p in body.split("=", 1))
            raw_lines[k] = v
    base = parse_flat("\n".join(l for l in text.splitlines() if not l.split("#", 1)[0].strip().startswith("sweep.")))
    flat.update(base)
    for key, value in raw_lines.items():
        tokens = [t.strip() for t in value.split("|") if t.strip()]
        if key == ATTACKER_SHORTHAND:
            axes.append([_attacker_overrides(t) for t in tokens])
        elif key == PARTITION_SHORTHAND:
            axes.append([_partition_overrides(t) for t in tokens])
        elif key == "sweep.seeds":
            axes.append([{"seed": int(parse_value(t))} for t in tokens])
        else:
            target = key[len("sweep."):]
            axes.append([{target: parse_value(t)} for t in tokens])
    configs = []
    for combo in itertools.product(*axes) if axes else [()]:
        merged = dict(flat)
        for overrides in combo:
            merged.update(overrides)
        configs.append(from_flat(merged))
    return SweepSpec(configs)


def load_sweep(path) -> SweepSpec:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read sweep spec {path}: {exc}") from exc
    return parse_sweep(text)


def _run_one(cfg: RunConfig):
    try:
        return run_attack(cfg), None
    except Exception as exc:  # recorded, the sweep goes on
        log.error("run seed=%s failed: %s", cfg.seed, exc)
        return None, {"config": cfg.to_dict(), "error": str(exc)}


def run_sweep(spec: SweepSpec, parallelism: int = 1) -> SweepOutcome:
    """Execute every run; output order follows ``spec.configs`` regardless of parallelism.

    Within one process, runs sharing data, engine spec and seed reuse the trained engine.
    """
    if parallelism <= 1:
        pairs = [_run_one(c) for c in spec.configs]
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            pairs = list(pool.map(_run_one, spec.configs))
    results = [r for r, _ in pairs if r is not None]
    failures = [f for _, f in pairs if f is not None]
    return SweepOutcome(results, failures, aggregate(results))


def aggregate(results: list[RunResult]) -> list[dict]:
    """Mean and std across seeds per (engine, setting, attacker), plus best baseline.

    ``std`` is the sample standard deviation (0 for a single run).
    """
    groups: dict[tuple, list[RunResult]] = {}
    for r in results:
        groups.setdefault((r.engine_kind, r.setting, r.attacker), []).append(r)
    rows = []
    for (engine, setting, attacker), runs in groups.items():
        row = {"engine": engine, "setting": setting, "attacker": attacker, "n_runs": len(runs)}
        for cp in sorted(runs[0].checkpoints):
            vals = np.array([r.checkpoints[cp] for r in runs])
            row[f"mean_{cp}"] = float(vals.mean())
            row[f"std_{cp}"] = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
        rows.append(row)
    for row in rows:
        row["best_baseline"] = ""
        row["best_baseline_rate"] = ""
    settings = {(r["engine"], r["setting"]) for r in rows}
    for engine, setting in settings:
        members = [r for r in rows if r["engine"] == engine and r["setting"] == setting]
        baselines = [r for r in members if r["attacker"].startswith("mimicry")]
        if not baselines:
            continue
        final = _final_key(baselines[0])
        best = max(baselines, key=lambda r: r[final])
        for r in members:
            r["best_baseline"] = best["attacker"]
            r["best_baseline_rate"] = best[final]
    rows.sort(key=lambda r: (r["engine"], r["setting"], r["attacker"]))
    return rows


def _final_key(row: dict) -> str:
    cps = [int(k.split("_", 1)[1]) for k in row if k.startswith("mean_")]
    return f"mean_{max(cps)}"
