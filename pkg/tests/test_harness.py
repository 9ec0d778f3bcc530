import csv
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import stub_engine
from fraudrla.core import ConfigError
from fraudrla.harness import (
    RunConfig,
    RunResult,
    aggregate,
    checkpoint_metrics,
    dump_flat,
    from_flat,
    load_results,
    parse_flat,
    parse_sweep,
    rolling_rate,
    run_attack,
    run_sweep,
    stage_seed,
    write_report,
)
from fraudrla.harness import runner
from fraudrla.harness.config import STAGES

FAST = {
    "t_max": 200,
    "checkpoints": [50, 100, 200],
    "data.scenario": 1,
    "data.n_samples": 400,
    "engine.kind": "forest",
    "engine.hparams": '{"n_trees": 5, "max_depth": 4, "min_leaf": 1}',
    "attacker.ppo.rollout": 32,
    "attacker.ppo.minibatch": 8,
}

FAST_SWEEP = """
t_max = 200
checkpoints = 50, 200
data.scenario = 1
data.n_samples = 400
engine.kind = forest
engine.hparams = {"n_trees": 5, "max_depth": 4, "min_leaf": 1}
attacker.ppo.rollout = 32
sweep.attacker = ppo | mimicry:uniform:100 | mimicry:multivariate:full
sweep.partition = 0/0 | 0.25/0.25
sweep.seeds = 0 | 1
"""


def fast(**kw):
    flat = dict(FAST)
    flat.update(kw)
    return from_flat(flat)


def fake_result(rewards, seed=0, **cfg):
    c = fast(**cfg)
    r = np.asarray(rewards)
    return RunResult(list(map(int, r)), checkpoint_metrics(r, [50, 100, 200]), c.to_dict(), seed)


# -- seeds / config ----------------------------------------------------------------

def test_stage_seeds_distinct_and_stable():
    seeds = [stage_seed(7, s) for s in STAGES]
    assert len(set(seeds)) == len(seeds)
    assert all(0 <= s < 2**63 for s in seeds)
    assert seeds == [stage_seed(7, s) for s in STAGES]
    assert stage_seed(7, "data") != stage_seed(8, "data")


def test_flat_config_round_trip():
    cfg = fast(**{"partition.known": 0.25, "attacker.kind": "mimicry", "attacker.family": "mixture",
                  "attacker.train_size": None})
    back = from_flat(parse_flat(dump_flat(cfg)))
    assert back == cfg


def test_parse_flat_comments_and_lists():
    flat = parse_flat("# header\nt_max = 10  # inline\ncheckpoints = 5, 10\nengine.kind = forest\n")
    assert flat == {"t_max": 10, "checkpoints": [5, 10], "engine.kind": "forest"}


@pytest.mark.parametrize("flat", [
    {"engine.knd": "forest"},
    {"t_max": 100},
    {"checkpoints": [300, 100]},
    {"partition.known": 0.6, "partition.unknown": 0.5},
    {"attacker.kind": "genetic"},
    {"attacker.kind": "mimicry", "attacker.family": "copula"},
    {"engine.kind": "svm"},
    {"engine.tail_fraction": 0.0},
])
def test_config_errors(flat):
    with pytest.raises(ConfigError):
        from_flat(flat)


def test_parse_flat_rejects_garbage():
    with pytest.raises(ConfigError):
        parse_flat("not a key value line\n")


def test_checkpoint_rounds_alias():
    assert from_flat({"t_max": 10, "checkpoint_rounds": [5, 10]}).checkpoints == (5, 10)


# -- checkpoints ---------------------------------------------------------------------

def test_checkpoint_examples():
    assert checkpoint_metrics([1, 0, 1, 1], [4]) == {4: 0.75}
    assert checkpoint_metrics(np.ones(10), [1, 5, 10]) == {1: 1.0, 5: 1.0, 10: 1.0}
    assert checkpoint_metrics(np.tile([0, 1], 50), [100])[100] == 0.5
    with pytest.raises(ValueError):
        checkpoint_metrics([1, 0], [3])


@given(st.lists(st.integers(0, 1), min_size=1, max_size=300), st.data())
def test_checkpoint_prefix_sum_oracle(trace, data):
    cps = sorted(set(data.draw(st.lists(st.integers(1, len(trace)), min_size=1, max_size=5))))
    got = checkpoint_metrics(trace, cps)
    total = 0
    prefix = []
    for v in trace:
        total += v
        prefix.append(total)
    for n in cps:
        assert got[n] == prefix[n - 1] / n


# -- runs ------------------------------------------------------------------------------

def test_accept_everything_engine_gives_full_success():
    cfg = fast()
    ds = runner.prepare_splits(cfg)[0]
    for kind in ("ppo", "mimicry"):
        r = run_attack(fast(**{"attacker.kind": kind}), engine_override=stub_engine(ds.n_features, 0.0))
        assert all(v == 1.0 for v in r.checkpoints.values())
        assert len(r.rewards) == cfg.t_max


def test_run_is_deterministic():
    cfg = fast(**{"partition.known": 0.25, "seed": 3})
    a = run_attack(cfg)
    runner._ENGINE_CACHE.clear()
    b = run_attack(cfg)
    assert json.dumps(a.to_dict(), sort_keys=True) == json.dumps(b.to_dict(), sort_keys=True)


def test_run_result_fields():
    r = run_attack(fast(**{"partition.unknown": 0.5}))
    assert r.setting == "known0%/unknown50%"
    assert r.attacker == "fraud-rla" and r.engine_kind == "forest"
    assert len(r.partition["unknown_idx"]) == 8
    for n, v in r.checkpoints.items():
        assert v == pytest.approx(np.mean(r.rewards[:n]))
    assert set(r.engine_metrics) == {"model", "engine"}


def test_stage_error_names_stage(tmp_path):
    cfg = fast(**{"data.csv": str(tmp_path / "missing.csv")})
    with pytest.raises(runner.StageError) as info:
        run_attack(cfg)
    assert info.value.stage == "data"


def test_engine_and_pool_are_disjoint():
    cfg = fast()
    train, test, *_ = runner.trained_engine(cfg)
    a = {tuple(r) for r in train.rows}
    assert not any(tuple(r) in a for r in test.fraud())


# -- sweeps ------------------------------------------------------------------------------

def test_parse_sweep_grid():
    spec = parse_sweep(FAST_SWEEP)
    assert len(spec.configs) == 3 * 2 * 2
    kinds = {(c.attacker.kind, c.attacker.family, c.attacker.train_size) for c in spec.configs}
    assert ("mimicry", "multivariate", None) in kinds and ("mimicry", "uniform", 100) in kinds
    assert {(c.partition.known, c.partition.unknown) for c in spec.configs} == {(0.0, 0.0), (0.25, 0.25)}


def test_sweep_rejects_duplicates_and_bad_tokens():
    with pytest.raises(ConfigError):
        parse_sweep("t_max = 10\ncheckpoints = 10\nsweep.seeds = 1 | 1\n")
    with pytest.raises(ConfigError):
        parse_sweep("sweep.attacker = mimicry\n")
    with pytest.raises(ConfigError):
        parse_sweep("sweep.partition = half\n")


def test_serial_and_parallel_sweeps_match():
    spec = parse_sweep(FAST_SWEEP)
    spec.configs = spec.configs[:6]
    serial = run_sweep(spec, parallelism=1)
    parallel = run_sweep(spec, parallelism=3)
    assert not serial.failures and not parallel.failures
    assert [r.to_dict() for r in serial.results] == [r.to_dict() for r in parallel.results]


def test_sweep_records_failures(tmp_path):
    spec = parse_sweep(FAST_SWEEP.replace("sweep.seeds = 0 | 1", "sweep.seeds = 0")
                       + f"sweep.data.csv = none | {tmp_path / 'nope.csv'}\n")
    spec.configs = [c for c in spec.configs if c.attacker.kind == "ppo" and c.partition.known == 0]
    out = run_sweep(spec)
    assert len(out.results) == 1 and len(out.failures) == 1
    assert "data" in out.failures[0]["error"]


def test_aggregate_single_run_equals_run():
    r = fake_result(np.r_[np.ones(100), np.zeros(100)])
    (row,) = aggregate([r])
    assert row["mean_200"] == r.checkpoints[200] and row["std_200"] == 0.0 and row["n_runs"] == 1


def test_aggregate_identical_seeds_zero_std():
    rows = aggregate([fake_result(np.ones(200), seed=s) for s in (0, 1)])
    assert rows[0]["std_50"] == 0.0 and rows[0]["n_runs"] == 2


def test_aggregate_means_and_best_baseline_oracle():
    g = np.random.default_rng(0)
    results = []
    attackers = [("ppo", {}), ("mimicry", {"attacker.family": "uniform"}),
                 ("mimicry", {"attacker.family": "multivariate"}), ("mimicry", {"attacker.family": "mixture"})]
    for kind, extra in attackers:
        for part in (0.0, 0.5):
            for seed in range(3):
                trace = (g.random(200) < g.random()).astype(int)
                results.append(fake_result(trace, seed, **{"attacker.kind": kind, "partition.unknown": part, **extra}))
    table = aggregate(results)
    for row in table:
        members = [r for r in results if (r.engine_kind, r.setting, r.attacker) == (row["engine"], row["setting"], row["attacker"])]
        for cp in (50, 100, 200):
            vals = [m.checkpoints[cp] for m in members]
            assert row[f"mean_{cp}"] == pytest.approx(sum(vals) / len(vals))
            assert row[f"std_{cp}"] == pytest.approx(np.std(vals, ddof=1))
        baselines = [r for r in table if r["setting"] == row["setting"] and r["attacker"].startswith("mimicry")]
        best = max(baselines, key=lambda r: r["mean_200"])
        assert row["best_baseline"] == best["attacker"]
        assert row["best_baseline_rate"] == best["mean_200"]


# -- reports -----------------------------------------------------------------------------

def test_report_files_and_round_trip(tmp_path):
    r = fake_result((np.random.default_rng(1).random(200) < 0.4).astype(int))
    write_report([r], tmp_path)
    with open(tmp_path / "summary.csv") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 2
    assert rows[0][:5] == ["run_id", "setting", "attacker", "engine", "seed"]
    back = load_results(tmp_path)
    assert back[0].checkpoints == r.checkpoints and back[0].rewards == r.rewards
    curve = list(csv.DictReader(open(tmp_path / "curves" / f"{r.run_id}.csv")))
    assert len(curve) == 200
    assert float(curve[149]["rate"]) == pytest.approx(np.mean(r.rewards[50:150]))
    assert (tmp_path / "aggregate.csv").exists() and (tmp_path / "timings.csv").exists()


@given(st.lists(st.integers(0, 1), min_size=1, max_size=400))
def test_rolling_rate_definition(trace):
    roll = rolling_rate(trace)
    for n in range(1, len(trace) + 1, 7):
        window = trace[max(0, n - 100):n]
        assert roll[n - 1] == pytest.approx(sum(window) / len(window))


def test_report_is_deterministic(tmp_path):
    cfg = fast(seed=5)
    a = run_attack(cfg)
    runner._ENGINE_CACHE.clear()
    b = run_attack(cfg)
    write_report([a], tmp_path / "a")
    write_report([b], tmp_path / "b")
    assert (tmp_path / "a" / "results.json").read_bytes() == (tmp_path / "b" / "results.json").read_bytes()


def test_report_errors(tmp_path):
    with pytest.raises(ValueError):
        write_report([], tmp_path)
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        write_report([fake_result(np.ones(200))], blocker / "sub")


def test_default_config_matches_protocol():
    cfg = RunConfig()
    assert cfg.t_max == 4000 and cfg.checkpoints == (300, 1000, 4000)
    assert cfg.engine.n_draws == 10 and cfg.engine.k_folds == 3 and cfg.engine.tail_fraction == 0.10
    assert cfg.attacker.n_components == 10 and cfg.attacker.train_size == 1000
