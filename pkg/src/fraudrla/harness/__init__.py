from .config import (
    AttackerSpec,
    DataSpec,
    EngineSpec,
    PartitionSpec,
    RunConfig,
    dump_flat,
    from_flat,
    load_config,
    parse_flat,
    stage_seed,
)
from .report import load_results, rolling_rate, write_report
from .runner import RunResult, StageError, checkpoint_metrics, run_attack, trained_engine
from .sweep import SweepOutcome, SweepSpec, aggregate, load_sweep, parse_sweep, run_sweep
