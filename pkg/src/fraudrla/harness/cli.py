"""Command-line entry point: ``fraudrla <subcommand> [--config ...] [--seed ...] [--out ...]``.

Exit status is 0 on success, 1 if any run failed and 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..core import ConfigError
from ..datagen import write_csv
from ..detectors.engine import save_engine
from .config import RunConfig, from_flat, load_config
from .report import load_results, write_report
from .runner import StageError, build_dataset, run_attack, trained_engine
from .sweep import load_sweep, run_sweep

EXIT_OK, EXIT_RUN_FAILED, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("fraudrla")


def _config(args) -> RunConfig:
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "data", None) is not None:
        overrides["data.csv"] = str(args.data)
    if args.config is None:
        return from_flat(overrides)
    return load_config(args.config, **overrides)


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True), encoding="utf-8")


def cmd_gen_data(args) -> int:
    cfg = _config(args)
    out = Path(args.out)
    path = out if out.suffix == ".csv" else out / f"scenario{cfg.data.scenario}_seed{cfg.seed}.csv"
    write_csv(build_dataset(cfg), path, cfg.data.label_column)
    print(path)
    return EXIT_OK


def cmd_train_engine(args) -> int:
    cfg = _config(args)
    _, _, engine, hp, metrics = trained_engine(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_engine(engine, out / "engine.json")
    _write_json(out / "metrics.json", {"hparams": {k: list(v) if isinstance(v, tuple) else v for k, v in hp.items()},
                                       **metrics})
    print(json.dumps(metrics["engine"]))
    return EXIT_OK


def cmd_attack(args) -> int:
    cfg = _config(args)
    result = run_attack(cfg)
    write_report([result], args.out)
    print(json.dumps({"run_id": result.run_id, **{str(k): v for k, v in result.checkpoints.items()}}))
    return EXIT_OK


def cmd_sweep(args) -> int:
    spec = load_sweep(args.config)
    if args.seed is not None:
        raise ConfigError("--seed does not apply to sweeps; use sweep.seeds in the sweep file")
    outcome = run_sweep(spec, args.parallelism)
    out = Path(args.out)
    if outcome.results:
        write_report(outcome.results, out, outcome.failures)
    else:
        _write_json(out / "results.json", {"runs": [], "failures": outcome.failures})
    for row in outcome.table:
        print(json.dumps(row))
    if outcome.failures:
        log.error("%d of %d runs failed", len(outcome.failures), len(spec.configs))
        return EXIT_RUN_FAILED
    return EXIT_OK


def cmd_report(args) -> int:
    src = Path(args.results)
    results = load_results(src)
    write_report(results, args.out or (src if src.is_dir() else src.parent))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fraudrla", description="Adversarial attacks on fraud detection engines")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=False, out_default="results"):
        sp.add_argument("--config", type=Path, required=config_required, help="flat key = value config file")
        sp.add_argument("--seed", type=int, help="master seed, overrides the config")
        sp.add_argument("--out", type=Path, default=Path(out_default))

    sp = sub.add_parser("gen-data", help="write a synthetic scenario to CSV")
    common(sp, out_default="data")
    sp.set_defaults(func=cmd_gen_data)

    sp = sub.add_parser("train-engine", help="train rule + model, write engine.json and metrics.json")
    common(sp, out_default="engine")
    sp.add_argument("--data", type=Path, help="labelled CSV, overrides data.csv")
    sp.set_defaults(func=cmd_train_engine)

    sp = sub.add_parser("attack", help="run one attack campaign")
    common(sp)
    sp.add_argument("--data", type=Path, help="labelled CSV, overrides data.csv")
    sp.set_defaults(func=cmd_attack)

    sp = sub.add_parser("sweep", help="run a sweep spec and aggregate")
    common(sp, config_required=True)
    sp.add_argument("--parallelism", type=int, default=1)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("report", help="rebuild summary and curve CSVs from results.json")
    sp.add_argument("results", type=Path, help="results directory or results.json")
    sp.add_argument("--out", type=Path)
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StageError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUN_FAILED


if __name__ == "__main__":
    sys.exit(main())
