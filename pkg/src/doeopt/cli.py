"""Command-line entry points.

    doeopt ingest   --config cfg.yaml --run-dir runs/r1
    doeopt clean    --config cfg.yaml --run-dir runs/r1
    doeopt select   --config cfg.yaml --run-dir runs/r1
    doeopt train    --config cfg.yaml --run-dir runs/r1
    doeopt optimize --config cfg.yaml --run-dir runs/r1
    doeopt recipes  --config cfg.yaml --run-dir runs/r1
    doeopt replay   --run-dir runs/r1
    doeopt serve    --store runs/ [--host H --port P]
    doeopt fixture  --out demo/

Stage commands resume from whatever artifacts already exist in the run
directory. Exit codes: 0 ok, 1 validation error, 2 stage failure.
"""

from __future__ import annotations

import argparse
import sys

from .errors import DoeOptError, StageError, ValidationError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_STAGE = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="doeopt", description="DOE process-optimization engine")
    parser.add_argument("--config", help="path to the YAML config document")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--run-dir", help="run directory for artifacts")
    sub = parser.add_subparsers(dest="command", required=True)

    for stage in ("ingest", "clean", "select", "train", "optimize", "recipes"):
        p = sub.add_parser(stage, help=f"run the pipeline through the {stage} stage")
        p.set_defaults(until=stage)

    sub.add_parser("replay", help="verify ledger replay reproduces the cleaned dataset")

    p_serve = sub.add_parser("serve", help="start the HTTP API service")
    p_serve.add_argument("--store", default="runs", help="directory holding run subdirectories")
    p_serve.add_argument("--host", default=None)
    p_serve.add_argument("--port", type=int, default=None)

    p_fix = sub.add_parser("fixture", help="write the bundled synthetic dataset + config")
    p_fix.add_argument("--out", required=True, help="output directory")
    p_fix.add_argument("--rows", type=int, default=220)
    p_fix.add_argument("--fixture-seed", type=int, default=2024)
    return parser


def _load_config(args):
    from .config import load_config

    if not args.config:
        raise ValidationError("--config is required for this command")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.raw["seed"] = args.seed
    return cfg


def _require_run_dir(args) -> str:
    if not args.run_dir:
        raise ValidationError("--run-dir is required for this command")
    return args.run_dir


def cmd_stage(args) -> int:
    from . import pipeline

    cfg = _load_config(args)
    run_dir = _require_run_dir(args)
    state = pipeline.run_pipeline(cfg, run_dir, until=args.until)
    print(f"run {state.run_id}: status {state.status}")
    if args.until == "recipes" and state.recipes:
        valid = sum(1 for r in state.recipes if r["valid"])
        print(f"{len(state.recipes)} recipes ({valid} valid) in {run_dir}/recipes.json")
    return EXIT_OK


def cmd_replay(args) -> int:
    from . import pipeline
    from .cleaning import ReductionLedger
    from .core import dataset_from_dict

    run_dir = _require_run_dir(args)
    raw = dataset_from_dict(pipeline.read_artifact(run_dir, "raw_dataset.json"))
    cleaned = dataset_from_dict(pipeline.read_artifact(run_dir, "cleaned_dataset.json"))
    ledger = ReductionLedger.from_jsonl(pipeline.read_artifact(run_dir, "ledger.jsonl"))
    if ledger.replay(raw) != cleaned:
        print("replay MISMATCH: cleaning ledger does not reproduce the cleaned dataset")
        return EXIT_STAGE
    print(f"cleaning replay ok: {len(cleaned)} rows, {len(cleaned.inputs)} inputs")
    if pipeline.artifact_exists(run_dir, "reduction.jsonl"):
        full = ReductionLedger.from_jsonl(pipeline.read_artifact(run_dir, "reduction.jsonl"))
        replayed = full.replay(raw)
        reduced = cleaned
        for name in cleaned.input_names:
            if name not in replayed.input_names:
                reduced = reduced.drop_input(name)
        if replayed != reduced:
            print("replay MISMATCH: reduction ledger does not reproduce the reduced dataset")
            return EXIT_STAGE
        print(f"reduction replay ok: {len(replayed.inputs)} selected inputs")
    return EXIT_OK


def cmd_serve(args) -> int:
    from .service import serve

    host, port = args.host, args.port
    if args.config:
        cfg = _load_config(args)
        host = host or cfg.service.host
        port = port or cfg.service.port
    serve(args.store, host=host or "127.0.0.1", port=port or 8700)
    return EXIT_OK


def cmd_fixture(args) -> int:
    from .fixtures import write_fixture

    files = write_fixture(args.out, seed=args.fixture_seed, n_rows=args.rows)
    print(f"fixture written: {files.file_a}, {files.file_b}")
    print(f"config: {files.config}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command in ("ingest", "clean", "select", "train", "optimize", "recipes"):
            return cmd_stage(args)
        if args.command == "replay":
            return cmd_replay(args)
        if args.command == "serve":
            return cmd_serve(args)
        if args.command == "fixture":
            return cmd_fixture(args)
        parser.error(f"unknown command {args.command!r}")
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (StageError, DoeOptError) as exc:
        print(f"stage failure: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
