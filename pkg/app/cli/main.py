"""
Command-line interface

Subcommands:
- gen-data:   write train/test/poisoned datasets as BDAT files
- train:      train (RBT, SL-MMDR or ML-MMDR) and save checkpoint + TrainLog
- eval:       print BA and ASR of the run's checkpoint
- distances:  write the MMD/ED/SWD difference report
- defend:     run AC, SS and SR over the detection grid
- synthesize: reverse-engineer a trigger per class (MAD flags)
- prune:      BA/ASR curve while pruning s3 channels with the true trigger
- sweep:      attack x method x lambda x seed grid, then report
- report:     fold all runs under --out into summary.csv and projection CSVs

The output root is --out, else output_dir from the config, else BLAB_OUT
(loaded from .env when present), else ./runs.
"""

import argparse
import os
import sys
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv

# Add project root to path so `python app/cli/main.py` works as well as `-m`
project_root = Path(__file__).resolve().parents[2]
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))

from app.cli.config_loader import load_config
from app.pipeline.report import build_report
from app.pipeline.run_files import ARTIFACTS
from app.pipeline.runner import run_experiment
from app.pipeline.sweep import run_sweep
from app.src.results_repository import ResultsRepository

SUBCOMMAND_STAGES = {
    "gen-data": ["gen-data"],
    "train": ["train", "eval"],
    "eval": ["eval"],
    "distances": ["distances"],
    "defend": ["defend"],
    "synthesize": ["synthesize"],
    "prune": ["prune"],
}
DEFAULT_OUT = "runs"


def _non_negative(value: str) -> int:
    number = int(value)
    if number < 0 or number >= 2 ** 64:
        raise argparse.ArgumentTypeError(f"{value} is not an unsigned 64-bit integer")
    return number


def _positive(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"{value} must be at least 1")
    return number


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="Flat key = value config file")
    common.add_argument("--seed", type=_non_negative, metavar="U64", help="Override the master seed")
    common.add_argument("--out", metavar="DIR", help="Run directory (single runs) or output root (sweep, report)")
    common.add_argument("--jobs", type=_positive, default=1, metavar="N", help="Parallel sweep cells")
    common.add_argument("--overwrite", action="store_true", help="Recompute runs whose results already exist")
    common.add_argument("--verbose", "-v", action="store_true", help="Print stage progress")

    parser = argparse.ArgumentParser(prog="blab", description="Backdoor latent-difference workbench")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")
    for name in list(SUBCOMMAND_STAGES) + ["sweep", "report"]:
        subparsers.add_parser(name, parents=[common], help=f"run the {name} step")
    return parser


def resolve_out(cli_out: Optional[str], config_out: Optional[str]) -> Path:
    return Path(cli_out or config_out or os.environ.get("BLAB_OUT") or DEFAULT_OUT)


def _print_outcome(command: str, run_dir: Path) -> None:
    repository = ResultsRepository()
    if command in ("train", "eval"):
        metrics = repository.read_csv(run_dir / ARTIFACTS["metrics"]).iloc[0]
        print(f"BA={metrics['ba']:.4f} ASR={metrics['asr']:.4f}")
    elif command == "distances":
        frame = repository.read_csv(run_dir / ARTIFACTS["distances"])
        print(frame.to_string(index=False))
    elif command == "defend":
        frame = repository.read_csv(run_dir / ARTIFACTS["detection"])
        print(frame.to_string(index=False))
    elif command == "synthesize":
        for record in repository.read_jsonl(run_dir / ARTIFACTS["triggers"]):
            print(f"class {record['class']}: l1={record['l1']:.3f} index={record['anomaly_index']:.3f} "
                  f"flagged={record['flagged']}")
    elif command == "prune":
        print(repository.read_csv(run_dir / ARTIFACTS["pruning"]).to_string(index=False))
    print(f"Results in {run_dir}")


def run(args: argparse.Namespace) -> int:
    config_path = args.config
    if config_path is None and args.command in SUBCOMMAND_STAGES and args.out:
        # later stages of a run pick up the config the run was started with
        saved = Path(args.out) / ARTIFACTS["config"]
        config_path = saved if saved.exists() else None
    config = load_config(config_path)
    if args.seed is not None:
        config = config.model_copy(update={"seed": args.seed})
    out = resolve_out(args.out, config.output_dir)

    if args.command == "report":
        frame = build_report(out, verbose=args.verbose)
        print(f"{len(frame)} runs summarized in {out / 'summary.csv'}")
        return 0
    if args.command == "sweep":
        run_dirs = run_sweep(config, out, jobs=args.jobs, overwrite=args.overwrite, verbose=args.verbose)
        build_report(out, verbose=args.verbose)
        print(f"{len(run_dirs)} runs under {out}; summary in {out / 'summary.csv'}")
        return 0

    run_experiment(config, out, SUBCOMMAND_STAGES[args.command], overwrite=args.overwrite, verbose=args.verbose)
    _print_outcome(args.command, out)
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments and run; every failure becomes one ``Error:`` line and exit code 1."""
    load_dotenv(dotenv_path=project_root / ".env")
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except KeyboardInterrupt:
        print("Interrupted", file=sys.stderr)
        return 1
    except Exception as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
