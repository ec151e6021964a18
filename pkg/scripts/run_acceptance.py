#!/usr/bin/env python3
"""
Scaled acceptance run.

Sweeps the four attacks with regular and MMD-regularized training over three
seeds, adds a kernel ablation on the Patched attack, folds everything into a
summary and checks the desk-scale trend criteria. Prints one line per check
and exits 1 when any gating check fails.

Usage:
    python scripts/run_acceptance.py --out runs/acceptance --jobs 4
"""

import argparse
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd
from dotenv import load_dotenv

project_root = Path(__file__).parent.parent
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))

from app.cli.config_loader import load_config
from app.cli.models.experiment_config import ExperimentConfig
from app.pipeline.nodes.generate_data import load_split
from app.pipeline.pools import synthesis_images
from app.pipeline.report import build_report
from app.pipeline.run_files import ARTIFACTS
from app.pipeline.sweep import run_sweep, sweep_cells
from app.src.defenses import synthesize_all_triggers
from app.src.model_zoo import TAP_LEVELS, build_model
from app.src.results_repository import ResultsRepository
from app.src.seeding import derive_seed

ATTACKS = ["patched", "blended", "sig", "warped"]
SEEDS = [0, 1, 2]
LAM = "0.3"
ABLATION_KERNELS = ["GK2", "GMK2", "LK"]
DETECTION_CELL = "N500_r1"


class Colors:
    GREEN = '\033[92m'
    RED = '\033[91m'
    YELLOW = '\033[93m'
    BOLD = '\033[1m'
    END = '\033[0m'


class Checks:
    """Collects pass/fail lines; soft checks are logged but never gate."""

    def __init__(self):
        self.failed: List[str] = []

    def record(self, name: str, ok: bool, detail: str, soft: bool = False) -> None:
        if ok:
            print(f"{Colors.GREEN}✓ {name}{Colors.END}: {detail}")
        elif soft:
            print(f"{Colors.YELLOW}~ {name}{Colors.END}: {detail} (soft, not gating)")
        else:
            print(f"{Colors.RED}✗ {name}{Colors.END}: {detail}")
            self.failed.append(name)


def _select(frame: pd.DataFrame, attack: str, method: str, kernel: Optional[str] = None) -> pd.DataFrame:
    rows = frame[(frame["attack"] == attack) & (frame["method"] == method)]
    if method == "rbt":
        return rows
    # ablation runs carry the kernel in their directory name
    suffix = f"_{kernel}/" if kernel is not None else "/"
    return rows[rows["run"].str.contains(f"/{method}_lam{LAM}{suffix}", regex=False)]


def _mean(rows: pd.DataFrame, column: str) -> float:
    if column not in rows or rows.empty:
        return float("nan")
    return float(pd.to_numeric(rows[column]).mean())


def _pruning_success(root: Path, rows: pd.DataFrame, repository: ResultsRepository) -> List[bool]:
    """Per run: some fraction <= 0.5 leaves ASR <= 0.5 with BA >= 0.6."""
    outcome = []
    for run in rows["run"]:
        curve = repository.read_csv(root / run / ARTIFACTS["pruning"])
        early = curve[curve["fraction"] <= 0.5]
        outcome.append(bool(((early["asr"] <= 0.5) & (early["ba"] >= 0.6)).any()))
    return outcome


def check_attack_viability(frame, checks):
    for attack in ATTACKS:
        rows = _select(frame, attack, "rbt")
        ba, asr = _mean(rows, "ba"), _mean(rows, "asr")
        checks.record(f"attack viability [{attack}]", ba >= 0.85 and asr >= 0.95, f"BA {ba:.3f}, ASR {asr:.3f}")


def check_difference_characteristic(frame, checks):
    passing = 0
    for attack in ATTACKS:
        rows = _select(frame, attack, "rbt")
        aro = {level: _mean(rows, f"aro_{level}") for level in TAP_LEVELS}
        ok = all(value >= 2.5 for value in aro.values())
        passing += ok
        print(f"  RBT {attack}: ARO {', '.join(f'{k} {v:.2f}' for k, v in aro.items())}")
    checks.record("difference characteristic", passing >= 3, f"{passing}/4 attacks with ARO >= 2.5 at every level")


def check_multi_level_reduction(frame, checks):
    for attack in ATTACKS:
        rbt, ml = _select(frame, attack, "rbt"), _select(frame, attack, "ml-mmdr")
        aro = {level: _mean(ml, f"aro_{level}") for level in TAP_LEVELS}
        ba_gap = abs(_mean(ml, "ba") - _mean(rbt, "ba"))
        asr = _mean(ml, "asr")
        ok = all(value <= 2.2 for value in aro.values()) and ba_gap <= 0.05 and asr >= 0.9
        checks.record(
            f"ML-MMDR reduction [{attack}]", ok,
            f"ARO {', '.join(f'{k} {v:.2f}' for k, v in aro.items())}, BA gap {ba_gap:.3f}, ASR {asr:.3f}",
        )


def check_single_level_insufficiency(frame, checks):
    sl = _select(frame, "patched", "sl-mmdr")
    s3, s1 = _mean(sl, "aro_s3"), _mean(sl, "aro_s1")
    checks.record("SL-MMDR insufficiency", s3 <= 2.2 and s1 >= 2.5, f"s3 ARO {s3:.2f}, s1 ARO {s1:.2f}")


def check_defense_degradation(frame, checks):
    rbt, ml = _select(frame, "patched", "rbt"), _select(frame, "patched", "ml-mmdr")
    for defense in ("AC", "SS", "SR"):
        base = _mean(rbt, f"f1_{defense}_s3_{DETECTION_CELL}")
        drops = {
            level: _mean(rbt, f"f1_{defense}_{level}_{DETECTION_CELL}") - _mean(ml, f"f1_{defense}_{level}_{DETECTION_CELL}")
            for level in TAP_LEVELS
        }
        ok = base >= 0.8 and all(drop >= 0.2 for drop in drops.values())
        checks.record(
            f"defense degradation [{defense}]", ok,
            f"RBT s3 F1 {base:.3f}, drops {', '.join(f'{k} {v:.3f}' for k, v in drops.items())}",
        )


def check_pruning_contrast(frame, root, checks):
    repository = ResultsRepository()
    rbt, ml = _select(frame, "patched", "rbt"), _select(frame, "patched", "ml-mmdr")
    rbt_ok = np.mean(_pruning_success(root, rbt, repository)) >= 0.5
    ml_ok = np.mean(_pruning_success(root, ml, repository)) < 0.5
    gap_drop = _mean(rbt, "prune_best_gap") - _mean(ml, "prune_best_gap")
    checks.record(
        "pruning contrast", rbt_ok and (ml_ok or gap_drop >= 0.2),
        f"RBT removable {rbt_ok}, ML-MMDR resists {ml_ok}, best-gap drop {gap_drop:.3f}",
    )


def check_trigger_synthesis(frame, config: ExperimentConfig, checks):
    rbt = _select(frame, "patched", "rbt")
    hits = int(pd.to_numeric(rbt["nc_target_flagged"]).sum()) if "nc_target_flagged" in rbt else 0
    checks.record("trigger synthesis [RBT]", hits >= 2, f"target flagged in {hits}/{len(rbt)} seeds")

    d = config.defense
    flagged_fresh = 0
    for seed in SEEDS:
        cell = config.model_copy(update={"seed": seed})
        model = build_model(cell.model_settings(), derive_seed(seed, "model"))
        scan = synthesize_all_triggers(
            model,
            synthesis_images(cell, load_split(cell, derive_seed(seed, "dataset"))),
            gamma=d.nc_gamma, steps=d.nc_steps, lr=d.nc_lr, batch_size=d.nc_batch_size,
            seed=derive_seed(seed, "synthesize"),
        )
        flagged_fresh += bool(scan.flagged)
    checks.record("trigger synthesis [fresh]", flagged_fresh < 2, f"some class flagged in {flagged_fresh}/{len(SEEDS)} seeds")


def check_kernel_ablation(frame, checks):
    base = _mean(_select(frame, "patched", "rbt"), f"f1_AC_s3_{DETECTION_CELL}")
    reductions: Dict[str, float] = {}
    for kernel in ABLATION_KERNELS:
        rows = _select(frame, "patched", "ml-mmdr", kernel)
        reductions[kernel] = base - _mean(rows, f"f1_AC_s3_{DETECTION_CELL}")
        checks.record(f"kernel ablation [{kernel}]", reductions[kernel] >= 0.15, f"AC s3 F1 reduction {reductions[kernel]:.3f}")
    gaussian = np.mean([reductions["GK2"], reductions["GMK2"]])
    ok = gaussian >= reductions["LK"]
    checks.record(
        "kernel ablation ordering", ok or gaussian >= reductions["LK"] - 0.05,
        f"Gaussian-family {gaussian:.3f} vs linear {reductions['LK']:.3f}", soft=True,
    )


def check_determinism(config: ExperimentConfig, root: Path, jobs: int, checks):
    """Repeat the seed-0 Patched cells in a sibling directory and compare CSV bytes."""
    cells = [c for c in sweep_cells(config) if c.attack == "patched" and c.seed == 0]
    repeat_root = root.parent / f"{root.name}_repeat"
    run_sweep(config, repeat_root, jobs=jobs, overwrite=True, cells=cells)
    mismatched = []
    for cell in cells:
        for first in sorted((root / cell.run_name).rglob("*.csv")):
            second = repeat_root / first.relative_to(root)
            if not second.exists() or first.read_bytes() != second.read_bytes():
                mismatched.append(first.relative_to(root).as_posix())
    checks.record("determinism", not mismatched, f"{len(mismatched)} differing CSVs" + (f": {mismatched[:3]}" if mismatched else ""))


def acceptance_config(path: Optional[str]) -> ExperimentConfig:
    config = load_config(path)
    sweep = config.sweep.model_copy(update={
        "attacks": ATTACKS, "methods": ["ml-mmdr", "sl-mmdr"], "lambdas": [0.0, 0.3], "seeds": SEEDS, "kernels": [],
    })
    return config.model_copy(update={"sweep": sweep})


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv(dotenv_path=project_root / ".env")
    parser = argparse.ArgumentParser(description="Run the scaled acceptance sweep and check its trends")
    parser.add_argument("--config", default=None, help="Base experiment config (defaults when omitted)")
    parser.add_argument("--out", default="runs/acceptance", help="Output root")
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--skip-determinism", action="store_true")
    args = parser.parse_args(argv)

    config = acceptance_config(args.config)
    root = Path(args.out)
    print(f"{Colors.BOLD}Acceptance sweep under {root}{Colors.END}")
    run_sweep(config, root, jobs=args.jobs, verbose=True)

    ablation = config.model_copy(update={"sweep": config.sweep.model_copy(update={
        "attacks": ["patched"], "methods": ["ml-mmdr"], "lambdas": [0.3], "kernels": ABLATION_KERNELS,
    })})
    run_sweep(ablation, root, jobs=args.jobs, verbose=True, cells=[c for c in sweep_cells(ablation) if c.method != "rbt"])
    frame = build_report(root, verbose=True)

    checks = Checks()
    steps: List[Callable[[], None]] = [
        lambda: check_attack_viability(frame, checks),
        lambda: check_difference_characteristic(frame, checks),
        lambda: check_multi_level_reduction(frame, checks),
        lambda: check_single_level_insufficiency(frame, checks),
        lambda: check_defense_degradation(frame, checks),
        lambda: check_pruning_contrast(frame, root, checks),
        lambda: check_trigger_synthesis(frame, config, checks),
        lambda: check_kernel_ablation(frame, checks),
    ]
    if not args.skip_determinism:
        steps.append(lambda: check_determinism(config, root, args.jobs, checks))
    for step in steps:
        step()

    print()
    if checks.failed:
        print(f"{Colors.RED}{len(checks.failed)} check(s) failed: {', '.join(checks.failed)}{Colors.END}")
        return 1
    print(f"{Colors.GREEN}All acceptance checks passed{Colors.END}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
