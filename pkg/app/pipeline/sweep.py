"""
Sweep driver: attack x method x lambda (x kernel) x seed grid.

lambda = 0 is regular backdoor training and appears once per (attack, seed)
whatever the method list. Every cell owns its run directory; cells run in
parallel processes up to ``jobs``.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from tqdm import tqdm

from app.cli.config_loader import dump_config, parse_config_text
from app.cli.models.experiment_config import ExperimentConfig
from app.pipeline.runner import FULL_RUN, run_experiment
from app.src.trainer import METHOD_LEVELS


@dataclass(frozen=True)
class SweepCell:
    attack: str
    method: str
    lam: float
    kernel: str
    seed: int
    kernel_in_name: bool = False

    @property
    def run_name(self) -> str:
        name = f"{self.method}_lam{self.lam:g}"
        if self.kernel_in_name and self.method != "rbt":
            name += f"_{self.kernel}"
        return f"{self.attack}/{name}/seed{self.seed}"

    @property
    def labels(self) -> Dict[str, str]:
        return {
            "attack": self.attack,
            "method": self.method,
            "lambda": f"{self.lam:g}",
            "kernel": self.kernel,
            "seed": str(self.seed),
        }


def sweep_cells(config: ExperimentConfig) -> List[SweepCell]:
    """Grid cells in a fixed order: attack, (method, lambda, kernel), seed."""
    s = config.sweep
    ablation = bool(s.kernels)
    kernels = s.kernels or [config.train.kernel]
    cells: List[SweepCell] = []
    seen = set()
    for attack in s.attacks:
        variants: List[Tuple[str, float, str]] = []
        for lam in s.lambdas:
            if lam == 0:
                variants.append(("rbt", 0.0, config.train.kernel))
                continue
            for method in s.methods:
                if method == "rbt":
                    continue
                variants.extend((method, float(lam), kernel) for kernel in kernels)
        for method, lam, kernel in variants:
            for seed in s.seeds:
                cell = SweepCell(attack, method, lam, kernel, seed, ablation)
                if cell.run_name not in seen:
                    seen.add(cell.run_name)
                    cells.append(cell)
    return cells


def cell_config(config: ExperimentConfig, cell: SweepCell) -> ExperimentConfig:
    levels = METHOD_LEVELS[cell.method] or config.train.levels
    train = config.train.model_copy(update={"lam": cell.lam, "levels": list(levels), "kernel": cell.kernel})
    attack = config.attack.model_copy(update={"kind": cell.attack})
    return config.model_copy(update={"seed": cell.seed, "train": train, "attack": attack})


def _run_cell(job: Tuple[str, str, Dict[str, str], bool]) -> str:
    config_text, run_dir, labels, overwrite = job
    run_experiment(parse_config_text(config_text), run_dir, FULL_RUN, overwrite=overwrite, labels=labels)
    return run_dir


def run_sweep(
    config: ExperimentConfig,
    out_dir: Union[str, Path],
    jobs: int = 1,
    overwrite: bool = False,
    verbose: bool = False,
    cells: Optional[List[SweepCell]] = None,
) -> List[str]:
    """
    Run every sweep cell; returns the run directories in grid order.

    Args:
        jobs: Maximum number of worker processes; 1 runs in-process.
    """
    cells = cells if cells is not None else sweep_cells(config)
    work = [
        (dump_config(cell_config(config, cell)), str(Path(out_dir) / cell.run_name),
         {**cell.labels, "target": str(config.attack.target)}, overwrite)
        for cell in cells
    ]
    if verbose:
        print(f"Sweep: {len(work)} runs under {out_dir} with {jobs} job(s)")
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(tqdm(pool.map(_run_cell, work), total=len(work), desc="sweep", disable=not verbose))
    return [_run_cell(job) for job in tqdm(work, desc="sweep", disable=not verbose)]
