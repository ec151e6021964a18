"""
Backdoor training loops.

Regular backdoor training (lambda = 0) and MMD-regularized training over a set
of tap levels, following the mini-batch procedure:

    C = D + U, shuffled every epoch
    per batch: X1 = benign rows, X2 = malicious rows, X3 = benign rows labelled t
    L1 = CE(X1), L2 = CE(X2), L3 = mean over levels of mmd(taps(X2), taps(X3))
    L = L1 + L2 + lambda * L3
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from tqdm import tqdm

from app.src import ops
from app.src.dataset import Dataset
from app.src.distances import mmd_tensor
from app.src.kernels import KERNEL_PRESETS, KernelSpec, kernel_preset
from app.src.model_zoo import TAP_LEVELS, TappedModel, images_to_tensor
from app.src.poison import PoisonSplit
from app.src.sgd import SgdState, StepSchedule, sgd_step
from app.src.tensor import Tensor, backward, get_tape

METHOD_LEVELS = {
    "rbt": [],
    "sl-mmdr": ["s3"],
    "ml-mmdr": list(TAP_LEVELS),
}


class TrainingDivergedError(RuntimeError):
    """Raised when the training loss stops being finite."""

    def __init__(self, epoch: int, batch: int, detail: str):
        self.epoch = epoch
        self.batch = batch
        super().__init__(f"Training diverged at epoch {epoch}, batch {batch}: {detail}")


class TrainConfig(BaseModel):
    """Optimization and regularization settings for one training run."""

    model_config = ConfigDict(populate_by_name=True)

    epochs: int = Field(default=30, ge=0, description="Number of passes over C = D + U")
    batch_size: int = Field(default=64, ge=1, description="Mini-batch size")
    lr: float = Field(default=0.01, gt=0, description="Initial learning rate")
    lr_drops: List[int] = Field(default_factory=lambda: [15, 23], description="Epochs at which lr is multiplied by lr_factor")
    lr_factor: float = Field(default=0.1, gt=0, description="Learning-rate drop factor")
    momentum: float = Field(default=0.9, ge=0, lt=1)
    weight_decay: float = Field(default=5e-4, ge=0)
    lam: float = Field(default=0.0, ge=0, alias="lambda", description="MMD constraint strength; 0 is regular backdoor training")
    levels: List[str] = Field(default_factory=lambda: list(TAP_LEVELS), description="Tap levels I regularized when lambda > 0")
    kernel: str = Field(default="GMK2", description="Kernel preset for the training-time MMD")
    target: int = Field(default=0, ge=0, description="Target class t")
    seed: int = Field(default=0, ge=0, description="Shuffling seed")

    @field_validator("levels")
    @classmethod
    def validate_levels(cls, v: List[str]) -> List[str]:
        unknown = [level for level in v if level not in TAP_LEVELS]
        if unknown:
            raise ValueError(f"levels {unknown} are not tap levels {TAP_LEVELS}")
        # keep tap order and drop repeats
        return [level for level in TAP_LEVELS if level in v]

    @field_validator("kernel")
    @classmethod
    def validate_kernel(cls, v: str) -> str:
        if v.upper() not in KERNEL_PRESETS:
            raise ValueError(f"Unknown kernel {v!r}; expected one of {sorted(KERNEL_PRESETS)}")
        return v.upper()

    @model_validator(mode="after")
    def validate_levels_for_lambda(self):
        if self.lam > 0 and not self.levels:
            raise ValueError("levels must be non-empty when lambda > 0")
        return self

    @property
    def method(self) -> str:
        """rbt, sl-mmdr or ml-mmdr, as implied by lambda and the level set."""
        if self.lam == 0:
            return "rbt"
        return "sl-mmdr" if self.levels == ["s3"] else "ml-mmdr"


@dataclass
class EpochRecord:
    epoch: int
    ba: float
    asr: float
    l1: float
    l2: float
    l3: float
    skipped: int
    lr: float


@dataclass
class TrainLog:
    """Per-epoch accuracy, attack success and loss components."""
    records: List[EpochRecord] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        columns = ["epoch", "ba", "asr", "l1", "l2", "l3", "skipped"]
        return pd.DataFrame([{c: getattr(r, c) for c in columns} for r in self.records], columns=columns)

    @property
    def final(self) -> Optional[EpochRecord]:
        return self.records[-1] if self.records else None


def evaluate(model: TappedModel, benign: Dataset, malicious: Dataset, target: int = 0) -> Tuple[float, float]:
    """
    Benign accuracy and attack success rate.

    Args:
        model: Classifier, evaluated with running batch-norm statistics.
        benign: Clean test images with their true labels.
        malicious: Triggered test images.
        target: Target class t.

    Returns:
        (BA, ASR): accuracy on ``benign`` and the fraction of ``malicious``
        predicted as ``target``.

    Raises:
        ValueError: If either set is empty.
    """
    if len(benign) == 0 or len(malicious) == 0:
        raise ValueError(f"evaluate: need non-empty sets, got {len(benign)} benign and {len(malicious)} malicious")
    ba = float(np.mean(model.predict(benign.images) == benign.labels))
    asr = float(np.mean(model.predict(malicious.images) == target))
    return ba, asr


def _mean(values: List[float]) -> float:
    return float(np.mean(values)) if values else 0.0


@dataclass
class BatchLoss:
    """Objective of one mini-batch; a component is None when its rows are absent."""
    total: Tensor
    l1: Optional[float]
    l2: Optional[float]
    l3: Optional[float]
    skipped: bool


def batch_objective(
    model: TappedModel,
    images: np.ndarray,
    labels: np.ndarray,
    malicious: np.ndarray,
    cfg: TrainConfig,
    kernel: KernelSpec,
    scales: Optional[Dict[str, float]] = None,
) -> BatchLoss:
    """
    L1 + L2 + lambda * L3 for one batch, forward in training mode.

    Args:
        images: (B, H, W, C) batch in [0, 1].
        labels: Training labels (the target for malicious rows).
        malicious: Row flags separating U from D.
        cfg: Supplies lambda, the regularized levels and the target class.
        kernel: Kernel of the training-time MMD.
        scales: Fixed bandwidth scale per level; the median heuristic of the
            current taps is used when omitted.

    Returns:
        BatchLoss. The regularizer is skipped when the batch holds no
        malicious row or fewer than two benign target rows.
    """
    malicious = np.asarray(malicious, dtype=bool)
    benign_rows = np.flatnonzero(~malicious)
    malicious_rows = np.flatnonzero(malicious)
    target_rows = np.flatnonzero(~malicious & (labels == cfg.target))

    logits, taps = model.forward(images_to_tensor(images), training=True, return_taps=True)
    total, l1, l2, l3, skipped = None, None, None, None, False
    if benign_rows.size:
        term = ops.softmax_cross_entropy(ops.take_rows(logits, benign_rows), labels[benign_rows])
        l1, total = term.item(), term
    if malicious_rows.size:
        term = ops.softmax_cross_entropy(ops.take_rows(logits, malicious_rows), labels[malicious_rows])
        l2 = term.item()
        total = term if total is None else ops.add(total, term)

    if cfg.lam > 0:
        if malicious_rows.size == 0 or target_rows.size < 2:
            skipped = True
        else:
            reg = None
            for level in cfg.levels:
                term = mmd_tensor(
                    ops.flatten(ops.take_rows(taps[level], malicious_rows)),
                    ops.flatten(ops.take_rows(taps[level], target_rows)),
                    kernel,
                    scale=None if scales is None else scales[level],
                )
                reg = term if reg is None else ops.add(reg, term)
            reg = ops.mul(reg, 1.0 / len(cfg.levels))
            l3 = reg.item()
            total = ops.add(total, ops.mul(reg, cfg.lam))
    return BatchLoss(total=total, l1=l1, l2=l2, l3=l3, skipped=skipped)


def train(
    model: TappedModel,
    split: PoisonSplit,
    cfg: TrainConfig,
    eval_sets: Optional[Tuple[Dataset, Dataset]] = None,
    on_epoch_end: Optional[Callable[[EpochRecord, TappedModel], None]] = None,
    verbose: bool = False,
) -> Tuple[TappedModel, TrainLog]:
    """
    Train ``model`` in place on the poisoned split.

    Args:
        model: Freshly built (or partially trained) tapped classifier.
        split: Benign set D and malicious set U.
        cfg: Schedule, lambda and regularized levels.
        eval_sets: (benign test, triggered test) used for the per-epoch BA and
            ASR; the training D and U are used when omitted.
        on_epoch_end: Called after every epoch, e.g. to checkpoint.
        verbose: Print per-epoch progress.

    Returns:
        The trained model and its TrainLog.

    Raises:
        TrainingDivergedError: If a batch loss is not finite.
    """
    data = split.combined()
    target = cfg.target
    kernel = kernel_preset(cfg.kernel)
    schedule = StepSchedule(cfg.lr, cfg.lr_drops, cfg.lr_factor)
    state = SgdState(model.named_parameters(), lr=schedule.lr_at(0), momentum=cfg.momentum, weight_decay=cfg.weight_decay)
    rng = np.random.default_rng(cfg.seed)
    benign_eval, malicious_eval = eval_sets if eval_sets is not None else (split.benign, split.malicious)
    log = TrainLog()

    if verbose:
        print(f"Trainer: {cfg.method} run, lambda={cfg.lam}, levels={cfg.levels}, kernel={kernel.name}, "
              f"|D|={len(split.benign)}, |U|={len(split.malicious)}")

    for epoch in tqdm(range(cfg.epochs), desc=f"train {cfg.method}", disable=not verbose):
        state.lr = schedule.lr_at(epoch)
        order = rng.permutation(len(data))
        l1_values: List[float] = []
        l2_values: List[float] = []
        l3_values: List[float] = []
        skipped = 0

        for batch, start in enumerate(range(0, len(data), cfg.batch_size)):
            index = order[start:start + cfg.batch_size]
            loss = batch_objective(model, data.images[index], data.labels[index], data.malicious[index], cfg, kernel)
            for values, value in ((l1_values, loss.l1), (l2_values, loss.l2), (l3_values, loss.l3)):
                if value is not None:
                    values.append(value)
            skipped += loss.skipped
            total = loss.total

            if not np.isfinite(total.item()):
                get_tape().clear()
                raise TrainingDivergedError(epoch, batch, f"loss is {total.item()}")
            sgd_step(state, backward(total))

        ba, asr = evaluate(model, benign_eval, malicious_eval, target)
        record = EpochRecord(
            epoch=epoch,
            ba=ba,
            asr=asr,
            l1=_mean(l1_values),
            l2=_mean(l2_values),
            l3=_mean(l3_values),
            skipped=skipped,
            lr=state.lr,
        )
        log.records.append(record)
        if verbose:
            print(f"Trainer: epoch {epoch} lr={state.lr:.4g} BA={ba:.4f} ASR={asr:.4f} "
                  f"L1={record.l1:.4f} L2={record.l2:.4f} L3={record.l3:.6f} skipped={skipped}")
        if on_epoch_end is not None:
            on_epoch_end(record, model)

    return model, log
