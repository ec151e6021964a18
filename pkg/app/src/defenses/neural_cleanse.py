"""
Trigger synthesis by reverse engineering, one candidate trigger per class.

For class j the mask m (H x W) and pattern b (H x W x C) minimize

    mean CE(f((1 - m) * x + m * b), j) + gamma * ||m||_1

with m = (tanh(u) + 1) / 2 and b = (tanh(v) + 1) / 2 so both stay in [0, 1].
Classes whose mask l1 norm is anomalously small under the median absolute
deviation rule are flagged as infected.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from app.src import ops
from app.src.model_zoo import TappedModel, images_to_tensor
from app.src.seeding import derive_seed
from app.src.sgd import SgdState, sgd_step
from app.src.tensor import Tensor, backward, no_grad

MAD_CONSISTENCY = 1.4826
ANOMALY_THRESHOLD = 2.0


@dataclass
class SynthesizedTrigger:
    target: int
    mask: np.ndarray     # H x W in [0, 1]
    pattern: np.ndarray  # H x W x C in [0, 1]
    l1: float
    final_loss: float
    converged: bool


@dataclass
class TriggerScan:
    """Candidate triggers for every scanned class plus their anomaly indices."""
    triggers: List[SynthesizedTrigger]
    anomaly_index: np.ndarray
    flagged: List[int] = field(default_factory=list)

    def to_records(self) -> List[Dict[str, object]]:
        return [
            {
                "class": t.target,
                "l1": t.l1,
                "anomaly_index": float(index),
                "flagged": t.target in self.flagged,
                "converged": t.converged,
                "final_loss": t.final_loss,
            }
            for t, index in zip(self.triggers, self.anomaly_index)
        ]


def _squash(t: Tensor) -> Tensor:
    return ops.mul(ops.add(ops.tanh(t), 1.0), 0.5)


def _stamp(x: Tensor, mask: Tensor, pattern: Tensor) -> Tensor:
    # (1 - m) x + m b == x + m (b - x)
    return ops.add(x, ops.mul(mask, ops.sub(pattern, x)))


def synthesize_trigger(
    model: TappedModel,
    images: np.ndarray,
    class_index: int,
    gamma: float = 0.01,
    steps: int = 500,
    lr: float = 0.1,
    momentum: float = 0.9,
    batch_size: int = 32,
    seed: int = 0,
    verbose: bool = False,
) -> SynthesizedTrigger:
    """
    Reverse-engineer the smallest mask that sends ``images`` to ``class_index``.

    The model runs in eval mode with its parameters frozen. Each step uses the
    next ``batch_size`` images of a seeded shuffle.

    Returns:
        The final mask and pattern with l1 = sum(mask); ``converged`` is False
        when the final cross-entropy over all images stays above chance, ln K.
    """
    if len(images) == 0:
        raise ValueError("synthesize_trigger: need at least one validation image")
    h, w, c = model.input_shape
    rng = np.random.default_rng(seed)
    mask_param = Tensor(rng.normal(0.0, 0.1, (1, 1, h, w)), requires_grad=True, name="mask")
    pattern_param = Tensor(rng.normal(0.0, 0.1, (1, c, h, w)), requires_grad=True, name="pattern")
    state = SgdState({"mask": mask_param, "pattern": pattern_param}, lr=lr, momentum=momentum, weight_decay=0.0)
    data = images_to_tensor(images).data
    order = rng.permutation(len(data))
    cursor = 0

    with model.frozen():
        for _ in tqdm(range(steps), desc=f"synthesize class {class_index}", disable=not verbose):
            if cursor + batch_size > len(order):
                order = rng.permutation(len(data))
                cursor = 0
            batch = Tensor(data[order[cursor:cursor + batch_size]])
            cursor += batch_size
            mask = _squash(mask_param)
            logits = model.forward(_stamp(batch, mask, _squash(pattern_param)), training=False)
            loss = ops.add(
                ops.softmax_cross_entropy(logits, np.full(batch.shape[0], class_index)),
                ops.mul(ops.sum(mask), gamma),
            )
            sgd_step(state, backward(loss))

        with no_grad():
            mask = _squash(mask_param)
            pattern = _squash(pattern_param)
            stamped = _stamp(Tensor(data), mask, pattern)
            logits = np.concatenate([
                model.forward(Tensor(stamped.data[start:start + 256])).data
                for start in range(0, len(data), 256)
            ])
            final_loss = ops.softmax_cross_entropy(Tensor(logits), np.full(len(data), class_index)).item()

    mask_array = mask.data[0, 0].copy()
    l1 = float(np.abs(mask_array).sum())
    converged = final_loss <= np.log(model.num_classes)
    if verbose:
        print(f"Neural Cleanse: class {class_index} l1={l1:.3f} final CE={final_loss:.4f} converged={converged}")
    return SynthesizedTrigger(
        target=class_index,
        mask=mask_array,
        pattern=pattern.data[0].transpose(1, 2, 0).copy(),
        l1=l1,
        final_loss=final_loss,
        converged=bool(converged),
    )


def mad_anomaly_index(l1_norms: Sequence[float]) -> np.ndarray:
    """
    (median - l1_j) / (1.4826 * MAD) per class; all zeros when MAD is zero.

    Positive values mean a smaller-than-typical mask.
    """
    values = np.asarray(l1_norms, dtype=np.float64)
    median = np.median(values)
    mad = np.median(np.abs(values - median))
    if mad == 0:
        return np.zeros_like(values)
    return (median - values) / (MAD_CONSISTENCY * mad)


def synthesize_all_triggers(
    model: TappedModel,
    images: np.ndarray,
    classes: Optional[Sequence[int]] = None,
    gamma: float = 0.01,
    steps: int = 500,
    lr: float = 0.1,
    momentum: float = 0.9,
    batch_size: int = 32,
    seed: int = 0,
    verbose: bool = False,
) -> TriggerScan:
    """Synthesize a trigger per class and flag classes whose anomaly index exceeds 2."""
    classes = list(range(model.num_classes)) if classes is None else list(classes)
    triggers = [
        synthesize_trigger(
            model, images, j, gamma=gamma, steps=steps, lr=lr, momentum=momentum,
            batch_size=batch_size, seed=derive_seed(seed, "synthesize", j), verbose=verbose,
        )
        for j in classes
    ]
    index = mad_anomaly_index([t.l1 for t in triggers])
    flagged = [t.target for t, value in zip(triggers, index) if value > ANOMALY_THRESHOLD]
    if verbose:
        print(f"Neural Cleanse: flagged classes {flagged}")
    return TriggerScan(triggers=triggers, anomaly_index=index, flagged=flagged)
