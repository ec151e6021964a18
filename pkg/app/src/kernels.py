"""Kernel settings for MMD, including the named GK/GMK/LK presets."""

from dataclasses import dataclass, field, replace
from typing import Dict, List, Literal, Tuple

KernelKind = Literal["gaussian", "mixture", "linear"]


@dataclass(frozen=True)
class KernelSpec:
    """
    Kernel choice for MMD.

    Gaussian kinds use k(x, y) = exp(-||x - y||^2 / (2 s^2)); a mixture is the
    unweighted mean of its components. With ``median_scaling`` each listed
    sigma multiplies the median pairwise distance of the pooled sample.
    """
    kind: KernelKind
    bandwidths: Tuple[float, ...] = field(default=())
    median_scaling: bool = True
    name: str = ""

    def __post_init__(self):
        if self.kind in ("gaussian", "mixture"):
            if not self.bandwidths or min(self.bandwidths) <= 0:
                raise ValueError(f"KernelSpec {self.name or self.kind}: bandwidths must be non-empty and positive")
            if self.kind == "gaussian" and len(self.bandwidths) != 1:
                raise ValueError("KernelSpec: a single Gaussian takes exactly one bandwidth")
        elif self.kind != "linear":
            raise ValueError(f"KernelSpec: unknown kind {self.kind!r}")


def _mixture(values: List[float]) -> Tuple[float, ...]:
    return tuple(float(v) for v in values)


KERNEL_PRESETS: Dict[str, KernelSpec] = {
    "GK1": KernelSpec("gaussian", (0.5,), name="GK1"),
    "GK2": KernelSpec("gaussian", (1.0,), name="GK2"),
    "GK3": KernelSpec("gaussian", (2.0,), name="GK3"),
    "GMK1": KernelSpec("mixture", _mixture([1 / 2, 1, 2]), name="GMK1"),
    "GMK2": KernelSpec("mixture", _mixture([1 / 4, 1 / 2, 1, 2, 4]), name="GMK2"),
    "GMK3": KernelSpec("mixture", _mixture([1 / 8, 1 / 4, 1 / 2, 1, 2, 4, 8]), name="GMK3"),
    "GMK4": KernelSpec("mixture", _mixture([1 / 3, 1, 3]), name="GMK4"),
    "GMK5": KernelSpec("mixture", _mixture([1 / 9, 1 / 3, 1, 3, 9]), name="GMK5"),
    "GMK6": KernelSpec("mixture", _mixture([1 / 27, 1 / 9, 1 / 3, 1, 3, 9, 27]), name="GMK6"),
    "LK": KernelSpec("linear", (), median_scaling=False, name="LK"),
}


def kernel_preset(name: str, median_scaling: bool = True) -> KernelSpec:
    """
    Look up a named kernel.

    Raises:
        ValueError: If the name is unknown.
    """
    key = name.upper()
    if key not in KERNEL_PRESETS:
        raise ValueError(f"Unknown kernel {name!r}; expected one of {sorted(KERNEL_PRESETS)}")
    spec = KERNEL_PRESETS[key]
    if spec.kind == "linear":
        return spec
    return replace(spec, median_scaling=median_scaling)
