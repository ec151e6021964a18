"""Experiment configuration: one pydantic model per section plus the master seed."""

import math
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

from app.src.defenses.detection import detection_composition
from app.src.distances import METRICS
from app.src.kernels import KERNEL_PRESETS
from app.src.model_zoo import TAP_LEVELS, ModelConfig
from app.src.trainer import METHOD_LEVELS, TrainConfig
from app.src.triggers import TRIGGER_KINDS

DEFENSES = ("AC", "SS", "SR")


def _check_levels(v: List[str]) -> List[str]:
    unknown = [level for level in v if level not in TAP_LEVELS]
    if unknown:
        raise ValueError(f"levels {unknown} are not tap levels {TAP_LEVELS}")
    return [level for level in TAP_LEVELS if level in v]


class DatasetSection(BaseModel):
    """Where images come from and how many of them."""

    source: Literal["synthetic", "bdat", "cifar10"] = Field(default="synthetic", description="Procedural shapes, BDAT files or CIFAR-10 batches")
    n_per_class: int = Field(default=60, ge=2, description="Synthetic images per class before the 5:1 train/test split")
    num_classes: int = Field(default=10, ge=2, le=255, description="Number of classes K")
    height: int = Field(default=16, ge=8)
    width: int = Field(default=16, ge=8)
    channels: int = Field(default=3, description="1 or 3")
    measure_per_class: int = Field(default=100, ge=2, description="Fresh synthetic samples per class for distance measurement")
    train_path: Optional[str] = Field(default=None, description="BDAT training file (source = bdat)")
    test_path: Optional[str] = Field(default=None, description="BDAT test file (source = bdat)")
    cifar_train: List[str] = Field(default_factory=list, description="CIFAR-10 training batch files")
    cifar_test: List[str] = Field(default_factory=list, description="CIFAR-10 test batch files")

    @field_validator("channels")
    @classmethod
    def validate_channels(cls, v: int) -> int:
        if v not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {v}")
        return v

    @model_validator(mode="after")
    def validate_source_paths(self):
        if self.source == "bdat" and not (self.train_path and self.test_path):
            raise ValueError("dataset.source = bdat needs dataset.train_path and dataset.test_path")
        if self.source == "cifar10":
            if not (self.cifar_train and self.cifar_test):
                raise ValueError("dataset.source = cifar10 needs dataset.cifar_train and dataset.cifar_test")
            if (self.height, self.width, self.channels, self.num_classes) != (32, 32, 3, 10):
                raise ValueError("dataset.source = cifar10 implies 32x32x3 images and 10 classes")
        return self

    @property
    def image_shape(self) -> Tuple[int, int, int]:
        return (self.height, self.width, self.channels)


class AttackSection(BaseModel):
    """Trigger kind, target class, poison ratio and trigger parameters."""

    kind: Literal["patched", "blended", "sig", "warped"] = Field(default="patched")
    target: int = Field(default=0, ge=0, description="Target class t")
    ratio: float = Field(default=0.1, gt=0, lt=1, description="Poison ratio r = |U| / |D|")
    patch_size: int = Field(default=3, ge=1)
    alpha: float = Field(default=0.2, ge=0, lt=1)
    amplitude: float = Field(default=0.08, gt=0)
    frequency: float = Field(default=6.0, gt=0)
    grid_size: int = Field(default=4, ge=2)
    strength: float = Field(default=0.5, gt=0)


class ModelSection(BaseModel):
    family: Literal["plain", "residual"] = Field(default="plain")
    width: int = Field(default=1, ge=1)


class MeasureSection(BaseModel):
    """Distance quantification settings."""

    metrics: List[str] = Field(default_factory=lambda: list(METRICS))
    levels: List[str] = Field(default_factory=lambda: list(TAP_LEVELS))
    kernel: str = Field(default="GMK2", description="Kernel preset for measurement MMD")
    sample_size: int = Field(default=200, ge=2, description="Upper bound on rows per population per repeat")
    repeats: int = Field(default=3, ge=1)
    projections: int = Field(default=128, ge=1, description="SWD projection count L")
    pooled: bool = Field(default=False, description="Global-average-pool taps instead of flattening")

    @field_validator("metrics")
    @classmethod
    def validate_metrics(cls, v: List[str]) -> List[str]:
        unknown = [m for m in v if m not in METRICS]
        if unknown:
            raise ValueError(f"metrics {unknown} are not among {METRICS}")
        return v

    @field_validator("levels")
    @classmethod
    def validate_levels(cls, v: List[str]) -> List[str]:
        return _check_levels(v)

    @field_validator("kernel")
    @classmethod
    def validate_kernel(cls, v: str) -> str:
        if v.upper() not in KERNEL_PRESETS:
            raise ValueError(f"Unknown kernel {v!r}; expected one of {sorted(KERNEL_PRESETS)}")
        return v.upper()


class DefenseSection(BaseModel):
    """Detection grid, trigger synthesis and pruning settings."""

    defenses: List[str] = Field(default_factory=lambda: list(DEFENSES))
    levels: List[str] = Field(default_factory=lambda: list(TAP_LEVELS))
    grid: List[Tuple[int, float]] = Field(
        default_factory=lambda: [(100, 0.5), (100, 1.0), (500, 0.5), (500, 1.0)],
        description="(N, r') detection cells",
    )
    pool_size: Optional[int] = Field(
        default=None, ge=10,
        description="Fresh benign target-class and triggered candidates drawn per run; derived from the grid when null",
    )
    validation_size: int = Field(default=200, ge=2, description="Benign validation rows for subspace reconstruction")
    ac_components: int = Field(default=20, ge=1)
    ss_multiplier: float = Field(default=1.5, gt=0)
    sr_energy: float = Field(default=0.9, gt=0, le=1)
    nc_gamma: float = Field(default=0.01, ge=0)
    nc_steps: int = Field(default=500, ge=1)
    nc_lr: float = Field(default=0.1, gt=0)
    nc_batch_size: int = Field(default=32, ge=1)
    nc_per_class: int = Field(default=20, ge=1, description="Clean validation images per class for trigger synthesis")
    prune_fractions: List[float] = Field(default_factory=lambda: [round(0.05 * i, 2) for i in range(11)])

    @field_validator("defenses")
    @classmethod
    def validate_defenses(cls, v: List[str]) -> List[str]:
        v = [d.upper() for d in v]
        unknown = [d for d in v if d not in DEFENSES]
        if unknown:
            raise ValueError(f"defenses {unknown} are not among {DEFENSES}")
        return v

    @field_validator("levels")
    @classmethod
    def validate_levels(cls, v: List[str]) -> List[str]:
        return _check_levels(v)

    @field_validator("grid")
    @classmethod
    def validate_grid(cls, v: List[Tuple[int, float]]) -> List[Tuple[int, float]]:
        for n, r_prime in v:
            if n < 10 or r_prime <= 0:
                raise ValueError(f"detection cell (N={n}, r'={r_prime}) needs N >= 10 and r' > 0")
        return v

    @field_validator("prune_fractions")
    @classmethod
    def validate_fractions(cls, v: List[float]) -> List[float]:
        if any(not 0.0 <= p <= 1.0 for p in v):
            raise ValueError(f"prune_fractions must lie in [0, 1], got {v}")
        return v

    @model_validator(mode="after")
    def validate_pool_size(self):
        if self.pool_size is not None and self.pool_size < self.largest_cell_population:
            raise ValueError(
                f"defense.pool_size {self.pool_size} cannot fill the grid, whose largest cell needs "
                f"{self.largest_cell_population} samples of one population"
            )
        return self

    @property
    def largest_cell_population(self) -> int:
        """Largest benign or malicious count any (N, r') cell asks for."""
        return max((max(detection_composition(n, r_prime)) for n, r_prime in self.grid), default=0)

    @property
    def candidate_pool_size(self) -> int:
        """pool_size, or 20% over the largest cell population when unset."""
        if self.pool_size is not None:
            return self.pool_size
        return max(10, math.ceil(1.2 * self.largest_cell_population))


class SweepSection(BaseModel):
    """Grid over attacks, methods, lambda, kernels and seeds."""

    attacks: List[str] = Field(default_factory=lambda: ["patched"])
    methods: List[str] = Field(default_factory=lambda: ["ml-mmdr", "sl-mmdr"])
    lambdas: List[float] = Field(default_factory=lambda: [0.0, 0.1, 0.2, 0.3])
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2])
    kernels: List[str] = Field(default_factory=list, description="Kernel ablation; empty uses train.kernel only")

    @field_validator("attacks")
    @classmethod
    def validate_attacks(cls, v: List[str]) -> List[str]:
        unknown = [a for a in v if a not in TRIGGER_KINDS]
        if unknown:
            raise ValueError(f"attacks {unknown} are not among {TRIGGER_KINDS}")
        return v

    @field_validator("methods")
    @classmethod
    def validate_methods(cls, v: List[str]) -> List[str]:
        v = [m.lower() for m in v]
        unknown = [m for m in v if m not in METHOD_LEVELS]
        if unknown:
            raise ValueError(f"methods {unknown} are not among {sorted(METHOD_LEVELS)}")
        return v

    @field_validator("lambdas")
    @classmethod
    def validate_lambdas(cls, v: List[float]) -> List[float]:
        if any(lam < 0 for lam in v):
            raise ValueError(f"lambdas must be non-negative, got {v}")
        return v

    @field_validator("kernels")
    @classmethod
    def validate_kernels(cls, v: List[str]) -> List[str]:
        unknown = [k for k in v if k.upper() not in KERNEL_PRESETS]
        if unknown:
            raise ValueError(f"kernels {unknown} are not among {sorted(KERNEL_PRESETS)}")
        return [k.upper() for k in v]


class ExperimentConfig(BaseModel):
    """
    Complete experiment configuration.

    Every field has a default, so an empty config runs the whole pipeline.
    ``train.seed`` is a cell index mixed with the master ``seed``; the
    training target is always ``attack.target``.
    """

    seed: int = Field(default=0, ge=0, description="Master seed")
    output_dir: Optional[str] = Field(default=None, description="Output root; falls back to BLAB_OUT")
    dataset: DatasetSection = Field(default_factory=DatasetSection)
    attack: AttackSection = Field(default_factory=AttackSection)
    model: ModelSection = Field(default_factory=ModelSection)
    train: TrainConfig = Field(default_factory=TrainConfig)
    measure: MeasureSection = Field(default_factory=MeasureSection)
    defense: DefenseSection = Field(default_factory=DefenseSection)
    sweep: SweepSection = Field(default_factory=SweepSection)

    @model_validator(mode="after")
    def validate_consistency(self):
        if self.attack.target >= self.dataset.num_classes:
            raise ValueError(f"attack.target {self.attack.target} is not a class of a {self.dataset.num_classes}-class dataset")
        if self.train.target != self.attack.target:
            raise ValueError(f"train.target {self.train.target} differs from attack.target {self.attack.target}")
        if self.dataset.height % 8 or self.dataset.width % 8:
            raise ValueError("dataset.height and dataset.width must be multiples of 8")
        return self

    def model_settings(self) -> ModelConfig:
        return ModelConfig(
            family=self.model.family,
            width=self.model.width,
            num_classes=self.dataset.num_classes,
            input_shape=self.dataset.image_shape,
        )
