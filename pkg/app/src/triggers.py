"""
Trigger fusion functions

Four ways of fusing a trigger into a benign image x:

- patched:  (1 - m) * x + m * b        with a binary mask m and patch b
- blended:  (1 - alpha) * x + alpha * b
- sig:      x + b                      with b a horizontal sinusoid
- warped:   W(x, b)                    bilinear resampling along a smooth flow field

Every result is clamped to [0, 1].
"""

from dataclasses import dataclass
from typing import Literal, Optional, Tuple

import numpy as np
from scipy import ndimage

TriggerKind = Literal["patched", "blended", "sig", "warped"]
TRIGGER_KINDS: Tuple[str, ...] = ("patched", "blended", "sig", "warped")


@dataclass
class TriggerSpec:
    """Attack kind plus the fusion parameters it needs."""
    kind: TriggerKind
    image_shape: Tuple[int, int, int]
    mask: Optional[np.ndarray] = None            # patched: H x W in {0, 1}
    patch: Optional[np.ndarray] = None           # patched: H x W x C in [0, 1]
    blend_image: Optional[np.ndarray] = None     # blended: H x W x C in [0, 1]
    alpha: float = 0.2
    amplitude: float = 0.08                      # sig: delta
    frequency: float = 6.0                       # sig: f
    control_offsets: Optional[np.ndarray] = None  # warped: k x k x 2 in [-1, 1]
    strength: float = 0.5                        # warped: s, in grid cells

    def __post_init__(self):
        h, w, c = self.image_shape
        if self.kind == "patched":
            if self.mask is None or self.patch is None:
                raise ValueError("patched trigger needs mask and patch")
            if self.mask.shape != (h, w) or not np.isin(self.mask, (0.0, 1.0)).all():
                raise ValueError(f"patched mask must be a binary {h}x{w} array")
            if self.patch.shape != (h, w, c) or self.patch.min() < 0 or self.patch.max() > 1:
                raise ValueError(f"patched patch must be {h}x{w}x{c} with values in [0, 1]")
        elif self.kind == "blended":
            if self.blend_image is None or self.blend_image.shape != (h, w, c):
                raise ValueError(f"blended trigger needs a {h}x{w}x{c} blend image")
            if not 0.0 <= self.alpha < 1.0:
                raise ValueError(f"blended alpha must be in [0, 1), got {self.alpha}")
        elif self.kind == "warped":
            if self.control_offsets is None or self.control_offsets.ndim != 3 or self.control_offsets.shape[2] != 2:
                raise ValueError("warped trigger needs k x k x 2 control offsets")
            if np.abs(self.control_offsets).max() > 1.0:
                raise ValueError("warped control offsets must lie in [-1, 1]")
        elif self.kind != "sig":
            raise ValueError(f"Unknown trigger kind {self.kind!r}; expected one of {TRIGGER_KINDS}")


def make_trigger(
    kind: str,
    image_shape: Tuple[int, int, int],
    seed: int = 0,
    patch_size: int = 3,
    alpha: float = 0.2,
    amplitude: float = 0.08,
    frequency: float = 6.0,
    grid_size: int = 4,
    strength: float = 0.5,
) -> TriggerSpec:
    """
    Build a trigger with the workbench defaults.

    patched: white ``patch_size`` square in the top-left corner.
    blended: seeded uniform-noise blend image at ``alpha``.
    sig: sinusoid with ``amplitude`` and ``frequency``.
    warped: ``grid_size`` x ``grid_size`` control offsets ~ U(-1, 1), scaled by ``strength``.
    """
    h, w, c = image_shape
    rng = np.random.default_rng(seed)
    if kind == "patched":
        mask = np.zeros((h, w))
        mask[:patch_size, :patch_size] = 1.0
        return TriggerSpec(kind="patched", image_shape=image_shape, mask=mask, patch=np.ones((h, w, c)))
    if kind == "blended":
        return TriggerSpec(kind="blended", image_shape=image_shape, blend_image=rng.uniform(0.0, 1.0, (h, w, c)), alpha=alpha)
    if kind == "sig":
        return TriggerSpec(kind="sig", image_shape=image_shape, amplitude=amplitude, frequency=frequency)
    if kind == "warped":
        offsets = rng.uniform(-1.0, 1.0, (grid_size, grid_size, 2))
        return TriggerSpec(kind="warped", image_shape=image_shape, control_offsets=offsets, strength=strength)
    raise ValueError(f"Unknown trigger kind {kind!r}; expected one of {TRIGGER_KINDS}")


def sig_signal(spec: TriggerSpec) -> np.ndarray:
    """The additive sinusoid b(i, j, c) = amplitude * sin(2 pi j f / W)."""
    h, w, c = spec.image_shape
    column = spec.amplitude * np.sin(2.0 * np.pi * np.arange(w) * spec.frequency / w)
    return np.broadcast_to(column[None, :, None], (h, w, c))


def warp_field(spec: TriggerSpec) -> np.ndarray:
    """Dense (H, W, 2) pixel displacement, bilinearly upsampled from the control grid."""
    h, w, _ = spec.image_shape
    k = spec.control_offsets.shape[0]
    grid_rows = np.linspace(0, k - 1, h)
    grid_cols = np.linspace(0, k - 1, w)
    coords = np.stack(np.meshgrid(grid_rows, grid_cols, indexing="ij"))
    cell = np.array([(h - 1) / max(k - 1, 1), (w - 1) / max(k - 1, 1)])
    field = np.stack([
        ndimage.map_coordinates(spec.control_offsets[:, :, axis], coords, order=1, mode="nearest")
        for axis in range(2)
    ], axis=-1)
    return field * spec.strength * cell


def _warp(images: np.ndarray, spec: TriggerSpec) -> np.ndarray:
    n, h, w, c = images.shape
    flow = warp_field(spec)
    rows, cols = np.mgrid[0:h, 0:w].astype(np.float64)
    sample_rows = np.clip(rows + flow[..., 0], 0, h - 1)
    sample_cols = np.clip(cols + flow[..., 1], 0, w - 1)
    coords = np.stack([sample_rows, sample_cols])
    out = np.empty_like(images)
    for i in range(n):
        for ch in range(c):
            out[i, :, :, ch] = ndimage.map_coordinates(images[i, :, :, ch], coords, order=1, mode="nearest")
    return out


def apply_trigger(x: np.ndarray, spec: TriggerSpec) -> np.ndarray:
    """
    Fuse the trigger into one (H, W, C) image or a batch of (N, H, W, C) images.

    Raises:
        ValueError: If the image shape does not match the trigger.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 3
    batch = x[None] if single else x
    if batch.ndim != 4 or tuple(batch.shape[1:]) != tuple(spec.image_shape):
        raise ValueError(f"apply_trigger: image shape {x.shape} does not match trigger shape {spec.image_shape}")

    if spec.kind == "patched":
        mask = spec.mask[None, :, :, None]
        out = (1.0 - mask) * batch + mask * spec.patch[None]
    elif spec.kind == "blended":
        out = (1.0 - spec.alpha) * batch + spec.alpha * spec.blend_image[None]
    elif spec.kind == "sig":
        out = batch + sig_signal(spec)[None]
    else:
        out = _warp(batch, spec)

    out = np.clip(out, 0.0, 1.0)
    return out[0] if single else out
