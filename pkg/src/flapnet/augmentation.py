"""Per-clip coordinate-shift augmentation.

One offset triple (dx, dy, dz) is drawn per clip and added to every detected
landmark of every frame; undetected landmarks stay exactly (0, 0, 0). Each
axis independently picks a direction with probability 1/2, then a magnitude
uniform over the feasible range: for x and y the range is bounded by how far
the clip's detected coordinates sit from the [0, 1] walls, for the unbounded
z axis a fixed slack budget is used instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Clip, clip_arrays, clip_with_arrays
from .errors import ValidationError

DEFAULT_Z_SLACK = 0.1


@dataclass(frozen=True, slots=True)
class AugmentationParams:
    dx: float
    dy: float
    dz: float

    def as_array(self) -> np.ndarray:
        return np.array([self.dx, self.dy, self.dz], dtype=np.float64)


def _axis_offset(rng: np.random.Generator, lo: float, hi: float, bounded: bool, z_slack: float) -> float:
    positive = rng.random() < 0.5
    slack = (1.0 - hi if positive else lo) if bounded else z_slack
    offset = rng.uniform(0.0, slack)
    if bounded:
        # guard the last-ulp case where hi + offset could round past 1.0
        while positive and hi + offset > 1.0:
            offset = np.nextafter(offset, 0.0)
        while not positive and lo - offset < 0.0:
            offset = np.nextafter(offset, 0.0)
    return offset if positive else -offset


def sample_augmentation(clip: Clip, rng_seed: int, z_slack: float = DEFAULT_Z_SLACK) -> AugmentationParams:
    """Draw per-clip offsets that keep all detected x, y inside [0, 1]."""
    coords, detected = clip_arrays(clip)
    return sample_augmentation_arrays(coords, detected, rng_seed, z_slack)


def sample_augmentation_arrays(
    coords: np.ndarray, detected: np.ndarray, rng_seed: int, z_slack: float = DEFAULT_Z_SLACK
) -> AugmentationParams:
    rng = np.random.default_rng(np.random.PCG64(rng_seed))
    if not detected.any():
        return AugmentationParams(0.0, 0.0, 0.0)
    det = coords[detected]  # (k, 3)
    offsets = []
    for axis in range(3):
        values = det[:, axis]
        offsets.append(
            _axis_offset(rng, float(values.min()), float(values.max()), bounded=axis < 2, z_slack=z_slack)
        )
    return AugmentationParams(*offsets)


def shift_arrays(coords: np.ndarray, detected: np.ndarray, params: AugmentationParams) -> np.ndarray:
    """Apply the offsets to detected entries of a coordinate array."""
    shifted = coords + params.as_array()
    shifted[~detected] = 0.0
    return shifted


def apply_augmentation(clip: Clip, params: AugmentationParams) -> Clip:
    """Shift every detected landmark of the clip by (dx, dy, dz).

    Raises if the shift would push any detected x or y outside [0, 1];
    sampled params always satisfy this for the clip they were drawn from.
    """
    coords, detected = clip_arrays(clip)
    if detected.any():
        det = coords[detected]
        for axis, d in enumerate((params.dx, params.dy)):
            lo = det[:, axis].min() + d
            hi = det[:, axis].max() + d
            if lo < 0.0 or hi > 1.0:
                raise ValidationError(
                    f"offset {d} on axis {'xy'[axis]} pushes detected coordinates outside [0, 1]"
                )
    shifted = shift_arrays(coords, detected, params)
    return clip_with_arrays(clip, shifted, detected)
