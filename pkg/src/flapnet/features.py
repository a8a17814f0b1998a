"""Fixed-shape feature matrices from landmark clips.

Every clip becomes a SEQ_LEN x D matrix: the first SEQ_LEN frames are kept
(shorter clips are zero-padded at the tail) and each frame's selected
landmark coordinates are concatenated as [left-hand block | right-hand
block], landmarks in ascending index order, (x, y, z) per landmark. D is
always 6 times the number of effective landmarks: three coordinates, two
hands. Undetected landmarks contribute exact zeros.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Clip, N_LANDMARKS, clip_arrays
from .errors import ValidationError

SEQ_LEN = 90

SIX_LANDMARKS = (0, 4, 8, 12, 16, 20)


@dataclass(frozen=True, slots=True)
class FeatureSelection:
    """Which landmarks feed the model: all 21, the six hand-edge landmarks,
    a single landmark, or the per-hand mean of detected landmarks."""

    kind: str
    landmark: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("all21", "six", "one", "mean"):
            raise ValidationError(f"unknown feature selection {self.kind!r}")
        if self.kind == "one":
            if self.landmark is None or not (0 <= self.landmark < N_LANDMARKS):
                raise ValidationError(f"landmark index {self.landmark} outside [0, 20]")
        elif self.landmark is not None:
            raise ValidationError(f"selection {self.kind!r} takes no landmark index")

    @classmethod
    def all21(cls) -> "FeatureSelection":
        return cls("all21")

    @classmethod
    def six(cls) -> "FeatureSelection":
        return cls("six")

    @classmethod
    def one(cls, landmark: int = 0) -> "FeatureSelection":
        return cls("one", landmark)

    @classmethod
    def mean(cls) -> "FeatureSelection":
        return cls("mean")

    @classmethod
    def parse(cls, name: str) -> "FeatureSelection":
        if name in ("all21", "six", "mean"):
            return cls(name)
        if name == "one":
            return cls("one", 0)
        raise ValidationError(f"unknown feature selection {name!r}")

    @property
    def n_effective_landmarks(self) -> int:
        if self.kind == "all21":
            return N_LANDMARKS
        if self.kind == "six":
            return len(SIX_LANDMARKS)
        return 1


def effective_dim(selection: FeatureSelection) -> int:
    """Feature columns D = 6 * effective landmarks (3 coords x 2 hands)."""
    return 6 * selection.n_effective_landmarks


def interpolate_missing(coords: np.ndarray, detected: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Fill interior detection gaps by per-landmark, per-coordinate linear
    interpolation between the nearest detected frames.

    Leading and trailing gaps stay zero and stay undetected. Returns new
    (coords, detected) arrays; inputs are not modified.
    """
    coords = coords.copy()
    detected = detected.copy()
    n = coords.shape[0]
    frame_idx = np.arange(n, dtype=np.float64)
    for hi in range(coords.shape[1]):
        for li in range(coords.shape[2]):
            ok = detected[:, hi, li]
            k = int(ok.sum())
            if k == 0 or k == n:
                continue
            first, last = np.flatnonzero(ok)[[0, -1]]
            gaps = ~ok
            gaps[:first] = False
            gaps[last:] = False
            if not gaps.any():
                continue
            for ci in range(3):
                coords[gaps, hi, li, ci] = np.interp(
                    frame_idx[gaps], frame_idx[ok], coords[ok, hi, li, ci]
                )
            detected[gaps, hi, li] = True
    return coords, detected


def features_from_arrays(
    coords: np.ndarray,
    detected: np.ndarray,
    selection: FeatureSelection,
    interpolate: bool = False,
) -> np.ndarray:
    """Assemble the SEQ_LEN x D matrix from (frames, 2, 21, ...) arrays."""
    n = min(coords.shape[0], SEQ_LEN)
    coords = coords[:n]
    detected = detected[:n]
    if interpolate:
        coords, detected = interpolate_missing(coords, detected)

    out = np.zeros((SEQ_LEN, effective_dim(selection)), dtype=np.float64)
    if selection.kind == "mean":
        counts = detected.sum(axis=2)  # (n, 2)
        sums = (coords * detected[..., None]).sum(axis=2)  # (n, 2, 3)
        means = np.divide(sums, counts[..., None], out=np.zeros_like(sums), where=counts[..., None] > 0)
        out[:n] = means.reshape(n, 6)
        return out

    if selection.kind == "all21":
        out[:n] = coords.reshape(n, -1)
        return out
    picks = np.asarray(SIX_LANDMARKS if selection.kind == "six" else [selection.landmark])
    # (n, 2, len(picks), 3) -> rows [left landmarks xyz..., right landmarks xyz...]
    out[:n] = coords[:, :, picks, :].reshape(n, -1)
    return out


def build_features(clip: Clip, selection: FeatureSelection, interpolate: bool = False) -> np.ndarray:
    """Feature matrix for one clip. Only the first SEQ_LEN frames matter."""
    if not clip.frames:
        raise ValidationError("cannot build features from an empty clip")
    coords, detected = clip_arrays(clip)
    return features_from_arrays(coords, detected, selection, interpolate)
