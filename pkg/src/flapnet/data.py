"""Landmark-sequence data model and interchange file formats.

A clip is stored as a JSON-lines file, one object per frame:

    {"frame_index": 0, "t": 0.0, "hands": {"left": H | null, "right": H | null}}

where ``H = {"score": float, "landmarks": [[x, y, z] * 21]}``. A landmark
written as exactly ``[0, 0, 0]`` means "not detected"; an absent hand is
``null``. Files written by :func:`save_clip` start with one extra line,
``{"meta": {...}}``, carrying the clip metadata so that a save/load round
trip restores every field; the loader also accepts files without it.

Manifests are CSV with header ``clip_id,label,path`` and label values
``flap`` / ``control``. Relative paths resolve against the manifest's
directory.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ParseError, ValidationError

N_LANDMARKS = 21

__all__ = [
    "N_LANDMARKS",
    "Label",
    "Hand",
    "LandmarkPoint",
    "HandFrame",
    "LandmarkFrame",
    "Clip",
    "ManifestEntry",
    "DatasetManifest",
    "clip_arrays",
    "clip_with_arrays",
    "load_clip",
    "save_clip",
    "load_manifest",
    "save_manifest",
    "load_dataset",
]


class Label(Enum):
    """Clip class label."""

    FLAP = "flap"
    CONTROL = "control"

    @classmethod
    def parse(cls, text: str) -> "Label":
        try:
            return cls(text)
        except ValueError:
            raise ValidationError(f"unknown label {text!r}; expected 'flap' or 'control'") from None


class Hand(Enum):
    LEFT = "left"
    RIGHT = "right"


@dataclass(frozen=True, slots=True)
class LandmarkPoint:
    """One hand landmark: normalized (x, y), camera-relative depth z.

    An undetected landmark is exactly (0, 0, 0); a detected one carries
    x, y in [0, 1] and an unbounded z. The flag and the coordinates are
    kept canonically coupled, so (0, 0, 0) with detected=True is rejected.
    """

    x: float
    y: float
    z: float
    detected: bool

    def __post_init__(self) -> None:
        if not self.detected:
            if self.x != 0.0 or self.y != 0.0 or self.z != 0.0:
                raise ValidationError("undetected landmark must be exactly (0, 0, 0)")
            return
        if self.x == 0.0 and self.y == 0.0 and self.z == 0.0:
            raise ValidationError("detected landmark at exactly (0, 0, 0); use UNDETECTED")
        if not (0.0 <= self.x <= 1.0) or not (0.0 <= self.y <= 1.0):
            raise ValidationError(f"detected landmark out of range: x={self.x}, y={self.y}")
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise ValidationError("landmark coordinates must be finite")

    @classmethod
    def from_xyz(cls, x: float, y: float, z: float) -> "LandmarkPoint":
        """Build a point, inferring the detection flag from the zero convention."""
        if x == 0.0 and y == 0.0 and z == 0.0:
            return UNDETECTED
        return cls(float(x), float(y), float(z), True)


UNDETECTED = LandmarkPoint(0.0, 0.0, 0.0, False)


@dataclass(frozen=True, slots=True)
class HandFrame:
    """All 21 landmarks of one hand in one frame, plus the detector score."""

    handedness: Hand
    score: float
    points: tuple[LandmarkPoint, ...]

    def __post_init__(self) -> None:
        if len(self.points) != N_LANDMARKS:
            raise ValidationError(f"hand must carry {N_LANDMARKS} points, got {len(self.points)}")
        if not (0.0 <= self.score <= 1.0):
            raise ValidationError(f"hand score {self.score} outside [0, 1]")

    @classmethod
    def empty(cls, handedness: Hand) -> "HandFrame":
        return cls(handedness, 0.0, (UNDETECTED,) * N_LANDMARKS)

    @property
    def any_detected(self) -> bool:
        return any(p.detected for p in self.points)


@dataclass(frozen=True, slots=True)
class LandmarkFrame:
    """One video frame; absent hands are normalized to all-zero HandFrames."""

    frame_index: int
    timestamp_s: float
    left: HandFrame | None = None
    right: HandFrame | None = None

    def __post_init__(self) -> None:
        if self.frame_index < 0:
            raise ValidationError(f"negative frame_index {self.frame_index}")
        if self.left is None:
            object.__setattr__(self, "left", HandFrame.empty(Hand.LEFT))
        if self.right is None:
            object.__setattr__(self, "right", HandFrame.empty(Hand.RIGHT))

    def hand(self, which: Hand) -> HandFrame:
        return self.left if which is Hand.LEFT else self.right  # type: ignore[return-value]


@dataclass(frozen=True, slots=True)
class Clip:
    """A labeled landmark sequence cut from one source video."""

    clip_id: str
    source_video_id: str
    label: Label
    start_s: float
    end_s: float
    fps: float
    frames: tuple[LandmarkFrame, ...]

    def __post_init__(self) -> None:
        if self.end_s <= self.start_s:
            raise ValidationError(f"clip time span empty: [{self.start_s}, {self.end_s}]")
        if self.fps <= 0:
            raise ValidationError(f"fps must be positive, got {self.fps}")
        if not self.frames:
            raise ValidationError("clip must contain at least one frame")
        indices = [f.frame_index for f in self.frames]
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise ValidationError("frame_index must be strictly increasing")

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s

    def __len__(self) -> int:
        return len(self.frames)


def clip_arrays(clip: Clip) -> tuple[np.ndarray, np.ndarray]:
    """Flatten a clip into (coords, detected) arrays.

    coords has shape (n_frames, 2, 21, 3) with hand slot 0 = left,
    slot 1 = right; detected has shape (n_frames, 2, 21). Undetected
    entries are exactly zero.
    """
    n = len(clip.frames)
    coords = np.zeros((n, 2, N_LANDMARKS, 3), dtype=np.float64)
    detected = np.zeros((n, 2, N_LANDMARKS), dtype=bool)
    for fi, frame in enumerate(clip.frames):
        for hi, hand in enumerate((frame.left, frame.right)):
            for li, p in enumerate(hand.points):
                if p.detected:
                    coords[fi, hi, li, 0] = p.x
                    coords[fi, hi, li, 1] = p.y
                    coords[fi, hi, li, 2] = p.z
                    detected[fi, hi, li] = True
    return coords, detected


def clip_with_arrays(clip: Clip, coords: np.ndarray, detected: np.ndarray) -> Clip:
    """Rebuild a clip from modified coordinate arrays, keeping all metadata.

    Scores, handedness, frame indices and timestamps come from the original
    frames; undetected entries must be zero in ``coords``.
    """
    if coords.shape != (len(clip.frames), 2, N_LANDMARKS, 3):
        raise ValidationError(f"coords shape {coords.shape} does not match clip")
    frames = []
    for fi, frame in enumerate(clip.frames):
        hands = []
        for hi, hand in enumerate((frame.left, frame.right)):
            points = tuple(
                LandmarkPoint(coords[fi, hi, li, 0], coords[fi, hi, li, 1], coords[fi, hi, li, 2], True)
                if detected[fi, hi, li]
                else UNDETECTED
                for li in range(N_LANDMARKS)
            )
            hands.append(HandFrame(hand.handedness, hand.score, points))
        frames.append(LandmarkFrame(frame.frame_index, frame.timestamp_s, hands[0], hands[1]))
    return Clip(
        clip_id=clip.clip_id,
        source_video_id=clip.source_video_id,
        label=clip.label,
        start_s=clip.start_s,
        end_s=clip.end_s,
        fps=clip.fps,
        frames=tuple(frames),
    )


def _hand_from_json(obj: object, handedness: Hand, lineno: int) -> HandFrame:
    if obj is None:
        return HandFrame.empty(handedness)
    if not isinstance(obj, dict) or "score" not in obj or "landmarks" not in obj:
        raise ParseError(f"line {lineno}: hand must be null or {{score, landmarks}}")
    landmarks = obj["landmarks"]
    if not isinstance(landmarks, list) or len(landmarks) != N_LANDMARKS:
        raise ParseError(f"line {lineno}: expected {N_LANDMARKS} landmarks")
    points = []
    for li, triple in enumerate(landmarks):
        if not isinstance(triple, list) or len(triple) != 3:
            raise ParseError(f"line {lineno}: landmark {li} must be [x, y, z]")
        try:
            point = LandmarkPoint.from_xyz(float(triple[0]), float(triple[1]), float(triple[2]))
        except ValidationError as exc:
            raise ValidationError(f"line {lineno}, landmark {li}: {exc}") from None
        points.append(point)
    try:
        score = float(obj["score"])
        return HandFrame(handedness, score, tuple(points))
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"line {lineno}: {exc}") from None


def load_clip(
    path: str | Path,
    *,
    clip_id: str | None = None,
    label: Label | None = None,
    source_video_id: str | None = None,
    fps: float | None = None,
) -> Clip:
    """Read a landmark JSON-lines file into a validated Clip.

    Keyword arguments override metadata from the file's optional meta line;
    for bare frame-only files (e.g. extractor output) the defaults are the
    file stem as id, CONTROL as label and an fps inferred from timestamps.
    """
    path = Path(path)
    frames: list[LandmarkFrame] = []
    meta: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"line {lineno}: {exc.msg}") from None
            if lineno == 1 and isinstance(obj, dict) and "meta" in obj:
                meta = obj["meta"]
                continue
            if not isinstance(obj, dict) or not {"frame_index", "t", "hands"} <= obj.keys():
                raise ParseError(f"line {lineno}: frame must carry frame_index, t, hands")
            hands = obj["hands"]
            if not isinstance(hands, dict):
                raise ParseError(f"line {lineno}: hands must be an object")
            try:
                frame = LandmarkFrame(
                    frame_index=int(obj["frame_index"]),
                    timestamp_s=float(obj["t"]),
                    left=_hand_from_json(hands.get("left"), Hand.LEFT, lineno),
                    right=_hand_from_json(hands.get("right"), Hand.RIGHT, lineno),
                )
            except (TypeError, ValueError) as exc:
                if isinstance(exc, ValidationError):
                    raise
                raise ParseError(f"line {lineno}: {exc}") from None
            frames.append(frame)

    if not frames:
        raise ValidationError(f"{path}: clip file contains no frames")

    if fps is None:
        fps = meta.get("fps")
    if fps is None:
        ts = [f.timestamp_s for f in frames]
        if len(ts) >= 2 and ts[-1] > ts[0]:
            fps = (len(ts) - 1) / (ts[-1] - ts[0])
        else:
            fps = 30.0
    if clip_id is None:
        clip_id = meta.get("clip_id", path.stem)
    if source_video_id is None:
        source_video_id = meta.get("source_video_id", clip_id)
    if label is None:
        label = Label.parse(meta["label"]) if "label" in meta else Label.CONTROL
    start_s = float(meta.get("start_s", 0.0))
    end_s = float(meta.get("end_s", frames[-1].timestamp_s + 1.0 / fps))
    return Clip(
        clip_id=clip_id,
        source_video_id=source_video_id,
        label=label,
        start_s=start_s,
        end_s=end_s,
        fps=float(fps),
        frames=tuple(frames),
    )


def _hand_to_json(hand: HandFrame) -> dict | None:
    if hand.score == 0.0 and not hand.any_detected:
        return None
    return {
        "score": hand.score,
        "landmarks": [[p.x, p.y, p.z] for p in hand.points],
    }


def save_clip(clip: Clip, path: str | Path) -> None:
    """Write a clip as JSON lines; load_clip(save_clip(c)) == c bit-exactly."""
    path = Path(path)
    meta = {
        "clip_id": clip.clip_id,
        "source_video_id": clip.source_video_id,
        "label": clip.label.value,
        "start_s": clip.start_s,
        "end_s": clip.end_s,
        "fps": clip.fps,
    }
    lines = [json.dumps({"meta": meta}, separators=(",", ":"))]
    for frame in clip.frames:
        obj = {
            "frame_index": frame.frame_index,
            "t": frame.timestamp_s,
            "hands": {
                "left": _hand_to_json(frame.left),
                "right": _hand_to_json(frame.right),
            },
        }
        lines.append(json.dumps(obj, separators=(",", ":")))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass(frozen=True, slots=True)
class ManifestEntry:
    clip_id: str
    label: Label
    path: Path


@dataclass(frozen=True)
class DatasetManifest:
    """Index of the clips making up one dataset."""

    entries: tuple[ManifestEntry, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        ids = [e.clip_id for e in self.entries]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValidationError(f"duplicate clip_id values in manifest: {dupes}")

    def counts(self) -> dict[Label, int]:
        out = {Label.FLAP: 0, Label.CONTROL: 0}
        for e in self.entries:
            out[e.label] += 1
        return out

    def __len__(self) -> int:
        return len(self.entries)


def load_manifest(path: str | Path) -> DatasetManifest:
    """Read a manifest CSV; every referenced clip file must exist."""
    path = Path(path)
    base = path.parent
    entries = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["clip_id", "label", "path"]:
            raise ParseError(f"{path}: expected header clip_id,label,path, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ParseError(f"{path} line {lineno}: expected 3 columns")
            clip_id, label_text, rel = row
            clip_path = (base / rel) if not Path(rel).is_absolute() else Path(rel)
            if not clip_path.exists():
                raise ValidationError(f"{path} line {lineno}: clip file not found: {clip_path}")
            entries.append(ManifestEntry(clip_id, Label.parse(label_text), clip_path))
    return DatasetManifest(tuple(entries))


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    """Write a manifest CSV with paths relative to the CSV's directory."""
    path = Path(path)
    base = path.parent.resolve()
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["clip_id", "label", "path"])
        for e in manifest.entries:
            p = e.path.resolve()
            try:
                rel = p.relative_to(base)
            except ValueError:
                rel = p
            writer.writerow([e.clip_id, e.label.value, rel.as_posix()])


def load_dataset(manifest: DatasetManifest) -> list[tuple[Clip, int]]:
    """Materialize a manifest as (clip, label) pairs; label 1 = flapping."""
    out = []
    for e in manifest.entries:
        clip = load_clip(e.path, clip_id=e.clip_id, label=e.label)
        out.append((clip, 1 if e.label is Label.FLAP else 0))
    return out


def dataset_labels(items: Iterable[tuple[Clip, int]] | Sequence[ManifestEntry]) -> list[int]:
    labels = []
    for item in items:
        if isinstance(item, ManifestEntry):
            labels.append(1 if item.label is Label.FLAP else 0)
        else:
            labels.append(int(item[1]))
    return labels
