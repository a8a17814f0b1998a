"""Turn per-video behavior annotations into positive and control time spans.

Positive spans are the (merged) hand-flapping intervals; control spans are
the parts of the video not covered by ANY behavior annotation. Both are
chunked greedily from the left into pieces of at most MAX_SPAN_S seconds,
and pieces shorter than MIN_SPAN_S seconds are discarded.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .data import Clip, Label, LandmarkFrame
from .errors import ParseError, ValidationError

MIN_SPAN_S = 2.0
MAX_SPAN_S = 5.0

Span = tuple[float, float]


class Behavior(Enum):
    FLAP = "flap"
    HEADBANG = "headbang"
    SPIN = "spin"

    @classmethod
    def parse(cls, text: str) -> "Behavior":
        try:
            return cls(text)
        except ValueError:
            raise ValidationError(f"unknown behavior {text!r}") from None


@dataclass(frozen=True, slots=True)
class Annotation:
    video_id: str
    behavior: Behavior
    start_s: float
    end_s: float

    def __post_init__(self) -> None:
        if self.start_s < 0:
            raise ValidationError(f"annotation start {self.start_s} < 0")
        if self.end_s <= self.start_s:
            raise ValidationError(f"annotation span empty: [{self.start_s}, {self.end_s}]")


@dataclass(frozen=True, slots=True)
class SpanPlan:
    video_id: str
    positives: tuple[Span, ...]
    controls: tuple[Span, ...]


def merge_intervals(intervals: list[Span]) -> list[Span]:
    """Union of intervals; overlapping or touching inputs coalesce."""
    merged: list[Span] = []
    for start, end in sorted(intervals):
        if merged and start <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], end))
        else:
            merged.append((start, end))
    return merged


def complement_intervals(intervals: list[Span], lo: float, hi: float) -> list[Span]:
    """Gaps of [lo, hi] not covered by the (merged) intervals."""
    gaps: list[Span] = []
    cursor = lo
    for start, end in merge_intervals(intervals):
        if start > cursor:
            gaps.append((cursor, min(start, hi)))
        cursor = max(cursor, end)
        if cursor >= hi:
            break
    if cursor < hi:
        gaps.append((cursor, hi))
    return [g for g in gaps if g[1] > g[0]]


def chunk_span(span: Span) -> list[Span]:
    """Cut a span left-to-right into MAX_SPAN_S pieces, dropping any piece
    (the trailing remainder included) shorter than MIN_SPAN_S."""
    start, end = span
    pieces = []
    while end - start >= MIN_SPAN_S:
        cut = min(start + MAX_SPAN_S, end)
        while cut - start > MAX_SPAN_S:  # start + MAX can round one ulp past MAX
            cut = math.nextafter(cut, start)
        pieces.append((start, cut))
        start = cut
    return pieces


def plan_spans(annotations: list[Annotation], video_duration_s: float) -> SpanPlan:
    """Compute positive and control spans for one video.

    All annotations must belong to the same video and end within it.
    """
    video_ids = {a.video_id for a in annotations}
    if len(video_ids) > 1:
        raise ValidationError(f"annotations span multiple videos: {sorted(video_ids)}")
    video_id = video_ids.pop() if video_ids else ""
    for a in annotations:
        if a.end_s > video_duration_s:
            raise ValidationError(
                f"annotation [{a.start_s}, {a.end_s}] exceeds video duration {video_duration_s}"
            )

    flapping = [(a.start_s, a.end_s) for a in annotations if a.behavior is Behavior.FLAP]
    any_behavior = [(a.start_s, a.end_s) for a in annotations]

    positives = [p for span in merge_intervals(flapping) for p in chunk_span(span)]
    controls = [
        p for gap in complement_intervals(any_behavior, 0.0, video_duration_s) for p in chunk_span(gap)
    ]
    return SpanPlan(video_id, tuple(positives), tuple(controls))


def cut_clip(clip_source: Clip, span: Span, label: Label) -> Clip:
    """Extract the frames of ``clip_source`` whose absolute video time lies
    in the half-open interval [start, end), re-indexed from zero."""
    start, end = span
    if end <= start:
        raise ValidationError(f"empty span [{start}, {end}]")
    if start < clip_source.start_s or end > clip_source.end_s:
        raise ValidationError(
            f"span [{start}, {end}] outside source range "
            f"[{clip_source.start_s}, {clip_source.end_s}]"
        )
    frames = []
    for frame in clip_source.frames:
        abs_t = clip_source.start_s + frame.timestamp_s
        if start <= abs_t < end:
            frames.append(
                LandmarkFrame(
                    frame_index=len(frames),
                    timestamp_s=abs_t - start,
                    left=frame.left,
                    right=frame.right,
                )
            )
    if not frames:
        raise ValidationError(f"span [{start}, {end}] contains no frames")
    clip_id = f"{clip_source.source_video_id}_{label.value}_{start:g}_{end:g}"
    return Clip(
        clip_id=clip_id,
        source_video_id=clip_source.source_video_id,
        label=label,
        start_s=start,
        end_s=end,
        fps=clip_source.fps,
        frames=tuple(frames),
    )


def load_annotations(path: str | Path) -> list[Annotation]:
    """Read annotations CSV with header video_id,behavior,start_s,end_s."""
    path = Path(path)
    out = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["video_id", "behavior", "start_s", "end_s"]:
            raise ParseError(f"{path}: expected header video_id,behavior,start_s,end_s, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ParseError(f"{path} line {lineno}: expected 4 columns")
            try:
                out.append(
                    Annotation(row[0], Behavior.parse(row[1]), float(row[2]), float(row[3]))
                )
            except ValueError as exc:
                if isinstance(exc, ValidationError):
                    raise
                raise ParseError(f"{path} line {lineno}: {exc}") from None
    return out
