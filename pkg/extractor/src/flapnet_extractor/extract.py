"""Video decoding and landmark serialization.

Output is the landmark JSON-lines interchange format: one object per frame,
`{"frame_index": i, "t": seconds, "hands": {"left": H|null, "right": H|null}}`
with `H = {"score": s, "landmarks": [[x, y, z] * 21]}`. Detected x, y are
clamped into [0, 1] at write time; clamp events are counted in the summary
so engine contract violations stay visible.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from .engines import HandDetection, make_engine

VIDEO_EXTENSIONS = (".mp4", ".avi", ".mov", ".mkv")


class ExtractionError(RuntimeError):
    """Video could not be opened or decoded."""


@dataclass
class ExtractionJob:
    video_path: Path
    output_path: Path
    engine: str = "mediapipe"
    target_fps: float | None = None  # None keeps the native rate
    min_detection_confidence: float = 0.5
    min_tracking_confidence: float = 0.5


@dataclass
class ExtractionSummary:
    video_id: str
    frames: int
    detection_rate: float
    clamped: int
    fps: float
    engine: str
    engine_version: str
    min_detection_confidence: float
    min_tracking_confidence: float
    status: str = "ok"

    csv_columns = (
        "video_id", "frames", "detection_rate", "clamped", "fps",
        "engine", "engine_version",
        "min_detection_confidence", "min_tracking_confidence", "status",
    )

    def csv_row(self) -> list:
        return [getattr(self, c) for c in self.csv_columns]


def _assign_slots(detections: list[HandDetection]) -> dict[str, HandDetection]:
    """Map detections to left/right slots; when two detections claim the same
    handedness the higher-score one keeps it and the other takes the free
    opposite slot."""
    slots: dict[str, HandDetection] = {}
    for det in sorted(detections, key=lambda d: -d.score):
        if det.handedness not in slots:
            slots[det.handedness] = det
        else:
            other = "right" if det.handedness == "left" else "left"
            if other not in slots:
                slots[other] = det
    return slots


def _hand_json(det: HandDetection) -> tuple[dict, int]:
    pts = det.landmarks.astype(np.float64).copy()
    clipped = np.clip(pts[:, :2], 0.0, 1.0)
    clamped = int(np.sum(clipped != pts[:, :2]))
    pts[:, :2] = clipped
    return {"score": float(det.score), "landmarks": pts.tolist()}, clamped


def extract(job: ExtractionJob) -> ExtractionSummary:
    """Run the engine over every decoded frame and write the landmark file."""
    cap = cv2.VideoCapture(str(job.video_path))
    if not cap.isOpened():
        cap.release()
        raise ExtractionError(f"cannot open video: {job.video_path}")
    native_fps = cap.get(cv2.CAP_PROP_FPS)
    if not native_fps or native_fps <= 0:
        native_fps = 30.0
    step = 1.0
    out_fps = native_fps
    if job.target_fps is not None and 0 < job.target_fps < native_fps:
        step = native_fps / job.target_fps
        out_fps = job.target_fps

    engine = make_engine(job.engine, job.min_detection_confidence, job.min_tracking_confidence)
    lines = []
    detected_frames = 0
    clamped_total = 0
    try:
        src_index = 0
        next_keep = 0.0
        while True:
            ok, frame = cap.read()
            if not ok:
                break
            if src_index >= next_keep:
                next_keep += step
                out_index = len(lines)
                hands_json: dict[str, dict | None] = {"left": None, "right": None}
                detections = engine.process(frame)
                if detections:
                    detected_frames += 1
                    for slot, det in _assign_slots(detections).items():
                        hands_json[slot], clamped = _hand_json(det)
                        clamped_total += clamped
                lines.append(
                    json.dumps(
                        {
                            "frame_index": out_index,
                            "t": out_index / out_fps,
                            "hands": hands_json,
                        },
                        separators=(",", ":"),
                    )
                )
            src_index += 1
    finally:
        cap.release()
        engine_version = engine.version
        engine.close()

    if not lines:
        raise ExtractionError(f"no frames decoded from {job.video_path}")
    job.output_path.parent.mkdir(parents=True, exist_ok=True)
    job.output_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return ExtractionSummary(
        video_id=job.video_path.stem,
        frames=len(lines),
        detection_rate=detected_frames / len(lines),
        clamped=clamped_total,
        fps=out_fps,
        engine=job.engine,
        engine_version=engine_version,
        min_detection_confidence=job.min_detection_confidence,
        min_tracking_confidence=job.min_tracking_confidence,
    )


def batch_extract(
    video_dir: Path,
    out_dir: Path,
    engine: str = "mediapipe",
    target_fps: float | None = None,
    min_detection_confidence: float = 0.5,
    min_tracking_confidence: float = 0.5,
) -> list[ExtractionSummary]:
    """Extract every video in a directory; per-file failures become summary
    rows instead of aborting the batch. Writes out_dir/summary.csv."""
    out_dir.mkdir(parents=True, exist_ok=True)
    summaries = []
    videos = sorted(p for p in Path(video_dir).iterdir() if p.suffix.lower() in VIDEO_EXTENSIONS)
    for video in videos:
        job = ExtractionJob(
            video_path=video,
            output_path=out_dir / f"{video.stem}.jsonl",
            engine=engine,
            target_fps=target_fps,
            min_detection_confidence=min_detection_confidence,
            min_tracking_confidence=min_tracking_confidence,
        )
        try:
            summaries.append(extract(job))
        except ExtractionError as exc:
            summaries.append(
                ExtractionSummary(
                    video_id=video.stem,
                    frames=0,
                    detection_rate=0.0,
                    clamped=0,
                    fps=0.0,
                    engine=engine,
                    engine_version="",
                    min_detection_confidence=min_detection_confidence,
                    min_tracking_confidence=min_tracking_confidence,
                    status=f"error: {exc}",
                )
            )
    write_summary(summaries, out_dir / "summary.csv")
    return summaries


def write_summary(summaries: list[ExtractionSummary], path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ExtractionSummary.csv_columns)
        for s in summaries:
            writer.writerow(s.csv_row())
