"""Hand-landmark detection engines.

An engine turns one BGR frame into zero or more hand detections, each a
handedness label, a confidence score and 21 normalized (x, y, z) landmarks.
The production engine wraps MediaPipe Hands; the blob engine is a
self-contained fallback that tracks the brightest region in the frame and
fits a hand-shaped landmark template to it, useful for pipeline tests and
environments where MediaPipe is unavailable.
"""

from __future__ import annotations

from typing import NamedTuple, Protocol

import cv2
import numpy as np


class HandDetection(NamedTuple):
    handedness: str  # "left" or "right"
    score: float
    landmarks: np.ndarray  # (21, 3), x and y normalized to the frame


class HandLandmarkEngine(Protocol):
    name: str
    version: str

    def process(self, frame_bgr: np.ndarray) -> list[HandDetection]: ...

    def close(self) -> None: ...


class MediaPipeHandsEngine:
    """MediaPipe Hands solution in video (tracking) mode."""

    name = "mediapipe-hands"

    def __init__(
        self,
        min_detection_confidence: float = 0.5,
        min_tracking_confidence: float = 0.5,
        max_hands: int = 2,
    ):
        try:
            import mediapipe as mp
        except ImportError as exc:
            raise RuntimeError(
                "mediapipe is not installed; pip install 'flapnet-extractor[mediapipe]' "
                "or use --engine blob"
            ) from exc
        self.version = mp.__version__
        self._hands = mp.solutions.hands.Hands(
            static_image_mode=False,
            max_num_hands=max_hands,
            min_detection_confidence=min_detection_confidence,
            min_tracking_confidence=min_tracking_confidence,
        )

    def process(self, frame_bgr: np.ndarray) -> list[HandDetection]:
        rgb = cv2.cvtColor(frame_bgr, cv2.COLOR_BGR2RGB)
        result = self._hands.process(rgb)
        if not result.multi_hand_landmarks:
            return []
        detections = []
        for landmarks, handedness in zip(result.multi_hand_landmarks, result.multi_handedness):
            pts = np.array([[p.x, p.y, p.z] for p in landmarks.landmark], dtype=np.float64)
            top = handedness.classification[0]
            detections.append(HandDetection(top.label.lower(), float(top.score), pts))
        return detections

    def close(self) -> None:
        self._hands.close()


# Open-palm layout reused by the blob engine, (x, y) offsets in blob radii.
_BLOB_TEMPLATE = np.array(
    [
        (0.0, 0.8),
        (-0.45, 0.45), (-0.7, 0.15), (-0.85, -0.1), (-0.95, -0.3),
        (-0.45, -0.15), (-0.5, -0.5), (-0.55, -0.7), (-0.6, -0.85),
        (-0.15, -0.25), (-0.15, -0.6), (-0.15, -0.8), (-0.15, -0.95),
        (0.15, -0.2), (0.2, -0.55), (0.25, -0.7), (0.25, -0.85),
        (0.45, -0.1), (0.55, -0.35), (0.65, -0.5), (0.7, -0.6),
    ],
    dtype=np.float64,
)


class BrightBlobEngine:
    """Tracks the largest bright region and emits a template hand around it.

    Deterministic and dependency-free; one detection per frame at most, with
    handedness chosen by which half of the frame the blob sits in.
    """

    name = "blob"
    version = "1"

    def __init__(self, threshold: int = 128, min_area_fraction: float = 0.002):
        self.threshold = threshold
        self.min_area_fraction = min_area_fraction

    def process(self, frame_bgr: np.ndarray) -> list[HandDetection]:
        gray = cv2.cvtColor(frame_bgr, cv2.COLOR_BGR2GRAY)
        _, mask = cv2.threshold(gray, self.threshold, 255, cv2.THRESH_BINARY)
        moments = cv2.moments(mask, binaryImage=True)
        h, w = gray.shape
        area = moments["m00"]
        if area < self.min_area_fraction * h * w:
            return []
        cx = moments["m10"] / area / w
        cy = moments["m01"] / area / h
        radius = float(np.sqrt(area / np.pi))
        rx, ry = radius / w, radius / h
        pts = np.zeros((21, 3), dtype=np.float64)
        pts[:, 0] = cx + _BLOB_TEMPLATE[:, 0] * rx
        pts[:, 1] = cy + _BLOB_TEMPLATE[:, 1] * ry
        handedness = "left" if cx < 0.5 else "right"
        score = min(1.0, area / (h * w) * 20.0)
        return [HandDetection(handedness, score, pts)]

    def close(self) -> None:
        pass


def make_engine(
    name: str,
    min_detection_confidence: float = 0.5,
    min_tracking_confidence: float = 0.5,
) -> HandLandmarkEngine:
    if name == "mediapipe":
        return MediaPipeHandsEngine(min_detection_confidence, min_tracking_confidence)
    if name == "blob":
        return BrightBlobEngine()
    raise ValueError(f"unknown engine {name!r}; expected 'mediapipe' or 'blob'")
