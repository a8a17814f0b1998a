"""Synthetic landmark clips for tests and benchmarks.

Flapping clips oscillate all detected landmarks horizontally at 3-5 Hz with
amplitude 0.1-0.2; control clips drift below 0.5 Hz with amplitude <= 0.05.
Both carry Gaussian coordinate noise (sigma 0.005) and 5% per-frame hand
dropout. Mimicking how flapping episodes look on video, flapping clips also
hold the hands raised (low y) while control clips rest them lower in the
frame, so the classes differ in pose as well as in motion. Everything is
drawn from one seeded PCG64 stream, so a (label, n_frames, fps, seed) tuple
always produces the same clip.
"""

from __future__ import annotations

import numpy as np

from .data import Clip, Hand, HandFrame, Label, LandmarkFrame, LandmarkPoint, N_LANDMARKS, UNDETECTED
from .errors import ValidationError

FLAP_FREQ_HZ = (3.0, 5.0)
FLAP_AMP = (0.1, 0.2)
CONTROL_FREQ_HZ = (0.05, 0.45)
CONTROL_AMP = (0.01, 0.05)
NOISE_SIGMA = 0.005
DROPOUT_P = 0.05

# Rough open-palm layout, (x, y) offsets from the hand center; z is flat.
_TEMPLATE_XY = np.array(
    [
        (0.00, 0.10),                                   # wrist
        (-0.05, 0.06), (-0.08, 0.02), (-0.10, -0.02), (-0.11, -0.05),   # thumb
        (-0.05, -0.02), (-0.06, -0.06), (-0.065, -0.085), (-0.07, -0.10),  # index
        (-0.015, -0.03), (-0.02, -0.075), (-0.02, -0.095), (-0.02, -0.11),  # middle
        (0.02, -0.025), (0.025, -0.065), (0.03, -0.085), (0.03, -0.10),    # ring
        (0.055, -0.01), (0.07, -0.04), (0.08, -0.06), (0.085, -0.075),     # pinky
    ],
    dtype=np.float64,
)
_CENTERS_X = (0.38, 0.62)
_CENTER_Y_FLAP = 0.42   # hands raised while flapping
_CENTER_Y_CONTROL = 0.68  # hands at rest
_CENTER_Y_JITTER = 0.03


def synth_generate(label: Label, n_frames: int, fps: float, seed: int) -> Clip:
    """Generate one synthetic clip of the given class."""
    if n_frames < 1:
        raise ValidationError(f"n_frames must be >= 1, got {n_frames}")
    if fps <= 0:
        raise ValidationError(f"fps must be positive, got {fps}")

    rng = np.random.default_rng(np.random.PCG64(seed))
    if label is Label.FLAP:
        freq = rng.uniform(*FLAP_FREQ_HZ)
        amp = rng.uniform(*FLAP_AMP)
        center_y = rng.normal(_CENTER_Y_FLAP, _CENTER_Y_JITTER)
    else:
        freq = rng.uniform(*CONTROL_FREQ_HZ)
        amp = rng.uniform(*CONTROL_AMP)
        center_y = rng.normal(_CENTER_Y_CONTROL, _CENTER_Y_JITTER)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=2)

    t = np.arange(n_frames, dtype=np.float64) / fps
    # (frames, hands, landmarks, xyz); z is noise-only, like the jitter of a
    # camera-relative depth estimate around the palm plane
    coords = np.empty((n_frames, 2, N_LANDMARKS, 3), dtype=np.float64)
    for hi in range(2):
        swing = amp * np.sin(2.0 * np.pi * freq * t + phases[hi])
        coords[:, hi, :, 0] = _CENTERS_X[hi] + _TEMPLATE_XY[:, 0][None, :] + swing[:, None]
        coords[:, hi, :, 1] = center_y + _TEMPLATE_XY[:, 1][None, :]
        coords[:, hi, :, 2] = 0.0
    coords += rng.normal(0.0, NOISE_SIGMA, size=coords.shape)
    coords[..., 0] = np.clip(coords[..., 0], 0.002, 0.998)
    coords[..., 1] = np.clip(coords[..., 1], 0.002, 0.998)

    # detector failures lose a whole hand for a frame, not single landmarks
    detected = np.repeat(
        rng.random(size=(n_frames, 2, 1)) >= DROPOUT_P, N_LANDMARKS, axis=2
    )
    scores = rng.uniform(0.85, 1.0, size=(n_frames, 2))

    frames = []
    for fi in range(n_frames):
        hands = []
        for hi, handedness in enumerate((Hand.LEFT, Hand.RIGHT)):
            points = tuple(
                LandmarkPoint(coords[fi, hi, li, 0], coords[fi, hi, li, 1], coords[fi, hi, li, 2], True)
                if detected[fi, hi, li]
                else UNDETECTED
                for li in range(N_LANDMARKS)
            )
            hands.append(HandFrame(handedness, float(scores[fi, hi]), points))
        frames.append(LandmarkFrame(fi, float(t[fi]), hands[0], hands[1]))

    return Clip(
        clip_id=f"synth-{label.value}-{seed}",
        source_video_id=f"synth-{label.value}-{seed}",
        label=label,
        start_s=0.0,
        end_s=float(n_frames) / fps,
        fps=float(fps),
        frames=tuple(frames),
    )


def mean_abs_x_step(clip: Clip, landmark: int = 0) -> float:
    """Mean |x_{t+1} - x_t| of one landmark over frame pairs where both ends
    are detected, averaged across hands. The simple frequency statistic that
    separates the two synthetic classes."""
    from .data import clip_arrays

    coords, detected = clip_arrays(clip)
    steps = []
    for hi in range(2):
        xs = coords[:, hi, landmark, 0]
        ok = detected[:, hi, landmark]
        both = ok[:-1] & ok[1:]
        if both.any():
            steps.append(np.abs(np.diff(xs))[both])
    if not steps:
        return 0.0
    return float(np.concatenate(steps).mean())
