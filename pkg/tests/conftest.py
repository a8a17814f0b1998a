import numpy as np
import pytest

from flapnet.data import (
    Clip,
    Hand,
    HandFrame,
    Label,
    LandmarkFrame,
    LandmarkPoint,
    N_LANDMARKS,
    UNDETECTED,
)


def point(x, y, z=0.0):
    return LandmarkPoint.from_xyz(x, y, z)


def hand_with(handedness, detected_points, score=0.9):
    """Hand with the given {index: (x, y, z)} detected, rest undetected."""
    pts = [UNDETECTED] * N_LANDMARKS
    for idx, xyz in detected_points.items():
        pts[idx] = point(*xyz)
    return HandFrame(handedness, score, tuple(pts))


def simple_clip(n_frames=3, fps=30.0, label=Label.CONTROL, clip_id="clip0"):
    """Small deterministic clip with landmark 0 of both hands detected."""
    frames = []
    for i in range(n_frames):
        x = 0.3 + 0.01 * (i % 30)
        left = hand_with(Hand.LEFT, {0: (x, 0.5, 0.02), 4: (x + 0.1, 0.45, 0.0 if i else 0.01)})
        right = hand_with(Hand.RIGHT, {0: (x + 0.3, 0.5, -0.02)})
        frames.append(LandmarkFrame(i, i / fps, left, right))
    return Clip(
        clip_id=clip_id,
        source_video_id="vid0",
        label=label,
        start_s=0.0,
        end_s=n_frames / fps,
        fps=fps,
        frames=tuple(frames),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_instance(rng, d, h, t, scale=0.5):
    """Random small model + input for gradient checking."""
    from flapnet.model import ModelParameters

    def r(*shape):
        return rng.normal(0.0, scale, size=shape)

    params = ModelParameters(r(d, 4 * h), r(h, 4 * h), r(4 * h), r(h), r(1))
    x = rng.normal(0.0, scale, size=(t, d))
    y = int(rng.integers(0, 2))
    return params, x, y


def finite_diff_grads(params, x, y, training=False, dropout_seed=None, eps=1e-5):
    """Central finite differences of the loss wrt every parameter scalar."""
    from flapnet.model import ModelParameters, bce_loss, forward

    def loss():
        return bce_loss(forward(params, x, training=training, dropout_seed=dropout_seed), y)

    grads = []
    for arr in params.arrays():
        g = np.zeros_like(arr)
        flat = arr.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            lp = loss()
            flat[i] = orig - eps
            lm = loss()
            flat[i] = orig
            gflat[i] = (lp - lm) / (2.0 * eps)
        grads.append(g)
    return ModelParameters(*grads)
