"""Sequential LSTM kernels: numba-jitted by default, pure numpy on demand.

The per-timestep recurrence is the only part of training that cannot be
expressed as a handful of large matrix products, so it is isolated here and
compiled with numba. Set FLAPNET_KERNELS=numpy to force the plain-numpy
path (identical source, no JIT), or FLAPNET_KERNELS=numba to fail loudly if
numba is unavailable. The default ("auto") uses numba when importable.

Array conventions: sequences are (T, B, ...) so each timestep slice is
contiguous. Gate order along the 4H axis is [input, forget, candidate,
output]. The weight-gradient matrix products live in model.py; both
backends share them.

benchmarks/bench_kernels.py compares the two paths.
"""

from __future__ import annotations

import os

import numpy as np

_ENV_VAR = "FLAPNET_KERNELS"


def _forward_core(x, W, U, b, gi, gf, gg, go, cs, hs, tc):
    # x: (T, B, D); cs, hs: (T+1, B, H) with slice 0 zeroed; rest (T, B, H)
    T = x.shape[0]
    H = U.shape[0]
    for t in range(T):
        z = np.dot(x[t], W) + np.dot(hs[t], U) + b
        i = 1.0 / (1.0 + np.exp(-z[:, 0:H]))
        f = 1.0 / (1.0 + np.exp(-z[:, H : 2 * H]))
        g = np.tanh(z[:, 2 * H : 3 * H])
        o = 1.0 / (1.0 + np.exp(-z[:, 3 * H : 4 * H]))
        c = f * cs[t] + i * g
        th = np.tanh(c)
        gi[t] = i
        gf[t] = f
        gg[t] = g
        go[t] = o
        cs[t + 1] = c
        tc[t] = th
        hs[t + 1] = o * th


def _backward_core(dh_last, U_T, gi, gf, gg, go, cs, tc, dz):
    # Fills dz (T, B, 4H) with the pre-activation gate gradients.
    T, _, H = gi.shape
    dh = dh_last.copy()
    dc = np.zeros_like(dh_last)
    for t in range(T - 1, -1, -1):
        i = gi[t]
        f = gf[t]
        g = gg[t]
        o = go[t]
        th = tc[t]
        dc = dc + dh * o * (1.0 - th * th)
        dz[t, :, 3 * H : 4 * H] = dh * th * o * (1.0 - o)
        dz[t, :, 0:H] = dc * g * i * (1.0 - i)
        dz[t, :, H : 2 * H] = dc * cs[t] * f * (1.0 - f)
        dz[t, :, 2 * H : 3 * H] = dc * i * (1.0 - g * g)
        dh = np.dot(dz[t], U_T)
        dc = dc * f


forward_core_numpy = _forward_core
backward_core_numpy = _backward_core

try:
    from numba import njit

    forward_core_numba = njit(cache=True)(_forward_core)
    backward_core_numba = njit(cache=True)(_backward_core)
except ImportError:  # pragma: no cover - numba is a hard dep, but stay usable
    forward_core_numba = None
    backward_core_numba = None


def resolve_backend(name: str | None = None) -> str:
    """Map an FLAPNET_KERNELS value to the backend that will actually run."""
    name = (name if name is not None else os.environ.get(_ENV_VAR, "auto")).lower()
    if name not in ("auto", "numba", "numpy"):
        raise ValueError(f"{_ENV_VAR} must be auto, numba or numpy, got {name!r}")
    if name == "numpy":
        return "numpy"
    if forward_core_numba is None:
        if name == "numba":
            raise RuntimeError("FLAPNET_KERNELS=numba requested but numba is not importable")
        return "numpy"
    return "numba"


_ACTIVE = resolve_backend()


def active_backend() -> str:
    return _ACTIVE


def set_backend(name: str) -> str:
    """Switch the process-wide kernel backend; returns the resolved name."""
    global _ACTIVE, forward_core, backward_core
    _ACTIVE = resolve_backend(name)
    if _ACTIVE == "numba":
        forward_core = forward_core_numba
        backward_core = backward_core_numba
    else:
        forward_core = forward_core_numpy
        backward_core = backward_core_numpy
    return _ACTIVE


forward_core = forward_core_numba if _ACTIVE == "numba" else forward_core_numpy
backward_core = backward_core_numba if _ACTIVE == "numba" else backward_core_numpy
