"""Smooth compactly-supported profiles shared by the frequency partitions,
tube weights, and cap blends.  All built from the standard exp(-1/u) mollifier
so every window is C-infinity with exact compact support."""

import numpy as np


def _f(u):
    out = np.zeros_like(u, dtype=np.float64)
    pos = u > 0
    out[pos] = np.exp(-1.0 / u[pos])
    return out


def smooth_step(u):
    """C-infinity step: 0 for u <= 0, 1 for u >= 1, monotone between."""
    u = np.asarray(u, dtype=np.float64)
    a = _f(u)
    b = _f(1.0 - u)
    return a / (a + b + 1e-300)


def bump(u):
    """C-infinity bump supported on [-1, 1], equal to 1 at 0."""
    u = np.asarray(u, dtype=np.float64)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    v = u[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - v * v))
    return out


def partition_profile(u):
    """W(u) supported on [-1, 1] with sum_k W(u - k) = 1 exactly."""
    u = np.asarray(u, dtype=np.float64)
    return smooth_step(u + 1.0) - smooth_step(u)


def plateau(u, flat=0.5):
    """1 on [-flat, flat], 0 outside [-1, 1], smooth transition between."""
    u = np.abs(np.asarray(u, dtype=np.float64))
    return 1.0 - smooth_step((u - flat) / (1.0 - flat))
