"""Finite-difference stencil weights."""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def fornberg_weights(deriv: int, offsets: tuple) -> np.ndarray:
    """Weights c_j with f^(deriv)(0) ~ sum_j c_j f(offsets[j]) (unit spacing)."""
    x = np.asarray(offsets, dtype=float)
    n = len(x)
    c = np.zeros((n, deriv + 1))
    c1, c4 = 1.0, x[0]
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, deriv)
        c2, c5, c4 = 1.0, c4, x[i]
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    w = c[:, deriv].copy()
    w.setflags(write=False)
    return w


def central_offsets(deriv: int, order: int) -> tuple:
    """Symmetric offsets giving an ``order``-accurate central stencil."""
    if deriv == 0:
        return (0,)
    radius = (deriv + 1) // 2 + order // 2 - 1
    return tuple(range(-radius, radius + 1))


def central_weights(deriv: int, order: int = 4):
    offs = central_offsets(deriv, order)
    return offs, fornberg_weights(deriv, offs)


def derivative(f, x, deriv, h, order=8):
    """Central finite-difference derivative of a scalar callable."""
    if deriv == 0:
        return f(x)
    offs, w = central_weights(deriv, order)
    vals = np.array([f(x + o * h) for o in offs])
    return float(np.dot(w, vals)) / h**deriv
