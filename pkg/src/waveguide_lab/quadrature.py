"""Small quadrature helpers shared by the transform, propagator and expsum modules."""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=32)
def _legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_panels(a: float, b: float, panels: int, order: int = 10) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of composite Gauss-Legendre on ``[a, b]``.

    The interval is split into ``panels`` equal panels with ``order`` nodes each.
    Nodes are returned in ascending order.
    """
    if panels < 1 or order < 1:
        raise ValueError("panels and order must be positive")
    x, w = _legendre(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def trapezoid_weights(count: int, spacing: float) -> np.ndarray:
    """Composite trapezoid weights for ``count`` equispaced nodes."""
    if count < 2:
        raise ValueError("trapezoid rule needs at least two nodes")
    w = np.full(count, float(spacing))
    w[0] = w[-1] = 0.5 * spacing
    return w


def smoothstep(u: np.ndarray) -> np.ndarray:
    """C-infinity transition from 0 (u <= 0) to 1 (u >= 1)."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    out[u >= 1.0] = 1.0
    mid = (u > 0.0) & (u < 1.0)
    um = u[mid]
    a = np.exp(-1.0 / um)
    b = np.exp(-1.0 / (1.0 - um))
    out[mid] = a / (a + b)
    return out
