"""L^p norms on R x Z and R x T, and the dyadic-cube refinement norm X^{p,q}."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .grid import FreqCube, FreqFunction, PhysFunction, make_cube
from .quadrature import trapezoid_weights

_BOUNDARY_RATIO = 1e-6


class TruncationWarning(UserWarning):
    """Physical samples are not small on the edge of the truncation window."""


def _check_p(p: float) -> float:
    p = float(p)
    if math.isnan(p) or p < 1:
        raise ValueError(f"p must be >= 1 (or inf), got {p}")
    return p


def _weighted_lp(mod: np.ndarray, weights: np.ndarray, p: float) -> float:
    if math.isinf(p):
        return float(mod.max()) if mod.size else 0.0
    return float(np.sum(weights * mod**p) ** (1.0 / p))


def lp_freq(F: FreqFunction, p: float) -> float:
    """``(sum_n sum_nodes weight * |F|^p)^(1/p)``, or the max for ``p = inf``."""
    p = _check_p(p)
    return _weighted_lp(np.abs(F.values), F.xi_weights[None, :], p)


def lp_phys(u: PhysFunction, p: float) -> float:
    """Trapezoid-in-x1, torus-average-in-x2 approximation of ``||u||_{L^p}``.

    Emits :class:`TruncationWarning` if the samples on the window edge are not
    below ``1e-6`` of the maximum (the window probably cuts off mass).
    """
    p = _check_p(p)
    mod = np.abs(u.values)
    peak = mod.max() if mod.size else 0.0
    if peak > 0 and max(mod[0].max(), mod[-1].max()) > _BOUNDARY_RATIO * peak:
        warnings.warn("boundary values exceed 1e-6 of the maximum; L^p value may be truncated", TruncationWarning)
    weights = u.grid.x1_weights[:, None] / u.grid.n_x2
    return _weighted_lp(mod, weights, p)


# ---------------------------------------------------------------------------
# X^{p,q}
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CubeTerm:
    """Contribution of one cube to the X^{p,q} sum."""

    cube: FreqCube
    lp: float  # ||F||_{L^p(cube)}
    term: float  # delta^{(p-2)/p * q} * lp^q


def _cube_lp(F: FreqFunction, cube: FreqCube, p: float) -> float:
    lo, hi = cube.xi_interval
    # closed interval, compared in integer lattice coordinates
    idx = F.start + np.arange(F.n_nodes)
    k = np.nonzero((idx >= lo * F.nodes_per_unit) & (idx <= hi * F.nodes_per_unit))[0]
    if k.size < 2:
        return 0.0
    mlo, mhi = cube.mode_range
    rows = np.nonzero((F.modes >= mlo) & (F.modes <= mhi))[0]
    if rows.size == 0:
        return 0.0
    block = np.abs(F.values[rows[0] : rows[-1] + 1, k[0] : k[-1] + 1])
    w = trapezoid_weights(k.size, F.spacing)
    return _weighted_lp(block, w[None, :], p)


def admissible_scales(F: FreqFunction, max_scale: Optional[int] = None) -> list[int]:
    """Dyadic scales ``4, 8, ...`` up to the extent of the represented window."""
    xi0, xi1, m0, m1 = F.box()
    if max_scale is None:
        extent = max(xi1 - xi0, m1 - m0, 4)
        max_scale = 1 << math.ceil(math.log2(extent))
    scales = []
    d = 4
    while d <= max_scale:
        scales.append(d)
        d *= 2
    return scales


def _cubes_meeting(F: FreqFunction, delta: int):
    # closed cube [m d, (m+1) d] meets [a, b] iff a/d - 1 <= m <= b/d
    xi0, xi1, m0, m1 = F.box()
    for n in range(math.ceil(m0 / delta - 1), math.floor(m1 / delta) + 1):
        for m in range(math.ceil(xi0 / delta - 1), math.floor(xi1 / delta) + 1):
            yield make_cube(m, n, delta)


def xpq_terms(F: FreqFunction, p: float, q: float, max_scale: Optional[int] = None) -> dict[int, list[CubeTerm]]:
    """Per-scale, per-cube terms of the X^{p,q} sum (cubes meeting the window)."""
    p = _check_p(p)
    if not q > 0:
        raise ValueError(f"q must be positive, got {q}")
    if math.isinf(p):
        raise ValueError("X^{p,q} needs finite p")
    out: dict[int, list[CubeTerm]] = {}
    for d in admissible_scales(F, max_scale):
        terms = []
        for cube in _cubes_meeting(F, d):
            v = _cube_lp(F, cube, p)
            terms.append(CubeTerm(cube, v, d ** ((p - 2.0) / p * q) * v**q))
        out[d] = terms
    return out


def xpq_norm(F: FreqFunction, p: float, q: float, max_scale: Optional[int] = None) -> float:
    """``(sum_delta delta^{(p-2) q / p} sum_{theta in C_delta} ||F||_{L^p(theta)}^q)^(1/q)``."""
    terms = xpq_terms(F, p, q, max_scale)
    total = math.fsum(t.term for ts in terms.values() for t in ts)
    return total ** (1.0 / q)
