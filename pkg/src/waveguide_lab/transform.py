"""Mixed Fourier transform between R x T and R x Z, and lattice convolution.

Convention::

    f_hat(xi, n) = int_{R x T} exp(-2 pi i (x1 xi + x2 n)) f(x1, x2) dx1 dx2

The x2 direction is an exact discrete Fourier sum over the equispaced torus
grid; the x1 direction is a direct trapezoid quadrature of the oscillatory
integral over the truncation window.  No fast transform is used in x1 so that
these routines can serve as reference oracles.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from scipy.signal import fftconvolve

from .errors import LatticeMismatchError, WindowTooSmallError
from .grid import FreqFunction, PhysFunction, PhysGrid, lattice_window

# boundary power (relative to the peak) above which the window is deemed too small
_TAIL_TOLERANCE = 1e-6
_CHUNK = 1024


def _check_window(u: PhysFunction) -> None:
    power = np.abs(u.values) ** 2
    peak = power.max()
    if peak == 0:
        return
    edge = max(power[0].max(), power[-1].max())
    if edge > _TAIL_TOLERANCE * peak:
        raise WindowTooSmallError(
            f"boundary power {edge / peak:.3e} of peak exceeds {_TAIL_TOLERANCE:g}; "
            f"enlarge the window beyond L={u.grid.half_width}"
        )


def forward_transform(
    u: PhysFunction,
    xi_window: tuple[float, float],
    nodes_per_unit: int = 8,
    modes: Optional[Sequence[int]] = None,
    check_window: bool = True,
) -> FreqFunction:
    """Evaluate ``f_hat`` on the lattice nodes of ``xi_window``.

    ``modes`` is a contiguous range of integer modes; the default is every mode
    the torus grid resolves without aliasing.
    """
    if check_window:
        _check_window(u)
    grid = u.grid
    if modes is None:
        modes = range(-grid.max_mode, grid.max_mode + 1)
    modes = np.asarray(list(modes), dtype=int)
    if modes.size == 0 or np.any(np.diff(modes) != 1):
        raise ValueError("modes must be a non-empty contiguous range")
    if np.max(np.abs(modes)) > grid.max_mode:
        raise ValueError(f"x2 grid of {grid.n_x2} points cannot resolve mode {np.max(np.abs(modes))}")

    # exact DFT on the torus grid: column j of the fft is mode j (mod n_x2)
    per_mode = np.fft.fft(u.values, axis=1)[:, modes % grid.n_x2] / grid.n_x2
    weighted = per_mode * grid.x1_weights[:, None]

    start, count = lattice_window(*xi_window, nodes_per_unit)
    xi = (start + np.arange(count)) / nodes_per_unit
    x1 = grid.x1_nodes
    # sampled at spacing dx the sum is 1/dx-periodic in xi
    nyquist = 0.5 / (x1[1] - x1[0])
    if max(abs(xi[0]), abs(xi[-1])) > nyquist * (1 + 1e-12):
        raise ValueError(
            f"xi window reaches {max(abs(xi[0]), abs(xi[-1])):g}, beyond the x1 grid's Nyquist limit {nyquist:g}"
        )
    out = np.empty((modes.size, count), dtype=complex)
    for i in range(0, count, _CHUNK):
        block = xi[i : i + _CHUNK]
        kernel = np.exp(-2j * np.pi * np.outer(block, x1))
        out[:, i : i + _CHUNK] = (kernel @ weighted).T
    return FreqFunction(nodes_per_unit, start, int(modes[0]), out)


def inverse_transform(F: FreqFunction, grid: PhysGrid) -> PhysFunction:
    """``u(x) = sum_n int exp(2 pi i (x1 xi + x2 n)) F(xi, n) dxi`` on ``grid``."""
    if np.max(np.abs(F.modes)) > grid.max_mode:
        raise ValueError(
            f"x2 grid of {grid.n_x2} points aliases mode {int(np.max(np.abs(F.modes)))}; "
            "need n_x2 > 2 * max|mode|"
        )
    if grid.half_width > 0.5 * F.nodes_per_unit * (1 + 1e-12):
        # trapezoid sums over the lattice are nodes_per_unit-periodic in x1
        raise ValueError(
            f"window half-width {grid.half_width:g} exceeds half the lattice period "
            f"{F.nodes_per_unit}; copies of the wave would alias into the window"
        )
    x1 = grid.x1_nodes
    masses = F.masses  # (modes, nodes)
    per_mode = np.empty((grid.n_x1, F.n_modes), dtype=complex)
    xi = F.xi_nodes
    for i in range(0, grid.n_x1, _CHUNK):
        kernel = np.exp(2j * np.pi * np.outer(x1[i : i + _CHUNK], xi))
        per_mode[i : i + _CHUNK] = kernel @ masses.T
    torus = np.exp(2j * np.pi * np.outer(F.modes, grid.x2_nodes))
    return PhysFunction(grid, per_mode @ torus)


def check_same_lattice(F: FreqFunction, G: FreqFunction) -> None:
    if F.nodes_per_unit != G.nodes_per_unit:
        raise LatticeMismatchError(
            f"node spacings 1/{F.nodes_per_unit} and 1/{G.nodes_per_unit} differ; "
            "convolution would need interpolation"
        )


def freq_convolution(F: FreqFunction, G: FreqFunction) -> FreqFunction:
    """Convolution on R x Z: ``(F*G)(xi, n) = sum_k int F(eta, k) G(xi - eta, n - k) deta``.

    Both inputs are treated as discrete measures ``weight * value`` on the
    shared lattice; the result is the density of their convolution, sampled on
    the exact sum lattice (the Minkowski sum of the two windows).
    """
    check_same_lattice(F, G)
    h = F.spacing
    conv = fftconvolve(F.masses, G.masses) / h
    return FreqFunction(F.nodes_per_unit, F.start + G.start, F.first_mode + G.first_mode, conv)


def lattice_energy(F: FreqFunction, G: FreqFunction) -> float:
    """``h * sum |F*G|^2`` over the sum lattice, computed by discrete Parseval.

    This is the squared L^2 norm of :func:`freq_convolution` under the uniform
    lattice measure; it differs from the trapezoid value only at the two
    extreme nodes, where the convolution density is O(h).
    """
    check_same_lattice(F, G)
    shape = (F.n_modes + G.n_modes - 1, F.n_nodes + G.n_nodes - 1)
    fa = np.fft.fft2(F.masses, s=shape)
    fb = np.fft.fft2(G.masses, s=shape)
    h = F.spacing
    return float(np.sum(np.abs(fa * fb) ** 2) / (shape[0] * shape[1]) / h)
