"""Free Schrodinger evolution on R x T and two evaluators of the bilinear norm.

With ``e^{it Delta} f(x) = int exp(2 pi i (x.y - 2 pi t |y|^2)) f_hat(y) dy`` the
evolution is the frequency multiplier ``exp(-4 pi^2 i t |y|^2)``.  Integrating
the four-wave product against ``phi(t/T)`` in time gives

    int phi(t/T) exp(-4 pi^2 i t Q) dt = T * phi_hat(2 pi T Q),

so the weighted space-time norm equals the four-fold frequency sum with kernel
``T phi_hat(2 pi T Q(x, y, z, w))`` on ``x + y = z + w``.  The factor ``2 pi``
is exact under these conventions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import fft as sfft
from scipy.signal import correlate

from .errors import NonConvergenceError, QuadratureFailure
from .grid import BumpSpec, FreqFunction, PhysFunction, PhysGrid, bump_hat_value, bump_value, weight_phi
from .quadrature import gauss_panels
from .transform import check_same_lattice, inverse_transform

log = logging.getLogger(__name__)

FOUR_PI2 = 4.0 * np.pi**2

# weighted time integrals are truncated to |t| <= WEIGHT_CUTOFF * T; the tail
# mass of phi beyond 20 is ~1e-8 of its total
WEIGHT_CUTOFF = 20.0
TIME_RTOL = 0.005
_ORDER = 10
_MAX_LEVELS = 6
_BATCH_ELEMENTS = 1 << 21


def evolve(F: FreqFunction, t: float) -> FreqFunction:
    """Multiply every sample by ``exp(-4 pi^2 i t (xi^2 + n^2))``."""
    if t == 0:
        return F
    xi2 = F.xi_nodes**2
    n2 = F.modes.astype(float) ** 2
    phase = np.exp(-1j * FOUR_PI2 * t * (n2[:, None] + xi2[None, :]))
    return F.with_values(F.values * phase)


PACKET_ALLOWANCE = 1.0


def truncation_half_width(F: FreqFunction, T: float) -> float:
    """Physical window ``L = 4 (4 pi T max|xi| + 1)``.

    ``4 pi T max|xi|`` is the distance a packet at frequency ``xi`` travels by
    time ``T`` under the multiplier ``exp(-4 pi^2 i t xi^2)``; the constant
    term covers the initial packet width for cubes with ``delta >= 4``.
    """
    xi0, xi1, _, _ = F.box()
    return 4.0 * (4.0 * np.pi * abs(T) * max(abs(xi0), abs(xi1)) + PACKET_ALLOWANCE)


def physical_snapshot(
    F: FreqFunction, t: float, half_width: Optional[float] = None, n_x1: Optional[int] = None
) -> PhysFunction:
    """``e^{it Delta} f`` sampled on ``[-L, L] x T``.

    Trapezoid sums over the lattice are periodic in ``x1`` with period
    ``nodes_per_unit``, so the window must fit inside half a period.
    """
    L = truncation_half_width(F, t) if half_width is None else float(half_width)
    period = F.nodes_per_unit
    if L > 0.5 * period:
        raise ValueError(
            f"window half-width {L:g} exceeds half the lattice period {period}; raise nodes_per_unit"
        )
    xi0, xi1, m0, m1 = F.box()
    if n_x1 is None:
        # about 4 samples per shortest wavelength
        n_x1 = int(np.ceil(8.0 * L * max(abs(xi0), abs(xi1), 1.0))) + 1
    n_x2 = 2 * max(abs(m0), abs(m1)) + 2
    return inverse_transform(evolve(F, t), PhysGrid(L, n_x1, n_x2))


@dataclass(frozen=True)
class QuadraticFormInput:
    """Four points of R x Z, each given as ``(xi, n)``."""

    x: tuple[float, int]
    y: tuple[float, int]
    z: tuple[float, int]
    w: tuple[float, int]

    def __post_init__(self):
        for name in ("x", "y", "z", "w"):
            p = getattr(self, name)
            if int(p[1]) != p[1]:
                raise ValueError(f"mode coordinate of {name} must be an integer")


def _sq(p) -> float:
    return float(p[0]) ** 2 + float(p[1]) ** 2


def quadratic_form(q: QuadraticFormInput) -> float:
    """``|x|^2 + |y|^2 - |z|^2 - |w|^2``."""
    return _sq(q.x) + _sq(q.y) - _sq(q.z) - _sq(q.w)


def max_resonance(F: FreqFunction, G: FreqFunction) -> float:
    """Upper bound for |Q| over quadruples with x, z in supp F and y, w in supp G.

    On ``x + y = z + w`` one has ``Q = 2 (x - z).(z - y) = 2 (y - w).(w - x)``.
    """
    fx0, fx1, fm0, fm1 = F.box()
    gx0, gx1, gm0, gm1 = G.box()
    cross_xi = max(abs(fx1 - gx0), abs(gx1 - fx0))
    cross_n = max(abs(fm1 - gm0), abs(gm1 - fm0))
    via_f = 2.0 * ((fx1 - fx0) * cross_xi + (fm1 - fm0) * cross_n)
    via_g = 2.0 * ((gx1 - gx0) * cross_xi + (gm1 - gm0) * cross_n)
    return min(via_f, via_g)


def _low_rank(masses: np.ndarray, rtol: float = 1e-13) -> tuple[np.ndarray, np.ndarray]:
    """Factor ``masses = sum_i modes[i] (x) xis[i]`` by a truncated SVD."""
    u, sv, vh = np.linalg.svd(masses, full_matrices=False)
    keep = sv > rtol * sv[0] if sv[0] > 0 else np.zeros_like(sv, dtype=bool)
    keep[0] = True
    return (u[:, keep] * sv[keep]).T, vh[keep]


class _EnergyEvaluator:
    """Batched ``t -> ||evolve(F,t) * evolve(G,t)||^2`` via discrete Parseval.

    The propagator phase factorises as ``exp(-4 pi^2 i t xi^2) exp(-4 pi^2 i t n^2)``,
    so for data of low rank in (n, xi) the energy reduces to Gram matrices of
    one-dimensional convolutions.  Otherwise a batched 2-d FFT is used.
    """

    max_separable_terms = 16

    def __init__(self, F: FreqFunction, G: FreqFunction, separable: Optional[bool] = None):
        check_same_lattice(F, G)
        self.F, self.G = F, G
        self.h = F.spacing
        fm, fx = _low_rank(F.masses)
        gm, gx = _low_rank(G.masses)
        terms = fm.shape[0] * gm.shape[0]
        self.separable = terms <= self.max_separable_terms if separable is None else separable
        self.len_m = sfft.next_fast_len(F.n_modes + G.n_modes - 1)
        self.len_x = sfft.next_fast_len(F.n_nodes + G.n_nodes - 1)
        if self.separable:
            self.factors = (fm, fx, gm, gx)
            per_t = terms * (self.len_m + self.len_x)
        else:
            per_t = self.len_m * self.len_x
        self.batch = max(1, _BATCH_ELEMENTS // per_t)

    @staticmethod
    def _phases(values: np.ndarray, coord: np.ndarray, t: np.ndarray) -> np.ndarray:
        # values (r, L), coord (L,), t (B,) -> (B, r, L)
        ph = np.exp(-1j * FOUR_PI2 * t[:, None] * (coord**2)[None, :])
        return values[None, :, :] * ph[:, None, :]

    def _separable(self, t: np.ndarray) -> np.ndarray:
        fm, fx, gm, gx = self.factors
        modes_f = self.F.modes.astype(float)
        modes_g = self.G.modes.astype(float)
        pf = sfft.fft(self._phases(fm, modes_f, t), n=self.len_m, axis=-1)
        pg = sfft.fft(self._phases(gm, modes_g, t), n=self.len_m, axis=-1)
        xf = sfft.fft(self._phases(fx, self.F.xi_nodes, t), n=self.len_x, axis=-1)
        xg = sfft.fft(self._phases(gx, self.G.xi_nodes, t), n=self.len_x, axis=-1)
        B = t.size
        # spectra of the pairwise convolutions, indexed by pair (i, j)
        pm = (pf[:, :, None, :] * pg[:, None, :, :]).reshape(B, -1, self.len_m)
        px = (xf[:, :, None, :] * xg[:, None, :, :]).reshape(B, -1, self.len_x)
        gram_m = np.einsum("bil,bjl->bij", pm, pm.conj()) / self.len_m
        gram_x = np.einsum("bil,bjl->bij", px, px.conj()) / self.len_x
        return np.einsum("bij,bij->b", gram_m, gram_x).real / self.h

    def _full(self, t: np.ndarray) -> np.ndarray:
        shape = (self.len_m, self.len_x)

        def evolved(H: FreqFunction) -> np.ndarray:
            p_xi = np.exp(-1j * FOUR_PI2 * t[:, None] * (H.xi_nodes**2)[None, :])
            p_n = np.exp(-1j * FOUR_PI2 * t[:, None] * (H.modes.astype(float) ** 2)[None, :])
            return H.masses[None] * p_n[:, :, None] * p_xi[:, None, :]

        fa = sfft.fft2(evolved(self.F), s=shape, axes=(1, 2))
        fb = sfft.fft2(evolved(self.G), s=shape, axes=(1, 2))
        return np.sum(np.abs(fa * fb) ** 2, axis=(1, 2)) / (shape[0] * shape[1] * self.h)

    def __call__(self, times: np.ndarray) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        out = np.empty(times.size)
        kernel = self._separable if self.separable else self._full
        for i in range(0, times.size, self.batch):
            out[i : i + self.batch] = kernel(times[i : i + self.batch])
        return out


def spatial_energy(F: FreqFunction, G: FreqFunction, t, separable: Optional[bool] = None) -> np.ndarray:
    """``||evolve(F,t) * evolve(G,t)||^2`` under the lattice measure, for each ``t``."""
    return _EnergyEvaluator(F, G, separable)(np.atleast_1d(np.asarray(t, dtype=float)))


def _time_integral(
    energy: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    omega: float,
    weight: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    rtol: float = TIME_RTOL,
) -> float:
    cycles = omega * (b - a) / (2.0 * np.pi)
    panels = max(4, int(np.ceil(cycles)))

    def quad(p: int) -> float:
        t, w = gauss_panels(a, b, p, _ORDER)
        if weight is not None:
            w = w * weight(t)
        return float(np.dot(w, energy(t)))

    prev = quad(panels)
    for _ in range(_MAX_LEVELS):
        panels *= 2
        cur = quad(panels)
        if abs(cur - prev) <= rtol * abs(cur) or (cur == 0.0 and prev == 0.0):
            return cur
        log.debug("time quadrature %d panels: %.12g vs %.12g", panels, cur, prev)
        prev = cur
    raise NonConvergenceError(f"time quadrature did not settle to {rtol:g} after {panels} panels")


def bilinear_spacetime_norm(
    F: FreqFunction,
    G: FreqFunction,
    T: float,
    mode: str = "sharp",
    phi: Optional[BumpSpec] = None,
) -> float:
    """Space-time L^2 norm of the product of the two evolved waves.

    ``sharp``: ``(int_0^T ||F_t * G_t||^2 dt)^(1/2)``.
    ``weighted``: ``(int_R phi(t/T) ||F_t * G_t||^2 dt)^(1/2)`` with the weight
    bump (truncated at ``|t| <= WEIGHT_CUTOFF * T``).

    The spatial norm is taken on the frequency side (Plancherel), so no
    physical truncation enters.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    energy = _EnergyEvaluator(F, G)
    omega = FOUR_PI2 * max_resonance(F, G)
    if mode == "sharp":
        val = _time_integral(energy, 0.0, T, omega)
    elif mode == "weighted":
        spec = phi if phi is not None else weight_phi()
        cut = WEIGHT_CUTOFF * spec.width
        val = _time_integral(energy, -cut * T, cut * T, omega, weight=lambda t: bump_value(spec, t / T))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return float(np.sqrt(max(val, 0.0)))


def quadruple_oracle(F: FreqFunction, G: FreqFunction, T: float, phi: Optional[BumpSpec] = None) -> float:
    """Weighted bilinear norm from the four-wave frequency sum.

    Evaluates ``T * sum phi_hat(2 pi T Q) F(x) conj F(z) G(y) conj G(w)`` over
    the lattice with ``w = x + y - z`` substituted exactly.  For fixed
    ``d = x - z`` the resonance ``Q = 2 d.(z - y)`` depends on ``z - y`` only,
    so each ``d`` reduces to a cross-correlation of ``F(z + d) conj F(z)``
    with ``G(y) conj G(y + d)``.
    """
    check_same_lattice(F, G)
    if not T > 0:
        raise ValueError("T must be positive")
    spec = phi if phi is not None else weight_phi()
    h = F.spacing
    a = F.masses
    b = G.masses
    ma, ka = a.shape
    mb, kb = b.shape
    if not np.any(a) or not np.any(b):
        return 0.0

    # lattice coordinates of e = z - y for the correlation output index (i, j)
    e_n = np.arange(-(mb - 1), ma) + (F.first_mode - G.first_mode)
    e_xi = (np.arange(-(kb - 1), ka) + (F.start - G.start)) * h
    scale = 4.0 * np.pi * T
    support = 1.0 / spec.width

    total = 0.0 + 0.0j
    abs_total = 0.0
    for dm in range(-(ma - 1), ma):
        if abs(dm) > mb - 1:
            continue
        for dk in range(-(ka - 1), ka):
            if abs(dk) > kb - 1:
                continue
            arg = scale * (dk * h * e_xi[None, :] + dm * e_n[:, None])
            active = np.abs(arg) < support
            if not np.any(active):
                continue
            pf = _shifted_product(a, dm, dk)
            pg = _shifted_product(b, dm, dk, conj_first=False)
            if pf is None or pg is None:
                continue
            corr = _correlation(pf, pg)
            kern = np.zeros(arg.shape)
            kern[active] = bump_hat_value(spec, arg[active])
            total += np.sum(kern * corr)
            abs_total += np.sum(np.abs(kern * corr))
    total *= T / h
    abs_total *= T / h
    if total.real < -1e-6 * abs_total:
        raise QuadratureFailure(f"four-wave sum has negative real part {total.real:.3e} (scale {abs_total:.3e})")
    return float(np.sqrt(max(total.real, 0.0)))


def _shifted_product(arr: np.ndarray, dm: int, dk: int, conj_first: bool = True) -> Optional[np.ndarray]:
    """Overlap products for a lattice shift ``(dm, dk)``.

    ``conj_first``: ``arr[z + d] * conj(arr[z])`` indexed by ``z``.
    otherwise:     ``arr[y] * conj(arr[y + d])`` indexed by ``y``.
    Returned arrays are full-size (zero where the shifted index leaves the window).
    """
    m, k = arr.shape
    out = np.zeros_like(arr)
    z_m = slice(max(0, -dm), min(m, m - dm))
    z_k = slice(max(0, -dk), min(k, k - dk))
    s_m = slice(z_m.start + dm, z_m.stop + dm)
    s_k = slice(z_k.start + dk, z_k.stop + dk)
    if z_m.start >= z_m.stop or z_k.start >= z_k.stop:
        return None
    if conj_first:
        out[z_m, z_k] = arr[s_m, s_k] * np.conj(arr[z_m, z_k])
    else:
        out[z_m, z_k] = arr[z_m, z_k] * np.conj(arr[s_m, s_k])
    return out


def _correlation(pf: np.ndarray, pg: np.ndarray) -> np.ndarray:
    """``C(e) = sum_{z - y = e} pf[z] pg[y]`` on the full difference lattice."""
    # correlate(x, y)[e] = sum_z x[z] conj(y[z - e])
    return correlate(pf, np.conj(pg), mode="full", method="auto")
