"""Exponential sums ``sum_n e^{2 pi i P(n)} kappa(n/delta)`` and their integral analogues.

Three evaluation routes are provided and are independent of each other:

* :func:`exponential_sum` sums directly over the integers in the amplitude support;
* :func:`poisson_side` sums the Fourier transform of ``e^{2 pi i P} kappa(./delta)``
  over the integers ``|m| <= M``, each term by oscillatory quadrature;
* :func:`oscillatory_integral` is the ``m = 0`` term alone.

:func:`derivative_sum` pairs the ``N``-th derivative of ``e^{2 pi i P}`` with the
amplitude.  For polynomial phases the derivative is expanded exactly through
``B_{k+1} = B_k' + 2 pi i P' B_k``; other phases fall back to refined
finite-difference stencils.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .errors import DerivativeOracleError, QuadratureFailure, RegimeError
from .grid import BumpSpec, bump_value, gaussian_amplitude
from .quadrature import gauss_panels

log = logging.getLogger(__name__)

_SLOPE_SAMPLES = 256
SMALL_SLOPE = 1.0 / 8.0
_REGIMES = ("lemma1", "lemma2", "free")


@dataclass(frozen=True)
class PhaseSpec:
    """A phase ``P`` with derivative, amplitude ``kappa``, scale ``delta`` and slope ``lam``.

    ``regime`` selects the hypothesis checked at construction:

    ``lemma1``
        ``lam/(2 delta) <= |P'(delta x)| <= 2 lam/delta`` on the amplitude support
        and ``lam/delta <= 1/8``.
    ``lemma2``
        ``|P'(delta x)| <= 1/8`` on the amplitude support.
    ``free``
        no slope hypothesis (integrals need none).

    ``poly`` carries the exact polynomial when the phase is one; it enables
    exact derivatives in :func:`derivative_sum`.
    """

    phase: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray]
    amplitude: BumpSpec
    delta: float
    lam: float = 1.0
    regime: str = "lemma1"
    poly: Optional[Polynomial] = None

    def __post_init__(self):
        if self.regime not in _REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")
        if self.amplitude.support() is None:
            raise ValueError("amplitude must be compactly supported")
        if not self.delta >= 4:
            raise RegimeError(f"delta must be >= 4, got {self.delta}")
        if not self.lam >= 1:
            raise RegimeError(f"lambda must be >= 1, got {self.lam}")
        if self.regime == "free":
            return
        lo, hi = self.amplitude.support()
        x = np.linspace(lo, hi, _SLOPE_SAMPLES)
        slope = np.abs(self.derivative(self.delta * x))
        if self.regime == "lemma1":
            if self.lam / self.delta > SMALL_SLOPE:
                raise RegimeError(f"lambda/delta = {self.lam / self.delta:g} exceeds 1/8")
            lo_b, hi_b = self.lam / (2 * self.delta), 2 * self.lam / self.delta
            if slope.min() < lo_b or slope.max() > hi_b:
                raise RegimeError(
                    f"|P'(delta x)| ranges over [{slope.min():.4g}, {slope.max():.4g}], "
                    f"outside [{lo_b:.4g}, {hi_b:.4g}]"
                )
        elif slope.max() > SMALL_SLOPE:
            raise RegimeError(f"max |P'(delta x)| = {slope.max():.4g} exceeds 1/8")

    def with_phase_sign(self, sign: int) -> "PhaseSpec":
        """The same spec with ``P`` replaced by ``sign * P``."""
        poly = None if self.poly is None else sign * self.poly
        return PhaseSpec(
            lambda x: sign * self.phase(x),
            lambda x: sign * self.derivative(x),
            self.amplitude,
            self.delta,
            self.lam,
            self.regime,
            poly,
        )


def polynomial_phase(
    coefficients: Sequence[float],
    delta: float,
    lam: float = 1.0,
    amplitude: Optional[BumpSpec] = None,
    regime: str = "lemma1",
) -> PhaseSpec:
    """Phase ``sum_k c_k x^k`` (ascending coefficients)."""
    poly = Polynomial(np.asarray(coefficients, dtype=float))
    d = poly.deriv()
    return PhaseSpec(poly, d, amplitude or gaussian_amplitude(), delta, lam, regime, poly)


def linear_phase(slope: float, delta: float, lam: Optional[float] = None, **kw) -> PhaseSpec:
    """``P(x) = slope * x``; ``lam`` defaults to ``slope * delta``."""
    if lam is None:
        lam = max(1.0, abs(slope) * delta)
    return polynomial_phase([0.0, slope], delta, lam, **kw)


def quadratic_phase(a: float, b: float, delta: float, lam: float = 1.0, **kw) -> PhaseSpec:
    """``P(x) = a x + b x^2``."""
    return polynomial_phase([0.0, a, b], delta, lam, **kw)


def scaled_quadratic_phase(alpha: float, beta: float, delta: float, **kw) -> PhaseSpec:
    """``P(x) = alpha (x/delta) + beta (x/delta)^2``: slope ``O(1/delta)`` on the support."""
    kw.setdefault("regime", "lemma2")
    return quadratic_phase(alpha / delta, beta / delta**2, delta, **kw)


def kernel_phase(s: float, w: float, delta: float, lam: float = 1.0, **kw) -> PhaseSpec:
    """One-variable restriction ``P(y) = s (y - w) y`` of the resonance phase."""
    return quadratic_phase(-s * w, s, delta, lam, **kw)


# ---------------------------------------------------------------------------
# direct sums
# ---------------------------------------------------------------------------


def _integer_support(spec: PhaseSpec) -> np.ndarray:
    lo, hi = spec.amplitude.support()
    n = np.arange(math.ceil(lo * spec.delta), math.floor(hi * spec.delta) + 1)
    return n[bump_value(spec.amplitude, n / spec.delta) != 0.0]


def exponential_sum(spec: PhaseSpec) -> complex:
    """``sum_n exp(2 pi i P(n)) kappa(n/delta)`` over ``n`` with ``kappa(n/delta) != 0``."""
    n = _integer_support(spec).astype(float)
    if n.size == 0:
        return 0j
    terms = np.exp(2j * np.pi * spec.phase(n)) * bump_value(spec.amplitude, n / spec.delta)
    return complex(np.sum(terms))


# ---------------------------------------------------------------------------
# oscillatory integrals and the Poisson side
# ---------------------------------------------------------------------------

_GL_ORDER = 16
_INT_RTOL = 1e-8
# absolute floor relative to delta * int |kappa|
_INT_FLOOR = 1e-6
_MAX_REFINEMENTS = 20


def _amplitude_scale(spec: PhaseSpec) -> float:
    lo, hi = spec.amplitude.support()
    x, w = gauss_panels(lo, hi, 64, _GL_ORDER)
    return spec.delta * float(np.dot(w, np.abs(bump_value(spec.amplitude, x))))


def _integral(spec: PhaseSpec, freq: float = 0.0) -> complex:
    """``int exp(2 pi i (P(x) - freq x)) kappa(x/delta) dx`` by refined Gauss-Legendre."""
    lo, hi = spec.amplitude.support()
    a, b = lo * spec.delta, hi * spec.delta
    # start from about one oscillation per panel
    probe = np.linspace(a, b, 257)
    rate = np.max(np.abs(spec.derivative(probe) - freq))
    panels = max(8, int(math.ceil((b - a) * rate)))
    floor = _INT_FLOOR * _amplitude_scale(spec)

    def rule(k: int) -> complex:
        x, w = gauss_panels(a, b, k, _GL_ORDER)
        vals = np.exp(2j * np.pi * (spec.phase(x) - freq * x)) * bump_value(spec.amplitude, x / spec.delta)
        return complex(np.dot(w, vals))

    prev = rule(panels)
    for _ in range(_MAX_REFINEMENTS):
        panels *= 2
        cur = rule(panels)
        if abs(cur - prev) <= _INT_RTOL * max(abs(cur), floor):
            return cur
        prev = cur
    raise QuadratureFailure(f"oscillatory integral not stable to {_INT_RTOL:g} after {_MAX_REFINEMENTS} refinements")


def oscillatory_integral(spec: PhaseSpec) -> complex:
    """``int_R exp(2 pi i P(x)) kappa(x/delta) dx``."""
    return _integral(spec, 0.0)


def poisson_mode(spec: PhaseSpec, m: int) -> complex:
    """Fourier coefficient ``F_hat(m)`` of ``F(x) = exp(2 pi i P(x)) kappa(x/delta)``."""
    return _integral(spec, float(m))


def poisson_side(spec: PhaseSpec, M: int) -> complex:
    """``sum_{|m| <= M} F_hat(m)``, summed from the outside in (smallest terms first)."""
    if M < 0:
        raise ValueError("M must be >= 0")
    total = 0j
    for m in range(M, 0, -1):
        total += poisson_mode(spec, m) + poisson_mode(spec, -m)
    return total + poisson_mode(spec, 0)


# ---------------------------------------------------------------------------
# derivative sums
# ---------------------------------------------------------------------------


def _exact_factor(poly: Polynomial, order: int) -> Polynomial:
    """``B_N`` with ``(e^{2 pi i P})^{(N)} = B_N e^{2 pi i P}``."""
    dp = 2j * np.pi * poly.deriv()
    b = Polynomial([1.0 + 0j])
    for _ in range(order):
        b = b.deriv() + dp * b
    return b


def fornberg_weights(order: int, offsets: np.ndarray) -> np.ndarray:
    """Finite-difference weights for the ``order``-th derivative at 0 on ``offsets``."""
    z = np.asarray(offsets, dtype=float)
    n = z.size
    if order >= n:
        raise ValueError("need more stencil points than the derivative order")
    c = np.zeros((n, order + 1))
    c[0, 0] = 1.0
    c1, c4 = 1.0, z[0]
    for i in range(1, n):
        top = min(i, order)
        c2, c5, c4 = 1.0, c4, z[i]
        for j in range(i):
            c3 = z[i] - z[j]
            c2 *= c3
            if j == i - 1:
                for k in range(top, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(top, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


_FD_ACCEPT = 1e-6
_FD_FAIL = 1e-4
_FD_LEVELS = 5


def _fd_derivative(spec: PhaseSpec, order: int, n: np.ndarray) -> np.ndarray:
    half = (order + 9) // 2
    offsets = np.arange(-half, half + 1, dtype=float)
    weights = fornberg_weights(order, offsets)
    rate = float(np.max(np.abs(spec.derivative(n)))) if n.size else 0.0
    h = min(1.0, 0.05 / max(rate, 1e-12))

    def stencil(step: float) -> np.ndarray:
        pts = n[:, None] + step * offsets[None, :]
        return (np.exp(2j * np.pi * spec.phase(pts)) @ weights) / step**order

    prev = stencil(h)
    best = math.inf
    for _ in range(_FD_LEVELS):
        h /= 2
        cur = stencil(h)
        scale = max(np.max(np.abs(cur)), 1e-300)
        gap = float(np.max(np.abs(cur - prev)) / scale)
        if gap <= _FD_ACCEPT:
            return cur
        if gap < best:
            best, best_val = gap, cur
        prev = cur
    if best > _FD_FAIL:
        raise DerivativeOracleError(f"finite-difference derivatives disagree at {best:.2e} relative")
    return best_val


def derivative_sum(spec: PhaseSpec, N: int) -> complex:
    """``sum_n (e^{2 pi i P})^{(N)}(n) kappa(n/delta)``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    n = _integer_support(spec).astype(float)
    if n.size == 0:
        return 0j
    if spec.poly is not None:
        factor = _exact_factor(spec.poly, N)
        deriv = factor(n) * np.exp(2j * np.pi * spec.poly(n))
    else:
        deriv = _fd_derivative(spec, N, n)
    return complex(np.sum(deriv * bump_value(spec.amplitude, n / spec.delta)))


# ---------------------------------------------------------------------------
# power-law fits
# ---------------------------------------------------------------------------


class DecayFit(NamedTuple):
    exponent: float
    constant: float
    max_residual: float


def decay_fit(values: Sequence[tuple[float, float]], expected_exponent: Optional[float] = None) -> DecayFit:
    """Least-squares line through ``(log x, log y)``.

    Returns the slope, ``exp(intercept)`` and the largest absolute residual in
    log space.  ``expected_exponent`` is only used for a debug log line.
    """
    pts = np.asarray(list(values), dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3 or pts.shape[1] != 2:
        raise ValueError("decay_fit needs at least 3 (parameter, modulus) pairs")
    if not np.all(np.isfinite(pts)) or np.any(pts <= 0):
        raise ValueError("decay_fit needs positive, finite parameters and moduli")
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = float(np.max(np.abs(ly - (slope * lx + intercept))))
    if expected_exponent is not None:
        log.debug("fitted exponent %.4f (expected %.4f)", slope, expected_exponent)
    return DecayFit(float(slope), float(np.exp(intercept)), resid)


# ---------------------------------------------------------------------------
# experiment suites (used by the command line)
# ---------------------------------------------------------------------------


def _bounded_by_first(values: Sequence[float], factor: float = 2.0) -> bool:
    return all(v <= factor * values[0] for v in values[1:])


def lemma1_suite(delta: int = 256, lams: Sequence[float] = (2, 4, 8, 16), orders: Sequence[int] = (1, 2, 3)) -> dict:
    """``|S| lam^N / delta`` for linear phases of slope ``lam/delta``."""
    sums = {lam: abs(exponential_sum(linear_phase(lam / delta, delta, lam))) for lam in lams}
    out = {"delta": delta, "lambda": list(lams), "modulus": [sums[lam] for lam in lams], "checks": {}}
    for N in orders:
        norm = [sums[lam] * lam**N / delta for lam in lams]
        out["checks"][f"N={N}"] = {"normalized": norm, "passed": _bounded_by_first(norm)}
    return out


def lemma2_suite(
    deltas: Sequence[int] = (16, 32, 64), orders: Sequence[int] = (1, 2), alpha: float = 0.5, beta: float = 0.25
) -> dict:
    """``|derivative_sum| delta^{N-1}`` for ``P(x) = alpha x/delta + beta (x/delta)^2``."""
    out = {"delta": list(deltas), "alpha": alpha, "beta": beta, "checks": {}}
    for N in orders:
        norm = [abs(derivative_sum(scaled_quadratic_phase(alpha, beta, d), N)) * d ** (N - 1) for d in deltas]
        out["checks"][f"N={N}"] = {"normalized": norm, "passed": _bounded_by_first(norm)}
    return out


def default_poisson_specs() -> list[PhaseSpec]:
    """Ten linear and quadratic phases admissible in the ``lemma1`` regime."""
    specs = []
    for d, lam in ((16, 1), (16, 2), (32, 2), (32, 4), (64, 4), (64, 8)):
        specs.append(linear_phase(lam / d, d, lam))
    for d, lam, b in ((32, 2, 0.2), (64, 4, 0.25), (64, 2, -0.2), (128, 8, 0.15)):
        # P'(delta x) = (lam/delta)(1 + 2 b x), inside the factor-2 bracket for |b| <= 1/4
        specs.append(quadratic_phase(lam / d, b * lam / d**2, d, lam))
    return specs


def poisson_suite(specs: Optional[Sequence[PhaseSpec]] = None, M: int = 16) -> dict:
    """Direct sum against the Poisson side, plus the decay of the nonzero modes."""
    specs = default_poisson_specs() if specs is None else specs
    rows = []
    for s in specs:
        direct = exponential_sum(s)
        dual = poisson_side(s, M)
        rel = abs(direct - dual) / abs(direct)
        rows.append({"delta": s.delta, "lambda": s.lam, "relative_gap": rel, "passed": rel <= 1e-6})
    d, lam = 8, 1
    s = linear_phase(lam / d, d, lam)
    modes = (1, 2, 4)
    mags = [abs(poisson_mode(s, m)) for m in modes]
    C = mags[0] * d**2 / d
    bounds = [C * (m * d) ** -2 * d for m in modes]
    decay = {"delta": d, "m": list(modes), "modulus": mags, "bound": bounds,
             "passed": all(v <= b * (1 + 1e-12) for v, b in zip(mags, bounds))}
    return {"M": M, "consistency": rows, "decay": decay}


def remark_suite(delta: int = 8, ratios: Sequence[float] = (0.5, 1.0, 2.0), orders: Sequence[int] = (1, 2, 3)) -> dict:
    """Integral decay in ``lam`` with ``lam/delta`` beyond the summation threshold."""
    lams = [r * delta for r in ratios]
    vals = [abs(oscillatory_integral(linear_phase(lam / delta, delta, lam, regime="free"))) for lam in lams]
    out = {"delta": delta, "lambda": lams, "modulus": vals, "checks": {}}
    for N in orders:
        norm = [v * lam**N / delta for v, lam in zip(vals, lams)]
        out["checks"][f"N={N}"] = {"normalized": norm, "passed": _bounded_by_first(norm)}
    return out
