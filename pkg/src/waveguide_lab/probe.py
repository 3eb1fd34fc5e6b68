"""Estimate ratios, the counterexample family, exponent formulas and parameter sweeps.

Three regimes are supported:

``theorem``
    ``T delta <= 1/8``; ``rhs = delta^{2-4/p} ||F||_p ||G||_p``.
``appendixA``
    ``T delta^2 <= 1/8``; ``rhs = T^{1/2} delta * delta^{2-4/p} ||F||_p ||G||_p``.
``counterexample``
    indicator data of width ``c T^{-1/2}`` on the modes ``0`` and ``100 delta``,
    compared against the theorem right-hand side.

Each row starts from ``resolution`` nodes per unit, raised if needed so the
x1 period of the lattice exceeds the relative travel of the two waves, and
doubles the lattice until the left-hand side changes by at most
``RESOLUTION_RTOL``.
"""

from __future__ import annotations

import logging
import math
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import NonConvergenceError, RegimeError, TransversalityError, WaveguideLabError
from .expsum import DecayFit, decay_fit
from .grid import FreqCube, FreqFunction, cube_distance, make_cube, sample_on_box, sample_on_cube
from .norms import lp_freq
from .propagator import bilinear_spacetime_norm

log = logging.getLogger(__name__)

P_MIN = Fraction(12, 7)
P_MAX = Fraction(2)
THEOREM_TDELTA = 1.0 / 8.0
APPENDIX_A_TDELTA2 = 1.0 / 8.0
COUNTEREXAMPLE_TDELTA2 = 8.0
COUNTEREXAMPLE_MODE_SHIFT = 100
DEFAULT_SEPARATION = 10.0
DEFAULT_C = 0.25
RESOLUTION_RTOL = 0.005
MAX_RESOLUTION = 1024
JOBS_ENV = "WAVEGUIDE_LAB_JOBS"
REGIMES = ("theorem", "appendixA", "counterexample")

_FLOAT_TOL = 1e-12


def _as_float(p) -> float:
    return float(Fraction(p)) if isinstance(p, (str, Fraction)) else float(p)


def _p_in_range(p: float) -> bool:
    return float(P_MIN) - _FLOAT_TOL <= p <= float(P_MAX) + _FLOAT_TOL


# ---------------------------------------------------------------------------
# exponent formula
# ---------------------------------------------------------------------------


def necessity_exponent(p) -> float:
    """``c(p) = 8 (p - 2) / (4 - p)``, evaluated in exact rational arithmetic.

    Floats are snapped to the nearest fraction with denominator at most 10^6,
    so ``12/7`` computed in floating point gives exactly ``-1``.
    """
    q = Fraction(p).limit_denominator(10**6) if not isinstance(p, Fraction) else p
    if q < P_MIN or q >= 4:
        raise RegimeError(f"necessity exponent needs 12/7 <= p < 4, got {p}")
    return float(Fraction(8) * (q - 2) / (4 - q))


ENDPOINT_NOTE = (
    "at p=2 the formula 8(p-2)/(4-p) gives 0, but the stated endpoint value is "
    "c(2)=1; the formula value is reported"
)


def necessity_metadata(p) -> dict:
    """The exponent plus, at ``p = 2``, the endpoint discrepancy flag."""
    out = {"necessity_exponent": necessity_exponent(p)}
    if Fraction(p).limit_denominator(10**6) == 2:
        out["necessity_endpoint_flag"] = ENDPOINT_NOTE
    return out


# ---------------------------------------------------------------------------
# ratio operations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RatioResult:
    lhs: float
    rhs: float
    ratio: float


def _check_transversal(F: FreqFunction, G: FreqFunction, delta: int, separation: float) -> None:
    if F.support is None or G.support is None:
        raise TransversalityError("both inputs need a support cube tag")
    for cube in (F.support, G.support):
        if cube.delta != delta:
            raise TransversalityError(f"support cube has delta={cube.delta}, expected {delta}")
    dist = cube_distance(F.support, G.support)
    if dist < separation * delta:
        raise TransversalityError(f"cube distance {dist:g} is below {separation:g} * delta = {separation * delta:g}")


def _check_common(delta: int, T: float, p: float) -> None:
    if not T > 0:
        raise RegimeError("T must be positive")
    if not p >= 1:
        raise RegimeError("p must be >= 1")
    make_cube(0, 0, delta)  # delta admissibility


def _lhs_rhs(F: FreqFunction, G: FreqFunction, delta: int, T: float, p: float, factor: float) -> RatioResult:
    lhs = bilinear_spacetime_norm(F, G, T, "sharp")
    rhs = factor * delta ** (2.0 - 4.0 / p) * lp_freq(F, p) * lp_freq(G, p)
    if not (lhs > 0 and rhs > 0 and math.isfinite(lhs) and math.isfinite(rhs)):
        raise NonConvergenceError(f"non-positive or non-finite sides lhs={lhs!r}, rhs={rhs!r}")
    return RatioResult(lhs, rhs, lhs / rhs)


def main_ratio(
    F: FreqFunction,
    G: FreqFunction,
    delta: int,
    T: float,
    p: float,
    separation: float = DEFAULT_SEPARATION,
    override: bool = False,
) -> RatioResult:
    """Left side, right side and ratio of the bilinear estimate at ``T delta <= 1/8``.

    ``override`` lifts the ``T delta`` guard (necessity experiments); supports
    must still be tagged and transversal.
    """
    _check_common(delta, T, p)
    _check_transversal(F, G, delta, separation)
    if T * delta > THEOREM_TDELTA * (1 + _FLOAT_TOL) and not override:
        raise RegimeError(f"T*delta = {T * delta:g} exceeds 1/8")
    return _lhs_rhs(F, G, delta, T, p, 1.0)


def strong_ratio(
    F: FreqFunction,
    G: FreqFunction,
    delta: int,
    T: float,
    p: float,
    separation: float = DEFAULT_SEPARATION,
    override: bool = False,
) -> RatioResult:
    """Short-time variant with the extra factor ``T^{1/2} delta``, valid for ``T delta^2 <= 1/8``."""
    _check_common(delta, T, p)
    _check_transversal(F, G, delta, separation)
    if T * delta**2 > APPENDIX_A_TDELTA2 * (1 + _FLOAT_TOL) and not override:
        raise RegimeError(f"T*delta^2 = {T * delta**2:g} exceeds 1/8")
    return _lhs_rhs(F, G, delta, T, p, math.sqrt(T) * delta)


# ---------------------------------------------------------------------------
# data builders
# ---------------------------------------------------------------------------


def cube_pair(delta: int, separation: float = DEFAULT_SEPARATION, axis: str = "xi") -> tuple[FreqCube, FreqCube]:
    """Two cubes of ``C_delta`` at distance ``ceil(separation) * delta``.

    ``axis="xi"`` separates along the continuous direction, placing the pair
    symmetrically about ``xi = 0``; ``axis="mode"`` separates along the modes.
    """
    step = math.ceil(separation) + 1
    first = -((step + 1) // 2)
    if axis == "xi":
        return make_cube(first, 0, delta), make_cube(first + step, 0, delta)
    if axis == "mode":
        return make_cube(0, first, delta), make_cube(0, first + step, delta)
    raise ValueError(f"axis must be 'xi' or 'mode', got {axis!r}")


def counterexample_cubes(delta: int) -> tuple[FreqCube, FreqCube]:
    return make_cube(0, 0, delta), make_cube(0, COUNTEREXAMPLE_MODE_SHIFT, delta)


def counterexample_width(T: float, c: float, nodes_per_unit: int) -> float:
    """``c T^{-1/2}`` rounded down to the lattice."""
    return math.floor(c / math.sqrt(T) * nodes_per_unit + 1e-9) / nodes_per_unit


def counterexample_pair(
    delta: int,
    T: float,
    c: float = DEFAULT_C,
    nodes_per_unit: Optional[int] = None,
    override: bool = False,
) -> tuple[FreqFunction, FreqFunction]:
    """Indicators of ``[0, c T^{-1/2}] x {0}`` and ``[0, c T^{-1/2}] x {100 delta}``.

    The interval end is rounded down to the lattice when it is not a node; the
    default lattice has at least 16 intervals across it.  Supports are tagged
    with ``[0, delta] x {0..delta}`` and ``[0, delta] x {100 delta..101 delta}``.
    ``override`` lifts the ``T >= 8 delta^-2`` requirement.
    """
    if not (T > 0 and c > 0):
        raise RegimeError("T and c must be positive")
    th1, th2 = counterexample_cubes(delta)
    ell = c / math.sqrt(T)
    if ell > delta * (1 + _FLOAT_TOL):
        raise RegimeError(f"c T^(-1/2) = {ell:g} exceeds delta = {delta}")
    if T * delta**2 < COUNTEREXAMPLE_TDELTA2 * (1 - _FLOAT_TOL) and not override:
        raise RegimeError(f"T*delta^2 = {T * delta**2:g} is below 8")
    if nodes_per_unit is None:
        nodes_per_unit = max(8, 1 << math.ceil(math.log2(16.0 / ell)))
    width = counterexample_width(T, c, nodes_per_unit)
    if width <= 0:
        raise RegimeError(f"interval c T^(-1/2) = {ell:g} is below the lattice spacing 1/{nodes_per_unit}")

    def one(xi, n):
        return np.ones(np.broadcast(xi, n).shape)

    shift = COUNTEREXAMPLE_MODE_SHIFT * delta
    F = sample_on_box(0.0, width, range(0, 1), one, nodes_per_unit, support=th1)
    G = sample_on_box(0.0, width, range(shift, shift + 1), one, nodes_per_unit, support=th2)
    return F, G


# ---------------------------------------------------------------------------
# configuration and report types
# ---------------------------------------------------------------------------

_RULE_RE = re.compile(r"^\s*([0-9.eE+\-/]+)\s*\*\s*delta\s*\^\s*\(?\s*([+\-]?[0-9.eE+\-/]+)\s*\)?\s*$")
T_RULE_PRESETS = {
    "theorem": (Fraction(1, 8), Fraction(-1)),
    "appendixA": (Fraction(1, 8), Fraction(-2)),
    "degraded": (Fraction(2), Fraction(-1)),
}


def parse_t_rule(rule: str) -> tuple[Fraction, Fraction]:
    """``'theorem'`` (1/(8 delta)), ``'appendixA'`` (delta^-2/8), ``'degraded'`` (2/delta)
    or an explicit ``'C*delta^k'``; returns ``(C, k)``."""
    if rule in T_RULE_PRESETS:
        return T_RULE_PRESETS[rule]
    m = _RULE_RE.match(rule)
    if not m:
        raise ValueError(f"T_rule {rule!r} is neither a preset nor of the form 'C*delta^k'")
    try:
        return Fraction(m.group(1)), Fraction(m.group(2))
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"T_rule {rule!r}: {exc}") from None


@dataclass(frozen=True)
class ProbeConfig:
    """Validated sweep description.

    ``T_rule`` maps ``delta`` to a single ``T``; ``T`` instead fixes the list of
    times used for every ``delta`` (required for the counterexample regime).
    ``override`` lifts the regime guards; it is recorded in the report.
    """

    regime: str = "theorem"
    p: float = float(P_MIN)
    deltas: tuple[int, ...] = ()
    T: Optional[tuple[float, ...]] = None
    T_rule: Optional[str] = None
    separation: float = DEFAULT_SEPARATION
    resolution: int = 8
    profile: str = "smooth"
    c: float = DEFAULT_C
    seed: int = 0
    axis: str = "xi"
    override: bool = False
    max_resolution: int = MAX_RESOLUTION
    fit: bool = True

    def __post_init__(self):
        object.__setattr__(self, "p", _as_float(self.p))
        object.__setattr__(self, "deltas", tuple(int(d) for d in self.deltas))
        if self.T is not None:
            ts = (self.T,) if isinstance(self.T, (int, float, str, Fraction)) else self.T
            object.__setattr__(self, "T", tuple(_as_float(t) for t in ts))
        if self.regime not in REGIMES:
            raise ValueError(f"key 'regime': must be one of {REGIMES}, got {self.regime!r}")
        if not _p_in_range(self.p) and not self.override:
            raise RegimeError(f"key 'p': {self.p:g} is outside [12/7, 2]")
        if self.resolution < 4 or self.max_resolution < self.resolution:
            raise ValueError("key 'resolution': must be >= 4 and not above max_resolution")
        if self.separation <= 0:
            raise ValueError("key 'separation': must be positive")
        if self.axis not in ("xi", "mode"):
            raise ValueError("key 'axis': must be 'xi' or 'mode'")
        if self.T is not None and self.T_rule is not None:
            raise ValueError("key 'T_rule': give either T or T_rule, not both")
        if self.regime == "counterexample" and self.T is None:
            raise ValueError("key 'T': the counterexample regime needs an explicit T list")
        if self.T_rule is not None:
            try:
                parse_t_rule(self.T_rule)
            except ValueError as exc:
                raise ValueError(f"key 'T_rule': {exc}") from None
        for d in self.deltas:
            try:
                make_cube(0, 0, d)
            except RegimeError as exc:
                raise RegimeError(f"key 'deltas': {exc}") from None
        for d, t in self.pairs():
            self._check_regime(d, t)

    def rule(self) -> tuple[Fraction, Fraction]:
        if self.T_rule is not None:
            return parse_t_rule(self.T_rule)
        return T_RULE_PRESETS["appendixA" if self.regime == "appendixA" else "theorem"]

    def times_for(self, delta: int) -> tuple[float, ...]:
        if self.T is not None:
            return self.T
        c, k = self.rule()
        return (float(c * Fraction(delta) ** k),)

    def pairs(self) -> list[tuple[int, float]]:
        return sorted({(d, t) for d in self.deltas for t in self.times_for(d)})

    def _check_regime(self, d: int, t: float) -> None:
        key = "T" if self.T is not None else "T_rule"
        if not t > 0:
            raise RegimeError(f"key {key!r}: T must be positive, got {t}")
        if self.override:
            return
        problem = None
        if self.regime == "theorem" and t * d > THEOREM_TDELTA * (1 + _FLOAT_TOL):
            problem = "T*delta > 1/8 in the theorem regime"
        elif self.regime == "appendixA" and t * d**2 > APPENDIX_A_TDELTA2 * (1 + _FLOAT_TOL):
            problem = "T*delta^2 > 1/8 in the appendixA regime"
        elif self.regime == "counterexample":
            if self.c / math.sqrt(t) > d * (1 + _FLOAT_TOL):
                key, problem = "c", "c*T^(-1/2) exceeds delta"
            elif t * d**2 < COUNTEREXAMPLE_TDELTA2 * (1 - _FLOAT_TOL):
                problem = "T*delta^2 < 8 in the counterexample regime"
        if problem:
            raise RegimeError(f"key {key!r}: delta={d}, T={t:g}: {problem}")

    def as_dict(self) -> dict:
        out = asdict(self)
        out["deltas"] = list(self.deltas)
        out["T"] = None if self.T is None else list(self.T)
        return out


@dataclass(frozen=True)
class ProbeRow:
    delta: int
    T: float
    p: float
    lhs: float
    rhs: float
    ratio: float
    resolution: int = 0

    def __post_init__(self):
        for name in ("lhs", "rhs", "ratio"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")
        if abs(self.ratio - self.lhs / self.rhs) > 1e-12 * self.ratio:
            raise ValueError("ratio differs from lhs/rhs")


@dataclass(frozen=True)
class RowFailure:
    delta: int
    T: float
    kind: str
    message: str


@dataclass(frozen=True)
class FitResult:
    x_field: str
    y_field: str
    exponent: float
    constant: float
    residual: float


@dataclass
class ProbeReport:
    regime: str
    rows: list[ProbeRow] = field(default_factory=list)
    fitted: Optional[FitResult] = None
    metadata: dict = field(default_factory=dict)
    failures: list[RowFailure] = field(default_factory=list)

    def ratios(self) -> np.ndarray:
        return np.array([r.ratio for r in self.rows])


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def _build_pair(config: ProbeConfig, delta: int, T: float, npu: int):
    if config.regime == "counterexample":
        return counterexample_pair(delta, T, config.c, npu, override=config.override)
    th1, th2 = cube_pair(delta, config.separation, config.axis)
    F = sample_on_cube(th1, config.profile, npu, seed=config.seed)
    G = sample_on_cube(th2, config.profile, npu, seed=config.seed + 1)
    return F, G


def _ratio_at(config: ProbeConfig, delta: int, T: float, npu: int) -> RatioResult:
    F, G = _build_pair(config, delta, T, npu)
    if config.regime == "appendixA":
        return strong_ratio(F, G, delta, T, config.p, config.separation, override=config.override)
    # the counterexample deliberately sits outside T delta <= 1/8
    lift = config.override or config.regime == "counterexample"
    return main_ratio(F, G, delta, T, config.p, config.separation, override=lift)


def _xi_span(config: ProbeConfig, delta: int, T: float) -> float:
    if config.regime == "counterexample":
        return config.c / math.sqrt(T)
    th1, th2 = cube_pair(delta, config.separation, config.axis)
    return max(th1.xi_interval[1], th2.xi_interval[1]) - min(th1.xi_interval[0], th2.xi_interval[0])


def _start_resolution(config: ProbeConfig, delta: int, T: float) -> int:
    # The lattice makes both waves periodic in x1 with period npu.  Start with
    # a period longer than the relative travel 4 pi T * (xi span) plus a packet
    # allowance, so refinement cannot settle on an aliased value.
    travel = 4.0 * math.pi * T * _xi_span(config, delta, T) + 2.0
    npu = max(config.resolution, 1 << math.ceil(math.log2(travel)))
    if config.regime == "counterexample":
        ell = config.c / math.sqrt(T)
        npu = max(npu, 1 << math.ceil(math.log2(16.0 / ell)))
    return min(npu, config.max_resolution)


def evaluate_row(config: ProbeConfig, delta: int, T: float) -> ProbeRow:
    """One sweep row with resolution doubled until the left side is stable."""
    npu = _start_resolution(config, delta, T)
    prev = _ratio_at(config, delta, T, npu)
    while True:
        if 2 * npu > config.max_resolution:
            raise NonConvergenceError(
                f"delta={delta}, T={T:g}: lattice refinement did not settle by {npu} nodes per unit"
            )
        npu *= 2
        cur = _ratio_at(config, delta, T, npu)
        log.debug("delta=%d T=%g npu=%d lhs=%.10g", delta, T, npu, cur.lhs)
        if abs(cur.lhs - prev.lhs) <= RESOLUTION_RTOL * cur.lhs:
            return ProbeRow(delta, T, config.p, cur.lhs, cur.rhs, cur.ratio, npu)
        prev = cur


def _row_task(args):
    config, delta, T = args
    try:
        return evaluate_row(config, delta, T)
    except WaveguideLabError as exc:
        return RowFailure(delta, T, type(exc).__name__, str(exc))


def default_jobs() -> int:
    raw = os.environ.get(JOBS_ENV)
    if raw is None:
        return 1
    try:
        jobs = int(raw)
    except ValueError:
        raise ValueError(f"{JOBS_ENV} must be an integer, got {raw!r}") from None
    return max(1, jobs)


FIELDS = ("delta", "T", "p", "lhs", "rhs", "ratio", "lhs_sq")


def _field(row: ProbeRow, name: str) -> float:
    if name not in FIELDS:
        raise ValueError(f"unknown field {name!r}; choose from {FIELDS}")
    if name == "lhs_sq":
        return row.lhs**2
    return float(getattr(row, name))


def fit_exponent(rows: Sequence[ProbeRow], x_field: str = "delta", y_field: str = "ratio") -> DecayFit:
    """Log-log least squares of ``y_field`` against ``x_field``."""
    return decay_fit([(_field(r, x_field), _field(r, y_field)) for r in rows])


def _default_fit_fields(config: ProbeConfig) -> tuple[str, str]:
    if config.regime == "counterexample":
        return "T", "lhs_sq"
    return "delta", "ratio"


def run_sweep(config: ProbeConfig, jobs: Optional[int] = None, timestamp: Optional[str] = None) -> ProbeReport:
    """Evaluate every ``(delta, T)`` pair of ``config``.

    Row failures are collected in ``report.failures`` and do not stop the
    sweep.  Rows are merged in ``(delta, T)`` order regardless of ``jobs``, so
    the report depends only on the configuration.
    """
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    tasks = [(config, d, t) for d, t in config.pairs()]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            results = list(pool.map(_row_task, tasks))
    else:
        results = [_row_task(t) for t in tasks]

    rows = sorted((r for r in results if isinstance(r, ProbeRow)), key=lambda r: (r.delta, r.T))
    failures = sorted((r for r in results if isinstance(r, RowFailure)), key=lambda r: (r.delta, r.T))
    metadata = {
        "config": config.as_dict(),
        "resolution": config.resolution,
        "resolution_rtol": RESOLUTION_RTOL,
        "seed": config.seed,
        "regime_override": config.override,
    }
    if config.regime == "counterexample":
        metadata["theorem_guard"] = "lifted: counterexample rows lie outside T*delta <= 1/8"

    metadata.update(necessity_metadata(config.p) if _p_in_range(config.p) else {})
    if timestamp is not None:
        metadata["timestamp"] = timestamp

    fitted = None
    if config.fit and len(rows) >= 3:
        xf, yf = _default_fit_fields(config)
        fit = fit_exponent(rows, xf, yf)
        fitted = FitResult(xf, yf, fit.exponent, fit.constant, fit.max_residual)
    return ProbeReport(config.regime, rows, fitted, metadata, failures)


def single_probe(config: ProbeConfig, delta: int, T: float) -> ProbeReport:
    """Report with the single row ``(delta, T)`` under ``config``'s regime."""
    return run_sweep(replace(config, deltas=(delta,), T=(T,), T_rule=None, fit=False), jobs=1)
