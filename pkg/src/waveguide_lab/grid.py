"""Frequency cubes, lattice-sampled functions on R x Z and R x T, and smooth bumps.

Frequency space is R x Z with the measure ``sum_n int F(xi, n) dxi``.  Every
:class:`FreqFunction` lives on a uniform lattice ``xi = k / nodes_per_unit`` and
carries composite trapezoid weights in the continuous variable.  Keeping the
lattice shared between functions makes node sums and differences land exactly on
nodes, which the convolution and the four-wave sum rely on.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Union

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import RegimeError
from .quadrature import _legendre, gauss_panels, smoothstep, trapezoid_weights

Profile = Union[str, Callable[[np.ndarray, np.ndarray], np.ndarray]]


def _is_power_of_two(k: int) -> bool:
    return k > 0 and (k & (k - 1)) == 0


# ---------------------------------------------------------------------------
# cubes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FreqCube:
    """The cube ``[m*delta, (m+1)*delta] x {n*delta, ..., (n+1)*delta}``."""

    m: int
    n: int
    delta: int

    def __post_init__(self):
        for name in ("m", "n", "delta"):
            if int(getattr(self, name)) != getattr(self, name):
                raise ValueError(f"{name} must be an integer")
        if not _is_power_of_two(int(self.delta)) or self.delta < 4:
            raise RegimeError(f"delta must be a power of two >= 4, got {self.delta}")

    @property
    def xi_interval(self) -> tuple[int, int]:
        return self.m * self.delta, (self.m + 1) * self.delta

    @property
    def mode_range(self) -> tuple[int, int]:
        """Inclusive first and last integer mode."""
        return self.n * self.delta, (self.n + 1) * self.delta

    @property
    def modes(self) -> np.ndarray:
        lo, hi = self.mode_range
        return np.arange(lo, hi + 1)

    @property
    def measure(self) -> int:
        return self.delta * (self.delta + 1)

    def contains(self, xi, n) -> np.ndarray:
        lo, hi = self.xi_interval
        a, b = self.mode_range
        xi = np.asarray(xi)
        n = np.asarray(n)
        return (xi >= lo) & (xi <= hi) & (n >= a) & (n <= b)


def make_cube(m: int, n: int, delta: int) -> FreqCube:
    """Build a cube of the family C_delta, rejecting non-admissible ``delta``."""
    return FreqCube(int(m), int(n), int(delta))


def cube_distance(a: FreqCube, b: FreqCube) -> float:
    """Euclidean distance between two cubes viewed as closed subsets of R^2."""
    a0, a1 = a.xi_interval
    b0, b1 = b.xi_interval
    gap_xi = max(0, b0 - a1, a0 - b1)
    c0, c1 = a.mode_range
    d0, d1 = b.mode_range
    gap_n = max(0, d0 - c1, c0 - d1)
    return float(np.hypot(gap_xi, gap_n))


# ---------------------------------------------------------------------------
# sampled functions
# ---------------------------------------------------------------------------


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FreqFunction:
    """Complex samples on a window ``start/npu, ..., (start+count-1)/npu`` x modes.

    ``values`` has shape ``(n_modes, n_nodes)``; row ``j`` belongs to mode
    ``first_mode + j``.
    """

    nodes_per_unit: int
    start: int
    first_mode: int
    values: np.ndarray
    support: Optional[FreqCube] = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.ndim != 2 or vals.shape[1] < 2 or vals.shape[0] < 1:
            raise ValueError("values must be 2-d with >= 1 mode and >= 2 nodes")
        if not np.all(np.isfinite(vals)):
            raise ValueError("values must be finite")
        if self.nodes_per_unit < 1:
            raise ValueError("nodes_per_unit must be positive")
        object.__setattr__(self, "values", _frozen(vals))
        if self.support is not None:
            inside = self.support.contains(self.xi_nodes[None, :], self.modes[:, None])
            if np.any(vals[~inside] != 0):
                raise ValueError("values do not vanish outside the tagged support cube")

    @property
    def spacing(self) -> float:
        return 1.0 / self.nodes_per_unit

    @property
    def n_nodes(self) -> int:
        return self.values.shape[1]

    @property
    def n_modes(self) -> int:
        return self.values.shape[0]

    @property
    def xi_nodes(self) -> np.ndarray:
        return (self.start + np.arange(self.n_nodes)) / self.nodes_per_unit

    @property
    def xi_weights(self) -> np.ndarray:
        return trapezoid_weights(self.n_nodes, self.spacing)

    @property
    def modes(self) -> np.ndarray:
        return self.first_mode + np.arange(self.n_modes)

    @property
    def masses(self) -> np.ndarray:
        """Discrete measure ``weight * value`` at every sample."""
        return self.values * self.xi_weights[None, :]

    def integrate(self) -> complex:
        return complex(np.sum(self.masses))

    def with_values(self, values: np.ndarray, support: Optional[FreqCube] = "keep") -> "FreqFunction":
        sup = self.support if support == "keep" else support
        return FreqFunction(self.nodes_per_unit, self.start, self.first_mode, values, sup)

    def scaled(self, c: complex) -> "FreqFunction":
        return self.with_values(self.values * c)

    def box(self) -> tuple[float, float, int, int]:
        """(xi_min, xi_max, mode_min, mode_max) of the sampled window."""
        xi = self.xi_nodes
        return float(xi[0]), float(xi[-1]), int(self.first_mode), int(self.first_mode + self.n_modes - 1)


@dataclass(frozen=True)
class PhysGrid:
    """Uniform grid: ``n_x1`` points on ``[-L, L]`` times ``n_x2`` points on [0, 1)."""

    half_width: float
    n_x1: int
    n_x2: int

    def __post_init__(self):
        if self.half_width <= 0 or self.n_x1 < 2 or self.n_x2 < 1:
            raise ValueError("invalid physical grid")

    @property
    def x1_nodes(self) -> np.ndarray:
        return np.linspace(-self.half_width, self.half_width, self.n_x1)

    @property
    def x1_spacing(self) -> float:
        return 2.0 * self.half_width / (self.n_x1 - 1)

    @property
    def x1_weights(self) -> np.ndarray:
        return trapezoid_weights(self.n_x1, self.x1_spacing)

    @property
    def x2_nodes(self) -> np.ndarray:
        return np.arange(self.n_x2) / self.n_x2

    @property
    def max_mode(self) -> int:
        """Largest |n| sampled without aliasing."""
        return (self.n_x2 - 1) // 2

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x1_nodes, self.x2_nodes, indexing="ij")


@dataclass(frozen=True)
class PhysFunction:
    """Samples of a function on R x T; ``values`` has shape ``(n_x1, n_x2)``."""

    grid: PhysGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (self.grid.n_x1, self.grid.n_x2):
            raise ValueError(f"values shape {vals.shape} does not match grid")
        if not np.all(np.isfinite(vals)):
            raise ValueError("values must be finite")
        object.__setattr__(self, "values", _frozen(vals))

    @property
    def x1_nodes(self) -> np.ndarray:
        return self.grid.x1_nodes

    @property
    def x2_count(self) -> int:
        return self.grid.n_x2

    @classmethod
    def from_callable(cls, grid: PhysGrid, func) -> "PhysFunction":
        x1, x2 = grid.mesh()
        return cls(grid, func(x1, x2))


# ---------------------------------------------------------------------------
# bumps
# ---------------------------------------------------------------------------

_BUMP_KINDS = ("weight_phi", "cube_cutoff", "generic_amplitude")

# generic_amplitude: Gaussian of scale `width`, cut off smoothly between 3.5 and 4 widths
_GAUSS_PLATEAU = 3.5
_GAUSS_EDGE = 4.0
# cube_cutoff transition length as a fraction of the plateau length
_CUTOFF_TRANSITION = 0.1


def _compact_bump(r: np.ndarray) -> np.ndarray:
    """exp(1 - 1/(1 - r^2)) on |r| < 1, zero elsewhere."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = np.abs(r) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
    return out


class _WeightTables:
    """Numerical data behind the weight function phi = A * g**2.

    ``g`` is the inverse Fourier transform of the even bump ``b`` supported in
    [-1/2, 1/2], so ``phi_hat = A * (b * b)`` is supported in [-1, 1].
    """

    order = 400
    table_points = 4097

    def __init__(self):
        x, w = _legendre(self.order)
        self.tau = 0.5 * x
        self.tau_w = 0.5 * w
        self.b = _compact_bump(2.0 * self.tau)
        g1 = float(self.g(np.array([1.0]))[0])
        self.default_normalization = 1.0 / g1**2
        grid = np.linspace(0.0, 1.0, self.table_points)
        auto = np.array([self._autocorrelation(t) for t in grid])
        auto[-1] = 0.0
        self._auto_spline = CubicSpline(grid, auto)

    def g(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float).ravel()
        out = np.empty_like(s)
        chunk = 4096
        for i in range(0, s.size, chunk):
            block = s[i : i + chunk]
            out[i : i + chunk] = np.cos(2.0 * np.pi * np.outer(block, self.tau)) @ (self.tau_w * self.b)
        return out

    def _autocorrelation(self, t: float) -> float:
        lo, hi = t - 0.5, 0.5
        if hi <= lo:
            return 0.0
        x, w = _legendre(200)
        sig = 0.5 * (hi + lo) + 0.5 * (hi - lo) * x
        vals = _compact_bump(2.0 * sig) * _compact_bump(2.0 * (t - sig))
        return float(0.5 * (hi - lo) * np.dot(w, vals))

    def autocorrelation(self, t: np.ndarray) -> np.ndarray:
        t = np.abs(np.asarray(t, dtype=float))
        out = np.zeros_like(t)
        inside = t < 1.0
        out[inside] = self._auto_spline(t[inside])
        return out


@lru_cache(maxsize=1)
def _weight_tables() -> _WeightTables:
    return _WeightTables()


@dataclass(frozen=True)
class BumpSpec:
    """Constructive description of one of the smooth cutoffs.

    kind
        ``weight_phi``: the time weight phi, nonnegative, >= 1 on [-1, 1], with
        Fourier transform supported in [-1/width, 1/width]; centre must be 0.
        ``cube_cutoff``: 1 on ``[center - width/2, center + width/2]``, smooth
        transition of length ``width/10``, 0 outside the 1.2-dilate.
        ``generic_amplitude``: Gaussian ``exp(-pi ((s - center)/width)^2)``
        smoothly cut to zero at ``4 * width`` from the centre.
    normalization
        Overall factor; ``None`` selects the default (the minimal factor making
        phi >= 1 on [-1, 1] for ``weight_phi``, 1 otherwise).
    """

    kind: str
    center: float = 0.0
    width: float = 1.0
    normalization: Optional[float] = None

    def __post_init__(self):
        if self.kind not in _BUMP_KINDS:
            raise ValueError(f"unknown bump kind {self.kind!r}")
        if not self.width > 0:
            raise ValueError("width must be positive")
        if self.kind == "weight_phi":
            if self.center != 0.0 or self.width < 1.0:
                raise ValueError("weight_phi needs center 0 and width >= 1")
        if self.normalization is None:
            default = _weight_tables().default_normalization if self.kind == "weight_phi" else 1.0
            object.__setattr__(self, "normalization", default)
        if not self.normalization > 0:
            raise ValueError("normalization must be positive")

    def support(self) -> Optional[tuple[float, float]]:
        """Closed interval outside which the bump vanishes (None if not compact)."""
        if self.kind == "weight_phi":
            return None
        if self.kind == "cube_cutoff":
            half = 0.5 * self.width * (1.0 + 2.0 * _CUTOFF_TRANSITION)
        else:
            half = _GAUSS_EDGE * self.width
        return self.center - half, self.center + half


def weight_phi() -> BumpSpec:
    return BumpSpec("weight_phi")


def cube_cutoff(lo: float, hi: float) -> BumpSpec:
    """Cutoff equal to 1 on ``[lo, hi]``."""
    return BumpSpec("cube_cutoff", center=0.5 * (lo + hi), width=hi - lo)


def gaussian_amplitude(center: float = 0.0, width: float = 0.25, normalization: float = 1.0) -> BumpSpec:
    return BumpSpec("generic_amplitude", center=center, width=width, normalization=normalization)


def bump_value(spec: BumpSpec, s):
    """Evaluate the bump at ``s`` (scalar or array)."""
    scalar = np.ndim(s) == 0
    s = np.asarray(s, dtype=float)
    if spec.kind == "weight_phi":
        g = _weight_tables().g(s / spec.width).reshape(s.shape)
        out = spec.normalization * g**2
    elif spec.kind == "cube_cutoff":
        excess = np.abs(s - spec.center) - 0.5 * spec.width
        out = spec.normalization * (1.0 - smoothstep(excess / (_CUTOFF_TRANSITION * spec.width)))
    else:
        r = np.abs(s - spec.center) / spec.width
        cut = 1.0 - smoothstep((r - _GAUSS_PLATEAU) / (_GAUSS_EDGE - _GAUSS_PLATEAU))
        out = spec.normalization * np.exp(-np.pi * r**2) * cut
    return float(out) if scalar else out


def _numeric_hat(spec: BumpSpec, s: np.ndarray) -> np.ndarray:
    lo, hi = spec.support()
    span = hi - lo
    order = 16
    panels = int(np.ceil(4 + span * (np.max(np.abs(s)) if s.size else 0.0)))
    x, w = gauss_panels(lo, hi, panels, order)
    vals = w * bump_value(spec, x)
    out = np.empty(s.size, dtype=complex)
    flat = s.ravel()
    for i in range(0, flat.size, 2048):
        block = flat[i : i + 2048]
        out[i : i + 2048] = np.exp(-2j * np.pi * np.outer(block, x)) @ vals
    return out.reshape(s.shape)


def bump_hat_value(spec: BumpSpec, s):
    """Fourier transform ``int bump(x) exp(-2 pi i x s) dx``.

    Real for the centred (symmetric) bumps, complex otherwise.
    """
    scalar = np.ndim(s) == 0
    s = np.asarray(s, dtype=float)
    if spec.kind == "weight_phi":
        out = spec.normalization * spec.width * _weight_tables().autocorrelation(spec.width * s)
    else:
        out = _numeric_hat(spec, s)
        if spec.center == 0.0:
            out = out.real
    if scalar:
        return out.item()
    return out


def cube_indicator_cutoff(theta: FreqCube) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Smooth cutoff chi_theta(xi, n): 1 on theta, 0 outside its 1.2-dilate."""
    xs = cube_cutoff(*theta.xi_interval)
    ms = cube_cutoff(*theta.mode_range)
    return lambda xi, n: bump_value(xs, xi) * bump_value(ms, n)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def _inset_cutoff(theta: FreqCube) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    # plateau shrunk so that the 1.2-dilate is theta itself
    xlo, xhi = theta.xi_interval
    mlo, mhi = theta.mode_range
    shrink = 1.0 / (1.0 + 2.0 * _CUTOFF_TRANSITION)
    xs = BumpSpec("cube_cutoff", 0.5 * (xlo + xhi), (xhi - xlo) * shrink)
    ms = BumpSpec("cube_cutoff", 0.5 * (mlo + mhi), (mhi - mlo) * shrink)
    return lambda xi, n: bump_value(xs, xi) * bump_value(ms, n)


def named_profile(name: str, theta: FreqCube, seed: Optional[int] = None):
    """Built-in amplitude rules.

    ``indicator`` / ``constant``: 1 on the cube.  ``zero``: 0.  ``smooth``: a
    C-infinity cutoff equal to 1 on the middle of the cube and vanishing on its
    boundary.  ``random``: ``smooth`` times a seeded random smooth complex
    modulation (per-mode amplitude and phase, low-order trigonometric ripple in xi).
    """
    if name in ("indicator", "constant"):
        return lambda xi, n: np.ones(np.broadcast(xi, n).shape)
    if name == "zero":
        return lambda xi, n: np.zeros(np.broadcast(xi, n).shape)
    if name == "smooth":
        return _inset_cutoff(theta)
    if name == "random":
        rng = np.random.default_rng(seed)
        modes = theta.modes
        amp = rng.uniform(0.5, 1.5, modes.size)
        phase = rng.uniform(0.0, 1.0, modes.size)
        ripple = rng.normal(size=(3, 2)) * 0.2
        chi = _inset_cutoff(theta)
        lo = theta.xi_interval[0]

        def profile(xi, n):
            idx = np.asarray(n) - modes[0]
            u = (np.asarray(xi) - lo) / theta.delta
            mod = 1.0 + sum(
                ripple[k, 0] * np.cos(2 * np.pi * (k + 1) * u) + ripple[k, 1] * np.sin(2 * np.pi * (k + 1) * u)
                for k in range(3)
            )
            return chi(xi, n) * amp[idx] * np.exp(2j * np.pi * phase[idx]) * mod

        return profile
    raise ValueError(f"unknown profile {name!r}")


def lattice_window(lo: float, hi: float, nodes_per_unit: int) -> tuple[int, int]:
    """(start, count) of the lattice nodes covering ``[lo, hi]`` exactly."""
    a = lo * nodes_per_unit
    b = hi * nodes_per_unit
    if abs(a - round(a)) > 1e-9 or abs(b - round(b)) > 1e-9:
        raise ValueError(f"window [{lo}, {hi}] does not fall on the 1/{nodes_per_unit} lattice")
    start, stop = int(round(a)), int(round(b))
    return start, stop - start + 1


def sample_on_cube(
    theta: FreqCube,
    profile: Profile = "indicator",
    nodes_per_unit: int = 8,
    seed: Optional[int] = None,
) -> FreqFunction:
    """Sample an amplitude rule on the closed cube ``theta``.

    ``profile`` is either a built-in name (see :func:`named_profile`) or a
    vectorised callable ``(xi, n) -> values``.
    """
    if nodes_per_unit < 4:
        raise ValueError("nodes_per_unit must be >= 4")
    if isinstance(profile, str):
        profile = named_profile(profile, theta, seed)
    start, count = lattice_window(*theta.xi_interval, nodes_per_unit)
    xi = (start + np.arange(count)) / nodes_per_unit
    modes = theta.modes
    vals = np.asarray(profile(xi[None, :], modes[:, None]), dtype=complex)
    vals = np.broadcast_to(vals, (modes.size, count))
    if not np.all(np.isfinite(vals)):
        raise ValueError("profile produced non-finite values")
    return FreqFunction(nodes_per_unit, start, int(modes[0]), vals, support=theta)


def sample_on_box(
    xi_lo: float,
    xi_hi: float,
    modes: range,
    profile: Callable[[np.ndarray, np.ndarray], np.ndarray],
    nodes_per_unit: int,
    support: Optional[FreqCube] = None,
) -> FreqFunction:
    """Sample a callable on an arbitrary lattice box (no cube tag required)."""
    start, count = lattice_window(xi_lo, xi_hi, nodes_per_unit)
    xi = (start + np.arange(count)) / nodes_per_unit
    m = np.arange(modes.start, modes.stop)
    vals = np.broadcast_to(np.asarray(profile(xi[None, :], m[:, None]), dtype=complex), (m.size, count))
    return FreqFunction(nodes_per_unit, start, int(m[0]), vals, support=support)
