import itertools
import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from waveguide_lab.errors import RegimeError
from waveguide_lab.grid import (
    BumpSpec,
    FreqFunction,
    PhysFunction,
    PhysGrid,
    bump_hat_value,
    bump_value,
    cube_cutoff,
    cube_distance,
    cube_indicator_cutoff,
    gaussian_amplitude,
    lattice_window,
    make_cube,
    sample_on_cube,
    weight_phi,
)


# --- cubes -----------------------------------------------------------------


def test_make_cube_examples():
    c = make_cube(0, 0, 4)
    assert c.xi_interval == (0, 4)
    assert list(c.modes) == [0, 1, 2, 3, 4]
    c = make_cube(0, 100, 4)
    assert list(c.modes) == [400, 401, 402, 403, 404]
    c = make_cube(1, -1, 8)
    assert c.xi_interval == (8, 16)
    assert list(c.modes) == list(range(-8, 1))


@pytest.mark.parametrize("delta", [0, 1, 2, 3, 6, 12, -4])
def test_make_cube_rejects_bad_delta(delta):
    with pytest.raises(RegimeError):
        make_cube(0, 0, delta)


@pytest.mark.parametrize("delta", [4, 8, 16, 64])
def test_cube_measure_is_exact(delta):
    c = make_cube(3, -2, delta)
    assert c.measure == delta * (delta + 1)
    assert len(c.modes) == delta + 1
    # the indicator sample integrates to the same number
    F = sample_on_cube(make_cube(0, 0, delta), "constant", 8)
    assert F.integrate().real == pytest.approx(delta * (delta + 1), rel=1e-12)


def test_cube_distance_examples():
    a = make_cube(0, 0, 4)
    assert cube_distance(a, a) == 0
    assert cube_distance(a, make_cube(0, 100, 4)) == 396
    assert cube_distance(a, make_cube(3, 0, 4)) == 8
    # adjacent closed cubes touch
    assert cube_distance(a, make_cube(1, 1, 4)) == 0


def _brute_distance(a, b):
    # corner/edge minimisation over the closed point sets
    xa = np.linspace(*a.xi_interval, 4 * a.delta + 1)
    xb = np.linspace(*b.xi_interval, 4 * b.delta + 1)
    gap_x = np.min(np.abs(xa[:, None] - xb[None, :]))
    gap_n = np.min(np.abs(a.modes[:, None] - b.modes[None, :]))
    return math.hypot(gap_x, gap_n)


def test_cube_distance_properties(rng):
    cubes = [make_cube(int(rng.integers(-6, 6)), int(rng.integers(-6, 6)), int(rng.choice([4, 8]))) for _ in range(12)]
    for a, b in itertools.product(cubes, repeat=2):
        d = cube_distance(a, b)
        assert d == cube_distance(b, a)
        assert d == pytest.approx(_brute_distance(a, b), abs=1e-12)
    for a, b, c in itertools.product(cubes[:8], repeat=3):
        # set distance is not a metric; the valid bound adds the middle set's diameter
        diam = math.hypot(b.delta, b.delta)
        assert cube_distance(a, c) <= cube_distance(a, b) + diam + cube_distance(b, c) + 1e-12


def test_set_distance_violates_plain_triangle_inequality():
    a, b, c = make_cube(0, 0, 4), make_cube(1, 0, 4), make_cube(2, 0, 4)
    assert cube_distance(a, c) > cube_distance(a, b) + cube_distance(b, c)


# --- FreqFunction ------------------------------------------------------------


def test_freq_function_weights_and_nodes():
    F = FreqFunction(8, -16, 3, np.ones((4, 41)))
    assert np.all(np.diff(F.xi_nodes) > 0)
    assert F.xi_nodes[0] == -2.0 and F.xi_nodes[-1] == 3.0
    assert math.isclose(F.xi_weights.sum(), 5.0, rel_tol=1e-12)
    assert list(F.modes) == [3, 4, 5, 6]
    assert F.integrate() == pytest.approx(4 * 5.0)


def test_freq_function_validation():
    with pytest.raises(ValueError):
        FreqFunction(8, 0, 0, np.array([[1.0, np.nan]]))
    with pytest.raises(ValueError):
        FreqFunction(8, 0, 0, np.ones((2, 1)))
    theta = make_cube(0, 0, 4)
    with pytest.raises(ValueError):
        # nonzero value at xi = -1/8, outside the tagged cube
        FreqFunction(8, -1, 0, np.ones((5, 34)), support=theta)


def test_freq_function_is_read_only():
    F = sample_on_cube(make_cube(0, 0, 4), "constant", 8)
    with pytest.raises(ValueError):
        F.values[0, 0] = 2.0


def test_sample_on_cube_examples():
    theta = make_cube(2, 1, 4)
    const = sample_on_cube(theta, "constant", 8)
    assert const.support == theta
    assert const.nodes_per_unit == 8
    assert const.integrate().real == pytest.approx(theta.measure, rel=1e-12)
    zero = sample_on_cube(theta, "zero", 8)
    assert not np.any(zero.values)
    ramp = sample_on_cube(theta, lambda xi, n: np.exp(2j * np.pi * xi) + 0 * n, 8)
    l2 = lambda F: np.sum(F.xi_weights * np.abs(F.values) ** 2)
    assert l2(ramp) == pytest.approx(l2(const), rel=1e-12)


def test_sample_on_cube_rejects():
    theta = make_cube(0, 0, 4)
    with pytest.raises(ValueError):
        sample_on_cube(theta, "constant", 2)
    with pytest.raises(ValueError):
        sample_on_cube(theta, lambda xi, n: np.full(np.broadcast(xi, n).shape, np.inf), 8)


def test_random_profile_is_seeded():
    theta = make_cube(0, 0, 4)
    a = sample_on_cube(theta, "random", 8, seed=5)
    b = sample_on_cube(theta, "random", 8, seed=5)
    c = sample_on_cube(theta, "random", 8, seed=6)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_smooth_profile_stays_inside_cube():
    theta = make_cube(-1, 0, 8)
    F = sample_on_cube(theta, "smooth", 16)
    # vanishes on the cube boundary, equals 1 well inside
    assert np.all(F.values[:, 0] == 0) and np.all(F.values[:, -1] == 0)
    assert np.all(F.values[0] == 0) and np.all(F.values[-1] == 0)
    assert F.values[4, F.n_nodes // 2] == 1.0


def test_lattice_window():
    assert lattice_window(-1.0, 2.0, 8) == (-8, 25)
    with pytest.raises(ValueError):
        lattice_window(0.0, 1.0 / 3.0, 8)


def test_phys_grid():
    g = PhysGrid(4.0, 81, 9)
    assert np.allclose(np.diff(g.x1_nodes), 0.1)
    assert np.allclose(np.diff(g.x2_nodes), 1.0 / 9.0)
    assert g.max_mode == 4
    u = PhysFunction.from_callable(g, lambda x1, x2: np.exp(-np.pi * x1**2) + 0 * x2)
    assert u.values.shape == (81, 9)
    assert u.x2_count == 9


# --- bumps -------------------------------------------------------------------


def test_weight_phi_lower_bounds():
    phi = weight_phi()
    s = np.linspace(-1, 1, 1000)
    assert np.all(bump_value(phi, s) >= 1.0 - 1e-12)
    s = np.linspace(-8, 8, 1000)
    assert np.all(bump_value(phi, s) >= 0.0)
    assert bump_value(phi, 0.0) >= 1.0


def test_weight_phi_hat_support_and_consistency():
    phi = weight_phi()
    assert abs(bump_hat_value(phi, 2.0)) <= 1e-10
    assert bump_hat_value(phi, 1.0) == 0.0
    assert np.all(bump_hat_value(phi, np.array([1.01, 1.5, 3.0, -1.2])) == 0.0)
    # phi_hat(0) is the integral of phi; compare against a direct quadrature
    s = np.linspace(-60, 60, 240001)
    integral = trapezoid(bump_value(phi, s), s)
    assert bump_hat_value(phi, 0.0) == pytest.approx(integral, rel=1e-6)
    # phi_hat(tau) = int phi(s) cos(2 pi s tau) ds at an interior point
    tau = 0.37
    direct = trapezoid(bump_value(phi, s) * np.cos(2 * np.pi * s * tau), s)
    assert bump_hat_value(phi, tau) == pytest.approx(direct, rel=1e-5, abs=1e-8)


def test_weight_phi_hat_mass_outside_unit_interval():
    phi = weight_phi()
    t = np.linspace(-3, 3, 60001)
    vals = np.abs(bump_hat_value(phi, t))
    outside = vals[np.abs(t) > 1].sum()
    assert outside <= 1e-10 * vals.sum()


def test_cube_cutoff_plateau_and_support():
    theta = make_cube(1, 0, 8)
    chi = cube_indicator_cutoff(theta)
    F = sample_on_cube(make_cube(1, 0, 8), "constant", 16)
    xi, n = np.meshgrid(F.xi_nodes, F.modes)
    assert np.all(chi(xi, n) == 1.0)
    grid_xi = np.arange(-40, 240) / 16.0
    grid_n = np.arange(-5, 14)
    X, N = np.meshgrid(grid_xi, grid_n)
    vals = chi(X, N)
    # 1.2-dilate of [8, 16] x [0, 8] about its centre
    outside = (np.abs(X - 12) > 4.8) | (np.abs(N - 4) > 4.8)
    assert np.all(vals[outside] == 0.0)
    assert np.all((vals >= 0) & (vals <= 1))


def test_cube_cutoff_is_smooth():
    spec = cube_cutoff(0.0, 1.0)
    s = np.linspace(1.0, 1.1, 2001)
    v = bump_value(spec, s)
    assert np.all(np.diff(v) <= 1e-15)
    assert np.max(np.abs(np.diff(v, 2))) < 1e-3


def test_gaussian_amplitude():
    k = gaussian_amplitude()
    lo, hi = k.support()
    assert (lo, hi) == (-1.0, 1.0)
    assert bump_value(k, 0.0) == 1.0
    assert bump_value(k, 1.0) == 0.0 and bump_value(k, -1.2) == 0.0
    # hat close to the Gaussian transform w exp(-pi w^2 s^2) where the cut is negligible
    for s in (0.0, 1.0, 2.0, 4.0):
        assert bump_hat_value(k, s) == pytest.approx(0.25 * math.exp(-math.pi * (0.25 * s) ** 2), rel=1e-9)
    off = gaussian_amplitude(center=0.3)
    assert isinstance(bump_hat_value(off, 1.0), complex)


def test_bumpspec_validation():
    with pytest.raises(ValueError):
        BumpSpec("nope")
    with pytest.raises(ValueError):
        BumpSpec("weight_phi", center=1.0)
    with pytest.raises(ValueError):
        BumpSpec("cube_cutoff", width=-1)
    with pytest.raises(ValueError):
        BumpSpec("generic_amplitude", normalization=0.0)
