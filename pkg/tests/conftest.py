import numpy as np
import pytest

from waveguide_lab.grid import FreqFunction


class Packets:
    """Sum of modulated Gaussians with closed-form transform.

    For g(x) = exp(-pi (x-b)^2 / s^2) exp(2 pi i c x):
    g_hat(xi) = s exp(-pi s^2 (xi - c)^2) exp(-2 pi i (xi - c) b).
    """

    def __init__(self, rng, modes=(-2, -1, 0, 1, 2), per_mode=2):
        self.terms = []
        for n in modes:
            for _ in range(per_mode):
                amp = rng.normal() + 1j * rng.normal()
                self.terms.append((n, amp, rng.uniform(-0.5, 0.5), rng.uniform(0.8, 1.2), rng.uniform(-1.5, 1.5)))

    def __call__(self, x1, x2):
        out = np.zeros(np.broadcast(x1, x2).shape, dtype=complex)
        for n, a, b, s, c in self.terms:
            out += a * np.exp(-np.pi * (x1 - b) ** 2 / s**2 + 2j * np.pi * c * x1 + 2j * np.pi * n * x2)
        return out

    def hat(self, xi, n):
        out = np.zeros(np.broadcast(xi, n).shape, dtype=complex)
        for m, a, b, s, c in self.terms:
            out += np.where(n == m, a * s * np.exp(-np.pi * s**2 * (xi - c) ** 2 - 2j * np.pi * (xi - c) * b), 0)
        return out


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def random_freq_function(rng, npu=8, n_modes=5, n_nodes=33, start=None, first_mode=None):
    start = int(rng.integers(-40, 40)) if start is None else start
    first_mode = int(rng.integers(-10, 10)) if first_mode is None else first_mode
    vals = rng.normal(size=(n_modes, n_nodes)) + 1j * rng.normal(size=(n_modes, n_nodes))
    return FreqFunction(npu, start, first_mode, vals)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
