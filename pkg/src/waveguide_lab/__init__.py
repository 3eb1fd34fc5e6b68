"""Numerical laboratory for bilinear Schrodinger estimates on the waveguide R x T."""

from .errors import (
    DerivativeOracleError,
    LatticeMismatchError,
    NonConvergenceError,
    QuadratureFailure,
    RegimeError,
    TransversalityError,
    WaveguideLabError,
    WindowTooSmallError,
)
from .grid import (
    BumpSpec,
    FreqCube,
    FreqFunction,
    PhysFunction,
    PhysGrid,
    bump_hat_value,
    bump_value,
    cube_distance,
    make_cube,
    sample_on_cube,
)
from .transform import forward_transform, freq_convolution, inverse_transform
from .propagator import QuadraticFormInput, bilinear_spacetime_norm, evolve, quadratic_form, quadruple_oracle
from .norms import lp_freq, lp_phys, xpq_norm
from .expsum import (
    PhaseSpec,
    decay_fit,
    derivative_sum,
    exponential_sum,
    oscillatory_integral,
    poisson_side,
)
from .probe import (
    ProbeConfig,
    ProbeReport,
    counterexample_pair,
    fit_exponent,
    main_ratio,
    necessity_exponent,
    run_sweep,
    strong_ratio,
)

__version__ = "0.1.0"
