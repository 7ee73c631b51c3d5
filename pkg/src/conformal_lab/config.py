"""Default numerical tolerances and sampling plans.

Every routine takes these as keyword defaults, so callers (and the CLI
config files) can override any of them.
"""

import numpy as np

# quadrature
QUAD_TOL = 1e-8
QUAD_MAX_LEVELS = 4
MEAN_VALUE_TOL = 1e-5

# finite differences
REL_STEP = 1e-3
FD_ACCURACY = 4

# solver
NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 50
ARMIJO_FACTOR = 0.5
ARMIJO_MAX_BACKTRACKS = 20
SOLVER_ORDER = 4

# asymptotics
THETA_SAMPLES = 64
RICHARDSON_LEVELS = 6
# log(1/r) levels for limit extrapolation: geometric in L keeps the
# extrapolation to 1/L = 0 well conditioned
LIMIT_LOG_LEVELS = tuple(8.0 * 2.0**k for k in range(6))
RATE_RADII = tuple(2.0 ** (-k) for k in range(6, 19))
# cusp remainders carry relative O(1/L) corrections that bias the fitted
# log exponent at moderate L; fit deeper in (still well above rounding)
CUSP_RATE_RADII = tuple(2.0 ** (-k) for k in range(16, 73, 4))

# SK spot checks
SK_RANDOM_POINTS = 32
SK_CURVATURE_TOL = 1e-3
DEFAULT_SEED = 0


def limit_radii(outer=1.0, levels=LIMIT_LOG_LEVELS):
    """Radii r = outer * exp(-L) for the default L levels, decreasing."""
    return tuple(float(outer * np.exp(-L)) for L in levels)
