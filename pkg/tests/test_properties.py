"""Property-based checks of invariants that hold for every input."""

from __future__ import annotations

import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from conformal_lab import asymptotics as asy
from conformal_lab import bounds, metrics, potential, solver

finite = dict(allow_nan=False, allow_infinity=False)
points = st.complex_numbers(max_magnitude=10, **finite)


@given(st.integers(1, 6), st.data(), points, points)
def test_kernel_bound(n, data, z, zeta):
    j2 = data.draw(st.integers(0, n))
    d = abs(z - zeta)
    if d < 1e-3:
        return
    val = potential.log_kernel_deriv((n - j2, j2), z, zeta)
    assert abs(val) <= math.factorial(n) / d**n * (1 + 1e-12)


@given(st.floats(-3, 0.999), st.floats(0.1, 10), st.floats(1e-6, 0.999), st.floats(0, 2 * math.pi))
def test_lambda_forms_agree(alpha, R, frac, theta):
    z = R * frac * np.exp(1j * theta)
    a = metrics.lambda_alpha_R((alpha, R), z, form="rational")
    b = metrics.lambda_alpha_R((alpha, R), z, form="sinh")
    assert math.isclose(a, b, rel_tol=1e-12)


@given(st.floats(-3, 1), st.floats(0.1, 5), st.floats(1.0, 4.0), st.floats(1e-6, 0.999))
def test_lambda_monotone_in_R(alpha, R1, ratio, frac):
    z = R1 * frac
    assert metrics.lambda_alpha_R((alpha, R1 * ratio), z) <= metrics.lambda_alpha_R((alpha, R1), z) * (1 + 1e-13)


@given(st.floats(-10, 10), st.integers(1, 10))
def test_binom_pascal(tau, j):
    lhs = bounds.binom_general(tau, j)
    rhs = bounds.binom_general(tau - 1, j) + bounds.binom_general(tau - 1, j - 1)
    assert math.isclose(lhs, rhs, rel_tol=1e-11, abs_tol=1e-11)


@given(st.floats(0.05, 15))
def test_gamma_recurrence(x):
    assert math.isclose(bounds.gamma_fn(x + 1), x * bounds.gamma_fn(x), rel_tol=1e-12)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.1, 10))
def test_fit_rate_exact(p, q, C):
    r = 2.0 ** -np.arange(6, 19)
    g = C * r**p * np.log(1 / r) ** q
    fit = asy.fit_rate(list(zip(r, g)))
    assert abs(fit.p - p) < 1e-8 and abs(fit.q - q) < 1e-7
    assert fit.residual < 1e-10


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
def test_richardson_polynomial_in_inverse_log(g0, c1, c2):
    r = np.exp(-np.arange(4, 13, dtype=float))
    L = np.log(1 / r)
    est = asy.richardson_limit(list(zip(r, g0 + c1 / L + c2 / L**2)))
    assert abs(est.value - g0) < 1e-6 * (1 + abs(c1) + abs(c2))


@settings(max_examples=25)
@given(st.floats(-2, 1), st.integers(8, 20))
def test_remainder_roundtrip(alpha, nr):
    grid = solver.build_grid(1e-4, 0.9, nr, 8)
    rng = np.random.default_rng(nr)
    u = rng.normal(size=grid.shape)
    rem = solver.extract_remainder(u, alpha, grid)
    assert np.allclose(solver.synthesize(rem), u, atol=1e-12)


@given(st.floats(0.05, 1.0), st.floats(0.01, 0.95), st.floats(0, 2 * math.pi))
def test_scaled_hyperbolic_passes_domination(c, rad, theta):
    z = rad * np.exp(1j * theta)
    sigma = metrics.hyperbolic_disk_metric().scaled(c)
    assert sigma(z) <= metrics.hyperbolic_disk_density(z)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0, 2 * math.pi), st.floats(0.0, 1.0))
def test_curvature_minus_four(rad, theta, alpha):
    z = rad * np.exp(1j * theta)
    m = metrics.lambda_alpha_R_metric(alpha)
    assert abs(metrics.numeric_curvature(m, z) + 4) < 1e-5
