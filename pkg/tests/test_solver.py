from __future__ import annotations

import math

import numpy as np
import pytest

from conformal_lab import solver
from conformal_lab.errors import DomainError, NewtonDivergenceError, ParameterError
from conformal_lab.grid import GridField, apply_laplacian, build_grid
from conformal_lab.metrics import lambda_alpha_R
from conformal_lab.solver import CurvatureField, constant_curvature, solve_curvature


class TestGrid:
    def test_log_uniform_radii(self):
        g = build_grid(1e-3, 0.5, 9, 8)
        assert g.radii[0] == 1e-3 and g.radii[-1] == 0.5
        assert g.radii[4] == pytest.approx(math.sqrt(1e-3 * 0.5), rel=1e-12)
        assert g.points.shape == (9, 8)

    @pytest.mark.parametrize("args", [(1e-3, 0.5, 4, 8), (0.1, 0.1, 9, 8), (0.0, 1.0, 9, 8),
                                      (1e-3, 0.5, 9, 4)])
    def test_invalid(self, args):
        with pytest.raises(ParameterError):
            build_grid(*args)

    def test_refined_keeps_nodes(self):
        g = build_grid(1e-2, 1.0, 9, 8)
        f = g.refined()
        np.testing.assert_allclose(f.radii[::2], g.radii, rtol=1e-13)

    @pytest.mark.parametrize("u, expected", [
        (lambda z: np.abs(z) ** 2, 4.0),
        (lambda z: np.log(np.abs(z)), 0.0),
        (lambda z: np.real(z**3), 0.0),
    ])
    def test_laplacian_examples(self, u, expected):
        errs = []
        for n in (32, 64):
            g = build_grid(0.1, 1.0, n, n)
            errs.append(np.max(np.abs(apply_laplacian(g, g.sample(u)) - expected)))
        assert errs[1] < 0.1
        assert errs[1] <= errs[0] / 3.5 or errs[1] < 1e-10

    def test_laplacian_shape_mismatch(self):
        with pytest.raises(ParameterError):
            apply_laplacian(build_grid(0.1, 1, 9, 8), np.zeros((8, 8)))

    def test_grid_field_interpolation(self):
        g = build_grid(0.1, 1.0, 33, 64)
        f = GridField(g, g.sample(lambda z: np.log(np.abs(z))))
        # linear in log r: exact radially
        assert f(0.3 * np.exp(0.2j)) == pytest.approx(math.log(0.3), abs=1e-12)
        with pytest.raises(DomainError):
            f(0.05)


def _u_exact(alpha, R=1.0):
    return lambda z: np.log(lambda_alpha_R((alpha, R), z))


class TestSolve:
    def test_harmonic_one_step(self):
        g = build_grid(1e-2, 0.5, 16, 16)
        data = lambda z: np.real(z**2) + np.log(np.abs(z))  # noqa: E731
        sol = solve_curvature(constant_curvature(0.0), data, g)
        assert sol.newton_iters == 1
        assert np.max(np.abs(sol.u - g.sample(data))) < 1e-3

    def test_manufactured_solution(self):
        g = build_grid(1e-3, 0.5, 128, 64)
        sol = solve_curvature(constant_curvature(-4.0), _u_exact(0.5), g)
        assert sol.residual_norm < 1e-10
        assert np.max(np.abs(sol.u - g.sample(_u_exact(0.5)))) <= 1e-4

    @pytest.mark.parametrize("alpha", [0.0, 0.25, 0.5, 0.75, 1.0])
    def test_refinement_ratio(self, alpha):
        errs = []
        for nr, nt in ((32, 16), (64, 32)):
            g = build_grid(1e-3, 0.5, nr, nt)
            sol = solve_curvature(constant_curvature(-4.0), _u_exact(alpha), g)
            errs.append(np.max(np.abs(sol.u - g.sample(_u_exact(alpha)))))
        assert errs[0] / errs[1] >= 3.5

    def test_second_order_option(self):
        errs = []
        for nr, nt in ((32, 16), (64, 32)):
            g = build_grid(1e-3, 0.5, nr, nt)
            sol = solve_curvature(constant_curvature(-4.0), _u_exact(0.5), g, order=2)
            errs.append(np.max(np.abs(sol.u - g.sample(_u_exact(0.5)))))
        assert 3.5 <= errs[0] / errs[1] <= 4.5

    def test_variable_curvature_uniqueness(self):
        kappa = CurvatureField(lambda z: -4 * (1 + np.abs(z)), -4.0)
        g = build_grid(1e-3, 0.5, 48, 32)
        a = solve_curvature(kappa, (0.0, 0.0), g)
        assert a.residual_norm < 1e-10
        for guess in (np.full(g.shape, 1.0), np.full(g.shape, -2.0)):
            b = solve_curvature(kappa, (0.0, 0.0), g, initial_guess=guess)
            assert np.max(np.abs(a.u - b.u)) < 1e-9

    def test_subharmonic_and_residual_contract(self):
        g = build_grid(1e-3, 0.5, 48, 32)
        sol = solve_curvature(constant_curvature(-4.0), _u_exact(0.3), g, tol=1e-9)
        assert sol.residual_norm < 1e-9
        assert sol.trace[-1] == sol.residual_norm
        assert solver.subharmonicity_margin(sol) > 0

    def test_max_iter_zero(self):
        g = build_grid(1e-3, 0.5, 16, 16)
        with pytest.raises(NewtonDivergenceError) as exc:
            solve_curvature(constant_curvature(-4.0), _u_exact(0.5), g, max_iter=0)
        assert len(exc.value.trace) >= 1

    def test_positive_curvature_rejected(self):
        with pytest.raises(ParameterError):
            CurvatureField(lambda z: np.ones(np.shape(z)), 1.0)
        bad = CurvatureField(lambda z: np.where(np.abs(z) > 0.2, 1.0, -1.0), -1.0)
        with pytest.raises(ParameterError):
            solve_curvature(bad, (0.0, 0.0), build_grid(1e-2, 0.5, 16, 16))

    def test_boundary_specs(self):
        g = build_grid(1e-2, 0.5, 16, 16)
        with pytest.raises(ParameterError):
            solve_curvature(constant_curvature(-4), 3.0, g)
        with pytest.raises(ParameterError):
            solve_curvature(constant_curvature(-4), (np.nan, 0.0), g)
        with pytest.raises(ParameterError):
            solve_curvature(constant_curvature(-4), (0, 0), g, order=3)


class TestRemainders:
    def test_corner_closed_form(self):
        g = build_grid(1e-6, 0.5, 32, 8)
        rem = solver.extract_remainder(_u_exact(0.5), 0.5, g)
        np.testing.assert_allclose(rem.values, -np.log(2 * (1 - np.abs(g.points))), atol=1e-13)
        assert rem.values[0, 0] == pytest.approx(math.log(0.5), abs=1e-5)

    def test_cusp_closed_form(self):
        R = 0.8
        g = build_grid(1e-8, 0.5, 32, 8)
        rem = solver.extract_remainder(_u_exact(1.0, R), 1.0, g)
        L = np.log(1 / np.abs(g.points))
        np.testing.assert_allclose(rem.values, -math.log(2) + np.log(L / (L + math.log(R))), atol=1e-12)

    def test_pure_normal_form(self):
        g = build_grid(1e-3, 0.5, 16, 8)
        rem = solver.extract_remainder(lambda z: -0.3 * np.log(np.abs(z)), 0.3, g)
        assert np.max(np.abs(rem.values)) < 1e-14

    def test_roundtrip(self):
        g = build_grid(1e-3, 0.5, 16, 8)
        sol = solve_curvature(constant_curvature(-4.0), _u_exact(1.0), g)
        rem = solver.extract_remainder(sol, 1.0)
        np.testing.assert_allclose(solver.synthesize(rem), sol.u, atol=1e-13)

    def test_cusp_domain(self):
        g = build_grid(0.5, 1.5, 16, 8)
        with pytest.raises(DomainError):
            solver.extract_remainder(np.zeros(g.shape), 1.0, g)
        with pytest.raises(ParameterError):
            solver.extract_remainder(np.zeros(g.shape), 1.5, g)
        with pytest.raises(ParameterError):
            solver.extract_remainder(np.zeros(g.shape), 0.5)

    def test_cusp_defect_profile_bounded(self):
        g = build_grid(1e-6, 0.5, 96, 16)
        sol = solve_curvature(constant_curvature(-4.0), _u_exact(1.0), g)
        radii, q = solver.cusp_defect_profile(solver.extract_remainder(sol, 1.0), constant_curvature(-4.0))
        assert np.all(np.isfinite(q)) and np.max(q) < 2.0
        with pytest.raises(ParameterError):
            solver.cusp_defect_profile(solver.extract_remainder(sol, 0.5), constant_curvature(-4.0))
