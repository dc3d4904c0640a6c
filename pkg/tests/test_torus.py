"""
Tests for the torus discretization: grids, stencils, phase fields and the linearization.
"""

import math

import numpy as np
import pytest

from dhym_lab.errors import InputError
from dhym_lab.phase_core import HALF_PI, HermitianForm
from dhym_lab.torus import (
    TorusProblem,
    class_phase,
    discrete_hessian,
    field_spectra,
    global_coefficient_bound,
    grid_expression,
    linearized_apply,
    linearized_operator,
    min_cone_slack,
    omega_field,
    recenter,
    theta_field,
)


def rotated(values, angle=0.3):
    c, s = math.cos(angle), math.sin(angle)
    q = np.array([[c, -s], [s, c]])
    return q @ np.diag(values) @ q.T


class TestTorusProblem:
    """Validation and grid helpers."""

    def test_defaults(self, plane_problem):
        """Test the default problem."""
        assert plane_problem.shape == (16, 16)
        assert plane_problem.spacing == 1.0 / 16
        assert plane_problem.lower == 0.0
        assert np.allclose(plane_problem.alpha_form.entries, np.eye(2))

    @pytest.mark.parametrize("n,N", [(0, 16), (4, 16), (1, 15), (1, 6)])
    def test_invalid_grid(self, n, N):
        """Test that invalid grid sizes are refused."""
        with pytest.raises(InputError):
            TorusProblem(n=n, N=N, B=np.eye(max(n, 1)))

    def test_b_shape_and_symmetry(self):
        """Test the shape and symmetry of the background form."""
        with pytest.raises(InputError):
            TorusProblem(n=2, N=8, B=np.eye(3))
        with pytest.raises(InputError, match="symmetric"):
            TorusProblem(n=2, N=8, B=np.array([[1.0, 1.0], [0.0, 1.0]]))

    def test_alpha_must_be_positive(self):
        """Test that a non positive alpha is refused."""
        with pytest.raises(InputError):
            TorusProblem(n=2, N=8, B=np.eye(2), alpha=HermitianForm.diagonal([1.0, -1.0]))

    def test_scalar_b(self):
        """Test a scalar background form."""
        assert TorusProblem(n=1, N=8, B=2.0).B.shape == (1, 1)

    def test_coordinates(self, plane_problem):
        """Test the grid coordinates."""
        x0, x1 = plane_problem.coordinates()
        assert x0[3, 0] == pytest.approx(3 / 16)
        assert x1[0, 5] == pytest.approx(5 / 16)

    def test_grid_field_forms(self, line_problem):
        """Test the accepted forms of a grid field."""
        assert np.all(line_problem.grid_field(1.5) == 1.5)
        assert np.all(line_problem.grid_field(None, default=2.0) == 2.0)
        values = line_problem.grid_field("sin(2*pi*x0)")
        assert values[16] == pytest.approx(1.0)
        with pytest.raises(InputError, match="shape"):
            line_problem.grid_field(np.zeros(10))

    def test_h_field(self):
        """Test the potential field."""
        prob = TorusProblem(n=1, N=8, B=np.eye(1), h_spec="0.1*cos(2*pi*x0)")
        assert prob.h_field()[0] == pytest.approx(0.1)
        with pytest.raises(InputError):
            TorusProblem(n=1, N=8, B=np.eye(1)).h_field()

    def test_with_grid(self, plane_problem):
        """Test changing the grid size."""
        finer = plane_problem.with_grid(32)
        assert finer.shape == (32, 32)
        assert np.array_equal(finer.B, plane_problem.B)


class TestGridExpression:
    """The restricted expression evaluator."""

    def test_arithmetic(self, plane_problem):
        """Test arithmetic in grid expressions."""
        coords = plane_problem.coordinates()
        values = grid_expression("2**2 - x0*x1 + -abs(-1)", coords)
        assert values[4, 8] == pytest.approx(3.0 - 0.25 * 0.5)

    @pytest.mark.parametrize(
        "expr", ["__import__('os')", "x0.real", "open('f')", "x9", "[1, 2]", "lambda: 1", "cos(x0, key=1)"]
    )
    def test_rejects(self, line_problem, expr):
        """Test that unsafe expressions are rejected."""
        with pytest.raises(InputError):
            grid_expression(expr, line_problem.coordinates())

    def test_syntax_error(self, line_problem):
        """Test that a syntax error is reported."""
        with pytest.raises(InputError, match="parse"):
            grid_expression("cos(", line_problem.coordinates())

    def test_non_finite(self, line_problem):
        """Test that non finite values are rejected."""
        with pytest.raises(InputError, match="finite"):
            grid_expression("1/x0", line_problem.coordinates())

    def test_constant_broadcasts(self, plane_problem):
        """Test that a constant expression fills the grid."""
        values = grid_expression("pi/4", plane_problem.coordinates())
        assert values.shape == (16, 16)
        assert np.allclose(values, math.pi / 4, rtol=0.0, atol=1e-15)

    def test_functions(self, line_problem):
        """Test the functions available in expressions."""
        x = line_problem.coordinates()[0]
        values = grid_expression("arctan(x0) + sqrt(1 + x0**2) - exp(-x0)", line_problem.coordinates())
        assert np.allclose(values, np.arctan(x) + np.sqrt(1 + x**2) - np.exp(-x), atol=1e-14)


class TestDiscreteHessian:
    """Periodic central differences."""

    def test_zero(self):
        """Test the Hessian of zero."""
        assert np.all(discrete_hessian(np.zeros((8, 8))) == 0.0)

    def test_second_order_pure(self):
        """Test second order accuracy for pure derivatives."""
        errors = []
        for N in (32, 64):
            x = np.arange(N) / N
            u = np.cos(2 * np.pi * x)
            exact = -4 * np.pi**2 * np.cos(2 * np.pi * x)
            errors.append(np.max(np.abs(discrete_hessian(u)[:, 0, 0] - exact)))
        assert errors[0] / errors[1] == pytest.approx(4.0, rel=0.02)

    def test_second_order_mixed(self):
        """Test second order accuracy for mixed derivatives."""
        errors = []
        for N in (32, 64):
            x0, x1 = np.meshgrid(np.arange(N) / N, np.arange(N) / N, indexing="ij")
            u = np.cos(2 * np.pi * x0) * np.cos(2 * np.pi * x1)
            exact = 4 * np.pi**2 * np.sin(2 * np.pi * x0) * np.sin(2 * np.pi * x1)
            hess = discrete_hessian(u)
            assert np.array_equal(hess[..., 0, 1], hess[..., 1, 0])
            errors.append(np.max(np.abs(hess[..., 0, 1] - exact)))
        assert errors[0] / errors[1] == pytest.approx(4.0, rel=0.05)


class TestPhaseFields:
    """omega, spectra and Theta on the grid."""

    def test_constant_identity(self):
        """Test the phase of the identity field."""
        prob = TorusProblem(n=2, N=8, B=np.eye(2))
        assert np.allclose(theta_field(np.zeros(prob.shape), prob), HALF_PI)

    def test_reciprocal_eigenvalues(self):
        """Test the phase of reciprocal eigenvalues."""
        prob = TorusProblem(n=2, N=8, B=rotated([3.0, 1.0 / 3.0]))
        assert np.allclose(theta_field(np.zeros(prob.shape), prob), HALF_PI)

    def test_spectra_descending(self, plane_problem, rng):
        """Test that field spectra are sorted descending."""
        u = 0.01 * rng.normal(size=plane_problem.shape)
        lam = field_spectra(u, plane_problem)
        assert lam.shape == (16, 16, 2)
        assert np.all(lam[..., 0] >= lam[..., 1])

    def test_alpha_background(self):
        """Test spectra relative to a nontrivial alpha."""
        alpha = HermitianForm.diagonal([2.0, 4.0])
        prob = TorusProblem(n=2, N=8, B=np.diag([2.0, 4.0]), alpha=alpha)
        assert np.allclose(field_spectra(np.zeros(prob.shape), prob), 1.0)

    def test_omega_shape_checked(self, plane_problem):
        """Test that a field of the wrong shape is refused."""
        with pytest.raises(InputError):
            omega_field(np.zeros((8, 8)), plane_problem)

    def test_cone_slack(self, plane_problem):
        """Test the cone slack field."""
        assert min_cone_slack(np.zeros(plane_problem.shape), plane_problem) == pytest.approx(2 * math.atan(2.0))

    def test_recenter(self, rng):
        """Test recentering a field to zero mean."""
        assert abs(recenter(rng.normal(size=(8, 8))).mean()) < 1e-15


class TestClassPhase:
    """Grid quadrature of the class charge."""

    def test_line(self, line_problem):
        """Test the class phase on a line."""
        phase = class_phase(np.zeros(line_problem.shape), line_problem)
        assert phase.theta_hat == pytest.approx(math.pi / 4)
        assert phase.charge == pytest.approx(1 + 1j)

    def test_plane_branch(self, plane_problem):
        """Test the class phase branch on a plane."""
        phase = class_phase(np.zeros(plane_problem.shape), plane_problem)
        assert phase.theta_hat == pytest.approx(2 * math.atan(2.0))
        assert phase.charge == pytest.approx(-3 + 4j)

    def test_potential_does_not_move_class(self, line_problem):
        """Test that the potential leaves the class phase unchanged."""
        u = line_problem.grid_field("0.05*cos(2*pi*x0)")
        assert class_phase(u, line_problem).theta_hat == pytest.approx(math.pi / 4, abs=1e-12)


class TestLinearization:
    """Delta_eta at a potential."""

    def test_flat_is_quarter_laplacian(self, rng):
        """Test the linearization at a flat point."""
        prob = TorusProblem(n=2, N=16, B=np.zeros((2, 2)))
        w = rng.normal(size=prob.shape)
        hess = discrete_hessian(w)
        expected = 0.25 * (hess[..., 0, 0] + hess[..., 1, 1])
        assert np.allclose(linearized_apply(np.zeros(prob.shape), w, prob), expected)

    def test_constants_in_kernel(self, plane_problem, rng):
        """Test that constants lie in the kernel."""
        u = 0.01 * rng.normal(size=plane_problem.shape)
        out = linearized_apply(u, np.full(plane_problem.shape, 3.0), plane_problem)
        assert np.max(np.abs(out)) < 1e-9

    @pytest.mark.parametrize("eps", [1e-3, 1e-4])
    def test_directional_derivative(self, eps):
        """Test the linearization against a finite difference."""
        prob = TorusProblem(n=2, N=16, B=rotated([2.0, 0.5]), alpha=HermitianForm.parse("rows:2,0.5;0.5,1"))
        u = prob.grid_field("0.05*cos(2*pi*x0)*sin(2*pi*x1)")
        w = prob.grid_field("0.01*sin(2*pi*(x0 + 2*x1)) + 0.005*cos(2*pi*x1)")
        fd = (theta_field(u + eps * w, prob) - theta_field(u - eps * w, prob)) / (2 * eps)
        exact = linearized_apply(u, w, prob)
        scale = np.max(np.abs(exact))
        assert np.max(np.abs(fd - exact)) <= 50 * eps**2 * scale

    def test_coefficients_bounded_by_alpha_inverse(self, plane_problem, rng):
        """Test that the coefficients are bounded by alpha inverse."""
        u = 0.02 * rng.normal(size=plane_problem.shape)
        op = linearized_operator(u, plane_problem)
        assert op.spectral_radius_bound() <= global_coefficient_bound(plane_problem) + 1e-9
        eig = np.linalg.eigvalsh(np.eye(2) - op.coefficients)
        assert np.all(eig >= -1e-12)

    def test_mean_coefficients(self, plane_problem):
        """Test the mean coefficients."""
        op = linearized_operator(np.zeros(plane_problem.shape), plane_problem)
        assert np.allclose(op.mean_coefficients(), np.eye(2) / 5.0)
