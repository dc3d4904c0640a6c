"""
Tests for the pointwise phase algebra.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dhym_lab.errors import InputError, NotPositiveDefiniteError
from dhym_lab.phase_core import (
    HALF_PI,
    ConeLevel,
    HermitianForm,
    Membership,
    Spectrum,
    asymptotic_phase,
    boundary_solve,
    cone_membership,
    elementary_symmetric,
    eta_metric,
    f0,
    f0_matrix,
    relative_eigenvalues,
    theta,
    wang_yuan_report,
)
from dhym_lab.selftest import level_spectrum

finite = st.floats(min_value=-50.0, max_value=50.0, allow_nan=False)


class TestHermitianForm:
    """Construction, validation and the command line notation."""

    def test_parse_forms(self):
        """Test the identity notations."""
        assert np.allclose(HermitianForm.parse("I2").entries, np.eye(2))
        assert np.allclose(HermitianForm.parse("I", 3).entries, np.eye(3))
        assert np.allclose(HermitianForm.parse("0", 2).entries, np.zeros((2, 2)))
        assert np.allclose(HermitianForm.parse("diag:3,-1").entries, np.diag([3.0, -1.0]))
        assert np.allclose(HermitianForm.parse("rows:2,1;1,1").entries, [[2.0, 1.0], [1.0, 1.0]])

    @pytest.mark.parametrize("text", ["I", "eye", "diag:a,b", "rows:1,2;3"])
    def test_parse_rejects(self, text):
        """Test that malformed notations are rejected."""
        with pytest.raises(InputError):
            HermitianForm.parse(text)

    def test_not_hermitian_rejected(self):
        """Test that a non-Hermitian matrix is rejected."""
        with pytest.raises(InputError, match="not Hermitian"):
            HermitianForm(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_entries_are_read_only(self):
        """Test that stored entries cannot be modified."""
        form = HermitianForm.identity(2)
        with pytest.raises(ValueError):
            form.entries[0, 0] = 5.0

    def test_not_positive_definite_names_eigenvalue(self):
        """Test that the error carries the smallest eigenvalue."""
        with pytest.raises(NotPositiveDefiniteError) as exc:
            HermitianForm.metric(np.diag([1.0, -1.0]))
        assert exc.value.smallest_eigenvalue == pytest.approx(-1.0)
        assert "smallest eigenvalue" in str(exc.value)


class TestRelativeEigenvalues:
    """Generalized eigenvalues of omega with respect to alpha."""

    def test_identity_background(self):
        """Test eigenvalues against the identity."""
        lam = relative_eigenvalues(HermitianForm.identity(2), HermitianForm.diagonal([3.0, -1.0]))
        assert lam.values == pytest.approx((3.0, -1.0))

    def test_scaling(self):
        """Test that scaling alpha scales the eigenvalues inversely."""
        lam = relative_eigenvalues(HermitianForm.diagonal([2.0, 2.0]), HermitianForm.diagonal([2.0, 2.0]))
        assert lam.values == pytest.approx((1.0, 1.0))

    def test_omega_equal_alpha(self):
        """Test that omega = alpha gives ones."""
        alpha = HermitianForm.parse("rows:2,1;1,1")
        assert relative_eigenvalues(alpha, alpha).values == pytest.approx((1.0, 1.0))

    def test_matches_dense_oracle(self, rng):
        """Test against eigenvalues of alpha^{-1} omega."""
        a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        alpha = HermitianForm(a @ a.conj().T + np.eye(3))
        w = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        omega = HermitianForm(w + w.conj().T)
        oracle = np.sort(np.linalg.eigvals(np.linalg.solve(alpha.entries, omega.entries)).real)[::-1]
        assert relative_eigenvalues(alpha, omega).values == pytest.approx(tuple(oracle), abs=1e-10)

    def test_congruence_invariance(self, rng):
        """Test that a common change of basis leaves the eigenvalues unchanged."""
        for n in (2, 3, 4):
            a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
            alpha = a @ a.conj().T + np.eye(n)
            w = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
            omega = w + w.conj().T
            p = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)) + 3.0 * np.eye(n)
            moved_alpha = p.conj().T @ alpha @ p
            moved_omega = p.conj().T @ omega @ p
            before = relative_eigenvalues(HermitianForm(alpha), HermitianForm(omega)).as_array()
            after = relative_eigenvalues(
                HermitianForm(0.5 * (moved_alpha + moved_alpha.conj().T)),
                HermitianForm(0.5 * (moved_omega + moved_omega.conj().T)),
            ).as_array()
            assert np.allclose(after, before, rtol=1e-9, atol=1e-9)

    def test_non_positive_alpha_rejected(self):
        """Test that a singular alpha is refused."""
        with pytest.raises(NotPositiveDefiniteError):
            relative_eigenvalues(HermitianForm.diagonal([1.0, 0.0]), HermitianForm.identity(2))

    def test_dimension_mismatch(self):
        """Test that mismatched sizes are refused."""
        with pytest.raises(InputError):
            relative_eigenvalues(HermitianForm.identity(2), HermitianForm.identity(3))


class TestTheta:
    """Phase evaluation and its elementary properties."""

    def test_zero(self):
        """Test the phase of zero."""
        assert theta((0.0, 0.0)) == 0.0

    def test_three_quarters(self):
        """Test theta(1, 1, 1) = 3*pi/4."""
        assert theta((1.0, 1.0, 1.0)) == pytest.approx(3 * math.pi / 4, abs=1e-15)

    def test_closed_form(self):
        """Test a spectrum with a closed form phase."""
        assert theta(Spectrum.of([math.sqrt(3), 1.0, -1.0 / math.sqrt(3)])) == pytest.approx(5 * math.pi / 12)

    def test_asymptotic_phase(self):
        """Test the scaled limit counts signs."""
        assert asymptotic_phase((2.0, 0.0, -1.0)) == 0.0
        assert asymptotic_phase((2.0, 1.0)) == pytest.approx(math.pi)

    @given(st.lists(finite, min_size=1, max_size=6))
    def test_oddness(self, values):
        """Test theta(-lambda) = -theta(lambda)."""
        assert theta([-v for v in values]) == pytest.approx(-theta(values), abs=1e-14)

    @given(st.lists(finite, min_size=1, max_size=6), st.lists(st.floats(0.0, 10.0), min_size=6, max_size=6))
    def test_monotone(self, values, bumps):
        """Test that raising eigenvalues never lowers the phase."""
        bigger = [v + b for v, b in zip(values, bumps)]
        assert theta(values) <= theta(bigger) + 1e-14

    def test_weyl_monotonicity(self, rng):
        """Test that adding a positive matrix never lowers the phase."""
        for _ in range(50):
            a = rng.normal(size=(3, 3))
            a = a + a.T
            p = rng.normal(size=(3, 3))
            b = a + p @ p.T
            identity = HermitianForm.identity(3)
            assert theta(relative_eigenvalues(identity, HermitianForm(a))) <= theta(
                relative_eigenvalues(identity, HermitianForm(b))
            ) + 1e-12


class TestEtaMetric:
    """eta = alpha + omega alpha^{-1} omega."""

    def test_zero_omega(self):
        """Test eta = alpha when omega vanishes."""
        assert np.allclose(eta_metric(HermitianForm.identity(2), HermitianForm.parse("0", 2)).entries, np.eye(2))

    def test_diagonal(self):
        """Test eta on diagonal forms."""
        eta = eta_metric(HermitianForm.identity(2), HermitianForm.diagonal([2.0, -1.0]))
        assert np.allclose(eta.entries, np.diag([5.0, 2.0]))

    def test_determinant_identity(self, rng):
        """Test det(eta) = det(alpha) |det(I + i alpha^{-1} omega)|^2."""
        a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        alpha = HermitianForm(a @ a.conj().T + np.eye(3))
        w = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        omega = HermitianForm(w + w.conj().T)
        eta = eta_metric(alpha, omega)
        lam = relative_eigenvalues(alpha, omega).as_array()
        det = np.linalg.det(np.linalg.solve(alpha.entries, eta.entries)).real
        assert det == pytest.approx(float(np.prod(1.0 + lam**2)), rel=1e-10)
        assert eta.smallest_eigenvalue() > 0.0

    @given(arrays(np.float64, (3, 3), elements=st.floats(-10.0, 10.0)))
    @settings(max_examples=50)
    def test_dominates_alpha(self, a):
        """Test that eta - alpha is positive semidefinite."""
        omega = HermitianForm(a + a.T)
        eta = eta_metric(HermitianForm.identity(3), omega)
        assert np.min(np.linalg.eigvalsh(eta.entries)) >= 1.0 - 1e-9 * (1.0 + np.max(np.abs(a)) ** 2)


class TestConeMembership:
    """Position relative to the level set and to the cone."""

    def test_boundary(self):
        """Test a point on the level set."""
        report = cone_membership((1.0, 1.0), ConeLevel(2, HALF_PI))
        assert report.status is Membership.BOUNDARY
        assert report.slack == pytest.approx(0.0, abs=1e-15)

    def test_inside(self):
        """Test a point inside the level set with its slack."""
        report = cone_membership((2.0, 2.0), ConeLevel(2, HALF_PI))
        assert report.status is Membership.INSIDE
        assert report.slack == pytest.approx(2 * math.atan(2.0) - HALF_PI)
        assert report.slack == pytest.approx(0.6435, abs=1e-4)

    def test_antisymmetric_is_on_gamma_boundary(self):
        """Test that (1, -1) sits on the boundary of the cone."""
        report = cone_membership((1.0, -1.0), ConeLevel(2, 0.0))
        assert report.status is Membership.BOUNDARY
        assert report.gamma_status is Membership.BOUNDARY

    def test_gamma_by_scaling(self):
        """Test cone membership reached only through scaling."""
        # theta at s=1 is below (n-2)pi/2 but the scaled limit is 3pi/2
        report = cone_membership((0.1, 0.1, 0.1), ConeLevel(3, 2.0))
        assert report.theta < HALF_PI
        assert report.status is Membership.OUTSIDE
        assert report.gamma_status is Membership.INSIDE

    def test_outside_gamma(self):
        """Test a spectrum outside the cone."""
        assert cone_membership((-1.0, -2.0), ConeLevel(2, 0.5)).gamma_status is Membership.OUTSIDE

    def test_zero_spectrum(self):
        """Test that zero is on the cone boundary."""
        assert cone_membership((0.0, 0.0), ConeLevel(2, 0.0)).gamma_status is Membership.BOUNDARY

    def test_threshold_limit_approached_from_below(self):
        """Test that a scaled limit on the threshold approached from below is outside the cone."""
        # the scaled limit equals pi/2 but theta(s*lambda) stays below it
        report = cone_membership((1.0, 1.0, -3.0), ConeLevel(3, 1.0))
        assert report.gamma_slack == pytest.approx(0.0, abs=1e-15)
        assert report.gamma_status is Membership.OUTSIDE

    def test_threshold_limit_approached_from_above(self):
        """Test that a scaled limit on the threshold approached from above is inside the cone."""
        report = cone_membership((1.0, 1.0, -0.25), ConeLevel(3, 1.0))
        assert report.theta < HALF_PI
        assert report.gamma_status is Membership.INSIDE
        assert theta((1e6, 1e6, -0.25e6)) > HALF_PI

    def test_length_mismatch(self):
        """Test that a spectrum of the wrong length is refused."""
        with pytest.raises(InputError):
            cone_membership((1.0,), ConeLevel(2, 0.0))


class TestBoundarySolve:
    """Completing a prefix to a point of the level set."""

    @pytest.mark.parametrize(
        "prefix,sigma,expected",
        [((1.0,), HALF_PI, 1.0), ((2.0,), 0.0, -2.0), ((3.0,), HALF_PI, 1.0 / 3.0)],
    )
    def test_examples(self, prefix, sigma, expected):
        """Test boundary roots with known values."""
        assert boundary_solve(prefix, ConeLevel(2, sigma)) == pytest.approx(expected, abs=1e-12)

    def test_lands_on_level(self):
        """Test that the completed spectrum lies on the level set."""
        level = ConeLevel(3, 2.0)
        last = boundary_solve((4.0, 2.0), level)
        assert theta((4.0, 2.0, last)) == pytest.approx(2.0, abs=1e-13)

    def test_no_root(self):
        """Test that an unreachable level is reported."""
        with pytest.raises(InputError, match="no root"):
            boundary_solve((0.0,), ConeLevel(2, 2.0))

    def test_order_violation(self):
        """Test that an unsorted prefix is refused."""
        with pytest.raises(InputError, match="descending"):
            boundary_solve((0.5,), ConeLevel(2, 1.5))


class TestWangYuan:
    """Arithmetic properties on supercritical level sets."""

    def test_antisymmetric(self):
        """Test the arithmetic report for (1, -1) at sigma = 0."""
        report = wang_yuan_report((1.0, -1.0), 0.0)
        assert report.holds
        assert report.dominance_margin == 0.0
        assert report.sum_margin == 0.0
        assert report.symmetric_functions == (0.0,)

    def test_three_and_a_third(self):
        """Test the report for a three dimensional spectrum."""
        report = wang_yuan_report(Spectrum.of([3.0, 1.0 / 3.0]), HALF_PI)
        assert report.holds
        assert report.symmetric_functions[0] == pytest.approx(10.0 / 3.0)

    @pytest.mark.parametrize("t", [2.0, 5.0, 10.0])
    def test_boundary_samples(self, t):
        """Test sampled points of the level set."""
        level = ConeLevel(3, HALF_PI)
        last = boundary_solve((t, 1.0), level)
        report = wang_yuan_report((t, 1.0, last), HALF_PI)
        assert report.holds, report.to_dict()

    def test_off_level_rejected(self):
        """Test that a spectrum off the level set is refused."""
        with pytest.raises(InputError, match="level set"):
            wang_yuan_report((2.0, 2.0), HALF_PI)

    def test_needs_two_dimensions(self):
        """Test that n = 1 is refused."""
        with pytest.raises(InputError):
            wang_yuan_report((1.0,), HALF_PI / 2)

    def test_elementary_symmetric(self):
        """Test the elementary symmetric functions."""
        assert elementary_symmetric([1.0, 2.0, 3.0]) == [1.0, 6.0, 11.0, 6.0]


class TestF0:
    """The concave reformulation."""

    @pytest.mark.parametrize(
        "lam,expected",
        [((1.0, 1.0), 0.0), ((2.0, 2.0), 1.0), ((3.0, 1.0), 2.0 - math.sqrt(2.0))],
    )
    def test_examples(self, lam, expected):
        """Test f0 at points with known values."""
        assert f0(lam, HALF_PI) == pytest.approx(expected, abs=1e-12)

    def test_matrix_form(self):
        """Test f0 of a matrix through its relative eigenvalues."""
        value = f0_matrix(HermitianForm.identity(2), HermitianForm.parse("rows:2,1;1,2"), HALF_PI)
        assert value == pytest.approx(2.0 - math.sqrt(2.0), abs=1e-12)

    @given(st.lists(finite, min_size=2, max_size=4), st.floats(0.1, 0.9))
    @settings(max_examples=50)
    def test_sign_matches_cone(self, values, fraction):
        """Test that f0 is a root of the shifted phase with the sign of theta - sigma."""
        n = len(values)
        sigma = (n - 2) * HALF_PI + fraction * math.pi
        t = f0(values, sigma)
        assert theta([v - t for v in values]) == pytest.approx(sigma, abs=1e-10)
        if abs(theta(values) - sigma) > 1e-9:
            assert (t > 0.0) == (theta(values) > sigma)

    def test_monotone_under_positive_update(self, rng):
        """Test that f0 never decreases under a positive rank one update."""
        identity = HermitianForm.identity(3)
        for _ in range(50):
            a = rng.normal(size=(3, 3))
            p = rng.normal(size=3)
            sigma = rng.uniform(-0.9, 0.9) * 3 * HALF_PI
            lower = f0_matrix(identity, HermitianForm(a + a.T), sigma)
            upper = f0_matrix(identity, HermitianForm(a + a.T + np.outer(p, p)), sigma)
            assert lower <= upper + 1e-9

    def test_sigma_out_of_range(self):
        """Test that sigma outside (-n*pi/2, n*pi/2) is refused."""
        with pytest.raises(InputError):
            f0((1.0, 1.0), math.pi)

class TestLevelSetConvexity:
    """The superlevel set of a supercritical phase is convex."""

    def test_midpoint_of_boundary_points(self, rng):
        """Test that midpoints of level set points stay in the superlevel set."""
        for n in (2, 3, 4, 5):
            for _ in range(200):
                sigma = rng.uniform((n - 2) * HALF_PI, n * HALF_PI)
                lam = level_spectrum(rng, n, sigma).as_array()
                mu = level_spectrum(rng, n, sigma).as_array()
                assert theta(0.5 * (lam + mu)) >= sigma - 1e-9
