"""Exact-arithmetic core: polynomials, Hermite bases, Gaussian moments,
formal power series in the expansion parameter."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from levyedge.polycore import (
    EpsSeries,
    Polynomial,
    gaussian_expectation,
    gaussian_inner_product,
    gaussian_moment,
    hermite_1d,
    hermite_tensor,
    taylor_shift,
)


def x(j, q=2):
    return Polynomial.variable(q, j)


class TestPolynomial:
    def test_arithmetic_exact(self):
        p = x(0) * x(0) - 2 * Fraction(1, 3) * x(1) + 5
        assert p.coefficient((2, 0)) == 1
        assert p.coefficient((0, 1)) == Fraction(-2, 3)
        assert p.constant_term() == 5

    def test_partial_and_laplacian(self):
        p = x(0) ** 3 * x(1) + x(1) ** 2
        assert p.partial(0) == 3 * x(0) ** 2 * x(1)
        assert p.laplacian() == 6 * x(0) * x(1) + Polynomial.constant(2, 2)

    def test_call_vectorized(self):
        p = x(0) ** 2 + x(1)
        pts = np.array([[1.0, 2.0], [3.0, -1.0]])
        assert np.allclose(p(pts), [3.0, 8.0])

    def test_compose_affine_rotation(self):
        # p(Ax) for a 90-degree rotation swaps the variables up to sign:
        # Ax = (-x2, x1), so x1^2 - x2 becomes x2^2 - x1
        p = x(0) ** 2 - x(1)
        A = [[0, -1], [1, 0]]
        assert p.compose_affine(A) == x(1) ** 2 - x(0)

    @given(st.integers(-5, 5), st.integers(-5, 5))
    def test_evaluate_exact_matches_float(self, a, b):
        p = 3 * x(0) ** 2 * x(1) - Fraction(1, 2) * x(1) ** 3 + 7
        exact = p.evaluate_exact([a, b])
        assert float(exact) == pytest.approx(p(np.array([a, b], dtype=float)))


class TestHermite:
    def test_first_polynomials(self):
        # probabilists' convention: H0=1, H1=x, H2=x^2-1, H3=x^3-3x, H4=x^4-6x^2+3
        y = Polynomial.variable(1, 0)
        assert hermite_1d(0) == Polynomial.constant(1, 1)
        assert hermite_1d(1) == y
        assert hermite_1d(2) == y ** 2 - 1
        assert hermite_1d(3) == y ** 3 - 3 * y
        assert hermite_1d(4) == y ** 4 - 6 * y ** 2 + 3

    @given(st.integers(1, 8))
    def test_derivative_identity(self, j):
        # H_j' = j H_{j-1}
        assert hermite_1d(j).partial(0) == j * hermite_1d(j - 1)

    @given(st.integers(0, 6), st.integers(0, 6))
    @settings(deadline=None)
    def test_orthogonality_standard_gaussian(self, i, j):
        # E[H_i(Z) H_j(Z)] = i! [i == j]
        val = gaussian_inner_product(hermite_1d(i), hermite_1d(j), [[1]])
        assert val == (math.factorial(i) if i == j else 0)

    def test_tensor_scaled_orthogonality(self):
        # the lambda-scaled basis has squared norm alpha! * prod(lam^alpha)
        lam = [Fraction(1), Fraction(3)]
        sig = [[1, 0], [0, 3]]
        a, b = (2, 1), (2, 1)
        ga = hermite_tensor(a, lam, convention="scaled")
        gb = hermite_tensor(b, lam, convention="scaled")
        assert gaussian_inner_product(ga, gb, sig) == 2 * 1 * 3  # 2! 1! * 1^2 3^1
        gc = hermite_tensor((1, 2), lam, convention="scaled")
        assert gaussian_inner_product(ga, gc, sig) == 0

    def test_tensor_eigenfunction(self):
        # -Delta g + x . Sigma^{-1} grad g = (sum alpha_j / lambda_j) g
        lam = [Fraction(2), Fraction(5)]
        sig = [[2, 0], [0, 5]]
        alpha = (3, 2)
        g = hermite_tensor(alpha, lam, convention="scaled")
        lhs = -g.laplacian() + sum(
            Fraction(1, l) * Polynomial.variable(2, j) * g.partial(j)
            for j, l in enumerate(lam)
        )
        nu = Fraction(3, 2) + Fraction(2, 5)
        assert lhs == nu * g


class TestGaussianMoments:
    def test_univariate_even_moments(self):
        # E Z^{2k} = (2k-1)!!
        assert gaussian_moment((2,), [[1]]) == 1
        assert gaussian_moment((4,), [[1]]) == 3
        assert gaussian_moment((6,), [[1]]) == 15
        assert gaussian_moment((8,), [[1]]) == 105
        assert gaussian_moment((3,), [[1]]) == 0

    def test_correlated_pair(self):
        # E[X^2 Y^2] = s11 s22 + 2 s12^2 (Isserlis)
        sig = [[2, 1], [1, 3]]
        assert gaussian_moment((2, 2), sig) == 2 * 3 + 2 * 1

    def test_monte_carlo_cross_check(self):
        # independent stochastic oracle for a degree-6 mixed moment
        sig = np.array([[1.0, 0.5], [0.5, 2.0]])
        exact = float(gaussian_moment((4, 2), [[1, Fraction(1, 2)], [Fraction(1, 2), 2]]))
        rng = np.random.default_rng(42)
        z = rng.multivariate_normal([0, 0], sig, size=2_000_000)
        mc = float(np.mean(z[:, 0] ** 4 * z[:, 1] ** 2))
        assert mc == pytest.approx(exact, rel=0.02)

    def test_gaussian_expectation_linear(self):
        p = 3 * x(0) ** 2 + x(0) * x(1) - 4
        sig = [[1, Fraction(1, 4)], [Fraction(1, 4), 1]]
        assert gaussian_expectation(p, sig) == 3 + Fraction(1, 4) - 4


class TestEpsSeries:
    def test_exp_reciprocal_inverse(self):
        p = x(0) + Fraction(1, 2) * x(1) ** 2
        s = EpsSeries.from_polynomial(p, 4).shift(1)
        e = s.exp()
        assert (e * e.reciprocal())[0] == Polynomial.constant(2, 1)
        for k in range(1, 5):
            assert (e * e.reciprocal())[k].is_zero()

    def test_exp_matches_scalar_exp(self):
        # constant-argument series reduces to the Maclaurin series of e^c
        s = EpsSeries.constant(1, Fraction(1), 5).shift(1)
        e = s.exp()
        for k in range(6):
            assert e[k].constant_term() == Fraction(1, math.factorial(k))

    def test_taylor_shift_first_order(self):
        # S(x + eps v(x)) = S + eps v . grad S + O(eps^2)
        S = x(0) ** 2 * x(1)
        v = [[x(1), x(0)]]  # one displacement order, vector field (x2, x1)
        out = taylor_shift(S, v, 3)
        assert out[0] == S
        assert out[1] == x(1) * S.partial(0) + x(0) * S.partial(1)

    def test_taylor_shift_exact_polynomial_identity(self):
        # for polynomial S the shifted series terminates and sums exactly
        S = x(0) ** 2
        v = [[Polynomial.constant(2, 1), Polynomial.zero(2)]]  # x1 -> x1 + eps
        out = taylor_shift(S, v, 4)
        # (x + eps)^2 = x^2 + 2 eps x + eps^2
        assert out[1] == 2 * x(0)
        assert out[2] == Polynomial.constant(2, 1)
        assert out[3].is_zero()
