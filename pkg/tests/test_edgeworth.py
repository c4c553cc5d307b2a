"""Cumulant/moment algebra and the density-expansion builders."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from levyedge.edgeworth import (
    CumulantSet,
    EdgeworthError,
    MomentSet,
    build_P,
    build_Q,
    cumulants_to_moments,
    edgeworth_density,
    edgeworth_signed_moments,
    kappa_from_moments,
    min_m_heuristic,
    moments_to_cumulants,
    multi_indices,
    scaled_sum_moments,
)
from levyedge.polycore import Polynomial, hermite_1d


def exp_cumulants(order=6):
    # centered Exp(1): kappa_j = (j-1)!
    return CumulantSet(1, order, {(j,): Fraction(math.factorial(j - 1)) for j in range(2, order + 1)})


rational = st.fractions(
    min_value=Fraction(-3), max_value=Fraction(3), max_denominator=6
)


@st.composite
def random_cumulants(draw, q=2, order=4):
    mu = {}
    for total in range(2, order + 1):
        for alpha in multi_indices(q, total):
            mu[alpha] = draw(rational)
    # force a positive-definite diagonal covariance
    for j in range(q):
        e = [0] * q
        e[j] = 2
        mu[tuple(e)] = draw(st.fractions(min_value=Fraction(1, 2), max_value=Fraction(3), max_denominator=4))
    for i in range(q):
        for j in range(i + 1, q):
            e = [0] * q
            e[i] = e[j] = 1
            mu[tuple(e)] = Fraction(0)
    return CumulantSet(q, order, mu)


class TestRoundTrip:
    @given(random_cumulants())
    @settings(deadline=None, max_examples=30)
    def test_cumulant_moment_round_trip(self, c):
        again = moments_to_cumulants(cumulants_to_moments(c))
        assert again.mu == c.mu

    def test_exponential_moments(self):
        # central moments of Exp(1)-1: m2=1, m3=2, m4=9 (from E(X-1)^4)
        m = cumulants_to_moments(exp_cumulants(4))
        assert m.values[(2,)] == 1
        assert m.values[(3,)] == 2
        assert m.values[(4,)] == 9

    def test_text_round_trip(self):
        c = exp_cumulants(4)
        assert CumulantSet.from_text(c.to_text()).mu == c.mu


class TestBuilders:
    def test_degree_window(self):
        # P_k and Q_k only carry monomials of total degree in [k+2, 3k]
        c = exp_cumulants(6)
        for k, p in enumerate(build_P(c, 3), start=1):
            degs = [sum(a) for a in p.terms]
            assert degs and min(degs) >= 0 and max(degs) <= 3 * k
        for k, q in enumerate(build_Q(c, 3), start=1):
            degs = [sum(a) for a in q.terms]
            assert max(degs) <= 3 * k

    def test_q1_univariate_formula(self):
        # Q1 = (kappa3 / 6) H3(x) for unit variance
        c = exp_cumulants(3)
        (q1,) = build_Q(c, 1)
        assert q1 == Fraction(2, 6) * hermite_1d(3)

    def test_q1_scaling_with_variance(self):
        # for variance lam, Q1 = (kappa3/6) lam^{-3/2} H3(x / sqrt(lam));
        # with lam = 4 the scaling factors are exact rationals
        c = CumulantSet(1, 3, {(2,): Fraction(4), (3,): Fraction(16)})
        (q1,) = build_Q(c, 1)
        y = Polynomial.variable(1, 0)
        expected = Fraction(16, 6) * (Fraction(1, 64) * y ** 3 - Fraction(3, 16) * y)
        assert q1 == expected

    def test_rotation_invariance_of_density(self):
        # rotating the cumulants rotates the expansion density accordingly
        mu = {
            (2, 0): Fraction(1), (0, 2): Fraction(1), (1, 1): Fraction(0),
            (3, 0): Fraction(1, 2), (2, 1): Fraction(1, 3),
            (1, 2): Fraction(-1, 4), (0, 3): Fraction(1, 5),
        }
        c = CumulantSet(2, 3, mu)
        th = 0.7
        A = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
        cr = c.rotate(A)
        pts = np.array([[0.3, -1.2], [1.0, 0.4], [-0.6, 0.9]])
        lhs = edgeworth_density(cr, 1, 0.2, pts)
        # rotate(A) describes A^T X, whose density at x is the original at A x
        rhs = edgeworth_density(c, 1, 0.2, pts @ A.T)
        assert np.allclose(lhs, rhs, rtol=1e-12)

    def test_density_integrates_to_one(self):
        c = exp_cumulants(4)
        xs = np.linspace(-10, 10, 4001)[:, None]
        vals = edgeworth_density(c, 2, 0.3, xs)
        assert np.trapezoid(vals, xs[:, 0]) == pytest.approx(1.0, abs=1e-8)

    @given(random_cumulants())
    @settings(deadline=None, max_examples=20)
    def test_signed_moments_match_scaled_sum(self, c):
        # the expansion with r = n-2 matches the normalized-sum moments
        # through order n exactly (m a perfect square so sqrt(m) is rational)
        m = 9
        eps = Fraction(1, 3)
        left = edgeworth_signed_moments(c, 2, eps, 4)
        right = scaled_sum_moments(c, m, 4)
        for alpha in left:
            assert left[alpha] == right[alpha]


class TestKappa:
    def test_kappa_gaussian(self):
        # kappa_4 of N(0,1) = max over |t|=1 of E|<t,Z>|^4 = 3
        m = MomentSet(1, 4, {(1,): 0, (2,): 1, (3,): 0, (4,): 3})
        assert kappa_from_moments(m, 4) == 3

    def test_min_m_heuristic_monotone(self):
        # weaker characteristic-function decay demands more summands
        c = exp_cumulants(6)
        m_strong = min_m_heuristic(c, 4, gamma_bar=0.5)
        m_weak = min_m_heuristic(c, 4, gamma_bar=0.99)
        assert m_strong <= m_weak


class TestValidation:
    def test_mean_must_be_zero(self):
        with pytest.raises(EdgeworthError):
            MomentSet(1, 2, {(1,): 1, (2,): 1})

    def test_singular_covariance_rejected(self):
        c = CumulantSet(2, 2, {(2, 0): 1, (0, 2): 0, (1, 1): 0})
        with pytest.raises(EdgeworthError):
            c.check_nonsingular()
