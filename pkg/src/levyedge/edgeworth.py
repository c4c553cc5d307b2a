"""Cumulants and Edgeworth polynomials.

Converts moments of a mean-zero law to cumulants (and back), builds the
characteristic-function correction polynomials and their position-space
counterparts, evaluates the corrected Gaussian density, and provides the
moment diagnostics used to size the number of summands.

Conventions.  The correction polynomial of order k is stored with real
coefficients against the basis (i z)^alpha; its position-space partner
for diagonal covariance diag(lambda) is

    Q_k(x) = sum_alpha b_alpha prod_j lambda_j^(-alpha_j/2)
             H_{alpha_j}(lambda_j^(-1/2) x_j),

which reproduces the classical one-dimensional expansion
phi(x) (1 + eps mu3/6 H_3(x) + ...).  Non-diagonal covariance is handled
by orthogonal diagonalisation with a deterministic eigenvector sign.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from typing import Dict, Sequence, Tuple

import numpy as np

from .polycore import (
    Coeff,
    EpsSeries,
    Polynomial,
    PolynomialError,
    gaussian_expectation,
    grlex_key,
    hermite_tensor,
)


class EdgeworthError(ValueError):
    pass


def multi_indices(q: int, total: int):
    """All exponent tuples of length q with |alpha| = total."""
    if q == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in multi_indices(q - 1, total - first):
            yield (first,) + rest


def _factorial_alpha(alpha: Tuple[int, ...]) -> int:
    return math.prod(math.factorial(a) for a in alpha)


def _truncate(p: Polynomial, n: int) -> Polynomial:
    return Polynomial(p.dimension, {a: c for a, c in p.terms.items() if sum(a) <= n})


def _poly_log1p(p: Polynomial, n: int) -> Polynomial:
    """log(1+p) truncated at total degree n; p must have zero constant term."""
    if p.constant_term() != 0:
        raise EdgeworthError("log1p needs zero constant term")
    out = Polynomial.zero(p.dimension)
    power = Polynomial.constant(p.dimension, Fraction(1))
    for l in range(1, n + 1):
        power = _truncate(power * p, n)
        if power.is_zero():
            break
        out = out + power * Fraction((-1) ** (l + 1), l)
    return out


def _poly_expm1(p: Polynomial, n: int) -> Polynomial:
    """exp(p) - 1 truncated at total degree n; p must have zero constant term."""
    if p.constant_term() != 0:
        raise EdgeworthError("exp needs zero constant term")
    out = Polynomial.zero(p.dimension)
    power = Polynomial.constant(p.dimension, Fraction(1))
    for l in range(1, n + 1):
        power = _truncate(power * p, n) * Fraction(1, l)
        if power.is_zero():
            break
        out = out + power
    return out


def deterministic_eigh(sigma: np.ndarray):
    """Symmetric eigendecomposition with a fixed sign convention.

    Returns (lams, A) with sigma = A diag(lams) A^T, eigenvalues ascending,
    each eigenvector's first nonzero component positive.
    """
    lams, A = np.linalg.eigh(np.asarray(sigma, dtype=float))
    A = A.copy()
    for j in range(A.shape[1]):
        col = A[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-14)
        if nz.size and col[nz[0]] < 0:
            A[:, j] = -col
    return lams, A


class MomentSet:
    """Raw moments E[X^alpha] of a mean-zero law, 1 <= |alpha| <= order."""

    def __init__(self, dimension: int, order: int, values: Dict[tuple, Coeff]):
        if order < 2:
            raise EdgeworthError("order must be >= 2")
        self.dimension = dimension
        self.order = order
        self.values = {}
        for d in range(1, order + 1):
            for alpha in multi_indices(dimension, d):
                if alpha not in values:
                    raise EdgeworthError(f"missing moment for {alpha}")
                self.values[alpha] = values[alpha]
        for alpha in multi_indices(dimension, 1):
            if self.values[alpha] != 0:
                raise EdgeworthError("law must be mean-zero")
        cov = self.covariance()
        w = np.linalg.eigvalsh(np.array([[float(c) for c in row] for row in cov]))
        if w.min() <= 0:
            raise EdgeworthError("second moments must form a positive-definite matrix")

    def covariance(self):
        q = self.dimension
        cov = [[None] * q for _ in range(q)]
        for i in range(q):
            for j in range(q):
                e = [0] * q
                e[i] += 1
                e[j] += 1
                cov[i][j] = self.values[tuple(e)]
        return cov


class CumulantSet:
    """Cumulants mu_alpha for 2 <= |alpha| <= order; |alpha| = 2 is the covariance."""

    def __init__(self, dimension: int, order: int, mu: Dict[tuple, Coeff]):
        if order < 2:
            raise EdgeworthError("order must be >= 2")
        self.dimension = dimension
        self.order = order
        self.mu = {}
        for d in range(2, order + 1):
            for alpha in multi_indices(dimension, d):
                self.mu[alpha] = mu.get(alpha, Fraction(0))
        self._eig = None

    @property
    def covariance(self):
        q = self.dimension
        cov = [[None] * q for _ in range(q)]
        for i in range(q):
            for j in range(q):
                e = [0] * q
                e[i] += 1
                e[j] += 1
                cov[i][j] = self.mu[tuple(e)]
        return cov

    def covariance_array(self) -> np.ndarray:
        return np.array([[float(c) for c in row] for row in self.covariance])

    def eigenvalues(self) -> np.ndarray:
        if self._eig is None:
            self._eig = np.linalg.eigvalsh(self.covariance_array())
        return self._eig

    def check_nonsingular(self):
        lams = self.eigenvalues()
        if lams[0] < 1e-10 * lams[-1]:
            raise EdgeworthError("covariance is numerically singular")

    def is_diagonal(self) -> bool:
        q = self.dimension
        return all(
            self.covariance[i][j] == 0
            for i in range(q)
            for j in range(q)
            if i != j
        )

    def diagonal_lambdas(self):
        return [self.covariance[j][j] for j in range(self.dimension)]

    def rotate(self, A: np.ndarray) -> "CumulantSet":
        """Cumulants of A^T X (floats; used for non-diagonal covariance)."""
        q = self.dimension
        mu = {}
        for d in range(2, self.order + 1):
            # degree-d cumulant polynomial c_d(z) = sum mu_alpha z^alpha / alpha!
            cd = Polynomial(
                q,
                {
                    a: Fraction(1, _factorial_alpha(a)) * self.mu[a]
                    for a in multi_indices(q, d)
                },
            )
            rotated = cd.compose_affine(np.asarray(A))  # c_d(A z)
            for alpha in multi_indices(q, d):
                mu[alpha] = float(rotated.coefficient(alpha)) * _factorial_alpha(alpha)
        return CumulantSet(q, self.order, mu)

    # -- text format ---------------------------------------------------

    def to_text(self) -> str:
        lines = []
        for alpha in sorted(self.mu, key=grlex_key):
            c = self.mu[alpha]
            cs = str(c) if isinstance(c, Fraction) else repr(float(c))
            lines.append(" ".join(str(a) for a in alpha) + " " + cs)
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_text(text: str) -> "CumulantSet":
        mu = {}
        q = None
        for raw in text.splitlines():
            line = raw.split("#")[0].strip()
            if not line:
                continue
            parts = line.split()
            alpha = tuple(int(a) for a in parts[:-1])
            if q is None:
                q = len(alpha)
            elif len(alpha) != q:
                raise EdgeworthError("inconsistent dimension in cumulant file")
            val = parts[-1]
            mu[alpha] = Fraction(val) if "/" in val or "." not in val else float(val)
        if not mu:
            raise EdgeworthError("empty cumulant file")
        order = max(sum(a) for a in mu)
        if order < 2:
            raise EdgeworthError("cumulant file must reach order 2")
        return CumulantSet(q, order, mu)


def moments_to_cumulants(m: MomentSet) -> CumulantSet:
    """Exact multivariate moment-to-cumulant conversion.

    Works through the formal identity K(z) = log M(z) on generating
    polynomials truncated at the moment order.
    """
    q, n = m.dimension, m.order
    gen = Polynomial(
        q,
        {
            a: Fraction(1, _factorial_alpha(a)) * m.values[a]
            for d in range(1, n + 1)
            for a in multi_indices(q, d)
        },
    )
    k = _poly_log1p(gen, n)
    mu = {}
    for d in range(2, n + 1):
        for alpha in multi_indices(q, d):
            mu[alpha] = k.coefficient(alpha) * _factorial_alpha(alpha)
    return CumulantSet(q, n, mu)


def cumulants_to_moments(c: CumulantSet) -> MomentSet:
    """Inverse of moments_to_cumulants (round-trip exact)."""
    q, n = c.dimension, c.order
    gen = Polynomial(
        q,
        {
            a: Fraction(1, _factorial_alpha(a)) * c.mu[a]
            for d in range(2, n + 1)
            for a in multi_indices(q, d)
        },
    )
    mgen = _poly_expm1(gen, n)
    values = {}
    for d in range(1, n + 1):
        for alpha in multi_indices(q, d):
            values[alpha] = mgen.coefficient(alpha) * _factorial_alpha(alpha)
    return MomentSet(q, n, values)


def build_P(c: CumulantSet, r: int) -> list:
    """Correction polynomials P_1..P_r in the (i z)^alpha basis.

    The returned Polynomial objects carry the real coefficients b_alpha;
    P_k has monomial degrees in [k+2, 3k].
    """
    if r < 1:
        raise EdgeworthError("r must be >= 1")
    if c.order < r + 2:
        raise EdgeworthError(f"need cumulants up to order {r + 2}")
    q = c.dimension
    # sum over |alpha| in [3, r+2] of eps^(|alpha|-2) mu_alpha y^alpha / alpha!
    coeffs = [Polynomial.zero(q) for _ in range(r + 1)]
    for d in range(3, r + 3):
        coeffs[d - 2] = Polynomial(
            q,
            {
                a: Fraction(1, _factorial_alpha(a)) * c.mu[a]
                for a in multi_indices(q, d)
            },
        )
    expanded = EpsSeries(coeffs, r).exp()
    ps = [expanded[k] for k in range(1, r + 1)]
    for k, p in enumerate(ps, start=1):
        degs = [sum(a) for a in p.terms]
        if degs and (min(degs) < k + 2 or max(degs) > 3 * k):
            raise AssertionError("P_k degree window violated")
    return ps


def _q_from_p_diagonal(p: Polynomial, lambdas) -> Polynomial:
    q = p.dimension
    out = Polynomial.zero(q)
    for alpha, b in p.terms.items():
        out = out + hermite_tensor(alpha, lambdas, "edgeworth") * b
    return out


def build_Q(c: CumulantSet, r: int) -> list:
    """Position-space Edgeworth polynomials Q_1..Q_r.

    For diagonal covariance the construction is exact (rational).  A
    general covariance is diagonalised, built in the eigenframe and
    rotated back (float coefficients).
    """
    c.check_nonsingular()
    if c.is_diagonal():
        ps = build_P(c, r)
        lambdas = c.diagonal_lambdas()
        return [_q_from_p_diagonal(p, lambdas) for p in ps]
    lams, A = deterministic_eigh(c.covariance_array())
    rotated = c.rotate(A)  # cumulants of A^T X, diagonal covariance
    ps = build_P(rotated, r)
    qs_diag = [_q_from_p_diagonal(p, [float(l) for l in lams]) for p in ps]
    At = A.T
    return [qk.compose_affine(At) for qk in qs_diag]  # Q_k(x) = Q_k^diag(A^T x)


def gaussian_density(sigma: np.ndarray, x: np.ndarray) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=float)
    x = np.asarray(x, dtype=float)
    q = sigma.shape[0]
    inv = np.linalg.inv(sigma)
    det = np.linalg.det(sigma)
    quad = np.einsum("...i,ij,...j->...", x, inv, x)
    return np.exp(-0.5 * quad) / np.sqrt((2 * np.pi) ** q * det)


def edgeworth_density(c: CumulantSet, r: int, eps: float, x) -> np.ndarray:
    """phi_Sigma(x) * (1 + sum_k eps^k Q_k(x)); may be negative."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape[-1] != c.dimension:
        raise EdgeworthError("point dimension mismatch")
    base = gaussian_density(c.covariance_array(), x)
    if r == 0:
        return base
    qs = build_Q(c, r)
    corr = np.ones(x.shape[:-1])
    for k, qk in enumerate(qs, start=1):
        corr = corr + eps ** k * qk(x)
    return base * corr


def kappa_from_moments(m: MomentSet, M: int) -> Coeff:
    """max(1, E|X|^M) from raw moments; M must be even."""
    if M % 2 or M <= 0:
        raise EdgeworthError("moment-based kappa needs even positive M")
    if M > m.order:
        raise EdgeworthError("moment order too low for requested kappa")
    q = m.dimension
    half = M // 2
    total: Coeff = Fraction(0)
    # |x|^M = (sum_j x_j^2)^(M/2), expanded multinomially
    for beta in multi_indices(q, half):
        coef = Fraction(math.factorial(half), _factorial_alpha(beta))
        alpha = tuple(2 * b for b in beta)
        total = total + coef * m.values[alpha]
    return max(Fraction(1), total) if isinstance(total, Fraction) else max(1.0, total)


def kappa_monte_carlo(sampler, M: float, n: int, rng) -> float:
    """max(1, E|X|^M) by Monte Carlo for non-even or fractional M."""
    x = np.asarray(sampler(n, rng), dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return max(1.0, float(np.mean(np.linalg.norm(x, axis=1) ** M)))


#: frozen diagnostic parameters for the sufficient-size heuristic
HEURISTIC_BETA = 1.0 / 6.0
HEURISTIC_TAU = 0.5


def min_m_heuristic(c: CumulantSet, n: int, gamma_bar: float, kappa_fn=None) -> int:
    """Smallest m passing both sufficient-size criteria.

    Criterion A: m > kappa_{n+tau}^max(4, 6/(n(1-3 beta))) with the frozen
    beta = 1/6, tau = 1/2.  Criterion B: the tail term is absorbed,
    gamma_bar^m m^((q+1)(n+1)/2) <= det(Sigma)^(-1/2) lam1^(-3(n-1)/2)
    kappa_{n+tau}^(n-2).

    kappa_fn(M) -> float may be supplied; by default the fractional moment
    is interpolated from the order-n even moment through the monotonicity
    of kappa_M^(1/M) (diagnostic accuracy only).
    """
    if not 0 < gamma_bar < 1:
        raise EdgeworthError("gamma_bar must lie in (0,1)")
    q = c.dimension
    lams = c.eigenvalues()
    det_sigma = float(np.prod(lams))
    if kappa_fn is not None:
        kap = float(kappa_fn(n + HEURISTIC_TAU))
    else:
        n_even = n if n % 2 == 0 else n + 1
        mom = cumulants_to_moments(_extend(c, n_even))
        kap_n = float(kappa_from_moments(mom, n_even))
        kap = max(1.0, kap_n ** ((n + HEURISTIC_TAU) / n_even))
    expo_a = max(4.0, 6.0 / (n * (1 - 3 * HEURISTIC_BETA)))
    thresh_a = kap ** expo_a
    rhs_b = det_sigma ** -0.5 * lams[0] ** (-1.5 * (n - 1)) * kap ** (n - 2)
    pw = 0.5 * (q + 1) * (n + 1)
    m = 2
    while m < 10 ** 7:
        ok_a = m > thresh_a
        ok_b = gamma_bar ** m * m ** pw <= rhs_b
        if ok_a and ok_b:
            return m
        m += 1
    raise EdgeworthError("no sufficient m below 1e7")


def _extend(c: CumulantSet, order: int) -> CumulantSet:
    """Zero-pad cumulants up to the requested order."""
    if order <= c.order:
        return c
    return CumulantSet(c.dimension, order, dict(c.mu))


def edgeworth_signed_moments(c: CumulantSet, r: int, eps, max_order: int) -> Dict[tuple, Coeff]:
    """Moments of the signed density phi_Sigma (1 + sum eps^k Q_k), exact.

    Requires diagonal covariance for rational exactness; eps may be a
    Fraction (e.g. a reciprocal square root of a perfect-square m).
    """
    qs = build_Q(c, r) if r >= 1 else []
    sigma = c.covariance
    out = {}
    for d in range(1, max_order + 1):
        for alpha in multi_indices(c.dimension, d):
            base = Polynomial(c.dimension, {alpha: Fraction(1)})
            total = gaussian_expectation(base, sigma)
            epspow = eps if not isinstance(eps, int) else Fraction(eps)
            power = epspow
            for qk in qs:
                total = total + power * gaussian_expectation(base * qk, sigma)
                power = power * epspow
            out[alpha] = total
    return out


def scaled_sum_moments(c: CumulantSet, m, max_order: int) -> Dict[tuple, Coeff]:
    """Exact moments of m^(-1/2) (X_1 + ... + X_m) up to max_order.

    The cumulant of order |alpha| scales by m^(1 - |alpha|/2); for exact
    rational output m must be a perfect square.
    """
    if c.order < max_order:
        raise EdgeworthError("cumulant order too low")
    root = math.isqrt(int(m))
    if root * root == m:
        scale = {d: Fraction(1, root ** (d - 2)) for d in range(2, max_order + 1)}
    else:
        scale = {d: float(m) ** (1 - d / 2) for d in range(2, max_order + 1)}
    mu = {
        a: c.mu[a] * scale[sum(a)]
        for d in range(2, max_order + 1)
        for a in multi_indices(c.dimension, d)
    }
    return cumulants_to_moments(CumulantSet(c.dimension, max_order, mu)).values
