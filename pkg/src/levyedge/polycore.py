"""Exact sparse multivariate polynomial algebra.

Polynomials are stored as a dict mapping exponent tuples to coefficients.
Coefficients are `fractions.Fraction` in exact mode or `float` in numeric
mode; the two modes mix freely (Fraction*float -> float).  On top of the
carrier type this module provides probabilists' Hermite polynomials,
Gaussian moment integration (Isserlis pairing) and truncated formal power
series in an auxiliary small parameter, with polynomial coefficients.

All values are treated as immutable after construction; every operation
returns a fresh object.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

Coeff = Union[Fraction, float]

#: hard cap on total degree, to bound combinatorial blowup
MAX_DEGREE = 64


class PolynomialError(ValueError):
    pass


def _as_coeff(c) -> Coeff:
    if isinstance(c, (Fraction, float)):
        return c
    if isinstance(c, (int, np.integer)):
        return Fraction(int(c))
    if isinstance(c, np.floating):
        return float(c)
    raise PolynomialError(f"unsupported coefficient type {type(c)!r}")


def grlex_key(alpha: tuple) -> tuple:
    """Graded-lexicographic sort key for exponent tuples."""
    return (sum(alpha), tuple(-a for a in alpha))


class Polynomial:
    """Sparse multivariate polynomial over exponent tuples.

    Zero coefficients are never stored, so equality of term dicts is
    equality of polynomials.
    """

    __slots__ = ("dimension", "terms")

    def __init__(self, dimension: int, terms: Mapping[tuple, Coeff] | None = None):
        if dimension < 1:
            raise PolynomialError("dimension must be >= 1")
        clean = {}
        if terms:
            for alpha, c in terms.items():
                alpha = tuple(int(a) for a in alpha)
                if len(alpha) != dimension or any(a < 0 for a in alpha):
                    raise PolynomialError(f"bad exponent tuple {alpha} for dimension {dimension}")
                c = _as_coeff(c)
                if c != 0:
                    clean[alpha] = c
        object.__setattr__(self, "dimension", dimension)
        object.__setattr__(self, "terms", clean)

    def __setattr__(self, *a):
        raise AttributeError("Polynomial is immutable")

    # -- constructors -------------------------------------------------

    @staticmethod
    def constant(dimension: int, c) -> "Polynomial":
        return Polynomial(dimension, {(0,) * dimension: c})

    @staticmethod
    def zero(dimension: int) -> "Polynomial":
        return Polynomial(dimension, {})

    @staticmethod
    def variable(dimension: int, j: int) -> "Polynomial":
        e = [0] * dimension
        e[j] = 1
        return Polynomial(dimension, {tuple(e): Fraction(1)})

    # -- basic queries ------------------------------------------------

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        return max((sum(a) for a in self.terms), default=-1)

    def is_zero(self) -> bool:
        return not self.terms

    def coefficient(self, alpha: Sequence[int]) -> Coeff:
        return self.terms.get(tuple(alpha), Fraction(0))

    def constant_term(self) -> Coeff:
        return self.terms.get((0,) * self.dimension, Fraction(0))

    def __eq__(self, other):
        return (
            isinstance(other, Polynomial)
            and self.dimension == other.dimension
            and self.terms == other.terms
        )

    def __hash__(self):
        return hash((self.dimension, frozenset(self.terms.items())))

    # -- arithmetic ---------------------------------------------------

    def _check_dim(self, other: "Polynomial"):
        if self.dimension != other.dimension:
            raise PolynomialError("dimension mismatch")

    def __add__(self, other):
        if not isinstance(other, Polynomial):
            return self + Polynomial.constant(self.dimension, other)
        self._check_dim(other)
        terms = dict(self.terms)
        for alpha, c in other.terms.items():
            terms[alpha] = terms.get(alpha, 0) + c
        return Polynomial(self.dimension, terms)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.dimension, {a: -c for a, c in self.terms.items()})

    def __sub__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(self.dimension, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            c = _as_coeff(other)
            if c == 0:
                return Polynomial.zero(self.dimension)
            return Polynomial(self.dimension, {a: v * c for a, v in self.terms.items()})
        self._check_dim(other)
        if self.degree() + other.degree() > MAX_DEGREE:
            raise PolynomialError(f"product degree exceeds cap {MAX_DEGREE}")
        terms: dict = {}
        for a1, c1 in self.terms.items():
            for a2, c2 in other.terms.items():
                key = tuple(x + y for x, y in zip(a1, a2))
                terms[key] = terms.get(key, 0) + c1 * c2
        return Polynomial(self.dimension, terms)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            raise PolynomialError("negative power")
        out = Polynomial.constant(self.dimension, Fraction(1))
        base = self
        while n:
            if n & 1:
                out = out * base
            base_needed = n > 1
            if base_needed:
                base = base * base
            n >>= 1
        return out

    # -- calculus -----------------------------------------------------

    def partial(self, j: int) -> "Polynomial":
        terms = {}
        for alpha, c in self.terms.items():
            if alpha[j] == 0:
                continue
            a = list(alpha)
            k = a[j]
            a[j] -= 1
            key = tuple(a)
            terms[key] = terms.get(key, 0) + c * k
        return Polynomial(self.dimension, terms)

    def gradient(self) -> list:
        return [self.partial(j) for j in range(self.dimension)]

    def laplacian(self) -> "Polynomial":
        out = Polynomial.zero(self.dimension)
        for j in range(self.dimension):
            out = out + self.partial(j).partial(j)
        return out

    # -- evaluation / substitution ------------------------------------

    def __call__(self, x):
        """Evaluate at a point or along the last axis of an array."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dimension:
            raise PolynomialError("point dimension mismatch")
        out = np.zeros(x.shape[:-1])
        for alpha, c in self.terms.items():
            mono = np.ones(x.shape[:-1])
            for j, e in enumerate(alpha):
                if e:
                    mono = mono * x[..., j] ** e
            out = out + float(c) * mono
        return out if out.shape else float(out)

    def evaluate_exact(self, point: Sequence) -> Coeff:
        """Evaluate with Fraction arithmetic (point entries rational)."""
        total: Coeff = Fraction(0)
        for alpha, c in self.terms.items():
            v = c
            for j, e in enumerate(alpha):
                if e:
                    v = v * (point[j] ** e)
            total = total + v
        return total

    def substitute(self, coords: Sequence) -> "Polynomial":
        """Substitute each variable by a polynomial (same dimension)."""
        return _substitute(self, coords, Polynomial.constant(coords[0].dimension, Fraction(1)))

    def compose_affine(self, A) -> "Polynomial":
        """Return self(A x) for a square matrix A (rows index the old variables)."""
        q = self.dimension
        coords = []
        for j in range(q):
            row = {}
            for i in range(q):
                c = _as_coeff(A[j][i]) if not isinstance(A, np.ndarray) else float(A[j, i])
                if c != 0:
                    e = [0] * q
                    e[i] = 1
                    row[tuple(e)] = c
            coords.append(Polynomial(q, row))
        return self.substitute(coords)

    # -- output -------------------------------------------------------

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda kv: grlex_key(kv[0]))

    def to_text(self) -> str:
        """Deterministic debug form: graded-lex terms, exact fractions."""
        if not self.terms:
            return "0"
        parts = []
        for alpha, c in self.sorted_terms():
            mono = " ".join(
                f"x{j + 1}^{e}" if e > 1 else f"x{j + 1}"
                for j, e in enumerate(alpha)
                if e
            )
            cs = str(c) if isinstance(c, Fraction) else repr(c)
            parts.append(f"{cs} {mono}".strip())
        return " + ".join(parts)

    def __repr__(self):
        return f"Polynomial({self.dimension}, {self.to_text()})"


def _substitute(S: Polynomial, coords: Sequence, one):
    """Evaluate S with the given objects as coordinates.

    Works for any coordinate type supporting +, * and scalar
    multiplication (Polynomial, EpsSeries).
    """
    if len(coords) != S.dimension:
        raise PolynomialError("substitution arity mismatch")
    out = None
    pow_cache = [{} for _ in coords]

    def cpow(j, e):
        cache = pow_cache[j]
        if e not in cache:
            if e == 0:
                cache[e] = one
            elif e == 1:
                cache[e] = coords[j]
            else:
                cache[e] = cpow(j, e - 1) * coords[j]
        return cache[e]

    for alpha, c in S.terms.items():
        term = one * c
        for j, e in enumerate(alpha):
            if e:
                term = term * cpow(j, e)
        out = term if out is None else out + term
    if out is None:
        out = one * 0
    return out


# ---------------------------------------------------------------------------
# Hermite polynomials
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def hermite_1d(j: int) -> Polynomial:
    """Probabilists' Hermite polynomial H_j in one variable, exact.

    H_0 = 1, H_1 = x, H_{j+1} = x H_j - j H_{j-1}.
    """
    if j < 0:
        raise PolynomialError("Hermite index must be >= 0")
    if j == 0:
        return Polynomial.constant(1, Fraction(1))
    if j == 1:
        return Polynomial.variable(1, 0)
    x = Polynomial.variable(1, 0)
    return x * hermite_1d(j - 1) - hermite_1d(j - 2) * (j - 1)


def _hermite_scaled_1d(j: int, lam: Coeff, weight: int) -> Polynomial:
    """lam^(weight*j/2) * H_j(lam^(-1/2) x) as an exact 1-d polynomial.

    Requires weight in {-1, 0, +1}; the half-integer powers of lam cancel
    against the parity of Hermite exponents for weight = +-1, while
    weight = 0 is only exact when lam is a perfect square (handled by the
    caller going through floats in that case).
    """
    h = hermite_1d(j)
    terms = {}
    for (k,), c in h.terms.items():
        # exponent of lam^(1/2): weight*j - k; parity of k equals parity of j
        half = weight * j - k
        if half % 2 == 0:
            factor = _pow_coeff(lam, half // 2)
        else:
            factor = float(lam) ** (half / 2.0)
        terms[(k,)] = c * factor
    return Polynomial(1, terms)


def _pow_coeff(lam: Coeff, n: int) -> Coeff:
    if isinstance(lam, Fraction):
        return lam ** n
    return float(lam) ** n


def hermite_tensor(
    alpha: Sequence[int],
    lambdas: Sequence,
    convention: str = "edgeworth",
) -> Polynomial:
    """Tensor Hermite polynomial for a diagonal covariance diag(lambdas).

    convention:
      "edgeworth"   prod_j lam_j^(-alpha_j/2) H_{alpha_j}(lam_j^(-1/2) x_j),
                    the inverse-Fourier-transform normalisation;
      "scaled"      prod_j lam_j^(+alpha_j/2) H_{alpha_j}(lam_j^(-1/2) x_j),
                    exact-rational eigenbasis with <g_a, g_b> = a! prod lam^a;
      "orthonormal" (alpha!)^(-1/2) prod_j H_{alpha_j}(lam_j^(-1/2) x_j),
                    unit norm in L^2(phi) (float coefficients in general).
    """
    q = len(alpha)
    if len(lambdas) != q:
        raise PolynomialError("alpha / lambdas length mismatch")
    lams = [_as_coeff(l) for l in lambdas]
    if any((l <= 0) for l in lams):
        raise PolynomialError("lambdas must be positive")

    if convention == "edgeworth":
        weight = -1
    elif convention == "scaled":
        weight = 1
    elif convention == "orthonormal":
        weight = 0
    else:
        raise PolynomialError(f"unknown convention {convention!r}")

    out = Polynomial.constant(q, Fraction(1))
    for j, (aj, lam) in enumerate(zip(alpha, lams)):
        if convention == "orthonormal":
            h1 = _hermite_scaled_1d(aj, float(lam), 0)
        else:
            h1 = _hermite_scaled_1d(aj, lam, weight)
        # lift the 1-d polynomial into coordinate j
        lifted = {}
        for (k,), c in h1.terms.items():
            e = [0] * q
            e[j] = k
            lifted[tuple(e)] = c
        out = out * Polynomial(q, lifted)
    if convention == "orthonormal":
        norm = 1.0 / math.sqrt(math.prod(math.factorial(a) for a in alpha))
        out = out * norm
    return out


# ---------------------------------------------------------------------------
# Gaussian moments (Isserlis pairing)
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _isserlis(indices: tuple, sigma_key: tuple) -> Coeff:
    if not indices:
        return Fraction(1)
    if len(indices) % 2:
        return Fraction(0)
    sigma = sigma_key  # tuple of row tuples
    first, rest = indices[0], indices[1:]
    total: Coeff = Fraction(0)
    for pos in range(len(rest)):
        cov = sigma[first][rest[pos]]
        if cov != 0:
            remaining = rest[:pos] + rest[pos + 1:]
            total = total + cov * _isserlis(remaining, sigma_key)
    return total


def gaussian_moment(alpha: Sequence[int], sigma) -> Coeff:
    """E[x^alpha] under N(0, sigma), exact via recursive pairing.

    sigma may hold Fractions (exact mode) or floats.  Symmetry is
    required; positive-definiteness is checked through the diagonal and
    a numeric eigenvalue test.
    """
    q = len(alpha)
    rows = []
    for i in range(q):
        rows.append(tuple(_as_coeff(sigma[i][j]) for j in range(q)))
    sigma_key = tuple(rows)
    for i in range(q):
        for j in range(i):
            if sigma_key[i][j] != sigma_key[j][i]:
                raise PolynomialError("sigma must be symmetric")
    w = np.linalg.eigvalsh(np.array([[float(c) for c in r] for r in rows]))
    if w.min() < -1e-12 * max(1.0, w.max()):
        raise PolynomialError("sigma must be positive semi-definite")
    indices = []
    for j, a in enumerate(alpha):
        indices.extend([j] * a)
    return _isserlis(tuple(sorted(indices)), sigma_key)


def gaussian_inner_product(p: Polynomial, r: Polynomial, sigma) -> Coeff:
    """Integral of p*r against the N(0, sigma) density, exact."""
    prod = p * r
    total: Coeff = Fraction(0)
    for alpha, c in prod.terms.items():
        m = gaussian_moment(alpha, sigma)
        if m != 0:
            total = total + c * m
    return total


def gaussian_expectation(p: Polynomial, sigma) -> Coeff:
    """Integral of p against the N(0, sigma) density."""
    total: Coeff = Fraction(0)
    for alpha, c in p.terms.items():
        m = gaussian_moment(alpha, sigma)
        if m != 0:
            total = total + c * m
    return total


# ---------------------------------------------------------------------------
# Truncated formal power series in a small parameter
# ---------------------------------------------------------------------------


class EpsSeries:
    """Polynomial-coefficient power series, truncated at a fixed order.

    coeffs[k] is the polynomial coefficient of eps^k; all coefficients
    share one ambient dimension.  Binary operations truncate to the
    smaller of the two orders.
    """

    __slots__ = ("dimension", "order", "coeffs")

    def __init__(self, coeffs: Iterable[Polynomial], order: int | None = None):
        coeffs = list(coeffs)
        if not coeffs:
            raise PolynomialError("EpsSeries needs at least the order-0 coefficient")
        dim = coeffs[0].dimension
        if any(c.dimension != dim for c in coeffs):
            raise PolynomialError("EpsSeries coefficients must share dimension")
        if order is None:
            order = len(coeffs) - 1
        coeffs = coeffs[: order + 1]
        while len(coeffs) < order + 1:
            coeffs.append(Polynomial.zero(dim))
        object.__setattr__(self, "dimension", dim)
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "coeffs", tuple(coeffs))

    def __setattr__(self, *a):
        raise AttributeError("EpsSeries is immutable")

    @staticmethod
    def constant(dimension: int, c, order: int) -> "EpsSeries":
        return EpsSeries([Polynomial.constant(dimension, c)], order)

    @staticmethod
    def from_polynomial(p: Polynomial, order: int) -> "EpsSeries":
        return EpsSeries([p], order)

    def __getitem__(self, k: int) -> Polynomial:
        return self.coeffs[k]

    def __eq__(self, other):
        return (
            isinstance(other, EpsSeries)
            and self.order == other.order
            and self.coeffs == other.coeffs
        )

    def __add__(self, other):
        if not isinstance(other, EpsSeries):
            other = EpsSeries.constant(self.dimension, other, self.order)
        r = min(self.order, other.order)
        return EpsSeries(
            [self.coeffs[k] + other.coeffs[k] for k in range(r + 1)], r
        )

    __radd__ = __add__

    def __neg__(self):
        return EpsSeries([-c for c in self.coeffs], self.order)

    def __sub__(self, other):
        if not isinstance(other, EpsSeries):
            other = EpsSeries.constant(self.dimension, other, self.order)
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, EpsSeries):
            # scalar or Polynomial multiplier
            return EpsSeries([c * other for c in self.coeffs], self.order)
        r = min(self.order, other.order)
        out = [Polynomial.zero(self.dimension) for _ in range(r + 1)]
        for i, a in enumerate(self.coeffs[: r + 1]):
            if a.is_zero():
                continue
            for j in range(r + 1 - i):
                b = other.coeffs[j]
                if not b.is_zero():
                    out[i + j] = out[i + j] + a * b
        return EpsSeries(out, r)

    __rmul__ = __mul__

    def shift(self, k: int) -> "EpsSeries":
        """Multiply by eps^k (truncating)."""
        dim = self.dimension
        coeffs = [Polynomial.zero(dim)] * k + list(self.coeffs)
        return EpsSeries(coeffs, self.order)

    def exp(self) -> "EpsSeries":
        """Series exponential; requires zero order-0 coefficient."""
        if not self.coeffs[0].is_zero():
            raise PolynomialError("series_exp needs zero constant-in-eps part")
        one = Polynomial.constant(self.dimension, Fraction(1))
        out = EpsSeries([one], self.order)
        term = EpsSeries([one], self.order)
        for k in range(1, self.order + 1):
            term = term * self * Fraction(1, k)
            out = out + term
        return out

    def reciprocal(self) -> "EpsSeries":
        """Series 1/self; requires order-0 coefficient exactly 1."""
        c0 = self.coeffs[0]
        if c0 != Polynomial.constant(self.dimension, Fraction(1)):
            raise PolynomialError("series_reciprocal needs order-0 coefficient 1")
        v = self - 1  # strictly positive eps-order
        one = Polynomial.constant(self.dimension, Fraction(1))
        out = EpsSeries([one], self.order)
        term = EpsSeries([one], self.order)
        for _ in range(1, self.order + 1):
            term = term * (-1) * v
            out = out + term
        return out

    def at(self, eps) -> Polynomial:
        """Collapse the series at a numeric eps value."""
        eps = _as_coeff(eps)
        out = Polynomial.zero(self.dimension)
        power: Coeff = Fraction(1) if isinstance(eps, Fraction) else 1.0
        for k, c in enumerate(self.coeffs):
            if k:
                power = power * eps
            out = out + c * power
        return out

    def __repr__(self):
        parts = [f"eps^{k}*({c.to_text()})" for k, c in enumerate(self.coeffs)]
        return "EpsSeries[" + " + ".join(parts) + "]"


def series_exp(s: EpsSeries) -> EpsSeries:
    return s.exp()


def series_reciprocal(s: EpsSeries) -> EpsSeries:
    return s.reciprocal()


def series_mul(a: EpsSeries, b: EpsSeries) -> EpsSeries:
    return a * b


def taylor_shift(S: Polynomial, displacement: Sequence[Sequence[Polynomial]], order: int) -> EpsSeries:
    """Expand S(x + sum_k eps^k U_k(x)) as a truncated series in eps.

    displacement[k-1] is the vector polynomial U_k; the result is exact
    up to the requested truncation order.
    """
    q = S.dimension
    for U in displacement:
        if len(U) != q or any(u.dimension != q for u in U):
            raise PolynomialError("displacement entries must match dimension")
    coords = []
    for j in range(q):
        coeffs = [Polynomial.variable(q, j)]
        for U in displacement:
            coeffs.append(U[j])
        coords.append(EpsSeries(coeffs, order))
    one = EpsSeries.constant(q, Fraction(1), order)
    return _substitute(S, coords, one)
