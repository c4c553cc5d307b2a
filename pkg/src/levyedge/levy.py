"""Levy-measure descriptions over dyadic annuli.

The small jumps of a Levy process with measure nu are split over the
annuli Omega_r = {2^(-r-1) < |z| <= 2^(-r)}; each annulus carries a
compensated compound Poisson piece with intensity nu_r = nu(Omega_r).
This module holds the measure abstractions (exact power-law instance and
a tabulated radial one), the closed-form small-jump covariances, the
decomposition bookkeeping, and diagnostics for the uniform Cramer
condition the normal-approximation theorem requires.
"""

from __future__ import annotations

import math
import warnings
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import special


class LevyError(ValueError):
    pass


def sphere_surface(q: int) -> float:
    """Surface measure of the unit sphere in R^q."""
    if not 1 <= q <= 10:
        raise LevyError("dimension out of supported range")
    return 2.0 * math.pi ** (q / 2.0) / math.gamma(q / 2.0)


def _sphere_char(q: int, u: np.ndarray) -> np.ndarray:
    """E exp(i u theta_1) for theta uniform on the unit sphere in R^q."""
    u = np.asarray(u, dtype=float)
    if q == 1:
        return np.cos(u)
    out = np.ones_like(u)
    nz = np.abs(u) > 1e-12
    un = u[nz]
    p = q / 2.0 - 1.0
    out[nz] = math.gamma(q / 2.0) * (2.0 / un) ** p * special.jv(p, un)
    return out


class LevyMeasureSpec:
    """Isotropic Levy measure nu(dz) = g(|z|) dz supported on 0 < |z| <= tau.

    Subclasses supply the radial primitives; annulus quantities, the
    Cramer probe, and samplers are derived here.  All samplers take an
    explicit numpy Generator.
    """

    dimension: int
    tau: float

    # -- radial primitives (subclass responsibility) -------------------

    def interval_mass(self, a: float, b: float) -> float:
        raise NotImplementedError

    def interval_radial_second_moment(self, a: float, b: float) -> float:
        """integral of rho^2 over nu restricted to a < |z| <= b."""
        raise NotImplementedError

    def sample_radius(self, a: float, b: float, n: int, rng) -> np.ndarray:
        raise NotImplementedError

    # -- derived -------------------------------------------------------

    def _clip(self, a: float, b: float) -> Tuple[float, float]:
        return max(a, 0.0), min(b, self.tau)

    def annulus_bounds(self, r: int) -> Tuple[float, float]:
        return self._clip(2.0 ** (-r - 1), 2.0 ** (-r))

    def annulus_mass(self, r: int) -> float:
        a, b = self.annulus_bounds(r)
        if a >= b:
            return 0.0
        return self.interval_mass(a, b)

    def interval_covariance(self, a: float, b: float) -> np.ndarray:
        # isotropy spreads the radial second moment evenly over coordinates
        q = self.dimension
        a, b = self._clip(a, b)
        if a >= b:
            return np.zeros((q, q))
        return (self.interval_radial_second_moment(a, b) / q) * np.eye(q)

    def annulus_covariance(self, r: int) -> np.ndarray:
        a, b = self.annulus_bounds(r)
        return self.interval_covariance(a, b)

    def annulus_mean(self, r: int) -> np.ndarray:
        return np.zeros(self.dimension)  # isotropy

    def big_jump_mass(self, eps: float) -> float:
        a, b = self._clip(eps, self.tau)
        if a >= b:
            return 0.0
        return self.interval_mass(a, b)

    def small_jump_covariance(self, eps: float) -> np.ndarray:
        if eps <= 0:
            raise LevyError("eps must be positive")
        if eps > self.tau:
            warnings.warn("eps beyond support; clamped to tau")
            eps = self.tau
        return self.interval_covariance(0.0, eps)

    def sample_interval(self, a: float, b: float, n: int, rng) -> np.ndarray:
        """n jumps conditioned on a < |z| <= b: exact radius, uniform direction."""
        q = self.dimension
        rho = self.sample_radius(a, b, n, rng)
        if q == 1:
            sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
            return (rho * sign)[:, None]
        g = rng.standard_normal((n, q))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        return g * rho[:, None]

    def conditional_char(self, r: int, s_mags: np.ndarray) -> np.ndarray:
        """|xi_r(s)| on the rescaled annulus law, by radial quadrature.

        xi_r(s) is the characteristic function of 2^r X^r with X^r the
        jump conditioned on Omega_r; isotropy makes it real and a
        function of |s| only.
        """
        a, b = self.annulus_bounds(r)
        if a >= b:
            raise LevyError("empty annulus")
        nodes, weights = np.polynomial.legendre.leggauss(400)
        rho = 0.5 * (b - a) * nodes + 0.5 * (b + a)
        w = 0.5 * (b - a) * weights * self.radial_mass_density(rho)
        w /= w.sum()
        s = np.asarray(s_mags, dtype=float)
        u = (2.0 ** r) * s[:, None] * rho[None, :]
        vals = (_sphere_char(self.dimension, u) * w[None, :]).sum(axis=1)
        if not np.all(np.isfinite(vals)):
            raise LevyError("quadrature failure in characteristic probe")
        return np.abs(vals)

    def radial_mass_density(self, rho: np.ndarray) -> np.ndarray:
        """Unnormalized density of |z| under nu: S_{q-1} rho^{q-1} g(rho)."""
        raise NotImplementedError


class StableLikeMeasure(LevyMeasureSpec):
    """nu(dz) = |z|^(-q-alpha) dz exactly, on 0 < |z| <= tau."""

    def __init__(self, q: int, alpha: float, tau: float = 1.0):
        if not 0.0 < alpha < 2.0:
            raise LevyError("alpha must lie in (0,2)")
        if tau <= 0:
            raise LevyError("tau must be positive")
        self.dimension = q
        self.alpha = alpha
        self.tau = tau
        self.surface = sphere_surface(q)

    def interval_mass(self, a: float, b: float) -> float:
        al = self.alpha
        return self.surface * (a ** -al - b ** -al) / al

    def interval_radial_second_moment(self, a: float, b: float) -> float:
        al = self.alpha
        return self.surface * (b ** (2 - al) - a ** (2 - al)) / (2 - al)

    def radial_mass_density(self, rho: np.ndarray) -> np.ndarray:
        return self.surface * np.asarray(rho, dtype=float) ** (-1 - self.alpha)

    def sample_radius(self, a: float, b: float, n: int, rng) -> np.ndarray:
        # inverse CDF of the density ~ rho^(-1-alpha) on (a, b]
        al = self.alpha
        u = rng.random(n)
        return (a ** -al - u * (a ** -al - b ** -al)) ** (-1.0 / al)


class CustomRadialMeasure(LevyMeasureSpec):
    """Measure from a tabulated radial density g: nu(dz) = g(|z|) dz.

    The table covers [r_min, tau]; integrals use the trapezoid rule on
    the given grid and sampling inverts the interpolated radial CDF.
    """

    def __init__(self, q: int, radii: Sequence[float], density: Sequence[float]):
        radii = np.asarray(radii, dtype=float)
        density = np.asarray(density, dtype=float)
        if radii.ndim != 1 or radii.size < 4 or np.any(np.diff(radii) <= 0):
            raise LevyError("radii must be an increasing grid")
        if np.any(density < 0) or radii[0] <= 0:
            raise LevyError("density must be nonnegative on positive radii")
        self.dimension = q
        self.radii = radii
        self.density = density
        self.tau = float(radii[-1])
        self.surface = sphere_surface(q)
        mass = self.surface * radii ** (q - 1) * density
        self._mass_density = mass
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (mass[1:] + mass[:-1]) * np.diff(radii))])
        self._cdf = cdf

    def _cdf_at(self, x: float) -> float:
        return float(np.interp(x, self.radii, self._cdf))

    def interval_mass(self, a: float, b: float) -> float:
        return self._cdf_at(b) - self._cdf_at(a)

    def interval_radial_second_moment(self, a: float, b: float) -> float:
        grid = np.linspace(max(a, self.radii[0]), min(b, self.tau), 2001)
        md = np.interp(grid, self.radii, self._mass_density)
        return float(np.trapezoid(grid ** 2 * md, grid))

    def radial_mass_density(self, rho: np.ndarray) -> np.ndarray:
        return np.interp(rho, self.radii, self._mass_density)

    def sample_radius(self, a: float, b: float, n: int, rng) -> np.ndarray:
        lo, hi = self._cdf_at(a), self._cdf_at(b)
        if hi <= lo:
            raise LevyError("interval carries no mass")
        u = lo + rng.random(n) * (hi - lo)
        return np.interp(u, self._cdf, self.radii)


#: tail handling for the annulus decomposition
TAIL_GAUSSIANIZE = "gaussianize"
TAIL_DROP = "drop"


class AnnulusDecomposition:
    """Finite working set of annuli for sampling Z_t^eps.

    Bands cover (inner, eps] by the dyadic boundaries; the remaining
    variance below `inner` is either replaced by a matched Gaussian
    (default) or dropped when its relative contribution is below the
    tolerance.  Dropping to very small tolerances is rejected when the
    implied jump intensity is computationally absurd.
    """

    def __init__(
        self,
        spec: LevyMeasureSpec,
        eps: float,
        policy: str = TAIL_GAUSSIANIZE,
        depth: int = 6,
        drop_tol: float = 1e-6,
        max_intensity: float = 5e8,
    ):
        if not 0 < eps <= spec.tau:
            raise LevyError("eps must lie in (0, tau]")
        if policy not in (TAIL_GAUSSIANIZE, TAIL_DROP):
            raise LevyError(f"unknown tail policy {policy!r}")
        self.spec = spec
        self.eps = eps
        self.policy = policy
        self.r0 = math.ceil(-math.log2(eps))
        total_var = float(np.trace(spec.small_jump_covariance(eps)))
        if policy == TAIL_GAUSSIANIZE:
            self.R_max = self.r0 + depth - 1
        else:
            # deepest annulus whose residual variance fraction exceeds drop_tol
            R = self.r0
            while True:
                inner = 2.0 ** (-R - 1)
                resid = float(np.trace(spec.interval_covariance(0.0, inner)))
                if total_var == 0 or resid / total_var <= drop_tol:
                    break
                R += 1
                if R - self.r0 > 200:
                    raise LevyError("drop tolerance unreachable")
            self.R_max = R
        self.bands = self._build_bands()
        intensity = sum(m for _, _, m in self.bands)
        if intensity > max_intensity:
            raise LevyError(
                f"expected jump intensity {intensity:.3g} exceeds budget; "
                "raise max_intensity or use the gaussianize policy"
            )
        self.intensity = intensity
        inner = 2.0 ** (-self.R_max - 1)
        if policy == TAIL_GAUSSIANIZE:
            self.tail_covariance: Optional[np.ndarray] = spec.interval_covariance(0.0, inner)
        else:
            self.tail_covariance = None
        self.truncated_variance = float(np.trace(spec.interval_covariance(0.0, inner)))
        self.total_variance = total_var

    def _build_bands(self) -> List[Tuple[float, float, float]]:
        """(lo, hi, mass) intervals from eps down to 2^(-R_max-1)."""
        edges = [self.eps]
        r = self.r0
        while 2.0 ** (-r) >= self.eps:
            r += 1  # skip boundaries at or above eps (non-dyadic eps)
        for k in range(r, self.R_max + 1):
            edges.append(2.0 ** (-k))
        edges.append(2.0 ** (-self.R_max - 1))
        bands = []
        for hi, lo in zip(edges, edges[1:]):
            if hi <= lo:
                continue
            m = self.spec.interval_mass(lo, hi)
            if m > 0:
                bands.append((lo, hi, m))
        return bands


def annulus_mass(spec: LevyMeasureSpec, r: int) -> float:
    return spec.annulus_mass(r)


def small_jump_covariance(spec: LevyMeasureSpec, eps: float) -> np.ndarray:
    return spec.small_jump_covariance(eps)


def cramer_probe(spec: LevyMeasureSpec, r: int, rho: float, grid: np.ndarray) -> float:
    """sup over the grid of |xi_r(s)|, |s| >= rho (uniform-Cramer diagnostic)."""
    grid = np.asarray(grid, dtype=float)
    if np.any(grid < rho):
        raise LevyError("grid must lie at or beyond rho")
    return float(np.max(spec.conditional_char(r, grid)))


def cramer_amplify(rho: float, gamma: float, delta: float) -> float:
    """Decay rate valid on all of |s| >= delta from one valid beyond rho.

    Covering [delta, rho+1] by N = floor((rho+1)/delta) dilations gives
    gamma_bar = 1 - (1-gamma) delta^2 / (rho+1)^2.
    """
    if not 0 < gamma < 1:
        raise LevyError("gamma must lie in (0,1)")
    if not 0 < delta < min(rho, 1.0):
        raise LevyError("delta must lie in (0, min(rho,1))")
    return 1.0 - (1.0 - gamma) * delta ** 2 / (rho + 1.0) ** 2


def sufficient_condition_check(
    spec: LevyMeasureSpec,
    r: int,
    a: float,
    b: float,
    n_cells: int = 64,
    rng=None,
    trials: int = 200,
) -> bool:
    """Falsification test: Lebesgue fraction >= a forces nu fraction >= b?

    Partitions the annulus into n_cells radial shells of equal Lebesgue
    volume and tests cell unions: the exact adversarial union (smallest
    nu mass at the required Lebesgue fraction) plus random unions.
    Returns False the moment any union violates the implication.
    """
    if not (0 < a < 1 and 0 < b < 1):
        raise LevyError("a, b must lie in (0,1)")
    lo, hi = spec.annulus_bounds(r)
    if lo >= hi:
        raise LevyError("empty annulus")
    q = spec.dimension
    # equal-Lebesgue-volume radial boundaries
    bounds = (lo ** q + (np.arange(n_cells + 1) / n_cells) * (hi ** q - lo ** q)) ** (1.0 / q)
    masses = np.array([spec.interval_mass(x, y) for x, y in zip(bounds, bounds[1:])])
    total = masses.sum()
    need = math.ceil(a * n_cells)
    worst = np.sort(masses)[:need].sum() / total
    if worst < b:
        return False
    if rng is None:
        rng = np.random.default_rng(0)
    for _ in range(trials):
        k = rng.integers(need, n_cells + 1)
        pick = rng.choice(n_cells, size=k, replace=False)
        if masses[pick].sum() / total < b:
            return False
    return True


def measure_from_config(cfg: dict) -> LevyMeasureSpec:
    """Build a measure from flat config keys (kind, q, alpha, tau, ...)."""
    kind = cfg.get("kind", "stable-like")
    q = int(cfg.get("q", 2))
    if kind == "stable-like":
        return StableLikeMeasure(q, float(cfg.get("alpha", 1.5)), float(cfg.get("tau", 1.0)))
    if kind == "custom-radial":
        radii = [float(x) for x in str(cfg["radii"]).split(",")]
        density = [float(x) for x in str(cfg["density"]).split(",")]
        return CustomRadialMeasure(q, radii, density)
    raise LevyError(f"unknown measure kind {kind!r}")
