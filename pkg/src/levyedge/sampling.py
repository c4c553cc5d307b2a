"""Seeded sampling: Gaussians, perturbed normals, and Levy increments.

Streams are counter-based (Philox keyed by master seed and stream id),
so any (master_seed, stream_id) pair reproduces its draws exactly and
distinct ids are independent.  Stream ids for experiment grids come from
a splitmix-style hash of (replicate, step, purpose), letting replicates
and timesteps be generated in any order or in parallel.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .levy import AnnulusDecomposition, LevyMeasureSpec, TAIL_GAUSSIANIZE
from .perturbation import GradientPolyMap


class SamplingError(ValueError):
    pass


_MASK = (1 << 64) - 1


def derive_stream_id(replicate: int, step: int, purpose: str = "") -> int:
    """Splitmix64-style mix of the grid coordinates into one stream id."""
    h = (replicate & _MASK) * 0x9E3779B97F4A7C15 & _MASK
    h ^= (step & _MASK) * 0xBF58476D1CE4E5B9 & _MASK
    for ch in purpose:
        h = (h ^ ord(ch)) * 0x94D049BB133111EB & _MASK
    h ^= h >> 31
    h = h * 0xD6E8FEB86659FD93 & _MASK
    h ^= h >> 32
    return h


class RngStream:
    """One reproducible stream: Philox keyed by (master_seed, stream_id)."""

    def __init__(self, master_seed: int, stream_id: int = 0):
        self.master_seed = master_seed & _MASK
        self.stream_id = stream_id & _MASK
        self.generator = np.random.Generator(
            np.random.Philox(key=[self.master_seed, self.stream_id])
        )

    def child(self, replicate: int, step: int = 0, purpose: str = "") -> "RngStream":
        return RngStream(self.master_seed, derive_stream_id(replicate, step, purpose))

    def __getattr__(self, name):
        # delegate draw methods (standard_normal, poisson, random, ...)
        return getattr(self.generator, name)


def _as_generator(rng):
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    raise SamplingError("rng must be an RngStream or numpy Generator")


def sym_sqrt(sigma: np.ndarray) -> np.ndarray:
    """The symmetric PSD square root of a PSD matrix."""
    sigma = np.asarray(sigma, dtype=float)
    w, v = np.linalg.eigh(0.5 * (sigma + sigma.T))
    if w.min() < -1e-10 * max(w.max(), 1.0):
        raise SamplingError("matrix is not positive semi-definite")
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def sample_gaussian(sigma, rng, n: Optional[int] = None) -> np.ndarray:
    """Draw from N(0, sigma) via the symmetric square root."""
    g = _as_generator(rng)
    root = sym_sqrt(sigma)
    q = root.shape[0]
    if n is None:
        return root @ g.standard_normal(q)
    return g.standard_normal((n, q)) @ root.T


def sample_perturbed_normal(
    pmap: GradientPolyMap, eps: float, r: int, rng, n: Optional[int] = None
) -> np.ndarray:
    """xi + sum_{k<=r} eps^k p_k(xi) for xi ~ N(0, Sigma of the map)."""
    if r < 0 or r > pmap.order:
        raise SamplingError("r must lie in [0, map order]")
    sigma = np.array([[float(x) for x in row] for row in pmap.sigma])
    xi = sample_gaussian(sigma, rng, n)
    out = xi.copy()
    x = xi if n is not None else xi[None, :]
    o = out if n is not None else out[None, :]
    for k in range(1, r + 1):
        p = pmap.gradients[k - 1]
        for j in range(pmap.dimension):
            o[:, j] += eps ** k * p[j](x)
    return out


def sample_compound_poisson(
    intensity: float, jump_sampler, mean_jump, t: float, rng, n: int = 1
) -> np.ndarray:
    """n draws of a compensated compound Poisson value at time t.

    jump_sampler(count, rng) returns (count, q) jumps; mean_jump is the
    jump-law mean used for the compensator t * intensity * E X.
    """
    if intensity < 0:
        raise SamplingError("intensity must be nonnegative")
    g = _as_generator(rng)
    mean_jump = np.atleast_1d(np.asarray(mean_jump, dtype=float))
    q = mean_jump.shape[0]
    out = np.zeros((n, q))
    if intensity > 0 and t > 0:
        counts = g.poisson(t * intensity, size=n)
        # chunk the flat jump array to keep memory bounded
        budget = 1 << 23
        start = 0
        while start < n:
            stop = start
            block = 0
            while stop < n and (block == 0 or block + counts[stop] <= budget):
                block += counts[stop]
                stop += 1
            if block:
                jumps = np.asarray(jump_sampler(int(block), g), dtype=float).reshape(int(block), q)
                idx = np.repeat(np.arange(start, stop), counts[start:stop])
                np.add.at(out, idx, jumps)
            start = stop
        out -= t * intensity * mean_jump
    return out


def sample_small_jumps(
    spec: LevyMeasureSpec, decomposition: AnnulusDecomposition, t: float, rng, n: int = 1
) -> np.ndarray:
    """n draws of the compensated small-jump value Z_t^eps.

    Sums one compound-Poisson draw per band of the decomposition; the
    sub-resolution tail is a matched Gaussian or dropped per the policy.
    """
    g = _as_generator(rng)
    q = spec.dimension
    out = np.zeros((n, q))
    for lo, hi, mass in decomposition.bands:
        out += sample_compound_poisson(
            mass,
            lambda c, gg, lo=lo, hi=hi: spec.sample_interval(lo, hi, c, gg),
            np.zeros(q),
            t,
            g,
            n,
        )
    if decomposition.policy == TAIL_GAUSSIANIZE and t > 0:
        tail = decomposition.tail_covariance
        if np.trace(tail) > 0:
            out += sample_gaussian(t * tail, g, n)
    return out


MODE_EXACT = "exact"
MODE_GAUSSIANIZED = "gaussianized"
MODE_PERTURBED = "perturbed"


def sample_levy_increment(
    a: Sequence[float],
    B: np.ndarray,
    spec: LevyMeasureSpec,
    eps: float,
    h: float,
    mode: str,
    rng,
    n: int = 1,
    decomposition: Optional[AnnulusDecomposition] = None,
    pert_map: Optional[GradientPolyMap] = None,
    pert_eps: Optional[float] = None,
    pert_order: int = 1,
) -> np.ndarray:
    """n draws of the one-step driving increment over time h.

    exact: a h + B W_h + Z_h^eps + big jumps.  gaussianized: the
    small-jump block becomes sqrt(h) xi_{Sigma_eps}, folded into an
    adjusted diffusion root (B Bt + Sigma_eps)^(1/2); the drift absorbs
    the big-jump compensator.  perturbed: the Gaussian surrogate is
    post-composed with a gradient perturbation of the standard normal,
    pushing its law beyond the plain central-limit order.
    """
    if not (0 < h and 0 < eps <= spec.tau):
        raise SamplingError("need h > 0 and eps in (0, tau]")
    g = _as_generator(rng)
    a = np.atleast_1d(np.asarray(a, dtype=float))
    B = np.asarray(B, dtype=float)
    q = spec.dimension
    out = np.tile(a * h, (n, 1))

    big_mass = spec.big_jump_mass(eps)
    # isotropic support means the big-jump compensator vanishes; kept
    # explicit so the drift adjustment survives a non-centered extension
    big_mean = np.zeros(q)
    out -= h * big_mass * big_mean

    if mode == MODE_EXACT:
        out += np.sqrt(h) * sample_gaussian(B @ B.T, g, n)
        if decomposition is None:
            decomposition = AnnulusDecomposition(spec, eps)
        out += sample_small_jumps(spec, decomposition, h, g, n)
    elif mode in (MODE_GAUSSIANIZED, MODE_PERTURBED):
        sig_eps = spec.small_jump_covariance(eps)
        if mode == MODE_GAUSSIANIZED:
            bbar = sym_sqrt(B @ B.T + sig_eps)
            out += np.sqrt(h) * (g.standard_normal((n, q)) @ bbar.T)
        else:
            if pert_map is None:
                raise SamplingError("perturbed mode needs a gradient map")
            e = pert_eps if pert_eps is not None else 1.0
            y = sample_perturbed_normal(pert_map, e, pert_order, g, n)
            out += np.sqrt(h) * (y @ sym_sqrt(sig_eps).T)
            out += np.sqrt(h) * sample_gaussian(B @ B.T, g, n)
    else:
        raise SamplingError(f"unknown mode {mode!r}")

    if big_mass > 0:
        out += sample_compound_poisson(
            big_mass,
            lambda c, gg: spec.sample_interval(eps, spec.tau, c, gg),
            big_mean,
            h,
            g,
            n,
        )
    return out
