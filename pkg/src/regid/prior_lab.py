"""Sampling the priors that the penalties induce.

A penalty J defines an unnormalized prior density exp(-J(g) / 2 lambda).
For the quadratic kernel penalties that prior is Gaussian and can be drawn
exactly. The Hankel nuclear norm induces a prior that is not Gaussian; a
separable approximation replaces each coefficient's contribution by its
anti-diagonal multiplicity, giving independent g_k ~ N(0, lambda / min(k,
m - k + 1)), and the exact prior is then sampled by random-walk Metropolis
whose increments are full draws from that approximation.

The walk cannot start at g = 0: the mode's density exceeds the typical
set's by a factor of order e^m, so every early proposal would be rejected
and a finite chain would never move. Chains therefore start from a rescaled
approximation draw whose Hankel nuclear norm equals m - 1, the radial
typical value of the exact prior.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import DegenerateVariance, LengthMismatch
from .kernels import Hyperparameters, build_regularization_matrix

__all__ = [
    "PriorSpec",
    "ChainSummary",
    "sample_gaussian_approx",
    "hankel_log_prior",
    "run_metropolis",
    "sample_exact",
    "summarize_chain",
]

PRIOR_KINDS = ("hankel_exact", "hankel_gaussian_approx", "kernel_gaussian")

DEFAULT_THIN = 100
LOW_ACCEPTANCE = 0.01


@dataclass(frozen=True)
class PriorSpec:
    """Which prior to sample, at which dimensions and scale.

    ``two_lambda`` is the 2 lambda in the exponent. Hankel kinds need the
    block size p with m = 2p - 1; the kernel kind instead carries the
    kernel name and its hyperparameters.
    """

    kind: str
    m: int
    p: int = None
    two_lambda: float = 1.0
    kernel_kind: str = None
    eta: Hyperparameters = None

    def __post_init__(self):
        if self.kind not in PRIOR_KINDS:
            raise ValueError(f"unknown prior kind {self.kind!r}")
        if self.two_lambda <= 0:
            raise ValueError(f"two_lambda must be positive, got {self.two_lambda}")
        if self.kind == "kernel_gaussian":
            if self.kernel_kind is None or self.eta is None:
                raise ValueError("kernel_gaussian needs kernel_kind and eta")
            self.eta.validate(self.kernel_kind)
        else:
            if self.p is None or self.m != 2 * self.p - 1:
                raise LengthMismatch(
                    f"Hankel priors need m = 2p - 1, got m={self.m}, p={self.p}"
                )


@dataclass
class ChainSummary:
    coefficient_std: np.ndarray
    correlation_row: np.ndarray
    acceptance_rate: float
    chain_length: int
    burn_in: int
    row_index: int
    thinned: np.ndarray = field(default=None, repr=False)


def _multiplicities(m):
    k = np.arange(1, m + 1)
    return np.minimum(k, m - k + 1).astype(float)


def sample_gaussian_approx(m, lam, count, seed):
    """i.i.d. draws from the separable surrogate of the Hankel prior.

    Coordinate k is N(0, lam / min(k, m - k + 1)): variance decays toward
    the middle of the response and climbs back out, the bathtub profile.
    """
    if m < 1 or m % 2 == 0:
        raise LengthMismatch(f"m must be positive and odd, got {m}")
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(seed)
    sd = np.sqrt(lam / _multiplicities(m))
    return rng.standard_normal((count, m)) * sd


@njit(cache=True)
def _sym_hankel_nuclear(v, p):
    # the Hankel matrix of v is symmetric, so the nuclear norm is the
    # absolute eigenvalue sum
    H = np.empty((p, p))
    for i in range(p):
        for j in range(p):
            H[i, j] = v[i + j]
    lam = np.linalg.eigvalsh(H)
    tot = 0.0
    for i in range(p):
        tot += abs(lam[i])
    return tot


def hankel_log_prior(g, p, two_lambda):
    """Unnormalized log density -||H(g)||_* / two_lambda."""
    g = np.ascontiguousarray(g, dtype=float)
    if g.shape[0] != 2 * p - 1:
        raise LengthMismatch(f"{g.shape[0]} samples for block size {p}")
    return -_sym_hankel_nuclear(g, p) / two_lambda


@njit(cache=True)
def _metropolis_chain(rng, sd, mult, p, two_lambda, exact, length, burn,
                      thin, row):
    m = sd.shape[0]
    g = sd * rng.standard_normal(m)
    if exact:
        nn = _sym_hankel_nuclear(g, p)
        if nn > 0.0:
            g *= (m - 1.0) / nn
        lp = -_sym_hankel_nuclear(g, p) / two_lambda
    else:
        q = 0.0
        for k in range(m):
            q += mult[k] * g[k] * g[k]
        lp = -q / two_lambda
    accepted = 0
    count = 0
    s1 = np.zeros(m)
    s2 = np.zeros(m)
    sx = np.zeros(m)
    kept = np.empty(((length + thin - 1) // thin, m))
    ki = 0
    for step in range(length):
        if step > 0:
            h = g + sd * rng.standard_normal(m)
            if exact:
                lph = -_sym_hankel_nuclear(h, p) / two_lambda
            else:
                q = 0.0
                for k in range(m):
                    q += mult[k] * h[k] * h[k]
                lph = -q / two_lambda
            if np.log(rng.random()) < lph - lp:
                g = h
                lp = lph
                accepted += 1
        if step % thin == 0:
            for k in range(m):
                kept[ki, k] = g[k]
            ki += 1
        if step >= burn:
            gr = g[row]
            for k in range(m):
                s1[k] += g[k]
                s2[k] += g[k] * g[k]
                sx[k] += g[k] * gr
            count += 1
    return accepted, count, s1, s2, sx, kept[:ki]


def _correlation_from_moments(count, s1, s2, sx, row):
    mean = s1 / count
    var = (s2 - count * mean**2) / (count - 1)
    std = np.sqrt(np.maximum(var, 0.0))
    if std[row] == 0.0:
        raise DegenerateVariance(f"coordinate {row} has zero sample variance")
    cov = (sx - count * mean * mean[row]) / (count - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = cov / (std * std[row])
    corr[std == 0.0] = np.nan  # undefined against a flat coordinate
    corr[row] = 1.0
    return std, corr


def run_metropolis(spec, length, seed, row_index=None, keep_thinned=False,
                   thin=DEFAULT_THIN):
    """Random-walk Metropolis over a Hankel prior; summary of the tail.

    The chain holds ``length`` states: the typical-set initializer followed
    by length - 1 transitions with approximation draws as increments and
    log-space acceptance. The first 10% burns in; standard deviations and
    the requested correlation row come from the remainder. Every ``thin``-th
    state (burn-in included) is retained when ``keep_thinned`` asks for it.
    An acceptance rate below 1% only warns: the proposal follows the
    approximation scheme and is never auto-tuned.
    """
    if spec.kind == "kernel_gaussian":
        raise ValueError("Gaussian priors are drawn exactly; use sample_exact")
    if length < 10_000:
        raise ValueError(f"need at least 10^4 states, got {length}")
    m = spec.m
    row = (m + 1) // 2 - 1 if row_index is None else int(row_index)
    if not 0 <= row < m:
        raise LengthMismatch(f"row {row} outside 0..{m - 1}")
    mult = _multiplicities(m)
    sd = np.sqrt(0.5 * spec.two_lambda / mult)
    accepted, count, s1, s2, sx, kept = _metropolis_chain(
        np.random.default_rng(seed), sd, mult, spec.p or 0, spec.two_lambda,
        spec.kind == "hankel_exact", int(length), int(length) // 10,
        int(thin), row,
    )
    rate = accepted / (length - 1)
    if rate < LOW_ACCEPTANCE:
        warnings.warn(
            f"Metropolis acceptance rate {rate:.2%} is below 1%; "
            "the untuned full-scale proposal mixes slowly at this size",
            stacklevel=2,
        )
    std, corr = _correlation_from_moments(count, s1, s2, sx, row)
    return ChainSummary(
        coefficient_std=std,
        correlation_row=corr,
        acceptance_rate=rate,
        chain_length=int(length),
        burn_in=int(length) // 10,
        row_index=row,
        thinned=kept if keep_thinned else None,
    )


def sample_exact(spec, count, seed):
    """Exact draws for the Gaussian prior kinds."""
    if spec.kind == "hankel_gaussian_approx":
        return sample_gaussian_approx(spec.m, 0.5 * spec.two_lambda, count, seed)
    if spec.kind == "kernel_gaussian":
        P = build_regularization_matrix(spec.kernel_kind, spec.eta, spec.m)
        lam, Q = np.linalg.eigh(0.5 * spec.two_lambda * P.entries)
        B = (Q * np.sqrt(np.maximum(lam, 0.0))) @ Q.T
        rng = np.random.default_rng(seed)
        return rng.standard_normal((count, spec.m)) @ B
    raise ValueError("the exact Hankel prior needs run_metropolis")


def summarize_chain(samples, row_index=None):
    """Per-coordinate standard deviations plus one correlation row.

    Correlations against a zero-variance coordinate are undefined: the
    pivot row raises DegenerateVariance, other flat coordinates show NaN.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[0] < 2:
        raise LengthMismatch("need a (count, m) sample matrix with count >= 2")
    n, m = samples.shape
    row = (m + 1) // 2 - 1 if row_index is None else int(row_index)
    if not 0 <= row < m:
        raise LengthMismatch(f"row {row} outside 0..{m - 1}")
    std, corr = _correlation_from_moments(
        n,
        samples.sum(axis=0),
        (samples**2).sum(axis=0),
        (samples * samples[:, row][:, None]).sum(axis=0),
        row,
    )
    return ChainSummary(
        coefficient_std=std,
        correlation_row=corr,
        acceptance_rate=None,
        chain_length=n,
        burn_in=0,
        row_index=row,
    )
