"""Stable-kernel regularization matrices and the sine expansion of the
first-order stable-spline kernel.

Five kernels are supported, all parameterized by a scale ``lam`` and decay
rates in [0, 1]:

====  ==============================================================
TC    lam * a^max(k,j)
SS    lam * (a^(k+j+max(k,j))/2 - a^(3 max(k,j))/6)
iTC   TC averaged over a in [a_min, a_max]
iSS   SS averaged over a in [a_min, a_max]
iTS   iTC + iSS
====  ==============================================================

The i-kernels are the exact antiderivative forms of integrating the TC and
SS entries over the decay rate, so they need no quadrature at build time.

``truncated_expansion_kernel`` evaluates the series

    a^max(s,t) = sum_j zeta_j rho_j(s) rho_j(t),
    rho_j(t) = sqrt(2) sin(a^t / sqrt(zeta_j)),  zeta_j = 1/(j pi - pi/2)^2,

whose partial sums converge entrywise to the TC matrix at lam = 1.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidHyper, OrderZero

__all__ = [
    "Hyperparameters",
    "RegularizationMatrix",
    "SpectralAtom",
    "KERNEL_KINDS",
    "build_regularization_matrix",
    "stable_spline_atom",
    "truncated_expansion_kernel",
]

KERNEL_KINDS = ("tc", "ss", "itc", "iss", "its")

# Kinds parameterized by a single decay rate vs. a decay-rate interval.
_POINT_KINDS = ("tc", "ss")
_INTERVAL_KINDS = ("itc", "iss", "its")


@dataclass(frozen=True)
class Hyperparameters:
    """Kernel hyperparameters: scale and decay rate(s).

    ``alpha`` is used by tc/ss; ``alpha_min``/``alpha_max`` by itc/iss/its.
    Unused fields stay None. Decay rates live in the closed interval [0, 1];
    stability of the induced impulse responses needs values strictly below 1.
    """

    lam: float
    alpha: float | None = None
    alpha_min: float | None = None
    alpha_max: float | None = None

    def validate(self, kind):
        kind = _check_kind(kind)
        if not np.isfinite(self.lam) or self.lam < 0:
            raise InvalidHyper(f"lam must be finite and >= 0, got {self.lam}")
        if kind in _POINT_KINDS:
            if self.alpha is None:
                raise InvalidHyper(f"kind {kind!r} needs alpha")
            if not 0.0 <= self.alpha <= 1.0:
                raise InvalidHyper(f"alpha must lie in [0, 1], got {self.alpha}")
        else:
            if self.alpha_min is None or self.alpha_max is None:
                raise InvalidHyper(f"kind {kind!r} needs alpha_min and alpha_max")
            if not 0.0 <= self.alpha_min <= self.alpha_max <= 1.0:
                raise InvalidHyper(
                    "need 0 <= alpha_min <= alpha_max <= 1, got "
                    f"[{self.alpha_min}, {self.alpha_max}]"
                )
        return self

    def astuple(self, kind):
        """Ordered tuple of the fields this kind actually uses."""
        if kind in _POINT_KINDS:
            return (self.lam, self.alpha)
        return (self.lam, self.alpha_min, self.alpha_max)


@dataclass(frozen=True)
class RegularizationMatrix:
    """A symmetric PSD prior covariance over FIR coefficients."""

    entries: np.ndarray
    kind: str
    hyper: Hyperparameters
    order: int


@dataclass(frozen=True)
class SpectralAtom:
    """One term of the sine expansion: weight zeta_j and samples of rho_j."""

    index: int
    weight: float
    alpha: float
    samples: np.ndarray


def _check_kind(kind):
    k = str(kind).lower()
    if k not in KERNEL_KINDS:
        raise InvalidHyper(f"unknown kernel kind {kind!r}; expected one of {KERNEL_KINDS}")
    return k


def _max_grid(m):
    idx = np.arange(1, m + 1, dtype=float)
    return np.maximum.outer(idx, idx), np.add.outer(idx, idx)


def _tc_unit(alpha, m):
    mx, _ = _max_grid(m)
    return alpha**mx


def _ss_unit(alpha, m):
    mx, sm = _max_grid(m)
    return alpha ** (sm + mx) / 2.0 - alpha ** (3.0 * mx) / 6.0


def _itc_unit(a_min, a_max, m):
    # antiderivative of a^max over a: a^(max+1)/(max+1)
    mx, _ = _max_grid(m)
    e = mx + 1.0
    return (a_max**e - a_min**e) / e


def _iss_unit(a_min, a_max, m):
    # antiderivative of the SS entry: a^(k+j+max+1)/(2(k+j+max+1)) - a^(3max+1)/(18max+6)
    mx, sm = _max_grid(m)
    e1 = sm + mx + 1.0
    e2 = 3.0 * mx + 1.0
    hi = a_max**e1 / (2.0 * e1) - a_max**e2 / (18.0 * mx + 6.0)
    lo = a_min**e1 / (2.0 * e1) - a_min**e2 / (18.0 * mx + 6.0)
    return hi - lo


def build_regularization_matrix(kind, hyper, m):
    """Build the m x m regularization matrix P for the given kind.

    An interval with alpha_min = alpha_max is accepted and yields the zero
    matrix (the degenerate limit of the average).
    """
    kind = _check_kind(kind)
    if m < 1:
        raise OrderZero(f"order must be >= 1, got {m}")
    hyper.validate(kind)
    if kind == "tc":
        base = _tc_unit(hyper.alpha, m)
    elif kind == "ss":
        base = _ss_unit(hyper.alpha, m)
    elif kind == "itc":
        base = _itc_unit(hyper.alpha_min, hyper.alpha_max, m)
    elif kind == "iss":
        base = _iss_unit(hyper.alpha_min, hyper.alpha_max, m)
    else:  # its: sum of the scaled itc and iss matrices, bit for bit
        entries = hyper.lam * _itc_unit(
            hyper.alpha_min, hyper.alpha_max, m
        ) + hyper.lam * _iss_unit(hyper.alpha_min, hyper.alpha_max, m)
        return RegularizationMatrix(entries, kind, hyper, m)
    return RegularizationMatrix(hyper.lam * base, kind, hyper, m)


def stable_spline_atom(j, alpha, m):
    """Sample rho_j(t) = sqrt(2) sin(alpha^t / sqrt(zeta_j)) on t = 1..m."""
    if j < 1:
        raise InvalidHyper(f"atom index must be >= 1, got {j}")
    if not 0.0 <= alpha <= 1.0:
        raise InvalidHyper(f"alpha must lie in [0, 1], got {alpha}")
    if m < 1:
        raise OrderZero(f"order must be >= 1, got {m}")
    theta = j * np.pi - np.pi / 2.0  # 1/sqrt(zeta_j)
    zeta = 1.0 / theta**2
    t = np.arange(1, m + 1, dtype=float)
    samples = np.sqrt(2.0) * np.sin(alpha**t * theta)
    return SpectralAtom(index=j, weight=zeta, alpha=alpha, samples=samples)


def truncated_expansion_kernel(alpha, m, J):
    """Partial sum of the sine expansion: sum_{j<=J} zeta_j rho_j(s) rho_j(t).

    Converges entrywise to the TC matrix at lam = 1 as J grows; the max-entry
    error decays like 1/(pi^2 J).
    """
    if J < 1:
        raise InvalidHyper(f"truncation count must be >= 1, got {J}")
    if m < 1:
        raise OrderZero(f"order must be >= 1, got {m}")
    if not 0.0 <= alpha <= 1.0:
        raise InvalidHyper(f"alpha must lie in [0, 1], got {alpha}")
    j = np.arange(1, J + 1, dtype=float)
    theta = j * np.pi - np.pi / 2.0
    zeta = 1.0 / theta**2
    t = np.arange(1, m + 1, dtype=float)
    R = np.sqrt(2.0) * np.sin(np.outer(alpha**t, theta))  # (m, J)
    return (R * zeta) @ R.T
