"""Synthetic-system playground: random rational systems, filtered inputs,
noisy datasets, fit scoring, MISO ARX regressions, and the Monte Carlo
benchmark harness that drives every estimator over many random runs.

Random generation draws through a caller-supplied Generator in a documented
order (denominator, numerator, then input filter, then noise), so a run is
reproducible from its seed alone and estimators never touch the stream.
"""

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .errors import (
    HorizonTooLong,
    LengthMismatch,
    OrderZero,
    RegidError,
    ZeroOutputVariance,
    ZeroTruth,
)
from .kernel_estimator import lagged_matrix

__all__ = [
    "RationalSystem",
    "Dataset",
    "BenchmarkConfig",
    "RunRecord",
    "M_TRUTH",
    "KERNEL_ESTIMATORS",
    "ALL_ESTIMATORS",
    "generate_system",
    "generate_input",
    "synthesize_dataset",
    "fit_score",
    "build_miso_arx",
    "k_step_fit",
    "run_benchmark",
    "summarize_records",
]

M_TRUTH = 500
POLE_LIMIT = 0.95
ZERO_LIMIT = 2.0
TAIL_RTOL = 1e-8

KERNEL_ESTIMATORS = ("its", "itc", "iss", "tc", "ss")
ALL_ESTIMATORS = KERNEL_ESTIMATORS + (
    "hankel_cv", "hankel_or", "atomic_cv", "atomic_or",
)


@dataclass(frozen=True)
class RationalSystem:
    """A random stable transfer function and its realized FIR truncation."""

    poles: np.ndarray
    zeros: np.ndarray
    gain: float
    fir: np.ndarray

    @property
    def order(self):
        return self.poles.shape[0]

    def tail_ok(self):
        peak = float(np.max(np.abs(self.fir)))
        return peak > 0.0 and abs(float(self.fir[-1])) < TAIL_RTOL * peak


@dataclass
class Dataset:
    u: np.ndarray
    y: np.ndarray
    y_clean: np.ndarray
    noise_variance: float
    snr: float


def _coin_flip_roots(rng, order, limit):
    # a real root or a conjugate pair with equal probability, repeated
    # until the degree is filled; a single remaining slot forces real
    roots = []
    remaining = order
    while remaining > 0:
        if remaining >= 2 and rng.random() < 0.5:
            mag = rng.uniform(0.0, limit)
            phase = rng.uniform(0.0, np.pi)
            root = mag * np.exp(1j * phase)
            roots.extend([root, np.conj(root)])
            remaining -= 2
        else:
            roots.append(complex(rng.uniform(-limit, limit)))
            remaining -= 1
    return np.array(roots)


def generate_system(order=30, rng=None):
    """Random stable system: coin-flip pole/zero placement, monic in both.

    The equal-degree monic ratio has a unit direct term; the measurement
    model's convolution is strictly causal, so the realized FIR keeps the
    strictly causal part only, lags 1 through 500.
    """
    if order < 1:
        raise OrderZero(f"system order must be >= 1, got {order}")
    rng = np.random.default_rng() if rng is None else rng
    poles = _coin_flip_roots(rng, order, POLE_LIMIT)
    zeros = _coin_flip_roots(rng, order, ZERO_LIMIT)
    a = np.real(np.poly(poles))
    b = np.real(np.poly(zeros))
    impulse = np.zeros(M_TRUTH + 1)
    impulse[0] = 1.0
    fir = lfilter(b, a, impulse)[1:]
    return RationalSystem(poles=poles, zeros=zeros, gain=1.0, fir=fir)


def generate_input(N, rng=None, magnitude=None, phase=None):
    """White noise through a random resonant 2nd-order filter, unit gain.

    The conjugate pole pair has magnitude uniform on [0.5, 0.95] and phase
    uniform on [0, pi]; the filter's impulse response is normalized to unit
    energy and the state starts at rest. Explicit ``magnitude``/``phase``
    pin the filter instead of drawing it.
    """
    if N < 1:
        raise LengthMismatch(f"need N >= 1 samples, got {N}")
    rng = np.random.default_rng() if rng is None else rng
    if magnitude is None:
        magnitude = rng.uniform(0.5, POLE_LIMIT)
    if phase is None:
        phase = rng.uniform(0.0, np.pi)
    a = np.array([1.0, -2.0 * magnitude * np.cos(phase), magnitude**2])
    probe = np.zeros(1000)
    probe[0] = 1.0
    scale = float(np.linalg.norm(lfilter([1.0], a, probe)))
    e = rng.standard_normal(N)
    return lfilter([1.0], a, e) / scale


def _causal_convolve(g, u):
    # strictly causal: output t sums g_k u_{t-k} for k >= 1, system at rest
    N = u.shape[0]
    full = np.convolve(u, g)[: N - 1] if N > 1 else np.empty(0)
    return np.concatenate(([0.0], full))


def synthesize_dataset(system, u, snr, rng=None):
    """Noiseless response plus white Gaussian noise at the requested SNR."""
    if snr <= 0:
        raise ValueError(f"snr must be positive, got {snr}")
    u = np.asarray(u, dtype=float)
    rng = np.random.default_rng() if rng is None else rng
    y_clean = _causal_convolve(system.fir, u)
    var0 = float(np.var(y_clean))
    if var0 == 0.0:
        raise ZeroOutputVariance("noiseless output has no variance")
    noise_variance = var0 / snr
    y = y_clean + np.sqrt(noise_variance) * rng.standard_normal(u.shape[0])
    return Dataset(
        u=u, y=y, y_clean=y_clean, noise_variance=noise_variance, snr=float(snr)
    )


def fit_score(true_g, est_g):
    """Percent impulse-response fit, 100 (1 - ||g - ghat|| / ||g||).

    Responses of different lengths are zero-padded to the longer one, which
    matches comparing truncated estimates against a long reference window.
    """
    true_g = np.asarray(true_g, dtype=float).ravel()
    est_g = np.asarray(est_g, dtype=float).ravel()
    L = max(true_g.shape[0], est_g.shape[0])
    a = np.zeros(L)
    b = np.zeros(L)
    a[: true_g.shape[0]] = true_g
    b[: est_g.shape[0]] = est_g
    denom = float(np.linalg.norm(a))
    if denom == 0.0:
        raise ZeroTruth("reference response is identically zero")
    return 100.0 * (1.0 - float(np.linalg.norm(a - b)) / denom)


def build_miso_arx(y, inputs, m):
    """Stacked one-step ARX regression: lagged output block first, then one
    block of lagged columns per input, all sharing the kernel."""
    from .kernel_estimator import RegressionProblem

    y = np.asarray(y, dtype=float)
    blocks = [lagged_matrix(y, m)]
    for j, u in enumerate(inputs):
        u = np.asarray(u, dtype=float)
        if u.shape[0] != y.shape[0]:
            raise LengthMismatch(
                f"input {j + 1} has {u.shape[0]} samples, y has {y.shape[0]}"
            )
        blocks.append(lagged_matrix(u, m))
    return RegressionProblem(
        Phi=np.hstack(blocks), Y=y.copy(), n_blocks=len(blocks)
    )


def k_step_fit(g_blocks, y, inputs, k):
    """Prediction fit on test data, feeding predictions back for k steps.

    ``g_blocks`` stacks the one-step predictor responses, output block
    first. The j-step prediction at time t uses measured outputs up to
    t - j and the chain of shorter-horizon predictions in between; inputs
    are known throughout. Scored from time k on, against raw output energy.
    """
    g_blocks = np.asarray(g_blocks, dtype=float)
    y = np.asarray(y, dtype=float)
    N = y.shape[0]
    if k < 1:
        raise ValueError(f"horizon must be >= 1, got {k}")
    if k >= N:
        raise HorizonTooLong(f"horizon {k} reaches past {N} test samples")
    if g_blocks.shape[0] != len(inputs) + 1:
        raise LengthMismatch(
            f"{g_blocks.shape[0]} responses for {len(inputs)} inputs"
        )
    m = g_blocks.shape[1]
    g1 = g_blocks[0]
    driven = np.zeros(N)
    for j, u in enumerate(inputs):
        u = np.asarray(u, dtype=float)
        if u.shape[0] != N:
            raise LengthMismatch(
                f"input {j + 1} has {u.shape[0]} samples, y has {N}"
            )
        driven += _causal_convolve(g_blocks[j + 1], u)
    lagged_y = lagged_matrix(y, m)
    preds = np.empty((k, N))
    preds[0] = lagged_y @ g1 + driven
    for j in range(2, k + 1):
        # measured outputs are only available at lags >= j
        acc = lagged_y[:, j - 1 :] @ g1[j - 1 :] + driven
        for l in range(1, min(j, m + 1)):
            acc[l:] += g1[l - 1] * preds[j - l - 1][:-l]
        preds[j - 1] = acc
    err = y[k - 1 :] - preds[k - 1][k - 1 :]
    energy = float(np.linalg.norm(y[k - 1 :]))
    if energy == 0.0:
        raise ZeroTruth("test output is identically zero")
    return 100.0 * (1.0 - float(np.linalg.norm(err)) / energy)


@dataclass(frozen=True)
class BenchmarkConfig:
    runs: int
    N: int = 300
    order: int = 30
    seed: int = 0
    estimators: tuple = ALL_ESTIMATORS
    snr_range: tuple = (1.0, 10.0)
    m: int = 100

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError(f"need at least one run, got {self.runs}")
        lo, hi = self.snr_range
        if not 0 < lo <= hi:
            raise ValueError(f"snr bounds must be positive, got {self.snr_range}")
        unknown = set(self.estimators) - set(ALL_ESTIMATORS)
        if unknown:
            raise ValueError(f"unknown estimators: {sorted(unknown)}")


@dataclass
class RunRecord:
    index: int
    seed: int
    snr: float
    fits: dict = field(default_factory=dict)  # name -> float or None
    hypers: dict = field(default_factory=dict)
    times: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)


def _eta_record(eta):
    return {
        k: v
        for k, v in (
            ("lam", eta.lam),
            ("alpha", eta.alpha),
            ("alpha_min", eta.alpha_min),
            ("alpha_max", eta.alpha_max),
        )
        if v is not None
    }


def _run_estimator(name, ds, system, m):
    from .atomic import fit_atomic_estimate
    from .hankel import fit_hankel_estimate
    from .kernel_estimator import fit_kernel_estimate

    if name in KERNEL_ESTIMATORS:
        rep = fit_kernel_estimate(ds.u, ds.y, name, m=m)
        return rep.g_hat, _eta_record(rep.eta_hat)
    if name.startswith("hankel"):
        res = fit_hankel_estimate(
            ds.u, ds.y, p=m // 2,
            gamma="auto" if name == "hankel_cv" else "oracle",
            true_g=None if name == "hankel_cv" else system.fir,
        )
        return res.g_hat, {"gamma": res.gamma}
    res = fit_atomic_estimate(
        ds.u, ds.y, m=m,
        gamma="auto" if name == "atomic_cv" else "oracle",
        true_g=None if name == "atomic_cv" else system.fir,
    )
    return res.g_hat, {"gamma": res.gamma}


def _single_run(args):
    index, config = args
    seed = config.seed ^ index
    rng = np.random.default_rng(seed)
    system = generate_system(config.order, rng)
    u = generate_input(config.N, rng)
    snr = float(rng.uniform(*config.snr_range))
    record = RunRecord(index=index, seed=seed, snr=snr)
    try:
        ds = synthesize_dataset(system, u, snr, rng)
        if not system.tail_ok():
            raise ZeroOutputVariance("realized FIR violates the tail bound")
    except RegidError as exc:
        for name in config.estimators:
            record.fits[name] = None
            record.failures[name] = f"generation: {exc}"
        return record
    for name in config.estimators:
        start = time.perf_counter()
        try:
            g_hat, hyper = _run_estimator(name, ds, system, config.m)
            record.fits[name] = fit_score(system.fir, g_hat)
            record.hypers[name] = hyper
        except (RegidError, np.linalg.LinAlgError) as exc:
            record.fits[name] = None
            record.failures[name] = str(exc) or exc.__class__.__name__
        record.times[name] = time.perf_counter() - start
    return record


def run_benchmark(config, jobs=1):
    """Seeded Monte Carlo campaign over every configured estimator.

    Each run owns the stream seeded by ``config.seed XOR index``, so runs
    are order-independent and any subset reproduces exactly. Estimator
    failures are recorded per run and never abort the campaign. Records
    come back sorted by run index regardless of worker scheduling.
    """
    tasks = [(i, config) for i in range(config.runs)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_single_run, tasks))
    else:
        records = [_single_run(t) for t in tasks]
    records.sort(key=lambda r: r.index)
    return records


def summarize_records(records, estimators):
    """Mean/median/quartiles of the fits per estimator, failures counted."""
    rows = []
    for name in estimators:
        vals = np.array(
            [r.fits[name] for r in records if r.fits.get(name) is not None]
        )
        failed = sum(1 for r in records if r.fits.get(name) is None)
        if vals.size:
            rows.append({
                "estimator": name,
                "count": int(vals.size),
                "failures": failed,
                "mean": float(np.mean(vals)),
                "median": float(np.median(vals)),
                "q25": float(np.percentile(vals, 25)),
                "q75": float(np.percentile(vals, 75)),
            })
        else:
            rows.append({
                "estimator": name, "count": 0, "failures": failed,
                "mean": float("nan"), "median": float("nan"),
                "q25": float("nan"), "q75": float("nan"),
            })
    return rows
