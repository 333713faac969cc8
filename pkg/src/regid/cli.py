"""Command-line front end: flag parsing with config-file merge, CSV data
ingestion, estimator dispatch, and report persistence. Nothing else in the
package touches files.

Exit codes: 0 success, 2 usage problems, 3 malformed or missing data,
4 numerical failure (a solver that merely hit its iteration cap only
escalates under --strict). Every random quantity descends from --seed.
"""

import argparse
import hashlib
import json
import os
import sys
from importlib.metadata import PackageNotFoundError
from importlib.metadata import version as _dist_version

import numpy as np

from .errors import (
    DegenerateProblem,
    DegenerateVariance,
    EmptyData,
    HorizonTooLong,
    InvalidHyper,
    IoError,
    LengthMismatch,
    NonConsecutiveTime,
    OrderZero,
    ParseError,
    SingularSigma,
    SingularSystem,
    UsageError,
    ZeroOutputVariance,
    ZeroTruth,
)
from .kernels import KERNEL_KINDS, Hyperparameters, build_regularization_matrix

_DATA_ERRORS = (
    ParseError, NonConsecutiveTime, IoError, EmptyData, LengthMismatch,
    ZeroOutputVariance, ZeroTruth, OrderZero, HorizonTooLong,
)
_NUMERIC_ERRORS = (
    SingularSigma, SingularSystem, DegenerateProblem, DegenerateVariance,
    np.linalg.LinAlgError,
)

_FIT_METHODS = KERNEL_KINDS + ("hankel", "atomic")
_SISO_HEADER = ("t", "u", "y")
_MISO_HEADER = ("t", "y") + tuple(f"u{j}" for j in range(1, 8))


def _version():
    try:
        return _dist_version("regid")
    except PackageNotFoundError:
        return "unknown"


def f17(x):
    """Decimal with 17 significant digits; round-trips any double."""
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# files


def _read_text(path):
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            return fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


def _write_text(path, text):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _sha256(path):
    h = hashlib.sha256()
    try:
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 16), b""):
                h.update(chunk)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return h.hexdigest()


def write_manifest(out_dir, files, config_echo, seed):
    """Record tool version, seed, the effective config, and one checksum
    line per emitted file; every file is hashed from disk right here."""
    lines = [f"regid {_version()}"]
    lines.append(f"seed: {'none' if seed is None else seed}")
    lines.append("config: " + json.dumps(config_echo, sort_keys=True))
    for name in files:
        path = os.path.join(out_dir, name)
        if not os.path.exists(path):
            raise IoError(f"manifest lists a missing file: {name}")
        lines.append(f"sha256 {_sha256(path)}  {name}")
    path = os.path.join(out_dir, "manifest.txt")
    _write_text(path, "\n".join(lines) + "\n")
    return path


def read_dataset_csv(path):
    """Load `t,u,y` or `t,y,u1..u7` rows into a Dataset shell.

    Time must count 1, 2, 3, ... and every row must carry a full set of
    decimal numbers; anything else reports the offending line.
    """
    from .simgen import Dataset

    lines = _read_text(path).splitlines()
    if not lines:
        raise EmptyData(f"{path} is empty")
    header = tuple(c.strip() for c in lines[0].split(","))
    if header not in (_SISO_HEADER, _MISO_HEADER):
        target = _SISO_HEADER if len(header) <= 4 else _MISO_HEADER
        missing = [c for c in target if c not in header]
        extra = [c for c in header if c not in target]
        if missing:
            raise ParseError(f"missing column {missing[0]}", line=1)
        if extra:
            raise ParseError(f"unexpected column {extra[0]}", line=1)
        raise ParseError("columns out of order", line=1)
    rows = []
    for i, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(header):
            raise ParseError(
                f"expected {len(header)} fields, got {len(cells)}", line=i
            )
        try:
            rows.append([float(c) for c in cells])
        except ValueError as exc:
            raise ParseError(str(exc), line=i) from exc
    if not rows:
        raise EmptyData(f"{path} has a header but no samples")
    data = np.array(rows)
    t = data[:, 0]
    expected = np.arange(1, t.shape[0] + 1)
    if not np.array_equal(t, expected):
        bad = int(np.argmin(t == expected))
        raise NonConsecutiveTime(
            f"line {bad + 2}: expected t={bad + 1}, got {data[bad, 0]:g}"
        )
    if header == _SISO_HEADER:
        u, y = data[:, 1], data[:, 2]
    else:
        y, u = data[:, 1], data[:, 2:]
    return Dataset(u=u, y=y, y_clean=None, noise_variance=None, snr=None)


def write_dataset_csv(path, dataset):
    u = np.asarray(dataset.u, dtype=float)
    y = np.asarray(dataset.y, dtype=float)
    if u.ndim == 1:
        header = ",".join(_SISO_HEADER)
        cols = [u, y]
    else:
        header = ",".join(_MISO_HEADER)
        cols = [y] + [u[:, j] for j in range(u.shape[1])]
    lines = [header]
    for i in range(y.shape[0]):
        lines.append(f"{i + 1}," + ",".join(f17(c[i]) for c in cols))
    _write_text(path, "\n".join(lines) + "\n")


def write_response_csv(path, blocks):
    """One column per impulse response, 17-significant-digit decimals."""
    blocks = np.atleast_2d(np.asarray(blocks, dtype=float))
    n = blocks.shape[0]
    header = "k,g" if n == 1 else "k," + ",".join(
        f"g{j + 1}" for j in range(n)
    )
    lines = [header]
    for k in range(blocks.shape[1]):
        lines.append(
            f"{k + 1}," + ",".join(f17(blocks[j, k]) for j in range(n))
        )
    _write_text(path, "\n".join(lines) + "\n")


def read_response_csv(path):
    lines = _read_text(path).splitlines()
    if not lines or tuple(c.strip() for c in lines[0].split(","))[:2] != (
        "k", "g",
    ):
        raise ParseError("expected a k,g header", line=1)
    vals = []
    for i, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != 2:
            raise ParseError(f"expected 2 fields, got {len(cells)}", line=i)
        try:
            k, v = float(cells[0]), float(cells[1])
        except ValueError as exc:
            raise ParseError(str(exc), line=i) from exc
        if k != i - 1:
            raise NonConsecutiveTime(f"line {i}: expected k={i - 1}, got {k:g}")
        vals.append(v)
    if not vals:
        raise EmptyData(f"{path} has a header but no samples")
    return np.array(vals)


def write_report_text(path, items):
    """Key/value lines; array values become comma lists."""
    lines = []
    for key, value in items:
        if isinstance(value, np.ndarray):
            text = ",".join(f17(v) for v in value)
        elif isinstance(value, float):
            text = f17(value)
        else:
            text = str(value)
        lines.append(f"{key}: {text}")
    _write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    # argparse wants to print-and-exit; surface a typed error instead
    def error(self, message):
        raise UsageError(message)


_DEFAULTS = {
    "fit": {
        "method": None, "order": None, "sigma2": "auto", "gamma": "auto",
        "true_g": None, "out": ".", "strict": False,
    },
    "bench": {
        "runs": None, "n": 300, "seed": 0, "estimators": None, "out": None,
        "jobs": None, "n_free": False, "strict": False,
    },
    "sample_prior": {
        "prior": None, "length": 1_000_000, "seed": 0, "m": 99,
        "two_lambda": 1.0, "lam": 1.0, "alpha": 0.9, "alpha_min": 0.5,
        "alpha_max": 0.99, "out": None,
    },
    "kernel": {
        "kind": None, "m": 100, "lam": 1.0, "alpha": 0.9, "alpha_min": 0.5,
        "alpha_max": 0.99,
    },
    "atoms": {"order": 100},
}


def _build_parser():
    top = _Parser(prog="regid", description=__doc__.splitlines()[0])
    sub = top.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    p = sub.add_parser("fit", help="estimate one impulse response from CSV data")
    p.add_argument("data")
    p.add_argument("--method", default=S, choices=_FIT_METHODS)
    p.add_argument("--kernel", default=S, choices=KERNEL_KINDS,
                   help="synonym for --method restricted to kernel kinds")
    p.add_argument("--order", type=int, default=S)
    p.add_argument("--sigma2", default=S)
    p.add_argument("--gamma", default=S)
    p.add_argument("--true-g", dest="true_g", default=S)
    p.add_argument("--out", default=S)
    p.add_argument("--strict", action="store_true", default=S)
    p.add_argument("--config", default=S)

    p = sub.add_parser("bench", help="run a Monte Carlo estimator campaign")
    p.add_argument("--runs", type=int, default=S)
    p.add_argument("--n", type=int, default=S)
    p.add_argument("--n-free", dest="n_free", action="store_true", default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--estimators", default=S)
    p.add_argument("--out", default=S)
    p.add_argument("--jobs", type=int, default=S)
    p.add_argument("--strict", action="store_true", default=S)
    p.add_argument("--config", default=S)

    p = sub.add_parser("sample-prior", help="summarize draws from a prior")
    p.add_argument("--prior", default=S)
    p.add_argument("--length", type=int, default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--m", type=int, default=S)
    p.add_argument("--two-lambda", dest="two_lambda", type=float, default=S)
    p.add_argument("--lam", type=float, default=S)
    p.add_argument("--alpha", type=float, default=S)
    p.add_argument("--alpha-min", dest="alpha_min", type=float, default=S)
    p.add_argument("--alpha-max", dest="alpha_max", type=float, default=S)
    p.add_argument("--out", default=S)
    p.add_argument("--config", default=S)

    p = sub.add_parser("kernel", help="print a regularization matrix as CSV")
    p.add_argument("--kind", default=S, choices=KERNEL_KINDS)
    p.add_argument("--m", type=int, default=S)
    p.add_argument("--lam", type=float, default=S)
    p.add_argument("--alpha", type=float, default=S)
    p.add_argument("--alpha-min", dest="alpha_min", type=float, default=S)
    p.add_argument("--alpha-max", dest="alpha_max", type=float, default=S)
    p.add_argument("--config", default=S)

    p = sub.add_parser("atoms", help="print the atomic dictionary as CSV")
    p.add_argument("--order", type=int, default=S)
    p.add_argument("--config", default=S)
    return top


def _load_config_file(path):
    try:
        loaded = json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path}: {exc}") from exc
    if not isinstance(loaded, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    return loaded


def _parse_gamma(value):
    if value in ("auto", "cv"):
        return "auto"
    if value == "oracle":
        return "oracle"
    try:
        gamma = float(value)
    except (TypeError, ValueError):
        raise UsageError(
            f"--gamma takes auto, cv, oracle, or a number, got {value!r}"
        ) from None
    if gamma < 0:
        raise UsageError(f"--gamma must be nonnegative, got {gamma}")
    return gamma


def _parse_sigma2(value):
    if value == "auto":
        return None
    try:
        sigma2 = float(value)
    except (TypeError, ValueError):
        raise UsageError(
            f"--sigma2 takes auto or a number, got {value!r}"
        ) from None
    if sigma2 <= 0:
        raise UsageError(f"--sigma2 must be positive, got {sigma2}")
    return sigma2


def _eta_from(cfg, kind):
    if kind in ("tc", "ss"):
        eta = Hyperparameters(lam=cfg["lam"], alpha=cfg["alpha"])
    else:
        eta = Hyperparameters(
            lam=cfg["lam"], alpha_min=cfg["alpha_min"],
            alpha_max=cfg["alpha_max"],
        )
    try:
        eta.validate(kind)
    except InvalidHyper as exc:
        raise UsageError(str(exc)) from exc
    return eta


def parse_cli(argv):
    """Flags merged over an optional JSON config over built-in defaults,
    then validated; returns the effective command configuration."""
    ns = _build_parser().parse_args(argv)
    given = vars(ns)
    command = given.pop("command")
    key = command.replace("-", "_")
    cfg = dict(_DEFAULTS[key])
    file_cfg = {}
    if "config" in given:
        file_cfg = _load_config_file(given.pop("config"))
        unknown = set(file_cfg) - set(cfg)
        if unknown:
            raise UsageError(
                f"config file keys not understood: {sorted(unknown)}"
            )
    cfg.update(file_cfg)
    cfg.update(given)
    cfg["command"] = command
    _VALIDATORS[key](cfg)
    return cfg


def _validate_fit(cfg):
    kernel_alias = cfg.pop("kernel", None)
    if kernel_alias is not None:
        if cfg["method"] is not None and cfg["method"] != kernel_alias:
            raise UsageError(
                f"--kernel {kernel_alias} conflicts with --method {cfg['method']}"
            )
        cfg["method"] = kernel_alias
    if cfg["method"] is None:
        raise UsageError("fit needs --method (or --kernel)")
    if cfg["method"] not in _FIT_METHODS:
        raise UsageError(f"unknown method {cfg['method']!r}")
    if cfg["order"] is None:
        cfg["order"] = 99 if cfg["method"] == "hankel" else 100
    if cfg["order"] < 1:
        raise UsageError(f"--order must be >= 1, got {cfg['order']}")
    if cfg["method"] == "hankel" and cfg["order"] % 2 == 0:
        raise UsageError(
            "hankel fits need an odd --order (a square block needs m = 2p - 1)"
        )
    cfg["sigma2"] = _parse_sigma2(cfg["sigma2"])
    cfg["gamma"] = _parse_gamma(cfg["gamma"])
    if cfg["gamma"] == "oracle" and not cfg["true_g"]:
        raise UsageError("--gamma oracle needs --true-g <csv>")


def _validate_bench(cfg):
    if cfg["runs"] is None:
        raise UsageError("bench needs --runs")
    if cfg["runs"] < 1:
        raise UsageError(f"--runs must be >= 1, got {cfg['runs']}")
    if cfg["n"] not in (300, 1000) and not cfg["n_free"]:
        raise UsageError(
            f"--n {cfg['n']} is outside {{300, 1000}}; pass --n-free to allow it"
        )
    if cfg["n"] < 2:
        raise UsageError(f"--n must be >= 2, got {cfg['n']}")
    if cfg["out"] is None:
        raise UsageError("bench needs --out <dir>")
    from .simgen import ALL_ESTIMATORS

    if cfg["estimators"] is None:
        cfg["estimators"] = list(ALL_ESTIMATORS)
    else:
        if isinstance(cfg["estimators"], str):
            cfg["estimators"] = [
                e.strip() for e in cfg["estimators"].split(",") if e.strip()
            ]
        unknown = [e for e in cfg["estimators"] if e not in ALL_ESTIMATORS]
        if unknown:
            raise UsageError(f"unknown estimators: {unknown}")
        if not cfg["estimators"]:
            raise UsageError("--estimators lists nothing")
    if cfg["jobs"] is None:
        env = os.environ.get("REGID_JOBS", "")
        if env:
            try:
                cfg["jobs"] = int(env)
            except ValueError:
                raise UsageError(f"REGID_JOBS={env!r} is not an integer") from None
        else:
            cfg["jobs"] = 1
    if cfg["jobs"] < 1:
        raise UsageError(f"--jobs must be >= 1, got {cfg['jobs']}")


def _validate_sample_prior(cfg):
    prior = cfg["prior"]
    if prior is None:
        raise UsageError("sample-prior needs --prior")
    if prior.startswith("kernel:"):
        kind = prior.split(":", 1)[1]
        if kind not in KERNEL_KINDS:
            raise UsageError(f"unknown kernel kind {kind!r} in --prior")
        cfg["eta"] = _eta_from(cfg, kind)
        cfg["kernel_kind"] = kind
        if cfg["length"] < 2:
            raise UsageError("--length must be >= 2 for direct sampling")
    elif prior in ("hankel", "hankel-approx"):
        if cfg["m"] < 1 or cfg["m"] % 2 == 0:
            raise UsageError(f"Hankel priors need odd --m, got {cfg['m']}")
        if prior == "hankel" and cfg["length"] < 10_000:
            raise UsageError(
                f"the Hankel chain needs --length >= 10000, got {cfg['length']}"
            )
        if prior == "hankel-approx" and cfg["length"] < 2:
            raise UsageError("--length must be >= 2 for direct sampling")
    else:
        raise UsageError(
            f"--prior takes hankel, hankel-approx, or kernel:<kind>, got {prior!r}"
        )
    if cfg["m"] < 1:
        raise UsageError(f"--m must be >= 1, got {cfg['m']}")
    if cfg["two_lambda"] <= 0:
        raise UsageError(f"--two-lambda must be positive, got {cfg['two_lambda']}")


def _validate_kernel(cfg):
    if cfg["kind"] is None:
        raise UsageError("kernel needs --kind")
    if cfg["m"] < 1:
        raise UsageError(f"--m must be >= 1, got {cfg['m']}")
    cfg["eta"] = _eta_from(cfg, cfg["kind"])


def _validate_atoms(cfg):
    if cfg["order"] < 1:
        raise UsageError(f"--order must be >= 1, got {cfg['order']}")


_VALIDATORS = {
    "fit": _validate_fit,
    "bench": _validate_bench,
    "sample_prior": _validate_sample_prior,
    "kernel": _validate_kernel,
    "atoms": _validate_atoms,
}


# ---------------------------------------------------------------------------
# subcommands


def _cmd_kernel(cfg, stdout):
    P = build_regularization_matrix(cfg["kind"], cfg["eta"], cfg["m"])
    for row in P.entries:
        print(",".join(f17(v) for v in row), file=stdout)
    return 0


def _cmd_atoms(cfg, stdout):
    from .atomic import build_dictionary

    d = build_dictionary(cfg["order"])
    shown = min(10, cfg["order"])
    header = "alpha,beta," + ",".join(f"s{j + 1}" for j in range(shown))
    print(header, file=stdout)
    for i in range(d.n_atoms):
        cells = [f17(d.alphas[i]), f17(d.betas[i])]
        cells += [f17(v) for v in d.samples[i, :shown]]
        print(",".join(cells), file=stdout)
    return 0


def _summary_csv_lines(summary):
    lines = ["index,std,corr_row"]
    for k in range(summary.coefficient_std.shape[0]):
        lines.append(
            f"{k + 1},{f17(summary.coefficient_std[k])},"
            f"{f17(summary.correlation_row[k])}"
        )
    return lines


def _cmd_sample_prior(cfg, stdout):
    from .prior_lab import (
        PriorSpec,
        run_metropolis,
        sample_exact,
        summarize_chain,
    )

    prior = cfg["prior"]
    if prior == "hankel":
        spec = PriorSpec(
            kind="hankel_exact", m=cfg["m"], p=(cfg["m"] + 1) // 2,
            two_lambda=cfg["two_lambda"],
        )
        summary = run_metropolis(spec, cfg["length"], cfg["seed"])
    else:
        if prior == "hankel-approx":
            spec = PriorSpec(
                kind="hankel_gaussian_approx", m=cfg["m"],
                p=(cfg["m"] + 1) // 2, two_lambda=cfg["two_lambda"],
            )
        else:
            spec = PriorSpec(
                kind="kernel_gaussian", m=cfg["m"],
                two_lambda=cfg["two_lambda"],
                kernel_kind=cfg["kernel_kind"], eta=cfg["eta"],
            )
        draws = sample_exact(spec, cfg["length"], cfg["seed"])
        summary = summarize_chain(draws)
    text = "\n".join(_summary_csv_lines(summary)) + "\n"
    if cfg["out"]:
        _write_text(cfg["out"], text)
    else:
        stdout.write(text)
    return 0


def _fit_kernel_method(cfg, dataset):
    from .kernel_estimator import (
        EstimateReport,
        estimate_noise_variance,
        fit_kernel_estimate,
        rels_estimate,
        tune_hyperparameters,
    )
    from .simgen import build_miso_arx

    kind, m = cfg["method"], cfg["order"]
    if np.ndim(dataset.u) == 1:
        report = fit_kernel_estimate(
            dataset.u, dataset.y, kind, m=m, sigma2=cfg["sigma2"]
        )
        return report, report.g_hat[None, :]
    inputs = [dataset.u[:, j] for j in range(dataset.u.shape[1])]
    problem = build_miso_arx(dataset.y, inputs, m)
    problem.sigma2 = (
        estimate_noise_variance(problem)
        if cfg["sigma2"] is None else cfg["sigma2"]
    )
    eta, info = tune_hyperparameters(problem, kind, full_output=True)
    P = build_regularization_matrix(kind, eta, m)
    g = rels_estimate(problem, P)
    report = EstimateReport(
        g_hat=g, method=kind, eta_hat=eta, sigma2=problem.sigma2,
        objective=info.objective, evaluations=info.evaluations,
        diagnostics={"blocks": problem.n_blocks},
    )
    return report, g.reshape(problem.n_blocks, m)


def _cmd_fit(cfg, stdout):
    dataset = read_dataset_csv(cfg["data"])
    method = cfg["method"]
    miso = np.ndim(dataset.u) == 2
    if miso and method not in KERNEL_KINDS:
        raise UsageError(f"{method} fits take single-input data")
    true_g = read_response_csv(cfg["true_g"]) if cfg["true_g"] else None
    items = [("method", method), ("samples", int(dataset.y.shape[0]))]
    converged = True
    if method in KERNEL_KINDS:
        report, blocks = _fit_kernel_method(cfg, dataset)
        items.append(("order", cfg["order"]))
        eta = report.eta_hat
        items.append(("lam", float(eta.lam)))
        if eta.alpha is not None:
            items.append(("alpha", float(eta.alpha)))
        else:
            items.append(("alpha_min", float(eta.alpha_min)))
            items.append(("alpha_max", float(eta.alpha_max)))
        items.append(("sigma2", float(report.sigma2)))
        items.append(("objective", float(report.objective)))
        items.append(("evaluations", int(report.evaluations)))
        for key, value in report.diagnostics.items():
            items.append((key, value))
    elif method == "hankel":
        from .hankel import fit_hankel_estimate

        res = fit_hankel_estimate(
            dataset.u, dataset.y, p=(cfg["order"] + 1) // 2,
            gamma=cfg["gamma"], true_g=true_g,
        )
        blocks = res.g_hat[None, :]
        converged = res.info.converged
        items.append(("order", cfg["order"]))
        items.append(("gamma", float(res.gamma)))
        items.append(("iterations", int(res.info.iterations)))
        items.append(("primal_residual", float(res.info.primal_residual)))
        items.append(("objective", float(res.info.objective)))
        items.append(("converged", res.info.converged))
    else:
        from .atomic import fit_atomic_estimate

        res = fit_atomic_estimate(
            dataset.u, dataset.y, m=cfg["order"], gamma=cfg["gamma"],
            true_g=true_g,
        )
        blocks = res.g_hat[None, :]
        converged = res.solution.converged
        items.append(("order", cfg["order"]))
        items.append(("gamma", float(res.gamma)))
        items.append(("atoms_active", int(res.solution.support.shape[0])))
        items.append(("sweeps", int(res.solution.iterations)))
        items.append(("converged", res.solution.converged))
    out_dir = cfg["out"]
    os.makedirs(out_dir, exist_ok=True)
    write_report_text(os.path.join(out_dir, "fit_report.txt"), items)
    write_response_csv(os.path.join(out_dir, "impulse_response.csv"), blocks)
    echo = {k: v for k, v in cfg.items() if k != "command"}
    echo["sigma2"] = "auto" if echo["sigma2"] is None else echo["sigma2"]
    write_manifest(
        out_dir, ["fit_report.txt", "impulse_response.csv"], echo, None
    )
    if cfg["strict"] and not converged:
        print("solver did not converge (--strict)", file=sys.stderr)
        return 4
    return 0


def _hyper_names(name):
    from .simgen import KERNEL_ESTIMATORS

    if name in KERNEL_ESTIMATORS:
        return ("lam", "alpha", "alpha_min", "alpha_max")
    return ("gamma",)


def _clean_cell(text):
    return str(text).replace(",", ";").replace("\n", " ")


def _runs_csv_lines(records, estimators):
    header = ["index", "seed", "snr"]
    for name in estimators:
        header.append(f"{name}_fit")
        header.extend(f"{name}_{h}" for h in _hyper_names(name))
        header.append(f"{name}_failure")
    lines = [",".join(header)]
    for r in records:
        row = [str(r.index), str(r.seed), f17(r.snr)]
        for name in estimators:
            fit = r.fits.get(name)
            row.append("" if fit is None else f17(fit))
            hyper = r.hypers.get(name, {})
            for h in _hyper_names(name):
                v = hyper.get(h)
                row.append("" if v is None else f17(v))
            row.append(_clean_cell(r.failures.get(name, "")))
        lines.append(",".join(row))
    return lines


def _summary_table_lines(rows):
    lines = ["estimator,count,failures,mean,median,q25,q75"]
    for row in rows:
        lines.append(
            f"{row['estimator']},{row['count']},{row['failures']},"
            f"{f17(row['mean'])},{f17(row['median'])},"
            f"{f17(row['q25'])},{f17(row['q75'])}"
        )
    return lines


def _timing_csv_lines(records, estimators):
    lines = ["index," + ",".join(f"{n}_seconds" for n in estimators)]
    for r in records:
        cells = [str(r.index)]
        cells += [format(r.times.get(n, 0.0), ".6f") for n in estimators]
        lines.append(",".join(cells))
    return lines


def _cmd_bench(cfg, stdout):
    from .simgen import BenchmarkConfig, run_benchmark, summarize_records

    config = BenchmarkConfig(
        runs=cfg["runs"], N=cfg["n"], seed=cfg["seed"],
        estimators=tuple(cfg["estimators"]),
    )
    records = run_benchmark(config, jobs=cfg["jobs"])
    out_dir = cfg["out"]
    os.makedirs(out_dir, exist_ok=True)
    est = list(config.estimators)
    _write_text(
        os.path.join(out_dir, "runs.csv"),
        "\n".join(_runs_csv_lines(records, est)) + "\n",
    )
    _write_text(
        os.path.join(out_dir, "summary.csv"),
        "\n".join(_summary_table_lines(summarize_records(records, est))) + "\n",
    )
    _write_text(
        os.path.join(out_dir, "timing.csv"),
        "\n".join(_timing_csv_lines(records, est)) + "\n",
    )
    echo = {k: v for k, v in cfg.items() if k != "command"}
    write_manifest(
        out_dir, ["runs.csv", "summary.csv", "timing.csv"], echo, cfg["seed"]
    )
    failed = sum(len(r.failures) for r in records)
    if failed:
        print(f"{failed} estimator runs failed", file=sys.stderr)
        if cfg["strict"]:
            return 4
    return 0


_HANDLERS = {
    "fit": _cmd_fit,
    "bench": _cmd_bench,
    "sample-prior": _cmd_sample_prior,
    "kernel": _cmd_kernel,
    "atoms": _cmd_atoms,
}


def main(argv=None):
    try:
        cfg = parse_cli(sys.argv[1:] if argv is None else list(argv))
        return _HANDLERS[cfg["command"]](cfg, sys.stdout)
    except (UsageError, InvalidHyper) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except _NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
