"""Command-line front end: deterministic runs with machine-readable reports.

Subcommands ``qfi | sld | metric | oracle-check`` all read the same config
format (see :mod:`gchmetric.config`) and write one JSON report to stdout or
``--out``.  Reports embed the config hash and tool version, carry explicit
parameter-label arrays alongside every matrix, and are byte-identical for
identical (config, seed) pairs.  Exit codes: 0 success, 2 configuration
error, 3 numeric failure (diagnostic JSON on stderr), 4 oracle-check
failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from . import __version__
from .cache import SampleCache, cache_header
from .channel import parameter_list
from .config import RunConfig, build_probe, load_config
from .errors import (
    CacheMismatch,
    ConfigError,
    GchMetricError,
    InvalidChannel,
    InvalidSplit,
    SolverStalled,
)
from .metric import (
    MetricResult,
    TraceEntry,
    containment_check,
    sample_and_solve,
)
from .qfi import qfi, sld
from .sampler import probe_for_counter
from .validation import run_oracle_checks

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_CHECK = 4

#: environment variable overriding the worker-thread count
THREADS_ENV = "GCHMETRIC_THREADS"

#: matrices whose condition number exceeds this get a report warning
CONDITION_WARN = 1e12


def _matrix(values: NDArray) -> list[list[float]]:
    return [[float(x) for x in row] for row in np.asarray(values, dtype=float)]


def _vector(values: NDArray) -> list[float]:
    return [float(x) for x in np.asarray(values, dtype=float).reshape(-1)]


def _ellipse_section(labels: tuple[str, ...], matrix: NDArray) -> tuple[dict, list[str]]:
    """Quadratic forms of the uncertainty ellipses: the inverse matrix.

    The full inverse plus every two-parameter principal submatrix, which is
    exactly what an external script needs to draw the ellipse of a label
    pair.  Singular or near-singular matrices fall back to the
    pseudo-inverse, with a warning recorded.
    """
    warnings = []
    mat = np.asarray(matrix, dtype=float)
    eigs = np.linalg.eigvalsh(mat)
    condition = float(eigs[-1] / eigs[0]) if eigs[0] > 0 else np.inf
    if not np.isfinite(condition) or condition > CONDITION_WARN:
        warnings.append(
            f"matrix is singular or ill-conditioned (condition {condition:.3g}); "
            "ellipse forms use the pseudo-inverse"
        )
        inverse = np.linalg.pinv(mat, hermitian=True)
    else:
        inverse = np.linalg.inv(mat)
    inverse = 0.5 * (inverse + inverse.T)
    pairs = [
        {
            "labels": [labels[i], labels[j]],
            "form": _matrix(inverse[np.ix_([i, j], [i, j])]),
        }
        for i in range(len(labels))
        for j in range(i + 1, len(labels))
    ]
    return {"inverse": _matrix(inverse), "pairs": pairs}, warnings


def _envelope(config: RunConfig, config_hash: str) -> dict:
    report = {
        "task": config.task,
        "tool": {"name": "gchmetric", "version": __version__},
        "config_sha256": config_hash,
        "seed": config.seed,
    }
    if config.channel is not None:
        report["channel"] = [
            {
                "gamma": mode.gamma,
                "n_th": mode.n_th,
                "re_m": mode.m_corr.real,
                "im_m": mode.m_corr.imag,
            }
            for mode in config.channel.modes
        ]
    return report


def _sld_section(forms) -> list[dict]:
    return [
        {
            "label": form.label,
            "constant": form.constant,
            "linear": _vector(form.linear),
            "quadratic": _matrix(form.quadratic),
            "center": _vector(form.center),
        }
        for form in forms
    ]


def run_qfi(config: RunConfig, config_hash: str) -> dict:
    """Information matrix and SLDs of an explicit probe, as a report dict."""
    probe = build_probe(config)
    result = qfi(config.channel, probe, pure_policy=config.pure_policy)
    # SLD coefficients have no zero-regularisation limit, so any non-raising
    # policy falls back to the regularised forms
    sld_policy = "raise" if config.pure_policy == "raise" else "regularize"
    forms = sld(config.channel, probe, pure_policy=sld_policy)
    warnings = []
    if "pure_policy" in result.diagnostics:
        warnings.append(
            f"pure output modes handled by policy: {result.diagnostics['pure_policy']}"
        )
    if result.diagnostics["pair_condition"] > CONDITION_WARN:
        warnings.append(
            "near-pure output: tensor inversion condition "
            f"{result.diagnostics['pair_condition']:.3g}"
        )
    ellipse, ellipse_warnings = _ellipse_section(result.labels, result.matrix)

    report = _envelope(config, config_hash)
    report.update(
        {
            "parameters": list(result.labels),
            "qfi": {
                "matrix": _matrix(result.matrix),
                "diagnostics": {
                    key: value
                    for key, value in result.diagnostics.items()
                    if isinstance(value, (int, float, str))
                },
            },
            "sld": _sld_section(forms),
            "ellipse": ellipse,
            "warnings": warnings + ellipse_warnings,
        }
    )
    return report


def run_sld(config: RunConfig, config_hash: str) -> dict:
    """SLD quadrature polynomials of an explicit probe, as a report dict."""
    probe = build_probe(config)
    sld_policy = "raise" if config.pure_policy == "raise" else "regularize"
    forms = sld(config.channel, probe, pure_policy=sld_policy)
    labels = [p.label for p in parameter_list(config.channel)]
    report = _envelope(config, config_hash)
    report.update(
        {
            "parameters": labels,
            "sld": _sld_section(forms),
            "warnings": [],
        }
    )
    return report


def _holdout_section(config: RunConfig, result: MetricResult) -> dict:
    """Containment of fresh samples the solver never saw."""
    start = config.rounds * config.batch
    norm = float(np.linalg.norm(result.metric))
    samples = []
    worst = -np.inf
    for counter in range(start, start + config.holdout):
        try:
            _, probe = probe_for_counter(
                config.seed, counter, config.channel.n_modes, config.phi_star
            )
            matrix = qfi(config.channel, probe, pure_policy="regularize").matrix
        except GchMetricError as err:
            samples.append({"counter": counter, "status": "failed", "error": str(err)})
            continue
        violation = float(containment_check(result, matrix))
        worst = max(worst, violation)
        samples.append({"counter": counter, "status": "ok", "violation": violation})
    return {
        "count": config.holdout,
        "metric_norm": norm,
        "worst_violation": None if worst == -np.inf else worst,
        "samples": samples,
    }


def _trace_rows(trace) -> list[dict]:
    return [
        {
            "round": entry.round,
            "sample_count": entry.sample_count,
            "det_value": entry.det_value,
            "max_violation": entry.max_violation,
            "n_failed": entry.n_failed,
        }
        for entry in trace
    ]


def run_metric(config: RunConfig, config_hash: str, cache_path: str | None) -> dict:
    """Sample-and-cover a channel neighborhood, as a report dict."""
    store = None
    if cache_path is not None:
        store = SampleCache(
            cache_path, cache_header(config.channel, config.phi_star, config.seed)
        )
    threads = config.threads if config.threads is not None else 1
    partial_trace: list[TraceEntry] = []
    try:
        result = sample_and_solve(
            config.channel,
            config.phi_star,
            rounds=config.rounds,
            batch=config.batch,
            seed=config.seed,
            rel_tol=config.rel_tol,
            store=store,
            threads=threads,
            on_round=partial_trace.append,
        )
    except SolverStalled as err:
        # completed rounds are preserved so a diagnosing user sees how far
        # the cover got before the solver gave up
        err.partial_trace = _trace_rows(partial_trace)  # type: ignore[attr-defined]
        raise
    finally:
        if store is not None:
            store.close()

    ellipse, ellipse_warnings = _ellipse_section(result.labels, result.metric)
    report = _envelope(config, config_hash)
    report.update(
        {
            "parameters": list(result.labels),
            "metric": {
                "matrix": _matrix(result.metric),
                "det": result.det_value,
                "kkt_residual": result.kkt_residual,
                "regularization": result.regularization,
                "stop_reason": result.stop_reason,
                "diagnostics": {
                    key: value
                    for key, value in result.diagnostics.items()
                    if isinstance(value, (int, float, str)) and np.isfinite(value)
                },
            },
            "trace": _trace_rows(result.trace),
            "holdout": _holdout_section(config, result),
            "ellipse": ellipse,
            "warnings": ellipse_warnings,
        }
    )
    return report


def run_oracle_check(config: RunConfig, config_hash: str) -> tuple[dict, bool]:
    """Oracle regression grid, as a report dict plus overall pass flag."""
    phi_star = config.phi_star if config.phi_star is not None else 0.1
    results = run_oracle_checks(cutoff=config.cutoff, phi_star=phi_star)
    report = _envelope(config, config_hash)
    report.update(
        {
            "cutoff": config.cutoff,
            "phi_star": phi_star,
            "checks": [
                {
                    "name": r.name,
                    "status": r.status,
                    "residual": r.residual,
                    "tolerance": r.tolerance,
                    "detail": r.detail,
                }
                for r in results
            ],
            "n_failed": sum(0 if r.ok else 1 for r in results),
        }
    )
    return report, all(r.ok for r in results)


def _emit(report: dict, out_path: str | None) -> None:
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if out_path is None:
        sys.stdout.write(text)
    else:
        Path(out_path).write_text(text, encoding="utf-8")


def _fail(payload: dict, code: int) -> int:
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gchmetric",
        description=(
            "Information matrices, logarithmic derivatives, and covering "
            "metrics for Gaussian channels"
        ),
    )
    parser.add_argument("--version", action="version", version=__version__)
    subparsers = parser.add_subparsers(dest="task", required=True)
    for task, helptext in (
        ("qfi", "information matrix and SLDs of an explicit probe"),
        ("sld", "logarithmic-derivative polynomials of an explicit probe"),
        ("metric", "sample probes and cover their information matrices"),
        ("oracle-check", "run the engine-vs-oracle regression grid"),
    ):
        sub = subparsers.add_parser(task, help=helptext)
        sub.add_argument("--config", required=True, help="path to the run config file")
        sub.add_argument("--seed", type=int, default=None, help="override the config seed")
        sub.add_argument("--out", default=None, help="write the JSON report here instead of stdout")
        sub.add_argument(
            "--cache",
            default=None,
            help="sample cache file to resume from / append to (metric only)",
        )
        sub.add_argument(
            "--threads",
            type=int,
            default=None,
            help=f"worker threads for sampling batches (also {THREADS_ENV})",
        )
    return parser


def _resolve_threads(flag_value: int | None) -> int | None:
    if flag_value is not None:
        if flag_value < 1:
            raise ConfigError(f"--threads must be >= 1, got {flag_value}")
        return flag_value
    env = os.environ.get(THREADS_ENV)
    if env is not None:
        try:
            value = int(env)
        except ValueError as err:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from err
        if value < 1:
            raise ConfigError(f"{THREADS_ENV} must be >= 1, got {value}")
        return value
    return None


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    try:
        config, config_hash = load_config(args.config)
        if config.task != args.task:
            raise ConfigError(
                f"config declares task {config.task!r} but the "
                f"{args.task!r} subcommand was invoked"
            )
        if args.cache is not None and args.task != "metric":
            raise ConfigError("--cache only applies to the metric task")
        if args.seed is not None and args.seed < 0:
            raise ConfigError(f"--seed must be >= 0, got {args.seed}")
        config = config.with_overrides(seed=args.seed, threads=_resolve_threads(args.threads))
    except (ConfigError, InvalidChannel, InvalidSplit) as err:
        return _fail({"error": type(err).__name__, "message": str(err)}, EXIT_CONFIG)

    try:
        if args.task == "qfi":
            report = run_qfi(config, config_hash)
        elif args.task == "sld":
            report = run_sld(config, config_hash)
        elif args.task == "metric":
            report = run_metric(config, config_hash, args.cache)
        else:
            report, checks_ok = run_oracle_check(config, config_hash)
            _emit(report, args.out)
            return EXIT_OK if checks_ok else EXIT_CHECK
    except (ConfigError, CacheMismatch) as err:
        # both mark inconsistent user input rather than a numeric failure
        return _fail({"error": type(err).__name__, "message": str(err)}, EXIT_CONFIG)
    except GchMetricError as err:
        payload = {"error": type(err).__name__, "message": str(err)}
        partial = getattr(err, "partial_trace", None)
        if partial is not None:
            payload["partial_trace"] = partial
        return _fail(payload, EXIT_NUMERIC)

    _emit(report, args.out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
