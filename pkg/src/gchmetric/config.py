"""Run-configuration parsing for the command-line front end.

A run is described by a small ``key = value`` text file.  Lines starting
with ``#`` (or anything after a ``#``) are comments; values are
whitespace-separated tokens.  The only repeatable key is ``mode``, one line
per channel mode::

    task = metric
    seed = 42
    mode = 0.1 1.0 0.0 0.0      # gamma n_th Re(M) Im(M)
    phi_star = 0.2
    rounds = 50
    batch = 20

Unknown keys are rejected so a typo cannot silently fall back to a default.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channel import ChannelMode, ChannelPoint
from .errors import ConfigError, GchMetricError
from .gaussian import (
    GaussianState,
    coherent_state,
    embed_symplectic,
    squeeze_symplectic,
    thermal_state,
    tms_symplectic,
    vacuum_state,
)
from .metric import STAGNATION_REL_TOL
from .sampler import ResourceSplit, probe_for_counter, probe_from_split

__all__ = [
    "RunConfig",
    "parse_config",
    "load_config",
    "build_probe",
]

#: CLI task names
TASKS = ("qfi", "sld", "metric", "oracle-check")

#: probe families an explicit ``probe =`` line may request
PROBE_FORMS = ("vacuum", "thermal", "coherent", "sms", "tms", "sampler", "split")

#: engine policies for probes whose output has pure normal modes
PURE_POLICIES = ("raise", "regularize", "extrapolate")


@dataclass(frozen=True)
class RunConfig:
    """A fully parsed and validated run description."""

    task: str
    channel: ChannelPoint | None = None
    probe_spec: tuple[str, ...] | None = None
    split: ResourceSplit | None = None
    phi_star: float | None = None
    seed: int = 0
    rounds: int = 10
    batch: int = 10
    rel_tol: float = STAGNATION_REL_TOL
    threads: int | None = None
    cutoff: int = 20
    holdout: int = 20
    pure_policy: str = "regularize"

    def with_overrides(
        self, seed: int | None = None, threads: int | None = None
    ) -> "RunConfig":
        """Copy with command-line overrides applied."""
        fields = self.__dict__.copy()
        if seed is not None:
            fields["seed"] = seed
        if threads is not None:
            fields["threads"] = threads
        return RunConfig(**fields)


def _to_int(key: str, token: str, minimum: int | None = None) -> int:
    try:
        value = int(token)
    except ValueError as err:
        raise ConfigError(f"{key} expects an integer, got {token!r}") from err
    if minimum is not None and value < minimum:
        raise ConfigError(f"{key} must be >= {minimum}, got {value}")
    return value


def _to_float(key: str, token: str, minimum: float | None = None) -> float:
    try:
        value = float(token)
    except ValueError as err:
        raise ConfigError(f"{key} expects a number, got {token!r}") from err
    if not np.isfinite(value):
        raise ConfigError(f"{key} must be finite, got {token!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{key} must be >= {minimum}, got {value}")
    return value


def _split_from_entries(
    weights: list[str],
    squeeze_phases: list[str] | None,
    displacement_phases: list[str] | None,
    n_modes: int,
) -> ResourceSplit:
    if len(weights) != 3:
        raise ConfigError(f"split expects three weights, got {len(weights)}")
    w = tuple(_to_float("split", tok) for tok in weights)
    sq = (
        tuple(_to_float("squeeze_phases", tok) for tok in squeeze_phases)
        if squeeze_phases is not None
        else (0.0,) * n_modes
    )
    dp = (
        tuple(_to_float("displacement_phases", tok) for tok in displacement_phases)
        if displacement_phases is not None
        else (0.0,) * n_modes
    )
    if len(sq) != n_modes or len(dp) != n_modes:
        raise ConfigError(
            f"phase lists need one entry per channel mode ({n_modes}), "
            f"got {len(sq)} and {len(dp)}"
        )
    try:
        return ResourceSplit(w, sq, dp)
    except GchMetricError as err:
        raise ConfigError(str(err)) from err


def parse_config(text: str) -> RunConfig:
    """Parse the key-value text of a config file into a :class:`RunConfig`.

    Raises :class:`ConfigError` naming the offending key for unknown keys,
    malformed values, or invariant violations (which includes everything the
    channel and split validators reject).
    """
    entries: dict[str, list[str]] = {}
    modes: list[list[str]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        tokens = value.split()
        if not tokens:
            raise ConfigError(f"line {lineno}: key {key!r} has no value")
        if key == "mode":
            modes.append(tokens)
        elif key in entries:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        else:
            entries[key] = tokens

    known = {
        "task",
        "seed",
        "phi_star",
        "rounds",
        "batch",
        "rel_tol",
        "threads",
        "cutoff",
        "holdout",
        "probe",
        "split",
        "squeeze_phases",
        "displacement_phases",
        "pure_policy",
    }
    for key in entries:
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")

    if "task" not in entries:
        raise ConfigError("missing required key 'task'")
    task = " ".join(entries["task"])
    if task not in TASKS:
        raise ConfigError(f"task must be one of {', '.join(TASKS)}; got {task!r}")

    channel = None
    if modes:
        channel_modes = []
        for tokens in modes:
            if len(tokens) != 4:
                raise ConfigError(
                    f"mode expects 'gamma n_th Re(M) Im(M)', got {' '.join(tokens)!r}"
                )
            gamma, n_th, re_m, im_m = (_to_float("mode", tok) for tok in tokens)
            try:
                channel_modes.append(ChannelMode(gamma, n_th, complex(re_m, im_m)))
            except GchMetricError as err:
                raise ConfigError(str(err)) from err
        channel = ChannelPoint(tuple(channel_modes))
    elif task != "oracle-check":
        raise ConfigError(f"task {task!r} needs at least one 'mode' line")

    split = None
    if "split" in entries:
        split = _split_from_entries(
            entries["split"],
            entries.get("squeeze_phases"),
            entries.get("displacement_phases"),
            channel.n_modes if channel is not None else 1,
        )
    elif "squeeze_phases" in entries or "displacement_phases" in entries:
        raise ConfigError("phase lists are only meaningful together with 'split'")

    probe_spec = tuple(entries["probe"]) if "probe" in entries else None
    if probe_spec is not None and probe_spec[0] not in PROBE_FORMS:
        raise ConfigError(
            f"probe must start with one of {', '.join(PROBE_FORMS)}; got {probe_spec[0]!r}"
        )
    if task in ("qfi", "sld") and probe_spec is None:
        raise ConfigError(f"task {task!r} needs an explicit 'probe' line")

    pure_policy = " ".join(entries.get("pure_policy", ["regularize"]))
    if pure_policy not in PURE_POLICIES:
        raise ConfigError(
            f"pure_policy must be one of {', '.join(PURE_POLICIES)}; got {pure_policy!r}"
        )

    phi_star = (
        _to_float("phi_star", entries["phi_star"][0], minimum=0.0)
        if "phi_star" in entries
        else None
    )
    if task == "metric" and phi_star is None:
        raise ConfigError("task 'metric' needs 'phi_star'")

    config = RunConfig(
        task=task,
        channel=channel,
        probe_spec=probe_spec,
        split=split,
        phi_star=phi_star,
        seed=_to_int("seed", entries["seed"][0], minimum=0) if "seed" in entries else 0,
        rounds=_to_int("rounds", entries["rounds"][0], minimum=1)
        if "rounds" in entries
        else 10,
        batch=_to_int("batch", entries["batch"][0], minimum=1)
        if "batch" in entries
        else 10,
        rel_tol=_to_float("rel_tol", entries["rel_tol"][0], minimum=0.0)
        if "rel_tol" in entries
        else STAGNATION_REL_TOL,
        threads=_to_int("threads", entries["threads"][0], minimum=1)
        if "threads" in entries
        else None,
        cutoff=_to_int("cutoff", entries["cutoff"][0], minimum=4)
        if "cutoff" in entries
        else 20,
        holdout=_to_int("holdout", entries["holdout"][0], minimum=0)
        if "holdout" in entries
        else 20,
        pure_policy=pure_policy,
    )
    return config


def load_config(path: str | Path) -> tuple[RunConfig, str]:
    """Read a config file; returns the parsed config and its SHA-256 hash."""
    try:
        raw = Path(path).read_bytes()
    except OSError as err:
        raise ConfigError(f"cannot read config file {path}: {err}") from err
    return parse_config(raw.decode("utf-8")), hashlib.sha256(raw).hexdigest()


def build_probe(config: RunConfig) -> GaussianState:
    """Materialize the probe state an explicit ``probe =`` line describes.

    ``vacuum | thermal | coherent | sms`` build states on the channel modes;
    ``tms | sampler | split`` build on channel plus ancilla modes.  Numeric
    arguments follow the family name; per-mode lists repeat the last value
    when shorter than the mode count.
    """
    if config.probe_spec is None:
        raise ConfigError("config has no 'probe' line")
    if config.channel is None:
        raise ConfigError("building a probe requires channel 'mode' lines")
    form, *args = config.probe_spec
    n = config.channel.n_modes

    def numbers(key: str, count: int, given: list[str]) -> list[float]:
        if not given:
            raise ConfigError(f"probe {key!r} needs numeric arguments")
        values = [_to_float("probe", tok) for tok in given]
        if len(values) > count:
            raise ConfigError(f"probe {key!r} takes at most {count} numbers")
        return values + [values[-1]] * (count - len(values))

    try:
        if form == "vacuum":
            if args:
                raise ConfigError("probe 'vacuum' takes no arguments")
            return vacuum_state(n)
        if form == "thermal":
            return thermal_state(numbers("thermal", n, args))
        if form == "coherent":
            values = numbers("coherent", 2 * n, args)
            alphas = [complex(values[2 * k], values[2 * k + 1]) for k in range(n)]
            return coherent_state(alphas)
        if form == "sms":
            if not args or len(args) > 2:
                raise ConfigError("probe 'sms' expects 'r [theta]'")
            r = _to_float("probe", args[0])
            theta = _to_float("probe", args[1]) if len(args) == 2 else 0.0
            total = np.eye(2 * n)
            for k in range(n):
                total = embed_symplectic(squeeze_symplectic(r, theta), [k], n) @ total
            base = vacuum_state(n)
            return GaussianState(base.mean, total @ base.cov @ total.T)
        if form == "tms":
            if len(args) != 1:
                raise ConfigError("probe 'tms' expects a single 'r'")
            r = _to_float("probe", args[0])
            total = np.eye(4 * n)
            for k in range(n):
                total = embed_symplectic(tms_symplectic(r), [k, n + k], 2 * n) @ total
            base = vacuum_state(2 * n)
            return GaussianState(base.mean, total @ base.cov @ total.T)
        if form == "sampler":
            if len(args) != 1:
                raise ConfigError("probe 'sampler' expects a single counter")
            if config.phi_star is None:
                raise ConfigError("probe 'sampler' needs 'phi_star'")
            counter = _to_int("probe", args[0], minimum=0)
            _, probe = probe_for_counter(config.seed, counter, n, config.phi_star)
            return probe
        if form == "split":
            if args:
                raise ConfigError("probe 'split' reads the 'split' key, no arguments")
            if config.split is None:
                raise ConfigError("probe 'split' needs a 'split' line")
            if config.phi_star is None:
                raise ConfigError("probe 'split' needs 'phi_star'")
            return probe_from_split(config.split, config.phi_star, config.seed)
    except ConfigError:
        raise
    except GchMetricError as err:
        raise ConfigError(str(err)) from err
    raise ConfigError(f"unknown probe form {form!r}")
