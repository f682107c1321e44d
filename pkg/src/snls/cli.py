"""Operator-facing command line: config parsing, seeding, dispatch, CSV wiring.

Subcommands: simulate, converge-time, converge-space, moments, tails.
Configuration is a flat `key = value` text file (`#` comments); CLI
`--set key=value` options override file keys.  All randomness flows from
the single top-level `seed`; the worker count (SNLS_WORKERS or --workers)
affects speed only, never results.

Documented keys and defaults are listed in KEY_DOC below and in the README.
"""

import argparse
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import diagnostics
from .errors import ConfigError, ExperimentError, InvalidArgumentError, SolverDivergenceError
from .experiments import (
    BaseConfig,
    _map_trajectories,
    default_workers,
    emit_csv,
    strong_error_space,
    strong_error_time,
)
from .fdgrid import GridState
from .noise import build_covariance, sample_path
from .schemes import SchemeConfig, SchemeKind, run_trajectory
from .spectral import SpectralState

__all__ = ["RunConfig", "parse_config", "dispatch", "main"]

SUBCOMMANDS = ("simulate", "converge-time", "converge-space", "moments", "tails")

TRAJECTORY_HEADER = "time,charge,energy,lyapunov,h1_norm"
MOMENTS_HEADER = "time,alpha,moment"
TAILS_HEADER = "threshold,exceedance"

# Named parameter sets from the reference experiments.
PRESETS = {
    # charge / exponential-moment simulation setup
    "figure1": {
        "horizon": 100.0,
        "steps": 102400,  # tau = 2^-10
        "epsilon": 10.0,
        "modes": 64,
        "lambda": 1,
        "scheme": "spectral",
    },
    # full-scale convergence studies (long runtimes)
    "paper-time": {
        "horizon": 1.0,
        "steps": 16384,
        "reference_steps": 16384,  # tau_ref = 2^-14
        "resolutions": "8192,4096,2048,1024,512",
        "modes": 256,
        "trajectories": 1000,
    },
    "paper-space": {
        "horizon": 1.0,
        "steps": 256,  # tau = 2^-8
        "reference_modes": 1024,
        "resolutions": "32,64,128,256,512",
        "trajectories": 1000,
    },
}

KEY_DOC = {
    "preset": "named parameter set applied before other keys",
    "horizon": "final time T > 0 (required)",
    "steps": "number of time steps M >= 0 (required)",
    "lambda": "focusing sign, +1 or -1 (default 1)",
    "epsilon": "noise intensity >= 0 (default 1.0)",
    "modes": "spatial resolution: sine modes or interior nodes (default 64)",
    "noise_modes": "noise truncation K (default: modes)",
    "scheme": "spectral | finite_difference (default spectral)",
    "tolerance": "implicit solver tolerance (default 1e-12)",
    "max_iterations": "implicit solver iteration cap (default 100)",
    "initial": "initial datum selector; only 'sine' is defined",
    "initial_amplitude": "amplitude of the sine initial datum (default 1.0)",
    "seed": "64-bit master seed (default 0)",
    "trajectories": "Monte Carlo batch size (subcommand-specific default)",
    "moment_order": "strong-error moment p >= 1 (default 2)",
    "resolutions": "comma list: coarse step counts / mode counts",
    "reference_steps": "reference step count for converge-time",
    "reference_modes": "reference resolution for converge-space",
    "alphas": "comma list of exponential-moment exponents (default 0.7,1.0)",
    "snapshot_stride": "record diagnostics every this many steps",
    "num_thresholds": "threshold count for the tail table (default 40)",
    "output_dir": "directory for CSV outputs (default .)",
}


@dataclass(frozen=True)
class RunConfig:
    """Fully validated parameters of one CLI invocation."""

    horizon: float
    steps: int
    focusing_sign: int = 1
    epsilon: float = 1.0
    modes: int = 64
    noise_modes: int | None = None
    scheme: SchemeKind = SchemeKind.SPECTRAL
    tolerance: float = 1e-12
    max_iterations: int = 100
    initial: str = "sine"
    initial_amplitude: float = 1.0
    seed: int = 0
    trajectories: int | None = None
    moment_order: float = 2.0
    resolutions: tuple | None = None
    reference_steps: int | None = None
    reference_modes: int | None = None
    alphas: tuple = (0.7, 1.0)
    snapshot_stride: int | None = None
    num_thresholds: int = 40
    output_dir: str = "."

    def __post_init__(self):
        if self.horizon <= 0:
            raise ConfigError("horizon", "must be positive")
        if self.steps < 0:
            raise ConfigError("steps", "must be nonnegative")
        if self.steps > 0 and self.horizon / self.steps >= 1.0:
            raise ConfigError("steps", f"time step tau = {self.horizon / self.steps} must be < 1")
        if self.focusing_sign not in (-1, 1):
            raise ConfigError("lambda", "must be +1 or -1")
        if self.epsilon < 0:
            raise ConfigError("epsilon", "must be nonnegative")
        if self.modes < 1:
            raise ConfigError("modes", "must be a positive integer")
        if self.noise_modes is not None and self.noise_modes < 1:
            raise ConfigError("noise_modes", "must be a positive integer")
        if self.tolerance <= 0:
            raise ConfigError("tolerance", "must be positive")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations", "must be a positive integer")
        if self.initial != "sine":
            raise ConfigError("initial", f"unknown initial datum {self.initial!r}")
        if self.seed < 0:
            raise ConfigError("seed", "must be nonnegative")
        if self.trajectories is not None and self.trajectories < 1:
            raise ConfigError("trajectories", "must be a positive integer")
        if self.moment_order < 1:
            raise ConfigError("moment_order", "must be >= 1")
        if self.snapshot_stride is not None and self.snapshot_stride < 1:
            raise ConfigError("snapshot_stride", "must be a positive integer")
        if self.num_thresholds < 2:
            raise ConfigError("num_thresholds", "must be at least 2")
        try:
            object.__setattr__(self, "scheme", SchemeKind(self.scheme))
        except ValueError:
            raise ConfigError("scheme", f"unknown scheme {self.scheme!r}") from None


def _parse_int(key, value):
    try:
        return int(value)
    except ValueError:
        raise ConfigError(key, f"expected an integer, got {value!r}") from None


def _parse_float(key, value):
    try:
        return float(value)
    except ValueError:
        raise ConfigError(key, f"expected a number, got {value!r}") from None


def _parse_int_list(key, value):
    try:
        return tuple(int(part) for part in str(value).split(",") if part.strip())
    except ValueError:
        raise ConfigError(key, f"expected comma-separated integers, got {value!r}") from None


def _parse_float_list(key, value):
    try:
        return tuple(float(part) for part in str(value).split(",") if part.strip())
    except ValueError:
        raise ConfigError(key, f"expected comma-separated numbers, got {value!r}") from None


_KEY_PARSERS = {
    "horizon": ("horizon", _parse_float),
    "steps": ("steps", _parse_int),
    "lambda": ("focusing_sign", _parse_int),
    "epsilon": ("epsilon", _parse_float),
    "modes": ("modes", _parse_int),
    "noise_modes": ("noise_modes", _parse_int),
    "scheme": ("scheme", lambda k, v: str(v)),
    "tolerance": ("tolerance", _parse_float),
    "max_iterations": ("max_iterations", _parse_int),
    "initial": ("initial", lambda k, v: str(v)),
    "initial_amplitude": ("initial_amplitude", _parse_float),
    "seed": ("seed", _parse_int),
    "trajectories": ("trajectories", _parse_int),
    "moment_order": ("moment_order", _parse_float),
    "resolutions": ("resolutions", _parse_int_list),
    "reference_steps": ("reference_steps", _parse_int),
    "reference_modes": ("reference_modes", _parse_int),
    "alphas": ("alphas", _parse_float_list),
    "snapshot_stride": ("snapshot_stride", _parse_int),
    "num_thresholds": ("num_thresholds", _parse_int),
    "output_dir": ("output_dir", lambda k, v: str(v)),
}


def parse_config(source: str, overrides: dict | None = None) -> RunConfig:
    """Parse flat `key = value` text into a validated RunConfig.

    A `preset` key is applied first, then file keys in order, then
    `overrides` (CLI flags).  Unknown keys and malformed values raise
    :class:`ConfigError` naming the offending key; nothing executes on an
    invalid config.
    """
    raw: dict[str, str] = {}
    for lineno, line in enumerate(source.splitlines(), start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, _, value = text.partition("=")
        raw[key.strip()] = value.strip()
    if overrides:
        raw.update({str(k): str(v) for k, v in overrides.items()})

    merged: dict[str, str] = {}
    preset_name = raw.pop("preset", None)
    if preset_name is not None:
        if preset_name not in PRESETS:
            raise ConfigError("preset", f"unknown preset {preset_name!r}")
        merged.update({k: str(v) for k, v in PRESETS[preset_name].items()})
    merged.update(raw)

    kwargs = {}
    for key, value in merged.items():
        if key not in _KEY_PARSERS:
            raise ConfigError(key, "unknown key")
        fieldname, parser = _KEY_PARSERS[key]
        kwargs[fieldname] = parser(key, value)
    if "horizon" not in kwargs:
        raise ConfigError("horizon", "required key is missing")
    if "steps" not in kwargs:
        raise ConfigError("steps", "required key is missing")
    return RunConfig(**kwargs)


def _noise_mode_count(config: RunConfig) -> int:
    return config.noise_modes if config.noise_modes is not None else config.modes


def _initial_state(config: RunConfig):
    if config.scheme == SchemeKind.SPECTRAL:
        coeffs = np.zeros(config.modes, dtype=np.complex128)
        coeffs[0] = config.initial_amplitude / np.sqrt(2.0)
        return SpectralState(coeffs)
    nodes = np.arange(1, config.modes + 1) / (config.modes + 1)
    return GridState(config.initial_amplitude * np.sin(np.pi * nodes) + 0j)


def _scheme_config(config: RunConfig) -> SchemeConfig:
    return SchemeConfig(
        horizon=config.horizon,
        num_steps=config.steps,
        focusing_sign=config.focusing_sign,
        solver_tolerance=config.tolerance,
        solver_max_iterations=config.max_iterations,
        scheme_kind=config.scheme,
    )


def _base_config(config: RunConfig, *, for_space: bool) -> BaseConfig:
    return BaseConfig(
        scheme_kind=config.scheme,
        horizon=config.horizon,
        focusing_sign=config.focusing_sign,
        epsilon=config.epsilon,
        spatial_resolution=None if for_space else config.modes,
        num_steps=config.steps if for_space else None,
        noise_modes=config.noise_modes,
        solver_tolerance=config.tolerance,
        solver_max_iterations=config.max_iterations,
        initial_amplitude=config.initial_amplitude,
    )


def _run_one_trajectory(config: RunConfig, trajectory: int):
    """Worker: full trajectory record for ensemble subcommands."""
    scheme_config = _scheme_config(config)
    if config.steps == 0:
        return run_trajectory(_initial_state(config), scheme_config, None, None)
    spec = build_covariance(_noise_mode_count(config), config.epsilon)
    path = sample_path(spec, config.horizon, config.steps, config.seed, stream=trajectory)
    stride = config.snapshot_stride or 1
    return run_trajectory(_initial_state(config), scheme_config, path, spec, stride)


def _write_lines(path: Path, lines) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as handle:
        handle.write("\n".join(lines) + "\n")


def _trajectory_lines(record) -> list:
    lines = [TRAJECTORY_HEADER]
    for i, t in enumerate(record.snapshot_times):
        lines.append(
            ",".join(
                repr(float(v))
                for v in (
                    t,
                    record.charge_series[i],
                    record.energy_series[i],
                    record.lyapunov_series[i],
                    record.h1_series[i],
                )
            )
        )
    return lines


def _cmd_simulate(config: RunConfig, outdir: Path, workers: int) -> int:
    trajectories = config.trajectories or 1
    records = _map_trajectories(_run_one_trajectory, config, trajectories, workers)
    for i, record in enumerate(records):
        _write_lines(outdir / f"trajectory_{i:03d}.csv", _trajectory_lines(record))
    if trajectories > 1:
        mean_lines = [TRAJECTORY_HEADER]
        times = records[0].snapshot_times
        stacked = {
            name: np.mean([getattr(r, name) for r in records], axis=0)
            for name in ("charge_series", "energy_series", "lyapunov_series", "h1_series")
        }
        for i, t in enumerate(times):
            mean_lines.append(
                ",".join(
                    repr(float(v))
                    for v in (
                        t,
                        stacked["charge_series"][i],
                        stacked["energy_series"][i],
                        stacked["lyapunov_series"][i],
                        stacked["h1_series"][i],
                    )
                )
            )
        _write_lines(outdir / "trajectory_mean.csv", mean_lines)
    print(f"simulate: wrote {trajectories} trajectory file(s) to {outdir}")
    return 0


def _cmd_converge_time(config: RunConfig, outdir: Path, workers: int) -> int:
    if config.resolutions is None:
        raise ConfigError("resolutions", "required for converge-time")
    if config.reference_steps is None:
        raise ConfigError("reference_steps", "required for converge-time")
    table = strong_error_time(
        _base_config(config, for_space=False),
        config.resolutions,
        config.reference_steps,
        config.trajectories or 100,
        config.moment_order,
        config.seed,
        workers=workers,
    )
    destination = outdir / "convergence_time.csv"
    destination.parent.mkdir(parents=True, exist_ok=True)
    emit_csv(table, destination)
    print(f"converge-time: fitted slope {table.fitted_slope:.4f} -> {destination}")
    return 0


def _cmd_converge_space(config: RunConfig, outdir: Path, workers: int) -> int:
    if config.resolutions is None:
        raise ConfigError("resolutions", "required for converge-space")
    if config.reference_modes is None:
        raise ConfigError("reference_modes", "required for converge-space")
    table = strong_error_space(
        _base_config(config, for_space=True),
        config.resolutions,
        config.reference_modes,
        config.trajectories or 50,
        config.moment_order,
        config.seed,
        workers=workers,
    )
    destination = outdir / "convergence_space.csv"
    destination.parent.mkdir(parents=True, exist_ok=True)
    emit_csv(table, destination)
    print(f"converge-space: fitted slope {table.fitted_slope:.4f} -> {destination}")
    return 0


def _cmd_moments(config: RunConfig, outdir: Path, workers: int) -> int:
    trajectories = config.trajectories or 200
    if config.snapshot_stride is None:
        stride = max(1, config.steps // 256) if config.steps else 1
        config = replace(config, snapshot_stride=stride)
    records = _map_trajectories(_run_one_trajectory, config, trajectories, workers)
    lines = [MOMENTS_HEADER]
    for alpha in config.alphas:
        series = diagnostics.exp_moment_series(records, alpha)
        for t, value in zip(records[0].snapshot_times, series):
            lines.append(f"{repr(float(t))},{repr(float(alpha))},{repr(float(value))}")
    destination = outdir / "moments.csv"
    _write_lines(destination, lines)
    print(f"moments: wrote {len(config.alphas)} series to {destination}")
    return 0


def _final_h1(config: RunConfig, trajectory: int) -> float:
    record = _run_one_trajectory(config, trajectory)
    return record.h1_series[-1]


def _cmd_tails(config: RunConfig, outdir: Path, workers: int) -> int:
    trajectories = config.trajectories or 1000
    sample_config = config if config.snapshot_stride else replace(
        config, snapshot_stride=max(1, config.steps or 1)
    )
    samples = np.array(
        _map_trajectories(_final_h1, sample_config, trajectories, workers)
    )
    thresholds = np.linspace(samples.min(), samples.max(), config.num_thresholds)
    exceedance = diagnostics.tail_exceedance(samples, thresholds)
    lines = [TAILS_HEADER]
    for x, pr in zip(thresholds, exceedance):
        lines.append(f"{repr(float(x))},{repr(float(pr))}")
    destination = outdir / "tails.csv"
    _write_lines(destination, lines)
    print(f"tails: wrote {len(thresholds)} thresholds to {destination}")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "converge-time": _cmd_converge_time,
    "converge-space": _cmd_converge_space,
    "moments": _cmd_moments,
    "tails": _cmd_tails,
}


def dispatch(subcommand: str, config: RunConfig, workers: int | None = None) -> int:
    """Run a subcommand; returns the process exit status.

    0 on success; 1 with a diagnostic on stderr for invalid setups or
    failed experiments; 2 for an unknown subcommand.
    """
    if subcommand not in _COMMANDS:
        print(
            f"unknown subcommand {subcommand!r}; choose from {', '.join(SUBCOMMANDS)}",
            file=sys.stderr,
        )
        return 2
    workers = default_workers() if workers is None else max(1, workers)
    outdir = Path(config.output_dir)
    try:
        return _COMMANDS[subcommand](config, outdir, workers)
    except (ConfigError, InvalidArgumentError, ExperimentError, SolverDivergenceError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="snls",
        description="Splitting Crank-Nicolson solver and benchmark harness "
        "for the 1D stochastic nonlinear Schrodinger equation.",
    )
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", type=Path, help="flat key=value config file")
    parser.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config key (repeatable)",
    )
    parser.add_argument("--output-dir", help="override the output directory")
    parser.add_argument("--workers", type=int, help="process count (speed only)")
    parser.add_argument(
        "--paper-scale",
        action="store_true",
        help="use the full-scale convergence presets instead of desk-scale keys",
    )
    args = parser.parse_args(argv)

    overrides = {}
    if args.paper_scale:
        overrides["preset"] = (
            "paper-time" if args.subcommand == "converge-time" else "paper-space"
        )
    for item in args.set:
        if "=" not in item:
            print(f"error: --set expects KEY=VALUE, got {item!r}", file=sys.stderr)
            return 2
        key, _, value = item.partition("=")
        overrides[key.strip()] = value.strip()
    if args.output_dir:
        overrides["output_dir"] = args.output_dir

    try:
        source = args.config.read_text() if args.config else ""
        config = parse_config(source, overrides)
    except OSError as err:
        print(f"error: cannot read config: {err}", file=sys.stderr)
        return 1
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1

    return dispatch(args.subcommand, config, workers=args.workers)


if __name__ == "__main__":
    sys.exit(main())
