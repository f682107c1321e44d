"""Monte Carlo strong-convergence harness.

Coupled reference/coarse runs on shared Brownian paths, strong-error tables
E[sup_m |u_ref - u_coarse|^p]^(1/p), least-squares order fitting on a
log-log scale, and deterministic CSV emission.

Determinism contract: every number in a table is a pure function of
(base config, resolutions, seed); trajectories are independent work
items reduced in index order, so any worker count yields identical bytes.
"""

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .errors import ExperimentError, InvalidArgumentError, SolverDivergenceError
from .fdgrid import GridState
from .noise import build_covariance, coarsen_path, sample_path, sine_modes_on_points
from .schemes import SchemeConfig, SchemeKind, SpectralState, iterate_raw

__all__ = [
    "BaseConfig",
    "ErrorTable",
    "strong_error_time",
    "strong_error_space",
    "fit_order",
    "emit_csv",
    "read_error_table",
    "default_workers",
]

WORKERS_ENV_VAR = "SNLS_WORKERS"

# Failed-trajectory budget: more than this fraction aborts the table.
FAILURE_BUDGET = 0.01

CSV_HEADER = "axis,resolution,error,std_error,p,trajectories,scheme,lambda,epsilon,seed"

TIME_AXIS = "time_step"
SPACE_AXIS = "mode_count"


def default_workers() -> int:
    """Worker count from the environment (speed only, never results)."""
    raw = os.environ.get(WORKERS_ENV_VAR, "1")
    try:
        value = int(raw)
    except ValueError as err:
        raise InvalidArgumentError(f"{WORKERS_ENV_VAR} must be an integer, got {raw!r}") from err
    return max(1, value)


@dataclass(frozen=True)
class BaseConfig:
    """Physics and solver parameters shared by every run of an experiment.

    `spatial_resolution` is the fixed N for the time-axis study;
    `num_steps` is the fixed M for the space-axis study.  `noise_modes`
    defaults to the spatial resolution (time axis) or to the reference
    resolution (space axis).  `initial_coefficients` overrides the default
    sin(pi x) datum with explicit sine coefficients.
    """

    scheme_kind: SchemeKind = SchemeKind.SPECTRAL
    horizon: float = 0.5
    focusing_sign: int = 1
    epsilon: float = 1.0
    spatial_resolution: int | None = None
    num_steps: int | None = None
    noise_modes: int | None = None
    solver_tolerance: float = 1e-12
    solver_max_iterations: int = 100
    initial_amplitude: float = 1.0
    initial_coefficients: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "scheme_kind", SchemeKind(self.scheme_kind))


@dataclass(frozen=True)
class ErrorTable:
    """Strong-error estimates over a resolution sweep.

    `resolutions` holds the literal sweep values (tau for the time axis,
    N for the mode-count axis).  `fitted_slope` is the convergence order,
    oriented so that refinement with decaying error gives a positive
    slope: the log-log slope against tau on the time axis and against 1/N
    on the mode-count axis.
    """

    axis_kind: str
    resolutions: np.ndarray
    errors: np.ndarray
    std_errors: np.ndarray
    moment_order: float
    trajectories: int
    fitted_slope: float
    seed: int
    scheme: SchemeKind
    focusing_sign: int
    epsilon: float
    failures: int = 0
    provenance: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.axis_kind not in (TIME_AXIS, SPACE_AXIS):
            raise InvalidArgumentError(f"unknown axis_kind {self.axis_kind!r}")
        res = np.asarray(self.resolutions, dtype=np.float64)
        err = np.asarray(self.errors, dtype=np.float64)
        se = np.asarray(self.std_errors, dtype=np.float64)
        if not (res.shape == err.shape == se.shape):
            raise InvalidArgumentError("resolutions, errors and std_errors must align")
        diffs = np.diff(res)
        if res.size >= 2 and not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise InvalidArgumentError("resolutions must be strictly monotone")
        if np.any(err < 0) or not np.all(np.isfinite(err)):
            raise InvalidArgumentError("errors must be finite and nonnegative")
        if self.moment_order < 1:
            raise InvalidArgumentError("moment_order must be >= 1")
        for name, arr in (("resolutions", res), ("errors", err), ("std_errors", se)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "scheme", SchemeKind(self.scheme))


def fit_order(resolutions, errors) -> float:
    """Least-squares slope of log(error) against log(resolution)."""
    r = np.asarray(resolutions, dtype=np.float64)
    e = np.asarray(errors, dtype=np.float64)
    if r.size < 2:
        raise InvalidArgumentError("need at least two points to fit an order")
    if r.shape != e.shape:
        raise InvalidArgumentError("resolutions and errors must have equal length")
    if np.any(r <= 0) or np.any(e <= 0):
        raise InvalidArgumentError("order fit requires positive resolutions and errors")
    return float(np.polyfit(np.log(r), np.log(e), 1)[0])


def _initial_array(base: BaseConfig, resolution: int):
    """Raw initial data at the given resolution (coefficients or node values)."""
    if base.scheme_kind == SchemeKind.SPECTRAL:
        coeffs = np.zeros(resolution, dtype=np.complex128)
        if base.initial_coefficients is not None:
            given = np.asarray(base.initial_coefficients, dtype=np.complex128)
            coeffs[: min(resolution, given.size)] = given[:resolution]
        else:
            coeffs[0] = base.initial_amplitude / np.sqrt(2.0)
        return coeffs
    nodes = np.arange(1, resolution + 1) / (resolution + 1)
    if base.initial_coefficients is not None:
        given = np.asarray(base.initial_coefficients, dtype=np.complex128)
        basis = sine_modes_on_points(given.size, nodes)
        return basis.astype(np.complex128) @ given
    return base.initial_amplitude * np.sin(np.pi * nodes) + 0j


def _wrap_state(base: BaseConfig, arr):
    if base.scheme_kind == SchemeKind.SPECTRAL:
        return SpectralState(arr)
    return GridState(arr)


def _scheme_config(base: BaseConfig, num_steps: int) -> SchemeConfig:
    return SchemeConfig(
        horizon=base.horizon,
        num_steps=num_steps,
        focusing_sign=base.focusing_sign,
        solver_tolerance=base.solver_tolerance,
        solver_max_iterations=base.solver_max_iterations,
        scheme_kind=base.scheme_kind,
    )


def _distance(base: BaseConfig, a, b) -> float:
    """Discrete L^2 distance between two raw arrays at equal resolution."""
    if base.scheme_kind == SchemeKind.SPECTRAL:
        return float(np.linalg.norm(a - b))
    h = 1.0 / (len(a) + 1)
    return float(np.sqrt(h) * np.linalg.norm(a - b))


def _final_array(initial_arr, base, config, path, spec):
    arr = initial_arr
    for arr in iterate_raw(_wrap_state(base, initial_arr), config, path, spec):
        pass
    return arr


def _time_axis_trajectory(context, trajectory: int):
    """Sup-over-time errors of every coarse resolution for one trajectory."""
    base, step_counts, reference_steps, seed = context
    modes = base.noise_modes if base.noise_modes is not None else base.spatial_resolution
    spec = build_covariance(modes, base.epsilon)
    fine = sample_path(spec, base.horizon, reference_steps, seed, stream=trajectory)

    lattice = math.lcm(*step_counts)
    initial_arr = _initial_array(base, base.spatial_resolution)
    initial = _wrap_state(base, initial_arr)

    try:
        ref_states = {0: initial_arr}
        ref_stride = reference_steps // lattice
        ref_config = _scheme_config(base, reference_steps)
        for m, arr in enumerate(iterate_raw(initial, ref_config, fine, spec), start=1):
            if m % ref_stride == 0:
                ref_states[m // ref_stride] = arr

        sups = np.zeros(len(step_counts))
        for i, coarse_steps in enumerate(step_counts):
            coarse_path = coarsen_path(fine, reference_steps // coarse_steps)
            coarse_config = _scheme_config(base, coarse_steps)
            skip = lattice // coarse_steps
            worst = 0.0
            for m, arr in enumerate(iterate_raw(initial, coarse_config, coarse_path, spec),
                                     start=1):
                worst = max(worst, _distance(base, arr, ref_states[m * skip]))
            sups[i] = worst
        return sups
    except SolverDivergenceError:
        return None


def _space_axis_trajectory(context, trajectory: int):
    """Final-time errors of every coarse resolution for one trajectory."""
    base, mode_counts, reference_modes, seed = context
    modes = base.noise_modes if base.noise_modes is not None else reference_modes
    spec = build_covariance(modes, base.epsilon)
    path = sample_path(spec, base.horizon, base.num_steps, seed, stream=trajectory)
    config = _scheme_config(base, base.num_steps)

    try:
        ref_final = _final_array(_initial_array(base, reference_modes), base, config, path, spec)
        errs = np.zeros(len(mode_counts))
        for i, coarse in enumerate(mode_counts):
            coarse_final = _final_array(_initial_array(base, coarse), base, config, path, spec)
            if base.scheme_kind == SchemeKind.SPECTRAL:
                padded = np.zeros(reference_modes, dtype=np.complex128)
                padded[:coarse] = coarse_final
                errs[i] = float(np.linalg.norm(padded - ref_final))
            else:
                ratio = (reference_modes + 1) // (coarse + 1)
                shared = ref_final[ratio - 1 :: ratio]
                h_coarse = 1.0 / (coarse + 1)
                errs[i] = float(np.sqrt(h_coarse) * np.linalg.norm(coarse_final - shared))
        return errs
    except SolverDivergenceError:
        return None


def _map_trajectories(worker, context, trajectories: int, workers: int):
    func = partial(worker, context)
    indices = range(trajectories)
    if workers <= 1:
        return [func(i) for i in indices]
    chunk = max(1, trajectories // (workers * 4))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, indices, chunksize=chunk))


def _reduce_table(per_trajectory, resolutions, axis_kind, base, moment_order,
                  trajectories, seed, provenance):
    failures = sum(1 for row in per_trajectory if row is None)
    if failures > FAILURE_BUDGET * trajectories:
        raise ExperimentError(
            f"{failures}/{trajectories} trajectories failed to converge "
            f"(budget {FAILURE_BUDGET:.0%})"
        )
    kept = np.array([row for row in per_trajectory if row is not None])
    p = float(moment_order)
    powered = kept**p
    mean_p = powered.mean(axis=0)
    errors = mean_p ** (1.0 / p)
    count = kept.shape[0]
    if count > 1:
        se_mean = powered.std(axis=0, ddof=1) / np.sqrt(count)
    else:
        se_mean = np.zeros_like(mean_p)
    with np.errstate(divide="ignore", invalid="ignore"):
        std_errors = np.where(errors > 0, se_mean * errors ** (1.0 - p) / p, 0.0)

    if axis_kind == TIME_AXIS:
        fit_x = np.asarray(resolutions, dtype=np.float64)
    else:
        fit_x = 1.0 / np.asarray(resolutions, dtype=np.float64)
    if len(resolutions) >= 2 and np.all(errors > 0):
        slope = fit_order(fit_x, errors)
    else:
        slope = math.nan

    table = ErrorTable(
        axis_kind=axis_kind,
        resolutions=np.asarray(resolutions, dtype=np.float64),
        errors=errors,
        std_errors=std_errors,
        moment_order=p,
        trajectories=trajectories,
        fitted_slope=slope,
        seed=seed,
        scheme=base.scheme_kind,
        focusing_sign=base.focusing_sign,
        epsilon=base.epsilon,
        failures=failures,
        provenance=provenance,
    )
    _check_monotonicity(table)
    return table


def _check_monotonicity(table: ErrorTable):
    """Statistical sanity of the sweep: errors should decay with refinement.

    Soft warning on any inversion; hard failure when an adjacent pair is
    inverted by more than a factor of two (only enforced for tables with
    enough trajectories for the ordering to be meaningful).
    """
    if table.trajectories < 50 or table.resolutions.size < 2 or np.any(table.errors <= 0):
        return
    res = table.resolutions
    err = table.errors
    if res[0] > res[-1]:
        res, err = res[::-1], err[::-1]
    # now resolutions ascending: time axis expects err nondecreasing with tau,
    # mode-count axis expects err nonincreasing with N.
    ratios = err[1:] / err[:-1]
    bad = ratios < 1.0 if table.axis_kind == TIME_AXIS else ratios > 1.0
    if not np.any(bad):
        return
    worst = np.min(ratios) if table.axis_kind == TIME_AXIS else np.max(ratios)
    violation = 1.0 / worst if table.axis_kind == TIME_AXIS else worst
    message = (
        f"error ordering violated on the {table.axis_kind} axis "
        f"(worst adjacent ratio {violation:.2f})"
    )
    if violation > 2.0:
        raise ExperimentError(message)
    warnings.warn(message, stacklevel=3)


def _base_provenance(base: BaseConfig, extra: dict | None) -> tuple:
    items = {
        "horizon": repr(float(base.horizon)),
        "scheme": base.scheme_kind.value,
        "lambda": str(base.focusing_sign),
        "epsilon": repr(float(base.epsilon)),
        "solver_tolerance": repr(float(base.solver_tolerance)),
        "solver_max_iterations": str(base.solver_max_iterations),
        "initial_amplitude": repr(float(base.initial_amplitude)),
    }
    if base.spatial_resolution is not None:
        items["spatial_resolution"] = str(base.spatial_resolution)
    if base.num_steps is not None:
        items["num_steps"] = str(base.num_steps)
    if base.noise_modes is not None:
        items["noise_modes"] = str(base.noise_modes)
    if extra:
        items.update({k: str(v) for k, v in extra.items()})
    return tuple(sorted(items.items()))


def strong_error_time(
    base_config: BaseConfig,
    resolutions,
    reference_steps: int,
    trajectories: int,
    moment_order: float = 2.0,
    seed: int = 0,
    workers: int | None = None,
) -> ErrorTable:
    """Temporal strong-error sweep against a fine reference on coupled paths.

    Per trajectory: sample one fine path, run the reference, then run each
    coarse step count on the summed (coarsened) path and record the sup
    over the coarse grid's own times of the discrete L^2 distance.  The
    table averages p-th powers over trajectories and takes the p-th root.

    Args:
        base_config: shared physics; `spatial_resolution` is required.
        resolutions: coarse step counts, each dividing `reference_steps`.
        reference_steps: step count of the reference run.
        trajectories: Monte Carlo batch size P.
        moment_order: p >= 1.
        seed: base seed; trajectory i uses substream i.
        workers: process count (defaults to the SNLS_WORKERS variable).
    """
    step_counts = [int(m) for m in resolutions]
    if not step_counts:
        raise InvalidArgumentError("resolutions must be nonempty")
    if base_config.spatial_resolution is None:
        raise InvalidArgumentError("base_config.spatial_resolution is required")
    if trajectories < 1:
        raise InvalidArgumentError("trajectories must be positive")
    for count in step_counts:
        if count < 1 or reference_steps % count != 0:
            raise InvalidArgumentError(
                f"coarse step count {count} does not divide reference_steps {reference_steps}"
            )
    if len(set(step_counts)) != len(step_counts):
        raise InvalidArgumentError("resolutions must be distinct")

    order = np.argsort(step_counts)[::-1]  # descending M = ascending tau
    sorted_counts = [step_counts[i] for i in order]
    workers = default_workers() if workers is None else workers
    context = (base_config, tuple(sorted_counts), reference_steps, seed)
    rows = _map_trajectories(_time_axis_trajectory, context, trajectories, workers)

    taus = [base_config.horizon / m for m in sorted_counts]
    provenance = _base_provenance(
        base_config,
        {"reference_steps": reference_steps, "trajectories": trajectories,
         "moment_order": moment_order, "axis": TIME_AXIS},
    )
    return _reduce_table(rows, taus, TIME_AXIS, base_config, moment_order,
                         trajectories, seed, provenance)


def strong_error_space(
    base_config: BaseConfig,
    mode_counts,
    reference_modes: int,
    trajectories: int,
    moment_order: float = 2.0,
    seed: int = 0,
    workers: int | None = None,
) -> ErrorTable:
    """Spatial strong-error sweep on a shared time grid and shared paths.

    All runs of one trajectory see the same noise path (truncation K fixed,
    defaulting to `reference_modes`).  The coarse solution is compared to
    the reference at the final time in the reference space: spectral states
    are zero-padded (which charges the reference's own truncation tail to
    the error), finite-difference states are compared at shared nodes.
    """
    counts = [int(n) for n in mode_counts]
    if not counts:
        raise InvalidArgumentError("mode_counts must be nonempty")
    if base_config.num_steps is None:
        raise InvalidArgumentError("base_config.num_steps is required")
    if trajectories < 1:
        raise InvalidArgumentError("trajectories must be positive")
    for count in counts:
        if count < 1 or count > reference_modes:
            raise InvalidArgumentError(
                f"coarse resolution {count} must lie in [1, reference_modes]"
            )
        if base_config.scheme_kind == SchemeKind.FINITE_DIFFERENCE and (
            (reference_modes + 1) % (count + 1) != 0
        ):
            raise InvalidArgumentError(
                f"grid with {count} nodes does not share nodes with the "
                f"{reference_modes}-node reference"
            )
    if len(set(counts)) != len(counts):
        raise InvalidArgumentError("mode_counts must be distinct")

    sorted_counts = sorted(counts)
    workers = default_workers() if workers is None else workers
    context = (base_config, tuple(sorted_counts), reference_modes, seed)
    rows = _map_trajectories(_space_axis_trajectory, context, trajectories, workers)

    provenance = _base_provenance(
        base_config,
        {"reference_modes": reference_modes, "trajectories": trajectories,
         "moment_order": moment_order, "axis": SPACE_AXIS},
    )
    return _reduce_table(rows, sorted_counts, SPACE_AXIS, base_config, moment_order,
                         trajectories, seed, provenance)


def emit_csv(table: ErrorTable, destination) -> None:
    """Write the documented CSV schema with provenance comment lines.

    Layout: `#`-prefixed `key = value` comments carrying the full config,
    one header row, then one row per resolution.  All floats are written
    with shortest round-trip formatting, so emission is byte-deterministic.
    """
    if table.resolutions.size == 0:
        raise InvalidArgumentError("cannot emit an empty table")
    lines = []
    comments = dict(table.provenance)
    comments["fitted_slope"] = repr(float(table.fitted_slope))
    comments["failures"] = str(table.failures)
    for key in sorted(comments):
        lines.append(f"# {key} = {comments[key]}")
    lines.append(CSV_HEADER)
    for res, err, se in zip(table.resolutions, table.errors, table.std_errors):
        lines.append(
            ",".join(
                [
                    table.axis_kind,
                    repr(float(res)),
                    repr(float(err)),
                    repr(float(se)),
                    repr(float(table.moment_order)),
                    str(table.trajectories),
                    table.scheme.value,
                    str(table.focusing_sign),
                    repr(float(table.epsilon)),
                    str(table.seed),
                ]
            )
        )
    text = "\n".join(lines) + "\n"
    try:
        with open(destination, "w", newline="") as handle:
            handle.write(text)
    except OSError as err:
        raise OSError(f"failed to write error table to {destination}: {err}") from err


def read_error_table(source) -> ErrorTable:
    """Parse a CSV produced by :func:`emit_csv` back into an ErrorTable."""
    comments = {}
    rows = []
    header = None
    with open(source) as handle:
        for line in handle:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].partition("=")
                comments[key.strip()] = value.strip()
            elif header is None:
                header = line
                if header != CSV_HEADER:
                    raise InvalidArgumentError(
                        f"unexpected CSV header {header!r} in {source}"
                    )
            else:
                rows.append(line.split(","))
    if header is None or not rows:
        raise InvalidArgumentError(f"no table rows found in {source}")

    axis = rows[0][0]
    computed_keys = ("fitted_slope", "failures")
    provenance = tuple(
        (k, v) for k, v in sorted(comments.items()) if k not in computed_keys
    )
    return ErrorTable(
        axis_kind=axis,
        resolutions=np.array([float(r[1]) for r in rows]),
        errors=np.array([float(r[2]) for r in rows]),
        std_errors=np.array([float(r[3]) for r in rows]),
        moment_order=float(rows[0][4]),
        trajectories=int(rows[0][5]),
        fitted_slope=float(comments.get("fitted_slope", "nan")),
        seed=int(rows[0][9]),
        scheme=SchemeKind(rows[0][6]),
        focusing_sign=int(rows[0][7]),
        epsilon=float(rows[0][8]),
        failures=int(comments.get("failures", "0")),
        provenance=provenance,
    )
