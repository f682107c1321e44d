"""Splitting Crank-Nicolson time steppers (spectral and finite-difference).

Each time step composes two sub-steps.  The deterministic sub-step solves
the implicit Crank-Nicolson relation

    u' - u = i dt Lap((u + u')/2) + i lambda dt (|u|^2 + |u'|^2)/2 * (u + u')/2

which conserves both the discrete charge and the discrete energy exactly.
The noise sub-step multiplies pointwise by exp(-i DW_m(x)), the closed-form
flow of the linear Stratonovich noise equation; it preserves the pointwise
modulus, hence the charge.

The implicit relation is solved by a fixed-point iteration on the cubic
term with the stiff linear part inverted exactly each sweep (diagonal in
the sine basis, tridiagonal on the grid).  The iteration is contractive
for dt * |u|^2 small; on stagnation the solver falls back to modified
Newton sweeps that lag the modulus factor and solve the resulting
constant-mass linear system.
"""

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy.linalg import solve_banded

from .diagnostics import observables
from .errors import InvalidArgumentError, SolverDivergenceError
from .fdgrid import GridState, laplacian_values
from .noise import CovarianceSpec, NoisePath, sine_modes_on_points
from .spectral import (
    SpectralState,
    coeffs_to_grid,
    dealias_grid_size,
    eigenvalues,
    grid_points,
    grid_to_coeffs,
)

__all__ = [
    "SchemeKind",
    "SchemeConfig",
    "TrajectoryRecord",
    "cn_deterministic_step",
    "noise_step",
    "step",
    "run_trajectory",
]

State = SpectralState | GridState

# Iterations of non-decreasing change before the fixed point is declared
# stagnant and the modified-Newton fallback takes over.
_STAGNATION_SWEEPS = 3


class SchemeKind(str, Enum):
    SPECTRAL = "spectral"
    FINITE_DIFFERENCE = "finite_difference"


@dataclass(frozen=True)
class SchemeConfig:
    """Time-stepping parameters shared by both schemes.

    focusing_sign is +1 (focusing) or -1 (defocusing); 0 is accepted as a
    test hook that disables the cubic term entirely.  num_steps = 0 denotes
    the degenerate no-stepping run.
    """

    horizon: float
    num_steps: int
    focusing_sign: int = 1
    solver_tolerance: float = 1e-12
    solver_max_iterations: int = 100
    scheme_kind: SchemeKind = SchemeKind.SPECTRAL

    def __post_init__(self):
        if self.horizon <= 0.0:
            raise InvalidArgumentError("horizon must be positive")
        if self.num_steps < 0:
            raise InvalidArgumentError("num_steps must be nonnegative")
        if self.focusing_sign not in (-1, 0, 1):
            raise InvalidArgumentError("focusing_sign must be -1, 0 (disabled) or +1")
        if self.solver_tolerance <= 0.0:
            raise InvalidArgumentError("solver_tolerance must be positive")
        if self.solver_max_iterations < 1:
            raise InvalidArgumentError("solver_max_iterations must be positive")
        if self.num_steps > 0 and self.tau >= 1.0:
            raise InvalidArgumentError(
                f"time step tau = {self.tau} must be < 1; increase num_steps"
            )
        object.__setattr__(self, "scheme_kind", SchemeKind(self.scheme_kind))

    @property
    def tau(self) -> float:
        if self.num_steps == 0:
            return 0.0
        return self.horizon / self.num_steps


@dataclass
class TrajectoryRecord:
    """Snapshots and diagnostic series of one trajectory."""

    snapshot_times: np.ndarray
    states: list
    charge_series: np.ndarray
    energy_series: np.ndarray
    lyapunov_series: np.ndarray
    h1_series: np.ndarray

    @property
    def final_state(self):
        return self.states[-1]


def _l2(vec: np.ndarray) -> float:
    return float(np.linalg.norm(vec))


class _SpectralStepper:
    """Cached transforms and solver workspace for one spectral resolution."""

    def __init__(self, num_modes, focusing_sign, tolerance, max_iterations):
        self.num_modes = num_modes
        self.focusing_sign = focusing_sign
        self.tolerance = tolerance
        self.max_iterations = max_iterations
        self.lam = eigenvalues(num_modes)
        self.padded = dealias_grid_size(num_modes)
        self.physical_points = grid_points(self.padded)
        self._factors = None
        self._basis = None

    def _cayley(self, dt):
        if self._factors is None or self._factors[0] != dt:
            pre = 1.0 / (1.0 + 0.5j * dt * self.lam)
            cay = (1.0 - 0.5j * dt * self.lam) * pre
            self._factors = (dt, pre, cay)
        return self._factors[1], self._factors[2]

    def _to_grid(self, coeffs):
        return coeffs_to_grid(coeffs, self.padded)

    def _from_band(self, values):
        return grid_to_coeffs(values)[: self.num_modes]

    def deterministic(self, coeffs, dt):
        pre, cay = self._cayley(dt)
        base = cay * coeffs
        sign = self.focusing_sign
        if sign == 0:
            return base
        vm = self._to_grid(coeffs)
        mod_m = vm.real**2 + vm.imag**2
        gain = 1j * sign * dt * pre

        z = coeffs
        vz = vm
        prev_change = math.inf
        stagnant = 0
        for iteration in range(1, self.max_iterations + 1):
            rho = 0.5 * (mod_m + vz.real**2 + vz.imag**2)
            f = self._from_band(rho * (0.5 * (vm + vz)))
            z_new = base + gain * f
            change = _l2(z_new - z)
            z = z_new
            if change <= self.tolerance * max(_l2(z), 1e-300):
                return z
            if not math.isfinite(change) or change >= prev_change:
                stagnant += 1
                if not math.isfinite(change) or stagnant >= _STAGNATION_SWEEPS:
                    return self._newton(coeffs, z, dt, iteration)
            else:
                stagnant = 0
            prev_change = change
            vz = self._to_grid(z)
        return self._newton(coeffs, z, dt, self.max_iterations)

    def _sine_matrix(self):
        if self._basis is None:
            k = np.arange(1, self.num_modes + 1)
            self._basis = np.sqrt(2.0) * np.sin(
                np.pi * np.outer(self.physical_points, k)
            )
        return self._basis

    def _newton(self, coeffs, z, dt, spent):
        """Lagged-modulus linear sweeps: solve the constant-mass system with
        the density rho frozen at the current iterate."""
        if not np.all(np.isfinite(z)):
            z = coeffs
        sign = self.focusing_sign
        basis = self._sine_matrix()
        basis_fwd = basis.T / (self.padded + 1)
        a_diag = 1.0 + 0.5j * dt * self.lam
        b_diag = 1.0 - 0.5j * dt * self.lam
        vm = self._to_grid(coeffs)
        mod_m = vm.real**2 + vm.imag**2
        change = math.inf
        for iteration in range(spent + 1, self.max_iterations + 1):
            vz = self._to_grid(z)
            rho = 0.5 * (mod_m + vz.real**2 + vz.imag**2)
            coupling = basis_fwd @ (rho[:, None] * basis)
            lhs = np.diag(a_diag) - 0.5j * sign * dt * coupling
            rhs = b_diag * coeffs + 0.5j * sign * dt * (coupling @ coeffs)
            z_new = np.linalg.solve(lhs, rhs)
            change = _l2(z_new - z)
            z = z_new
            if change <= self.tolerance * max(_l2(z), 1e-300):
                return z
        raise SolverDivergenceError(residual=change, iterations=self.max_iterations)

    def noise(self, coeffs, increment_values):
        if len(increment_values) != self.padded:
            raise InvalidArgumentError(
                f"increment has {len(increment_values)} values, "
                f"physical grid has {self.padded}"
            )
        values = self._to_grid(coeffs) * np.exp(-1j * increment_values)
        return self._from_band(values)

    def increment_values(self, spec, path, step_index):
        """Projected increment P^N(DW_m) evaluated on the padded grid."""
        modes = min(spec.num_modes, self.num_modes)
        row = spec.intensity * spec.weights[:modes] * path.increments[step_index, :modes]
        return coeffs_to_grid(row.astype(np.complex128), self.padded).real

    def wrap(self, coeffs):
        return SpectralState(coeffs)

    @staticmethod
    def unwrap(state):
        return state.coeffs


class _GridStepper:
    """Tridiagonal Crank-Nicolson workspace for one grid resolution."""

    def __init__(self, num_nodes, focusing_sign, tolerance, max_iterations):
        self.num_nodes = num_nodes
        self.focusing_sign = focusing_sign
        self.tolerance = tolerance
        self.max_iterations = max_iterations
        self.spacing = 1.0 / (num_nodes + 1)
        self.physical_points = np.arange(1, num_nodes + 1) * self.spacing
        self._banded = None
        self._basis = None

    def _banded_matrix(self, dt):
        if self._banded is None or self._banded[0] != dt:
            n = self.num_nodes
            off = -0.5j * dt / self.spacing**2
            ab = np.zeros((3, n), dtype=np.complex128)
            ab[0, 1:] = off
            ab[1, :] = 1.0 - 2.0 * off
            ab[2, :-1] = off
            self._banded = (dt, ab)
        return self._banded[1]

    def deterministic(self, values, dt):
        ab = self._banded_matrix(dt)
        base_rhs = values + 0.5j * dt * laplacian_values(values, self.spacing)
        sign = self.focusing_sign
        if sign == 0:
            return solve_banded((1, 1), ab, base_rhs)
        mod_m = values.real**2 + values.imag**2

        z = values
        prev_change = math.inf
        stagnant = 0
        for iteration in range(1, self.max_iterations + 1):
            rho = 0.5 * (mod_m + z.real**2 + z.imag**2)
            rhs = base_rhs + 0.5j * sign * dt * rho * (values + z)
            z_new = solve_banded((1, 1), ab, rhs)
            change = _l2(z_new - z)
            z = z_new
            if change <= self.tolerance * max(_l2(z), 1e-300):
                return z
            if not math.isfinite(change) or change >= prev_change:
                stagnant += 1
                if not math.isfinite(change) or stagnant >= _STAGNATION_SWEEPS:
                    return self._newton(values, z, dt, iteration)
            else:
                stagnant = 0
            prev_change = change
        return self._newton(values, z, dt, self.max_iterations)

    def _newton(self, values, z, dt, spent):
        """Lagged-modulus sweeps; the frozen density only shifts the
        tridiagonal main diagonal, so each sweep stays O(N)."""
        if not np.all(np.isfinite(z)):
            z = values
        ab = self._banded_matrix(dt)
        sign = self.focusing_sign
        mod_m = values.real**2 + values.imag**2
        base_rhs = values + 0.5j * dt * laplacian_values(values, self.spacing)
        change = math.inf
        for iteration in range(spent + 1, self.max_iterations + 1):
            rho = 0.5 * (mod_m + z.real**2 + z.imag**2)
            shifted = ab.copy()
            shifted[1, :] -= 0.5j * sign * dt * rho
            rhs = base_rhs + 0.5j * sign * dt * rho * values
            z_new = solve_banded((1, 1), shifted, rhs)
            change = _l2(z_new - z)
            z = z_new
            if change <= self.tolerance * max(_l2(z), 1e-300):
                return z
        raise SolverDivergenceError(residual=change, iterations=self.max_iterations)

    def noise(self, values, increment_values):
        if len(increment_values) != self.num_nodes:
            raise InvalidArgumentError(
                f"increment has {len(increment_values)} values, "
                f"grid has {self.num_nodes} nodes"
            )
        return values * np.exp(-1j * increment_values)

    def increment_values(self, spec, path, step_index):
        if self._basis is None or self._basis.shape[1] != spec.num_modes:
            self._basis = sine_modes_on_points(spec.num_modes, self.physical_points)
        row = spec.weights * path.increments[step_index]
        return spec.intensity * (self._basis @ row)

    def wrap(self, values):
        return GridState(values)

    @staticmethod
    def unwrap(state):
        return state.values


@lru_cache(maxsize=64)
def _stepper(kind: SchemeKind, resolution: int, focusing_sign: int,
             tolerance: float, max_iterations: int):
    if kind == SchemeKind.SPECTRAL:
        return _SpectralStepper(resolution, focusing_sign, tolerance, max_iterations)
    return _GridStepper(resolution, focusing_sign, tolerance, max_iterations)


def _stepper_for(state: State, config: SchemeConfig):
    if isinstance(state, SpectralState):
        if config.scheme_kind != SchemeKind.SPECTRAL:
            raise InvalidArgumentError("spectral state requires scheme_kind=spectral")
        resolution = state.num_modes
    else:
        if config.scheme_kind != SchemeKind.FINITE_DIFFERENCE:
            raise InvalidArgumentError("grid state requires scheme_kind=finite_difference")
        resolution = state.num_nodes
    return _stepper(
        config.scheme_kind,
        resolution,
        config.focusing_sign,
        config.solver_tolerance,
        config.solver_max_iterations,
    )


def cn_deterministic_step(state: State, dt: float, config: SchemeConfig) -> State:
    """One implicit Crank-Nicolson solve of the deterministic sub-problem.

    Negative dt is accepted; it runs the time-symmetric scheme backwards
    (used by the reversibility checks).
    """
    if dt == 0.0 or not math.isfinite(dt):
        raise InvalidArgumentError("dt must be a nonzero finite number")
    stepper = _stepper_for(state, config)
    return stepper.wrap(stepper.deterministic(stepper.unwrap(state), dt))


def _transform_stepper(state: State):
    """Stepper used only for its grid transforms (solver knobs irrelevant)."""
    if isinstance(state, SpectralState):
        return _stepper(SchemeKind.SPECTRAL, state.num_modes, 0, 1e-12, 100)
    return _stepper(SchemeKind.FINITE_DIFFERENCE, state.num_nodes, 0, 1e-12, 100)


def noise_step(state: State, increment_values: np.ndarray) -> State:
    """Multiply by exp(-i DW(x)) on the scheme's physical grid.

    Finite differences apply the phase at the nodes (exact modulus);
    the spectral variant applies it on the padded grid and truncates back
    to N modes.
    """
    stepper = _transform_stepper(state)
    incr = np.asarray(increment_values, dtype=np.float64)
    return stepper.wrap(stepper.noise(stepper.unwrap(state), incr))


def step(
    state: State,
    config: SchemeConfig,
    path: NoisePath,
    spec: CovarianceSpec,
    step_index: int,
) -> State:
    """One full splitting step: deterministic Crank-Nicolson, then noise flow."""
    if not 0 <= step_index < path.num_steps:
        raise InvalidArgumentError(f"step_index {step_index} out of range")
    dt = config.tau
    if abs(path.dt - dt) > 1e-12 * max(dt, path.dt):
        raise InvalidArgumentError(
            f"path dt {path.dt} does not match config tau {dt}"
        )
    stepper = _stepper_for(state, config)
    arr = stepper.deterministic(stepper.unwrap(state), dt)
    incr = stepper.increment_values(spec, path, step_index)
    if np.any(incr):
        arr = stepper.noise(arr, incr)
    return stepper.wrap(arr)


def iterate_raw(initial: State, config: SchemeConfig, path: NoisePath,
                spec: CovarianceSpec):
    """Yield the raw coefficient/value array after each full step.

    Lean driver for the Monte Carlo harness: no snapshot bookkeeping, no
    diagnostics.  Yielded arrays are fresh and safe to retain.
    """
    stepper = _stepper_for(initial, config)
    dt = config.tau
    arr = stepper.unwrap(initial)
    for m in range(config.num_steps):
        try:
            arr = stepper.deterministic(arr, dt)
            incr = stepper.increment_values(spec, path, m)
            if np.any(incr):
                arr = stepper.noise(arr, incr)
        except SolverDivergenceError as err:
            raise SolverDivergenceError(err.residual, err.iterations, step_index=m) from None
        yield arr


def run_trajectory(
    initial: State,
    config: SchemeConfig,
    path: NoisePath | None,
    spec: CovarianceSpec | None,
    snapshot_stride: int = 1,
) -> TrajectoryRecord:
    """Iterate the splitting scheme over the whole horizon.

    Diagnostics (charge, energy, Lyapunov functional, H^1 norm) are
    recorded every `snapshot_stride` steps and at the final time.  A
    divergent implicit solve aborts with the failing step index attached.

    `path` may be None only when num_steps = 0.
    """
    if snapshot_stride < 1:
        raise InvalidArgumentError("snapshot_stride must be a positive integer")
    if config.num_steps > 0:
        if path is None or spec is None:
            raise InvalidArgumentError("path and spec are required when num_steps > 0")
        if path.num_steps != config.num_steps:
            raise InvalidArgumentError(
                f"path has {path.num_steps} steps, config expects {config.num_steps}"
            )
        if abs(path.horizon - config.horizon) > 1e-12 * config.horizon:
            raise InvalidArgumentError(
                f"path horizon {path.horizon} does not match config horizon {config.horizon}"
            )

    stepper = _stepper_for(initial, config)
    dt = config.tau
    times = [0.0]
    states = [initial]
    series = [observables(initial, config.focusing_sign)]

    for done, arr in enumerate(iterate_raw(initial, config, path, spec), start=1):
        if done % snapshot_stride == 0 or done == config.num_steps:
            state = stepper.wrap(arr)
            times.append(done * dt)
            states.append(state)
            series.append(observables(state, config.focusing_sign))

    return TrajectoryRecord(
        snapshot_times=np.asarray(times),
        states=states,
        charge_series=np.asarray([s.charge for s in series]),
        energy_series=np.asarray([s.energy for s in series]),
        lyapunov_series=np.asarray([s.lyapunov for s in series]),
        h1_series=np.asarray([s.h1_norm for s in series]),
    )
