"""Q-Wiener increment sampling on the Dirichlet sine basis.

The driving noise is W(t, x) = eps * sum_k q_k * sqrt(2) sin(k pi x) * beta_k(t)
with independent scalar Brownian motions beta_k.  A :class:`CovarianceSpec`
holds the truncation K, the mode weights q_k and the intensity eps; a
:class:`NoisePath` holds one sampled matrix of increments
Delta beta_k over uniform time steps.

Sampling is counter-based: entry (m, k) of a path is a pure function of
(seed, stream, m, k), so results do not depend on sampling order or on how
trajectories are distributed over workers.  Coarse paths are produced by
summing fine increments in a fixed order over the originally sampled matrix,
which is the coupling used to compare solutions across step sizes.
"""

from dataclasses import dataclass, field

import numpy as np
from numpy.random import Philox
from scipy.special import ndtri

from .errors import InvalidArgumentError

__all__ = [
    "CovarianceSpec",
    "NoisePath",
    "build_covariance",
    "sample_path",
    "coarsen_path",
    "increment_on_points",
]

# Spectral decay exponent of the default mode weights q_k = 1/(1 + k^r).
DEFAULT_WEIGHT_EXPONENT = 2.6


@dataclass(frozen=True, eq=False)
class CovarianceSpec:
    """Truncated covariance operator of the driving Q-Wiener process.

    Attributes:
        num_modes: number of retained sine modes K.
        weights: per-mode weights (q_1 .. q_K), positive and nonincreasing.
        intensity: scalar multiplier eps applied at evaluation time.
    """

    num_modes: int
    weights: np.ndarray
    intensity: float = 1.0

    def __post_init__(self):
        if self.num_modes < 1:
            raise InvalidArgumentError("num_modes must be a positive integer")
        w = np.array(self.weights, dtype=np.float64, copy=True)
        if w.shape != (self.num_modes,):
            raise InvalidArgumentError(
                f"weights must have shape ({self.num_modes},), got {w.shape}"
            )
        if not np.all(w > 0.0):
            raise InvalidArgumentError("all weights must be positive")
        if np.any(np.diff(w) > 0.0):
            raise InvalidArgumentError("weights must be nonincreasing in k")
        if self.intensity < 0.0:
            raise InvalidArgumentError("intensity must be nonnegative")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True, eq=False)
class NoisePath:
    """One coupled realization of Brownian increments per mode and step.

    ``increments[m, k]`` is Delta beta_k over step m, distributed
    Normal(0, dt).  The intensity eps is *not* baked in; it is applied by
    the evaluation routines so one stored path serves several intensities.

    ``_fine``/``_factor`` retain the originally sampled finest matrix so
    nested coarsenings reduce over it directly; this makes
    ``coarsen(coarsen(p, a), b)`` bit-identical to ``coarsen(p, a*b)``.
    """

    dt: float
    increments: np.ndarray
    _fine: np.ndarray = field(repr=False, default=None)
    _factor: int = field(repr=False, default=1)

    def __post_init__(self):
        if self.dt <= 0.0:
            raise InvalidArgumentError("dt must be positive")
        inc = np.array(self.increments, dtype=np.float64, copy=True, order="C")
        inc.flags.writeable = False
        object.__setattr__(self, "increments", inc)
        if self._fine is None:
            object.__setattr__(self, "_fine", inc)

    @property
    def num_steps(self) -> int:
        return self.increments.shape[0]

    @property
    def num_modes(self) -> int:
        return self.increments.shape[1]

    @property
    def horizon(self) -> float:
        return self.num_steps * self.dt


def build_covariance(num_modes: int, intensity: float = 1.0) -> CovarianceSpec:
    """Build the default covariance with weights q_k = 1/(1 + k^2.6).

    Args:
        num_modes: truncation K >= 1.
        intensity: noise intensity eps >= 0.
    """
    if num_modes < 1:
        raise InvalidArgumentError("num_modes must be a positive integer")
    k = np.arange(1, num_modes + 1, dtype=np.float64)
    weights = 1.0 / (1.0 + k**DEFAULT_WEIGHT_EXPONENT)
    return CovarianceSpec(num_modes=num_modes, weights=weights, intensity=float(intensity))


def _gaussian_block(seed: int, stream: int, count: int) -> np.ndarray:
    """`count` standard normals, a pure function of (seed, stream, index).

    Raw Philox words are mapped to uniforms on the open interval (0, 1)
    and pushed through the inverse normal CDF, so draw i never depends on
    draws j != i and blocks can be regenerated in any order.
    """
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(stream)], dtype=np.uint64)
    words = Philox(key=key).random_raw(count)
    uniforms = ((words >> np.uint64(11)) + 0.5) * 2.0**-53
    return ndtri(uniforms)


def sample_path(
    spec: CovarianceSpec,
    horizon: float,
    num_steps: int,
    seed: int,
    stream: int = 0,
) -> NoisePath:
    """Sample an M x K matrix of independent Normal(0, horizon/num_steps) increments.

    Args:
        spec: covariance spec; fixes the number of modes K.
        horizon: total time T > 0.
        num_steps: number of uniform steps M >= 1.
        seed: 64-bit seed; together with `stream` it fully determines the path.
        stream: substream index, used as the trajectory index by the
            Monte Carlo harness.
    """
    if horizon <= 0.0:
        raise InvalidArgumentError("horizon must be positive")
    if num_steps < 1:
        raise InvalidArgumentError("num_steps must be a positive integer")
    dt = horizon / num_steps
    draws = _gaussian_block(seed, stream, num_steps * spec.num_modes)
    increments = draws.reshape(num_steps, spec.num_modes) * np.sqrt(dt)
    return NoisePath(dt=dt, increments=increments)


def _grouped_sum(fine: np.ndarray, factor: int) -> np.ndarray:
    """Sum rows of `fine` in groups of `factor`, left to right within a group."""
    num_steps = fine.shape[0] // factor
    grouped = fine[: num_steps * factor].reshape(num_steps, factor, fine.shape[1])
    out = grouped[:, 0, :].copy()
    for j in range(1, factor):
        out += grouped[:, j, :]
    return out


def coarsen_path(path: NoisePath, factor: int) -> NoisePath:
    """Aggregate a path onto a grid coarser by an integer factor.

    Output increment m is the sum of input increments m*factor ..
    (m+1)*factor - 1; this realizes both solutions on the same Brownian
    motion.  Sums are always taken over the originally sampled finest
    matrix, so nested coarsenings compose exactly.
    """
    if factor < 1:
        raise InvalidArgumentError("factor must be a positive integer")
    if path.num_steps % factor != 0:
        raise InvalidArgumentError(
            f"num_steps {path.num_steps} not divisible by factor {factor}"
        )
    total = path._factor * factor
    return NoisePath(
        dt=path.dt * factor,
        increments=_grouped_sum(path._fine, total),
        _fine=path._fine,
        _factor=total,
    )


def sine_modes_on_points(num_modes: int, points: np.ndarray) -> np.ndarray:
    """Matrix S[j, k] = sqrt(2) sin((k+1) pi x_j), with exact zeros at x in {0, 1}."""
    x = np.asarray(points, dtype=np.float64)
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise InvalidArgumentError("points must lie in [0, 1]")
    k = np.arange(1, num_modes + 1, dtype=np.float64)
    s = np.sqrt(2.0) * np.sin(np.pi * np.outer(x, k))
    s[(x == 0.0) | (x == 1.0), :] = 0.0
    return s


def increment_on_points(
    spec: CovarianceSpec,
    path: NoisePath,
    step_index: int,
    points: np.ndarray,
) -> np.ndarray:
    """Evaluate Delta W_m(x_j) = eps * sum_k q_k sqrt(2) sin(k pi x_j) Dbeta_{k,m}.

    The sum over the K modes is evaluated exactly; values at x = 0 and
    x = 1 are exactly zero.
    """
    if not 0 <= step_index < path.num_steps:
        raise InvalidArgumentError(
            f"step_index {step_index} out of range [0, {path.num_steps})"
        )
    if path.num_modes != spec.num_modes:
        raise InvalidArgumentError(
            f"path has {path.num_modes} modes, spec has {spec.num_modes}"
        )
    basis = sine_modes_on_points(spec.num_modes, points)
    return spec.intensity * (basis @ (spec.weights * path.increments[step_index]))
