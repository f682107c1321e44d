"""Sine-basis (spectral Galerkin) representation with Dirichlet boundary.

States are coefficient vectors in the orthonormal eigenbasis of the
Dirichlet Laplacian on (0, 1): phi_k(x) = sqrt(2) sin(k pi x) with
eigenvalues lam_k = (k pi)^2, so u(x) = sum_k c_k phi_k(x) and Parseval
holds with unit constant.  The collocation grid for N modes is
x_j = j/(N+1), j = 1..N; the forward/inverse maps below are exact inverses
on that grid (discrete sine orthogonality).

The cubic term |u|^2 u is evaluated pseudo-spectrally on a padded grid of
2N+1 points and truncated back, which reproduces the exact Galerkin
projection of the cubic for band-limited input (no aliasing into the
retained band) and keeps the discrete conservation laws clean.
"""

from dataclasses import dataclass

import numpy as np
import scipy.fft

from .errors import InvalidArgumentError

__all__ = [
    "SpectralState",
    "dst_forward",
    "dst_inverse",
    "project",
    "gradient_norm_sq",
    "laplacian_norm_sq",
    "cubic_nonlinearity",
    "eigenvalues",
    "grid_points",
]

_SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class SpectralState:
    """Complex coefficients (c_1 .. c_N) of u = sum_k c_k sqrt(2) sin(k pi x)."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.complex128, copy=True, order="C")
        if c.ndim != 1 or c.size < 1:
            raise InvalidArgumentError("coeffs must be a nonempty 1-d vector")
        if not np.all(np.isfinite(c)):
            raise InvalidArgumentError("coefficients must be finite")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @property
    def num_modes(self) -> int:
        return self.coeffs.size


def eigenvalues(num_modes: int) -> np.ndarray:
    """Dirichlet Laplacian eigenvalues lam_k = (k pi)^2 for k = 1..N."""
    k = np.arange(1, num_modes + 1, dtype=np.float64)
    return (k * np.pi) ** 2


def grid_points(num_modes: int) -> np.ndarray:
    """Collocation nodes x_j = j/(N+1), j = 1..N."""
    return np.arange(1, num_modes + 1, dtype=np.float64) / (num_modes + 1)


def _dst1(values: np.ndarray) -> np.ndarray:
    """Unnormalized DST-I: y_k = 2 sum_j v_j sin(pi k j / (n+1)), complex-safe."""
    return scipy.fft.dst(values, type=1)


def coeffs_to_grid(coeffs: np.ndarray, grid_size: int) -> np.ndarray:
    """Values of sum_k c_k phi_k at the `grid_size`-point collocation grid.

    `grid_size` may exceed len(coeffs) (zero padding), which is how the
    dealiased evaluations below are produced.
    """
    n = len(coeffs)
    if grid_size < n:
        raise InvalidArgumentError("grid_size must be at least the mode count")
    if grid_size == n:
        return _dst1(coeffs) / _SQRT2
    padded = np.zeros(grid_size, dtype=np.complex128)
    padded[:n] = coeffs
    return _dst1(padded) / _SQRT2


def grid_to_coeffs(values: np.ndarray) -> np.ndarray:
    """All `len(values)` sine coefficients of grid samples (inverse of coeffs_to_grid)."""
    n = len(values)
    return _dst1(values) / (_SQRT2 * (n + 1))


def dst_forward(values: np.ndarray) -> SpectralState:
    """Transform values at x_j = j/(N+1) into a SpectralState.

    c_k = (1/(N+1)) sum_j values_j * sqrt(2) sin(k pi x_j); exact inverse of
    :func:`dst_inverse` for any N.
    """
    v = np.asarray(values)
    if v.ndim != 1 or v.size < 1:
        raise InvalidArgumentError("values must be a nonempty 1-d vector")
    return SpectralState(grid_to_coeffs(np.asarray(v, dtype=np.complex128)))


def dst_inverse(state: SpectralState) -> np.ndarray:
    """Values of the state at its own collocation nodes x_j = j/(N+1)."""
    return coeffs_to_grid(state.coeffs, state.num_modes)


def project(state: SpectralState, target_modes: int) -> SpectralState:
    """Galerkin projection onto the first `target_modes` modes (truncation)."""
    if target_modes < 1:
        raise InvalidArgumentError("target_modes must be a positive integer")
    if target_modes > state.num_modes:
        raise InvalidArgumentError(
            f"target_modes {target_modes} exceeds num_modes {state.num_modes}"
        )
    return SpectralState(state.coeffs[:target_modes])


def gradient_norm_sq(state: SpectralState) -> float:
    """|grad u|_{L2}^2 = sum_k lam_k |c_k|^2."""
    return float(np.sum(eigenvalues(state.num_modes) * np.abs(state.coeffs) ** 2))


def laplacian_norm_sq(state: SpectralState) -> float:
    """|Delta u|_{L2}^2 = sum_k lam_k^2 |c_k|^2."""
    return float(np.sum(eigenvalues(state.num_modes) ** 2 * np.abs(state.coeffs) ** 2))


def dealias_grid_size(num_modes: int) -> int:
    """Padded physical grid size used for cubic products (2N+1 points)."""
    return 2 * num_modes + 1


def cubic_nonlinearity(state: SpectralState) -> SpectralState:
    """Exact Galerkin projection P^N(|u|^2 u), evaluated with dealiasing.

    The cubic of an N-mode function carries sine content up to mode 3N;
    sampling it on 2N+1 points keeps all aliased images above mode N, so
    the retained coefficients are exact up to roundoff.
    """
    padded = dealias_grid_size(state.num_modes)
    v = coeffs_to_grid(state.coeffs, padded)
    w = (v.real**2 + v.imag**2) * v
    return SpectralState(grid_to_coeffs(w)[: state.num_modes])


def quartic_integral(state: SpectralState) -> float:
    """Exact integral of |u|^4 over (0, 1) via the dealiased grid.

    |u|^4 has cosine content up to mode 4N and vanishes at the boundary;
    the interior trapezoid sum on 2N+1 points integrates that exactly.
    """
    padded = dealias_grid_size(state.num_modes)
    v = coeffs_to_grid(state.coeffs, padded)
    return float(np.sum((v.real**2 + v.imag**2) ** 2)) / (padded + 1)
