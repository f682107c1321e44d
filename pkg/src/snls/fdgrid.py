"""Finite-difference representation on the uniform interior grid.

A :class:`GridState` holds complex values at the interior nodes
x_n = n h, n = 1..N with h = 1/(N+1); the homogeneous Dirichlet boundary is
encoded by virtual zero endpoints.  The Laplacian is the composition of
forward and backward differences, and the gradient norm includes both
boundary gaps so that summation by parts
h * Re sum conj(u) (d+d- u) = -|d+ u|^2 holds exactly, which is what makes
the discrete charge and energy laws of the scheme exact.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

__all__ = ["GridState", "discrete_laplacian", "grid_norms"]


@dataclass(frozen=True, eq=False)
class GridState:
    """Complex values at the N interior nodes of a uniform grid on (0, 1)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.complex128, copy=True, order="C")
        if v.ndim != 1 or v.size < 1:
            raise InvalidArgumentError("values must be a nonempty 1-d vector")
        if not np.all(np.isfinite(v)):
            raise InvalidArgumentError("grid values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def num_nodes(self) -> int:
        return self.values.size

    @property
    def spacing(self) -> float:
        return 1.0 / (self.values.size + 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(1, self.values.size + 1) * self.spacing


def laplacian_values(values: np.ndarray, spacing: float) -> np.ndarray:
    """(v_{n+1} - 2 v_n + v_{n-1}) / h^2 with zero Dirichlet padding."""
    padded = np.zeros(len(values) + 2, dtype=np.complex128)
    padded[1:-1] = values
    return (padded[2:] - 2.0 * padded[1:-1] + padded[:-2]) / spacing**2


def discrete_laplacian(state: GridState) -> GridState:
    """Second difference d+ d- u on the interior nodes."""
    return GridState(laplacian_values(state.values, state.spacing))


def grid_norms(state: GridState) -> tuple[float, float, float]:
    """Discrete charge, gradient square, and quartic norm.

    Returns:
        (charge, gradient_sq, l4_quartic) with
        charge = h sum |u_n|^2,
        gradient_sq = h sum_{n=0..N} |d+ u(n)|^2 including both boundary gaps,
        l4_quartic = h sum |u_n|^4.
    """
    h = state.spacing
    v = state.values
    mod2 = v.real**2 + v.imag**2
    charge = h * float(np.sum(mod2))
    padded = np.zeros(len(v) + 2, dtype=np.complex128)
    padded[1:-1] = v
    diff = padded[1:] - padded[:-1]
    gradient_sq = float(np.sum(diff.real**2 + diff.imag**2)) / h
    l4 = h * float(np.sum(mod2**2))
    return charge, gradient_sq, l4
