import numpy as np
import pytest
from scipy.integrate import quad

from snls.errors import InvalidArgumentError
from snls.fdgrid import GridState, discrete_laplacian, grid_norms


def parabola_state(num_nodes):
    x = np.arange(1, num_nodes + 1) / (num_nodes + 1)
    return GridState((x * (1.0 - x)).astype(complex))


def random_state(num_nodes, seed):
    rng = np.random.default_rng(seed)
    return GridState(rng.normal(size=num_nodes) + 1j * rng.normal(size=num_nodes))


class TestLaplacian:
    def test_exact_on_quadratic(self):
        # power-of-two spacing: x(1-x) and its second difference are exact
        # in binary floating point, so every output is exactly -2
        state = parabola_state(63)
        out = discrete_laplacian(state)
        assert np.all(out.values == -2.0 + 0.0j)

    def test_sine_eigenvector(self):
        n = 31
        h = 1.0 / (n + 1)
        x = np.arange(1, n + 1) * h
        for k in (1, 3, 7):
            state = GridState(np.sin(k * np.pi * x).astype(complex))
            out = discrete_laplacian(state)
            factor = -(4.0 / h**2) * np.sin(k * np.pi * h / 2.0) ** 2
            assert np.allclose(out.values, factor * state.values, rtol=1e-12, atol=1e-12)

    def test_zero(self):
        out = discrete_laplacian(GridState(np.zeros(9, dtype=complex)))
        assert np.all(out.values == 0)

    def test_linear_and_real_preserving(self):
        a = random_state(17, seed=1)
        b = random_state(17, seed=2)
        combined = GridState(2.0 * a.values + b.values)
        assert np.allclose(
            discrete_laplacian(combined).values,
            2.0 * discrete_laplacian(a).values + discrete_laplacian(b).values,
            rtol=1e-13,
        )
        real = GridState(a.values.real.astype(complex))
        assert np.all(discrete_laplacian(real).values.imag == 0)


class TestNorms:
    def test_charge_of_sine(self):
        n = 63
        x = np.arange(1, n + 1) / (n + 1)
        charge, _, _ = grid_norms(GridState(np.sin(np.pi * x).astype(complex)))
        exact, _ = quad(lambda t: np.sin(np.pi * t) ** 2, 0.0, 1.0)
        assert abs(charge - exact) < 1e-3

    def test_zero_state(self):
        assert grid_norms(GridState(np.zeros(5, dtype=complex))) == (0.0, 0.0, 0.0)

    def test_gradient_of_parabola(self):
        n = 127
        h = 1.0 / (n + 1)
        _, grad_sq, _ = grid_norms(parabola_state(n))
        exact, _ = quad(lambda t: (1.0 - 2.0 * t) ** 2, 0.0, 1.0)
        assert exact == pytest.approx(1.0 / 3.0, rel=1e-12)
        assert abs(grad_sq - exact) < 5.0 * h**2

    def test_quartic_of_sine(self):
        n = 255
        x = np.arange(1, n + 1) / (n + 1)
        _, _, l4 = grid_norms(GridState(np.sin(np.pi * x).astype(complex)))
        exact, _ = quad(lambda t: np.sin(np.pi * t) ** 4, 0.0, 1.0)
        assert l4 == pytest.approx(exact, rel=1e-3)


class TestSummationByParts:
    @pytest.mark.parametrize("seed", range(8))
    def test_pairing_equals_negative_gradient(self, seed):
        state = random_state(40, seed=seed)
        lap = discrete_laplacian(state)
        h = state.spacing
        pairing = h * float(np.sum((np.conj(state.values) * lap.values).real))
        _, grad_sq, _ = grid_norms(state)
        assert pairing == pytest.approx(-grad_sq, rel=1e-12)


def test_invalid_inputs():
    with pytest.raises(InvalidArgumentError):
        GridState(np.array([], dtype=complex))
    with pytest.raises(InvalidArgumentError):
        GridState(np.array([np.inf + 0j]))
