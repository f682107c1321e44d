from types import SimpleNamespace

import numpy as np
import pytest
from scipy.integrate import quad

from snls.diagnostics import (
    charge,
    energy,
    exp_moment_series,
    h1_norm,
    ito_charge_drift,
    lyapunov,
    observables,
    tail_exceedance,
)
from snls.errors import InvalidArgumentError
from snls.fdgrid import GridState
from snls.noise import build_covariance
from snls.spectral import SpectralState, laplacian_norm_sq

SINE_ENERGY_FOCUSING = np.pi**2 / 4 - 3.0 / 32.0
SINE_LYAPUNOV_FOCUSING = np.pi**4 / 2 - 3.0 * np.pi**2 / 8.0


def sine_spectral(num_modes=8, amplitude=1.0):
    c = np.zeros(num_modes, dtype=complex)
    c[0] = amplitude / np.sqrt(2.0)
    return SpectralState(c)


def sine_grid(num_nodes=255, amplitude=1.0):
    x = np.arange(1, num_nodes + 1) / (num_nodes + 1)
    return GridState(amplitude * np.sin(np.pi * x).astype(complex))


def test_analytic_constants_against_quadrature():
    # freeze the expected sin(pi x) observables from independent quadrature
    grad_sq, _ = quad(lambda x: (np.pi * np.cos(np.pi * x)) ** 2, 0, 1)
    quartic, _ = quad(lambda x: np.sin(np.pi * x) ** 4, 0, 1)
    lap_sq, _ = quad(lambda x: (np.pi**2 * np.sin(np.pi * x)) ** 2, 0, 1)
    pairing, _ = quad(lambda x: -(np.pi**2) * np.sin(np.pi * x) ** 4, 0, 1)
    assert 0.5 * grad_sq - 0.25 * quartic == pytest.approx(SINE_ENERGY_FOCUSING, rel=1e-12)
    assert lap_sq + pairing == pytest.approx(SINE_LYAPUNOV_FOCUSING, rel=1e-12)


class TestCharge:
    def test_unit_mode(self):
        c = np.zeros(3, dtype=complex)
        c[0] = 1.0
        assert charge(SpectralState(c)) == 1.0

    def test_sine_initial_datum(self):
        assert charge(sine_spectral()) == pytest.approx(0.5, rel=1e-14)

    def test_zero(self):
        assert charge(SpectralState(np.zeros(3, dtype=complex))) == 0.0

    def test_grid_matches_spectral(self):
        assert charge(sine_grid()) == pytest.approx(0.5, rel=1e-3)


class TestEnergy:
    def test_sine_focusing(self):
        assert energy(sine_spectral(), 1) == pytest.approx(SINE_ENERGY_FOCUSING, rel=1e-12)

    def test_sine_defocusing(self):
        expected = np.pi**2 / 4 + 3.0 / 32.0
        assert energy(sine_spectral(), -1) == pytest.approx(expected, rel=1e-12)

    def test_zero(self):
        assert energy(SpectralState(np.zeros(4, dtype=complex)), 1) == 0.0

    def test_grid_energy_near_analytic(self):
        assert energy(sine_grid(), 1) == pytest.approx(SINE_ENERGY_FOCUSING, abs=2e-4)


class TestLyapunov:
    def test_sine_focusing(self):
        assert lyapunov(sine_spectral(), 1) == pytest.approx(SINE_LYAPUNOV_FOCUSING, rel=1e-12)

    def test_zero(self):
        assert lyapunov(SpectralState(np.zeros(4, dtype=complex)), 1) == 0.0

    def test_sign_zero_reduces_to_laplacian_norm(self):
        rng = np.random.default_rng(0)
        state = SpectralState(rng.normal(size=6) + 1j * rng.normal(size=6))
        assert lyapunov(state, 0) == pytest.approx(laplacian_norm_sq(state), rel=1e-14)

    def test_grid_lyapunov_near_analytic(self):
        assert lyapunov(sine_grid(1023), 1) == pytest.approx(
            SINE_LYAPUNOV_FOCUSING, rel=1e-4
        )


def test_h1_norm_spectral_vs_grid():
    expected = np.sqrt(0.5 + np.pi**2 / 2)
    assert h1_norm(sine_spectral()) == pytest.approx(expected, rel=1e-12)
    assert h1_norm(sine_grid(511)) == pytest.approx(expected, rel=1e-4)


def test_observables_bundle():
    obs = observables(sine_spectral(), 1)
    assert obs.charge == pytest.approx(0.5, rel=1e-14)
    assert obs.energy == pytest.approx(SINE_ENERGY_FOCUSING, rel=1e-12)


def _record(times, energies):
    return SimpleNamespace(
        snapshot_times=np.asarray(times, dtype=float),
        energy_series=np.asarray(energies, dtype=float),
    )


class TestExpMomentSeries:
    def test_deterministic_record_closed_form(self):
        times = np.linspace(0.0, 2.0, 9)
        h0 = SINE_ENERGY_FOCUSING
        series = exp_moment_series([_record(times, np.full(9, h0))], alpha=1.0)
        assert np.allclose(series, np.exp(h0 * np.exp(-times)), rtol=1e-13)

    def test_t0_equals_exp_initial_energy(self):
        series = exp_moment_series([_record([0.0, 1.0], [2.0, 2.0])], alpha=0.7)
        assert series[0] == pytest.approx(np.exp(2.0), rel=1e-13)

    def test_two_record_average(self):
        t, a = 1.5, 0.7
        h1, h2 = 1.1, 2.3
        series = exp_moment_series(
            [_record([t], [h1]), _record([t], [h2])], alpha=a
        )
        scale = np.exp(-a * t)
        expected = 0.5 * (np.exp(h1 * scale) + np.exp(h2 * scale))
        assert series[0] == pytest.approx(expected, rel=1e-13)

    def test_permutation_invariant_bitwise(self):
        rng = np.random.default_rng(1)
        times = np.linspace(0, 1, 5)
        records = [_record(times, rng.normal(size=5)) for _ in range(7)]
        forward = exp_moment_series(records, alpha=1.0)
        backward = exp_moment_series(records[::-1], alpha=1.0)
        assert np.array_equal(forward, backward)

    def test_large_energies_do_not_overflow_intermediates(self):
        # exp(710) overflows on its own, but the mean over ten records is
        # representable; the log-sum-exp path must recover it
        records = [_record([0.0], [710.0])] + [_record([0.0], [0.0])] * 9
        series = exp_moment_series(records, alpha=1.0)
        assert np.isfinite(series[0])
        assert series[0] == pytest.approx(np.exp(710.0 - np.log(10.0)), rel=1e-12)

    def test_validation(self):
        with pytest.raises(InvalidArgumentError):
            exp_moment_series([], alpha=1.0)
        with pytest.raises(InvalidArgumentError):
            exp_moment_series([_record([0.0], [1.0])], alpha=0.0)
        with pytest.raises(InvalidArgumentError):
            exp_moment_series(
                [_record([0.0], [1.0]), _record([0.5], [1.0])], alpha=1.0
            )


class TestTailExceedance:
    def test_below_min_is_one(self):
        assert tail_exceedance(np.array([1.0, 2.0, 3.0]), np.array([0.5]))[0] == 1.0

    def test_above_max_is_zero(self):
        assert tail_exceedance(np.array([1.0, 2.0, 3.0]), np.array([3.5]))[0] == 0.0

    def test_counting(self):
        assert tail_exceedance(np.array([1.0, 2.0, 3.0]), np.array([2.0]))[0] == pytest.approx(
            2.0 / 3.0
        )

    def test_nonincreasing(self):
        rng = np.random.default_rng(2)
        samples = rng.normal(size=200)
        thresholds = np.linspace(-3, 3, 50)
        values = tail_exceedance(samples, thresholds)
        assert np.all(np.diff(values) <= 0)

    def test_empty_rejected(self):
        with pytest.raises(InvalidArgumentError):
            tail_exceedance(np.array([]), np.array([1.0]))


def drift_oracle_top_mode(num_modes, weight, intensity=1.0):
    """Scalar-loop expansion of the e_N * (eps q_1 phi_1) product tail.

    The product is interpolated on its natural deg(u)+K = N+1 point grid
    and expanded by explicit discrete sine sums; the drift is the squared
    content beyond mode N.
    """
    resolved = num_modes + 1
    total = 0.0
    for n in range(num_modes + 1, resolved + 1):
        acc = 0.0
        for j in range(1, resolved + 1):
            x = j / (resolved + 1)
            u_val = np.sqrt(2.0) * np.sin(num_modes * np.pi * x)
            psi = intensity * weight * np.sqrt(2.0) * np.sin(np.pi * x)
            acc += u_val * psi * np.sqrt(2.0) * np.sin(n * np.pi * x)
        total += (acc / (resolved + 1)) ** 2
    return total


class TestItoChargeDrift:
    def test_zero_state(self):
        spec = build_covariance(4)
        assert ito_charge_drift(SpectralState(np.zeros(8, dtype=complex)), spec) == 0.0

    def test_zero_intensity(self):
        spec = build_covariance(4, intensity=0.0)
        rng = np.random.default_rng(3)
        state = SpectralState(rng.normal(size=8) + 0j)
        assert ito_charge_drift(state, spec) == 0.0

    def test_resolved_products_exactly_zero(self):
        # content in the first d modes with d + K <= N: drift vanishes exactly
        num_modes, degree, noise_modes = 16, 8, 4
        rng = np.random.default_rng(4)
        c = np.zeros(num_modes, dtype=complex)
        c[:degree] = rng.normal(size=degree) + 1j * rng.normal(size=degree)
        spec = build_covariance(noise_modes)
        assert ito_charge_drift(SpectralState(c), spec) == 0.0

    def test_top_mode_positive_and_matches_oracle(self):
        num_modes = 8
        spec = build_covariance(1)
        c = np.zeros(num_modes, dtype=complex)
        c[-1] = 1.0
        value = ito_charge_drift(SpectralState(c), spec)
        assert value > 0.0
        assert value == pytest.approx(
            drift_oracle_top_mode(num_modes, spec.weights[0]), rel=1e-12
        )

    def test_intensity_scaling(self):
        num_modes = 8
        c = np.zeros(num_modes, dtype=complex)
        c[-1] = 1.0
        state = SpectralState(c)
        base = ito_charge_drift(state, build_covariance(2, intensity=1.0))
        scaled = ito_charge_drift(state, build_covariance(2, intensity=3.0))
        assert scaled == pytest.approx(9.0 * base, rel=1e-12)

    @pytest.mark.parametrize("seed", range(10))
    def test_nonnegative_on_random_states(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 24))
        k = int(rng.integers(1, 12))
        state = SpectralState(rng.normal(size=n) + 1j * rng.normal(size=n))
        assert ito_charge_drift(state, build_covariance(k)) >= 0.0
