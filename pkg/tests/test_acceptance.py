"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest -s tests/test_acceptance.py` to see the per-criterion
lines; the suite is self-contained and uses at most two worker processes
for the Monte Carlo criteria.
"""

import numpy as np

from snls.cli import RunConfig, _final_h1, _run_one_trajectory, dispatch
from snls.diagnostics import charge, energy, exp_moment_series, ito_charge_drift
from snls.experiments import BaseConfig, _map_trajectories, strong_error_space, strong_error_time
from snls.fdgrid import GridState
from snls.noise import build_covariance, sample_path
from snls.schemes import SchemeConfig, SchemeKind, cn_deterministic_step, run_trajectory
from snls.spectral import SpectralState

WORKERS = 2


def _report(name: str, ok: bool, detail: str = ""):
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"\n[acceptance] {name}: {status}{suffix}")
    assert ok, f"{name}: {detail}"


def _sine_state(kind: SchemeKind, resolution: int):
    if kind == SchemeKind.SPECTRAL:
        c = np.zeros(resolution, dtype=complex)
        c[0] = 1.0 / np.sqrt(2.0)
        return SpectralState(c)
    x = np.arange(1, resolution + 1) / (resolution + 1)
    return GridState(np.sin(np.pi * x) + 0j)


def test_charge_conservation():
    """Both schemes hold the discrete charge over T=1 at tau=2^-8, eps=1."""
    horizon, num_steps, seed = 1.0, 256, 2024
    worst = {}
    for kind, resolution, bound in (
        (SchemeKind.SPECTRAL, 64, 1e-7),
        (SchemeKind.FINITE_DIFFERENCE, 63, 1e-9),
    ):
        spec = build_covariance(resolution, intensity=1.0)
        for sign in (1, -1):
            config = SchemeConfig(
                horizon=horizon,
                num_steps=num_steps,
                focusing_sign=sign,
                scheme_kind=kind,
            )
            drift = 0.0
            for trajectory in range(10):
                path = sample_path(spec, horizon, num_steps, seed, stream=trajectory)
                record = run_trajectory(_sine_state(kind, resolution), config, path, spec)
                rel = np.max(
                    np.abs(record.charge_series - record.charge_series[0])
                ) / record.charge_series[0]
                drift = max(drift, rel)
            worst[(kind.value, sign)] = (drift, bound)
    ok = all(drift <= bound for drift, bound in worst.values())
    detail = ", ".join(
        f"{k[0]}/lambda={k[1]}: {v[0]:.2e}<= {v[1]:.0e}" for k, v in worst.items()
    )
    _report("charge conservation", ok, detail)


def test_deterministic_substep_energy_invariance():
    """Per-step relative energy drift of the implicit sub-step <= 1e-8."""
    rng = np.random.default_rng(7)
    dt = 2.0**-8
    worst = 0.0
    for i in range(1000):
        sign = 1 if i % 2 == 0 else -1
        if i % 2 == 0:
            c = rng.normal(size=32) + 1j * rng.normal(size=32)
            c /= np.arange(1, 33) ** 1.5
            c /= np.linalg.norm(c)
            state = SpectralState(c)
            config = SchemeConfig(
                horizon=1.0, num_steps=256, focusing_sign=sign,
                scheme_kind=SchemeKind.SPECTRAL,
            )
        else:
            x = np.arange(1, 64) / 64.0
            v = np.sin(np.pi * x) * (rng.normal(size=63) + 1j * rng.normal(size=63))
            v /= np.sqrt(charge(GridState(v)))
            state = GridState(v)
            config = SchemeConfig(
                horizon=1.0, num_steps=256, focusing_sign=sign,
                scheme_kind=SchemeKind.FINITE_DIFFERENCE,
            )
        before = energy(state, sign)
        after = energy(cn_deterministic_step(state, dt, config), sign)
        worst = max(worst, abs(after - before) / (1.0 + abs(before)))
    _report("deterministic sub-step energy invariance", worst <= 1e-8,
            f"max relative drift {worst:.2e}")


def test_linear_cayley_oracle():
    """Cubic and noise disabled: M=2^10 steps match the per-mode rotation."""
    num_modes, num_steps, horizon = 16, 2**10, 1.0
    tau = horizon / num_steps
    rng = np.random.default_rng(11)
    c = (rng.normal(size=num_modes) + 1j * rng.normal(size=num_modes))
    c /= np.arange(1, num_modes + 1) ** 1.5
    spec = build_covariance(num_modes, intensity=0.0)
    path = sample_path(spec, horizon, num_steps, seed=1)
    config = SchemeConfig(horizon=horizon, num_steps=num_steps, focusing_sign=0,
                          scheme_kind=SchemeKind.SPECTRAL)
    record = run_trajectory(SpectralState(c), config, path, spec, snapshot_stride=num_steps)
    lam = (np.arange(1, num_modes + 1) * np.pi) ** 2
    factor = ((1 - 0.5j * tau * lam) / (1 + 0.5j * tau * lam)) ** num_steps
    deviation = np.max(np.abs(record.final_state.coeffs - c * factor))
    _report("linear Cayley oracle", deviation <= 1e-12, f"max per-mode error {deviation:.2e}")


def test_temporal_strong_order():
    """Desk-scale temporal sweep at intensity 1 lands in the 1/2-rate window.

    Known red: at this intensity and step range the splitting error
    accumulates with martingale cancellation and the measured order is
    about 0.9, better than the guaranteed 1/2 but outside the stated
    window.  The companion noise-dominated check below verifies the 1/2
    rate where the bound binds.
    """
    base = BaseConfig(
        scheme_kind=SchemeKind.SPECTRAL,
        horizon=0.5,
        focusing_sign=1,
        epsilon=1.0,
        spatial_resolution=64,
    )
    step_counts = [64, 128, 256, 512, 1024]  # tau = 2^-7 .. 2^-11, tau_ref = 2^-12
    table = strong_error_time(
        base, step_counts, reference_steps=2048, trajectories=100,
        moment_order=2.0, seed=20240, workers=WORKERS,
    )
    ok = 0.35 <= table.fitted_slope <= 0.75
    _report("temporal strong order", ok,
            f"fitted slope {table.fitted_slope:.3f} in [0.35, 0.75], "
            f"errors {np.array2string(table.errors, precision=2)}")


def test_temporal_strong_order_noise_dominated():
    """Supplementary: with intensity 10 the noise term dominates and the
    desk-scale sweep shows the 1/2 strong rate directly."""
    base = BaseConfig(
        scheme_kind=SchemeKind.SPECTRAL,
        horizon=0.5,
        focusing_sign=1,
        epsilon=10.0,
        spatial_resolution=64,
    )
    step_counts = [64, 128, 256, 512, 1024]
    table = strong_error_time(
        base, step_counts, reference_steps=2048, trajectories=50,
        moment_order=2.0, seed=20242, workers=WORKERS,
    )
    ok = 0.35 <= table.fitted_slope <= 0.75
    _report("temporal strong order (noise dominated)", ok,
            f"fitted slope {table.fitted_slope:.3f} in [0.35, 0.75], "
            f"errors {np.array2string(table.errors, precision=2)}")


def test_spatial_strong_order():
    """Desk-scale spatial sweep recovers the N^-2 strong rate."""
    base = BaseConfig(
        scheme_kind=SchemeKind.SPECTRAL,
        horizon=0.5,
        focusing_sign=1,
        epsilon=1.0,
        num_steps=128,  # tau = 2^-8
    )
    table = strong_error_space(
        base, [4, 8, 16, 32], reference_modes=256, trajectories=50,
        moment_order=2.0, seed=20241, workers=WORKERS,
    )
    ok = 1.5 <= table.fitted_slope <= 2.5
    _report("spatial strong order", ok,
            f"fitted slope {table.fitted_slope:.3f} in [1.5, 2.5], "
            f"errors {np.array2string(table.errors, precision=2)}")


def test_exponential_moment_boundedness():
    """E[exp(H(u_m)/e^{t_m})] stays within 3x its initial value over T=10."""
    config = RunConfig(
        horizon=10.0,
        steps=2560,  # tau = 2^-8
        modes=64,
        epsilon=1.0,
        trajectories=200,
        snapshot_stride=10,
        seed=31,
    )
    records = _map_trajectories(_run_one_trajectory, config, 200, WORKERS)
    finite = all(np.all(np.isfinite(r.energy_series)) for r in records)
    series = exp_moment_series(records, alpha=1.0)
    ratio = float(np.max(series) / series[0])
    ok = finite and ratio <= 3.0
    _report("exponential moment boundedness", ok,
            f"max/initial = {ratio:.3f} <= 3, all energies finite = {finite}")


def test_gaussian_tail_signature():
    """log P(|u|_H1 >= x) decays against x^2 on the upper quartile."""
    config = RunConfig(
        horizon=1.0,
        steps=64,  # tau = 2^-6
        modes=32,
        epsilon=1.0,
        trajectories=1000,
        seed=47,
        snapshot_stride=64,
    )
    samples = np.array(_map_trajectories(_final_h1, config, 1000, WORKERS))
    thresholds = np.linspace(samples.min(), samples.max(), 40)
    from snls.diagnostics import tail_exceedance

    exceedance = tail_exceedance(samples, thresholds)
    upper = thresholds >= np.quantile(thresholds, 0.75)
    usable = upper & (exceedance > 0)
    slope = np.polyfit(thresholds[usable] ** 2, np.log(exceedance[usable]), 1)[0]
    ok = usable.sum() >= 3 and slope < 0
    _report("gaussian tail signature", ok,
            f"log-tail slope vs x^2 = {slope:.3f} < 0 on {int(usable.sum())} thresholds")


def test_ito_charge_decay_sign():
    """Drift is exactly nonnegative; resolved products give exactly zero."""
    rng = np.random.default_rng(53)
    nonnegative = True
    for _ in range(1000):
        n = int(rng.integers(2, 25))
        k = int(rng.integers(1, 13))
        state = SpectralState(rng.normal(size=n) + 1j * rng.normal(size=n))
        if ito_charge_drift(state, build_covariance(k)) < 0.0:
            nonnegative = False
            break
    resolved_zero = True
    for _ in range(50):
        n = int(rng.integers(8, 33))
        k = int(rng.integers(1, 5))
        degree = int(rng.integers(1, n - k + 1))
        c = np.zeros(n, dtype=complex)
        c[:degree] = rng.normal(size=degree) + 1j * rng.normal(size=degree)
        if ito_charge_drift(SpectralState(c), build_covariance(k)) != 0.0:
            resolved_zero = False
            break
    top = np.zeros(8, dtype=complex)
    top[-1] = 1.0
    positive = ito_charge_drift(SpectralState(top), build_covariance(1)) > 0.0
    ok = nonnegative and resolved_zero and positive
    _report("ito charge-decay sign", ok,
            f"nonnegative={nonnegative}, resolved-zero={resolved_zero}, "
            f"unresolved-positive={positive}")


def test_determinism_across_worker_counts(tmp_path):
    """converge-time emits byte-identical CSVs at 1, 4 and 8 workers."""
    blobs = []
    for workers in (1, 4, 8):
        outdir = tmp_path / f"workers{workers}"
        config = RunConfig(
            horizon=0.25,
            steps=64,
            modes=8,
            resolutions=(8, 16, 32),
            reference_steps=64,
            trajectories=6,
            seed=123,
            output_dir=str(outdir),
        )
        status = dispatch("converge-time", config, workers=workers)
        assert status == 0
        blobs.append((outdir / "convergence_time.csv").read_bytes())
    ok = blobs[0] == blobs[1] == blobs[2]
    _report("determinism across worker counts", ok,
            f"CSV bytes identical for workers 1/4/8 = {ok}")
