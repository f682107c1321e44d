"""Structure-preserving splitting Crank-Nicolson solver for the 1D
stochastic nonlinear Schrodinger equation with multiplicative noise,
plus the Monte Carlo machinery to measure its strong convergence rates."""

from .diagnostics import (
    Observables,
    charge,
    energy,
    exp_moment_series,
    h1_norm,
    ito_charge_drift,
    lyapunov,
    observables,
    tail_exceedance,
)
from .errors import (
    ConfigError,
    ExperimentError,
    InvalidArgumentError,
    SolverDivergenceError,
)
from .experiments import (
    BaseConfig,
    ErrorTable,
    emit_csv,
    fit_order,
    read_error_table,
    strong_error_space,
    strong_error_time,
)
from .fdgrid import GridState, discrete_laplacian, grid_norms
from .noise import (
    CovarianceSpec,
    NoisePath,
    build_covariance,
    coarsen_path,
    increment_on_points,
    sample_path,
)
from .schemes import (
    SchemeConfig,
    SchemeKind,
    TrajectoryRecord,
    cn_deterministic_step,
    noise_step,
    run_trajectory,
    step,
)
from .spectral import (
    SpectralState,
    cubic_nonlinearity,
    dst_forward,
    dst_inverse,
    gradient_norm_sq,
    laplacian_norm_sq,
    project,
)

__version__ = "0.1.0"
