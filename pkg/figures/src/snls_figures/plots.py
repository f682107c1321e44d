"""Plot builders for the four figure kinds.

Every builder takes CSV path(s) plus an output image path, renders with a
fixed style, and returns the quantities it annotated so tests can check
them without parsing the image.  CSV layout violations raise
:class:`FigureDataError` naming the offending row or column.
"""

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "FigureDataError",
    "FigureSpec",
    "plot_convergence",
    "plot_moments",
    "plot_charge",
    "plot_tails",
    "render",
]

FIGURE_KINDS = ("convergence", "charge", "moments", "tails")

# axis values in the convergence schema
TIME_AXIS = "time_step"
SPACE_AXIS = "mode_count"

_SAVE_OPTIONS = {"dpi": 150, "metadata": {"Software": None}}


class FigureDataError(ValueError):
    """An input CSV does not conform to its documented schema."""


@dataclass(frozen=True)
class FigureSpec:
    """One figure request: inputs, kind, output path, optional labels."""

    inputs: tuple
    kind: str
    output: str
    xlabel: str | None = None
    ylabel: str | None = None
    alphas: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise FigureDataError(f"unknown figure kind {self.kind!r}")
        if not self.inputs:
            raise FigureDataError("at least one input CSV is required")
        for path in self.inputs:
            if not Path(path).exists():
                raise FigureDataError(f"input CSV does not exist: {path}")


def _read_csv(path, required_columns):
    """Parse a `#`-commented CSV into column arrays, validating the header."""
    rows = []
    header = None
    with open(path) as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if header is None:
                header = parts
                for column in required_columns:
                    if column not in header:
                        raise FigureDataError(
                            f"{path}: missing column {column!r} in header line {lineno}"
                        )
                continue
            if len(parts) != len(header):
                raise FigureDataError(
                    f"{path}: row {lineno} has {len(parts)} fields, expected {len(header)}"
                )
            rows.append((lineno, parts))
    if header is None:
        raise FigureDataError(f"{path}: no header row found")
    if not rows:
        raise FigureDataError(f"{path}: no data rows found")
    columns = {name: [] for name in header}
    for lineno, parts in rows:
        for name, value in zip(header, parts):
            columns[name].append((lineno, value))
    return columns


def _numeric(path, columns, name):
    values = []
    for lineno, raw in columns[name]:
        try:
            values.append(float(raw))
        except ValueError:
            raise FigureDataError(
                f"{path}: row {lineno}: column {name!r} is not numeric ({raw!r})"
            ) from None
    return np.array(values)


def _loglog_slope(x, y):
    """Least-squares slope of log y against log x (matches the solver's fit)."""
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def _save(fig, output_path):
    Path(output_path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(output_path, **_SAVE_OPTIONS)
    plt.close(fig)


def plot_convergence(csv_paths, output_path, xlabel=None, ylabel=None):
    """Log-log strong-error plot with fit line, slope annotation and guide.

    The annotated slope is the convergence order: the log-log slope against
    tau on the time axis and against 1/N on the mode-count axis, identical
    to the order fitted by the solver on the same data.  Returns the slope
    of the first input.
    """
    if isinstance(csv_paths, (str, Path)):
        csv_paths = [csv_paths]
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    first_slope = None
    axis_kind = None
    for path in csv_paths:
        columns = _read_csv(path, ("axis", "resolution", "error"))
        axis_kind = columns["axis"][0][1]
        resolution = _numeric(path, columns, "resolution")
        error = _numeric(path, columns, "error")
        if np.any(resolution <= 0):
            raise FigureDataError(f"{path}: resolutions must be positive")
        if np.any(error <= 0):
            bad = int(np.argmax(error <= 0))
            lineno = columns["error"][bad][0]
            raise FigureDataError(f"{path}: row {lineno}: error must be positive to plot")
        fit_x = resolution if axis_kind == TIME_AXIS else 1.0 / resolution
        slope = (
            _loglog_slope(fit_x, error)
            if resolution.size >= 2
            else float("nan")
        )
        if first_slope is None:
            first_slope = slope
        label = Path(path).stem
        order = np.argsort(resolution)
        ax.loglog(resolution[order], error[order], "o-", label=f"{label}")
        if "std_error" in columns:
            se = _numeric(path, columns, "std_error")
            ax.errorbar(
                resolution[order], error[order], yerr=se[order],
                fmt="none", ecolor="gray", capsize=2,
            )

    reference_order = 0.5 if axis_kind == TIME_AXIS else 2.0
    resolution = resolution[order]
    error = error[order]
    anchor = error[-1] if axis_kind == TIME_AXIS else error[0]
    ref_x = resolution
    if axis_kind == TIME_AXIS:
        guide = anchor * (ref_x / ref_x[-1]) ** reference_order
    else:
        guide = anchor * (ref_x[0] / ref_x) ** reference_order
    ax.loglog(ref_x, guide, "k--", linewidth=0.8,
              label=f"order {reference_order:g} guide")

    ax.annotate(
        f"slope = {first_slope:.3f}",
        xy=(0.05, 0.9),
        xycoords="axes fraction",
    )
    ax.set_xlabel(xlabel or ("time step" if axis_kind == TIME_AXIS else "modes"))
    ax.set_ylabel(ylabel or "strong error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    _save(fig, output_path)
    return first_slope


def plot_moments(csv_path, output_path, alphas=None, xlabel=None, ylabel=None):
    """Exponential-moment evolution, one curve per alpha; returns the alphas drawn."""
    columns = _read_csv(csv_path, ("time", "alpha", "moment"))
    time = _numeric(csv_path, columns, "time")
    alpha_col = _numeric(csv_path, columns, "alpha")
    moment = _numeric(csv_path, columns, "moment")
    available = sorted(set(alpha_col.tolist()))
    chosen = sorted(set(float(a) for a in alphas)) if alphas else available
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    drawn = []
    for alpha in chosen:
        mask = alpha_col == alpha
        if not np.any(mask):
            raise FigureDataError(f"{csv_path}: no rows with alpha = {alpha}")
        order = np.argsort(time[mask])
        ax.plot(time[mask][order], moment[mask][order], label=f"alpha = {alpha:g}")
        drawn.append(alpha)
    ax.set_xlabel(xlabel or "time")
    ax.set_ylabel(ylabel or "exponential moment of energy")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    _save(fig, output_path)
    return tuple(drawn)


def plot_charge(csv_paths, output_path, xlabel=None, ylabel=None):
    """Charge-error evolution |charge(t) - charge(0)| from trajectory CSVs."""
    if isinstance(csv_paths, (str, Path)):
        csv_paths = [csv_paths]
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    worst = 0.0
    for path in csv_paths:
        columns = _read_csv(path, ("time", "charge"))
        time = _numeric(path, columns, "time")
        charge = _numeric(path, columns, "charge")
        drift = np.abs(charge - charge[0])
        worst = max(worst, float(drift.max()))
        ax.plot(time, drift, linewidth=0.9, label=Path(path).stem)
    ax.set_xlabel(xlabel or "time")
    ax.set_ylabel(ylabel or "charge error")
    ax.set_yscale("symlog", linthresh=1e-16)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=7)
    _save(fig, output_path)
    return worst


def plot_tails(csv_path, output_path, xlabel=None, ylabel=None):
    """log tail-exceedance against squared threshold; returns the fitted slope."""
    columns = _read_csv(csv_path, ("threshold", "exceedance"))
    threshold = _numeric(csv_path, columns, "threshold")
    exceedance = _numeric(csv_path, columns, "exceedance")
    positive = exceedance > 0
    if positive.sum() < 2:
        raise FigureDataError(f"{csv_path}: need at least two positive exceedances")
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    ax.semilogy(threshold**2, np.where(exceedance > 0, exceedance, np.nan), "o-")
    slope = float(
        np.polyfit(threshold[positive] ** 2, np.log(exceedance[positive]), 1)[0]
    )
    ax.annotate(f"slope = {slope:.3f}", xy=(0.05, 0.1), xycoords="axes fraction")
    ax.set_xlabel(xlabel or "squared threshold")
    ax.set_ylabel(ylabel or "P(H1 norm >= x)")
    ax.grid(True, alpha=0.3)
    _save(fig, output_path)
    return slope


def render(spec: FigureSpec):
    """Render one FigureSpec; returns the builder's annotation value."""
    if spec.kind == "convergence":
        return plot_convergence(spec.inputs, spec.output, spec.xlabel, spec.ylabel)
    if spec.kind == "moments":
        return plot_moments(
            spec.inputs[0], spec.output, spec.alphas or None, spec.xlabel, spec.ylabel
        )
    if spec.kind == "charge":
        return plot_charge(spec.inputs, spec.output, spec.xlabel, spec.ylabel)
    return plot_tails(spec.inputs[0], spec.output, spec.xlabel, spec.ylabel)
