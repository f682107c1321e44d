"""Figure rendering for the snls benchmark CSVs.

Reads only the documented CSV schemas (no numerics are recomputed here)
and emits one image per invocation.  Styles are fixed and metadata is
stripped so regenerated figures are byte-comparable.
"""

from .plots import (
    FigureDataError,
    FigureSpec,
    plot_charge,
    plot_convergence,
    plot_moments,
    plot_tails,
    render,
)

__version__ = "0.1.0"
