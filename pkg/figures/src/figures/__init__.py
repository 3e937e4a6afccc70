"""Figure regeneration for shape-registration chain and data files."""

from .plots import (
    plot_mean_band,
    plot_mode_histogram,
    plot_shape_overlay,
    plot_sigma2_marginal,
    plot_spaghetti,
)
from .readers import FormatError

__version__ = "0.1.0"
