"""
Standalone SVG line plots with byte-stable output.
"""

import logging
import math
from typing import List, Tuple

import matplotlib

matplotlib.use('Agg')

import matplotlib.pyplot as plt  # noqa: E402
from pydantic import BaseModel, ConfigDict, Field, field_validator  # noqa: E402

from .config import ensure_parent_exists  # noqa: E402

logger = logging.getLogger(__name__)

# Fixed salt so element ids do not change between runs
_SVG_STYLE = {
    'svg.hashsalt': 'mixlab',
    'svg.fonttype': 'none',
    'path.simplify': False,
}


class PlotSeries(BaseModel):
    model_config = ConfigDict(frozen=True)

    label: str
    points: List[Tuple[float, float]] = Field(min_length=1)

    @field_validator('points')
    @classmethod
    def _finite(cls, points):
        for x, y in points:
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ValueError(f"Invalid plot point ({x}, {y}): coordinates must be finite")
        return points


class PlotSpec(BaseModel):
    """Line series with axis captions."""
    model_config = ConfigDict(frozen=True)

    title: str = ""
    x_label: str
    y_label: str
    series: List[PlotSeries] = Field(min_length=1)


def emit_svg(plot: PlotSpec, path: str):
    """Render the plot as a self-contained SVG file."""
    ensure_parent_exists(path)
    with plt.rc_context(_SVG_STYLE):
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        try:
            for series in plot.series:
                xs = [p[0] for p in series.points]
                ys = [p[1] for p in series.points]
                ax.plot(xs, ys, marker='o', label=series.label)
            ax.set_xlabel(plot.x_label)
            ax.set_ylabel(plot.y_label)
            if plot.title:
                ax.set_title(plot.title)
            ax.grid(True, alpha=0.3)
            ax.legend()
            fig.tight_layout()
            fig.savefig(path, format='svg', metadata={'Date': None})
        finally:
            plt.close(fig)
    logger.info(f"Wrote plot {path}")
