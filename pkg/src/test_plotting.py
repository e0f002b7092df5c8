"""
Tests for SVG plot output.
"""

import math

import pytest
from pydantic import ValidationError

from .cli import counterexample_plot, scheme_cost_plot
from .plotting import PlotSeries, PlotSpec, emit_svg


class TestPlotSpec:

    def test_non_finite_points_rejected(self):
        with pytest.raises(ValidationError):
            PlotSeries(label="bad", points=[(0.0, math.nan)])
        with pytest.raises(ValidationError):
            PlotSeries(label="bad", points=[(math.inf, 1.0)])

    def test_empty_plot_rejected(self):
        with pytest.raises(ValidationError):
            PlotSeries(label="empty", points=[])
        with pytest.raises(ValidationError):
            PlotSpec(x_label="x", y_label="y", series=[])


class TestEmitSvg:

    def setup_method(self):
        self.plot = PlotSpec(
            title="demo",
            x_label="log(1/eps)",
            y_label="cost",
            series=[PlotSeries(label="line", points=[(0.0, 0.0), (1.0, 0.5), (2.0, 0.75)])],
        )

    def test_writes_standalone_svg(self, tmp_path):
        path = tmp_path / "figs" / "demo.svg"
        emit_svg(self.plot, str(path))
        text = path.read_text()
        assert "<svg" in text
        assert "log(1/eps)" in text

    def test_output_is_byte_stable(self, tmp_path):
        first = tmp_path / "a.svg"
        second = tmp_path / "b.svg"
        emit_svg(self.plot, str(first))
        emit_svg(self.plot, str(second))
        assert first.read_bytes() == second.read_bytes()


class TestStandardFigures:

    def test_scheme_cost_points(self):
        plot = scheme_cost_plot(3, 64)
        points = plot.series[0].points
        assert [x for x, _ in points] == pytest.approx([math.log(2.0), 2 * math.log(2.0), 3 * math.log(2.0)])
        assert [y for _, y in points] == pytest.approx([0.375, 0.75, 1.125])

    def test_counterexample_series(self):
        plot = counterexample_plot(11, 3)
        labels = [series.label for series in plot.series]
        assert labels == ["I(A, B)", "E1", "lower bound"]
        assert all(len(series.points) == 2 for series in plot.series)
