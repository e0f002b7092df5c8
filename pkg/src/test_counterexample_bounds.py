"""
Tests for the shear interaction of rectangle unions and the multiscale sets.
"""

import math

import numpy as np
import pytest
from pydantic import ValidationError
from scipy import integrate

from .counterexample_bounds import (
    MODE_CLOSED_BOUND,
    MODE_EXACT,
    MODE_ZETA_TAIL,
    MultiscaleParams,
    RectColumn,
    RectUnion,
    build_multiscale_sets,
    closed_pair_bound,
    column_pair_integral,
    decompose_E,
    evaluate_I,
    growth_curve,
    inverse_square_integral,
    kernel_block_integral,
    level_columns,
    random_separated_union,
    separated_log_bound,
    shear_kernel,
    shear_kernel_antiderivative,
    upper_bound_probe,
    vertical_integral,
)


def brute_block(IL, IR, JL, JR):
    """Closed-form vertical integral, then a plain double quadrature over x1 and y1."""
    value, _ = integrate.dblquad(
        lambda y1, x1: vertical_integral(abs(x1) + y1, JL, JR),
        IL[0], IL[1], IR[0], IR[1], epsabs=1e-13, epsrel=1e-10)
    return value


class TestKernel:
    """Kernel and its closed-form pieces."""

    def test_kernel_is_odd_in_s(self):
        assert shear_kernel(0.3, 0.2) == -shear_kernel(0.3, -0.2)
        assert shear_kernel(0.5, 0.0) == 0.0

    def test_antiderivative(self):
        r, s, h = 0.4, 0.3, 1e-5
        slope = (shear_kernel_antiderivative(r, s + h) - shear_kernel_antiderivative(r, s - h)) / (2 * h)
        assert slope == pytest.approx(shear_kernel(r, s), rel=1e-7)

    @pytest.mark.parametrize("rho,JL,JR", [
        (0.3, (0.0, 0.2), (0.05, 0.25)),
        (0.05, (0.4, 0.5), (0.0, 0.1)),
        (1.2, (-0.5, 0.5), (0.2, 0.9)),
    ])
    def test_vertical_integral_matches_quadrature(self, rho, JL, JR):
        brute, _ = integrate.dblquad(lambda y2, x2: shear_kernel(rho, x2 - y2),
                                     JL[0], JL[1], JR[0], JR[1], epsabs=1e-13, epsrel=1e-11)
        assert vertical_integral(rho, JL, JR) == pytest.approx(brute, rel=1e-8, abs=1e-13)

    def test_vertical_integral_is_antisymmetric(self):
        assert vertical_integral(0.2, (0.0, 0.3), (0.1, 0.5)) == pytest.approx(
            -vertical_integral(0.2, (0.1, 0.5), (0.0, 0.3)), rel=1e-12)

    def test_inverse_square_integral(self):
        brute, _ = integrate.dblquad(lambda v, u: (u + v) ** -2, 0.1, 0.6, 0.2, 0.9)
        assert inverse_square_integral((0.1, 0.6), (0.2, 0.9)) == pytest.approx(brute, rel=1e-10)


class TestBlockIntegral:
    """One left rectangle against one right rectangle."""

    def setup_method(self):
        self.IL = (-0.3, -0.1)
        self.IR = (0.1, 0.35)
        self.JL = (0.0, 0.2)
        self.JR = (0.05, 0.25)

    def test_matches_plain_quadrature(self):
        expected = brute_block(self.IL, self.IR, self.JL, self.JR)
        assert kernel_block_integral(self.IL, self.IR, self.JL, self.JR) == pytest.approx(expected, rel=1e-7)

    def test_touching_columns_still_integrable(self):
        IL, IR = (-0.2, 0.0), (0.1, 0.3)
        expected = brute_block(IL, IR, (0.3, 0.4), (0.0, 0.2))
        assert kernel_block_integral(IL, IR, (0.3, 0.4), (0.0, 0.2)) == pytest.approx(expected, rel=1e-7)

    def test_equal_heights_cancel(self):
        assert kernel_block_integral(self.IL, self.IR, (0.1, 0.4), (0.1, 0.4)) == pytest.approx(0.0, abs=1e-12)

    def test_vertical_translation_invariance(self):
        base = kernel_block_integral(self.IL, self.IR, self.JL, self.JR)
        moved = kernel_block_integral(self.IL, self.IR, (0.5, 0.7), (0.55, 0.75))
        assert moved == pytest.approx(base, rel=1e-9)

    def test_scaling_is_linear(self):
        delta = 0.125
        base = kernel_block_integral(self.IL, self.IR, self.JL, self.JR)
        scaled = kernel_block_integral(*[(delta * lo, delta * hi) for lo, hi in (self.IL, self.IR, self.JL, self.JR)])
        assert scaled == pytest.approx(delta * base, rel=1e-8)

    def test_left_above_right_is_positive(self):
        assert kernel_block_integral((-1.0, -0.5), (0.5, 1.0), (2.0, 3.0), (0.0, 1.0)) > 0.0

    @pytest.mark.parametrize("IL,IR,JL,JR", [
        ((-0.3, -0.1), (0.1, 0.1), (0.0, 1.0), (0.0, 1.0)),
        ((-0.3, 0.1), (0.1, 0.2), (0.0, 1.0), (0.0, 1.0)),
        ((-0.3, 0.0), (0.0, 0.2), (0.0, 1.0), (0.0, 1.0)),
        ((-0.3, -0.1), (0.1, 0.2), (0.5, 0.2), (0.0, 1.0)),
    ])
    def test_bad_intervals_rejected(self, IL, IR, JL, JR):
        with pytest.raises(ValueError):
            kernel_block_integral(IL, IR, JL, JR)


class TestRectUnions:
    """Columns, unions and their interaction."""

    def test_column_rects(self):
        column = RectColumn(x=(0.1, 0.2), y0=0.0, height=0.1, pitch=0.3, count=3)
        np.testing.assert_allclose(list(column.rects()),
                                   [(0.1, 0.2, 0.0, 0.1), (0.1, 0.2, 0.3, 0.4), (0.1, 0.2, 0.6, 0.7)])
        assert column.total_height == pytest.approx(0.3)

    def test_overlapping_column_rejected(self):
        with pytest.raises(ValidationError):
            RectColumn(x=(0.1, 0.2), y0=0.0, height=0.5, pitch=0.3, count=2)

    def test_wrong_side_rejected(self):
        with pytest.raises(ValidationError):
            RectUnion.from_rects("L", [(0.1, 0.2, 0.0, 1.0)])
        with pytest.raises(ValidationError):
            RectUnion.from_rects("R", [(-0.2, -0.1, 0.0, 1.0)])
        with pytest.raises(ValidationError):
            RectUnion(side="X")

    def test_evaluate_needs_left_then_right(self):
        A = RectUnion.from_rects("L", [(-0.2, -0.1, 0.0, 1.0)])
        B = RectUnion.from_rects("R", [(0.1, 0.2, 0.0, 1.0)])
        with pytest.raises(ValueError):
            evaluate_I(B, A)

    def test_empty_union(self):
        B = RectUnion.from_rects("R", [(0.1, 0.2, 0.0, 1.0)])
        estimate = evaluate_I(RectUnion(side="L"), B)
        assert estimate.value == 0.0
        assert closed_pair_bound(RectUnion(side="L"), B) == 0.0

    def test_small_columns_sum_their_blocks(self):
        left = RectColumn(x=(-0.3, -0.2), y0=0.1, height=0.05, pitch=0.2, count=3)
        right = RectColumn(x=(0.05, 0.15), y0=0.0, height=0.08, pitch=0.25, count=2)
        expected = math.fsum(kernel_block_integral((ra[0], ra[1]), (rb[0], rb[1]), (ra[2], ra[3]), (rb[2], rb[3]))
                             for ra in left.rects() for rb in right.rects())
        estimate = evaluate_I(RectUnion(side="L", columns=(left,)), RectUnion(side="R", columns=(right,)))
        assert estimate.value == pytest.approx(expected, rel=1e-8)
        assert estimate.error_bound == 0.0
        assert estimate.modes == (MODE_EXACT,)

    def test_closed_bound_dominates(self):
        A = RectUnion.from_rects("L", [(-0.3, -0.1, 0.0, 0.2), (-0.6, -0.4, 0.5, 0.9)])
        B = RectUnion.from_rects("R", [(0.1, 0.3, 0.05, 0.25), (0.2, 0.5, -0.8, -0.3)])
        assert abs(evaluate_I(A, B).value) <= closed_pair_bound(A, B)

    def test_min_x_gap(self):
        A = RectUnion.from_rects("L", [(-0.3, -0.1, 0.0, 0.2)])
        B = RectUnion.from_rects("R", [(0.15, 0.3, 0.0, 0.2)])
        assert A.min_x_gap(B) == pytest.approx(0.25)
        assert B.min_x_gap(A) == pytest.approx(0.25)
        assert A.mirrored_x_intervals() == [(0.1, 0.3)]

    def test_zeta_tail_brackets_the_full_offset_sum(self):
        left, right = level_columns(MultiscaleParams(M=11, L=2), 1)
        full = column_pair_integral(left, right)
        cut = column_pair_integral(left, right, cutoff=50)
        assert full.modes == (MODE_EXACT,)
        assert cut.modes == (MODE_ZETA_TAIL,)
        assert abs(full.value - cut.value) <= cut.error_bound


class TestMultiscale:
    """Parameters, the construction and the E1/E2/E3 split."""

    def test_parameters(self):
        p = MultiscaleParams(M=11, L=3)
        assert p.eps == 2.0 ** -33
        assert p.log_inv_eps == pytest.approx(33 * math.log(2.0))
        assert p.column_count(1) == 2048 // 12 + 1
        assert p.paper_floor == pytest.approx(2 / 12000)

    @pytest.mark.parametrize("M,L", [(10, 3), (11, 1)])
    def test_bad_parameters(self, M, L):
        with pytest.raises(ValidationError):
            MultiscaleParams(M=M, L=L)

    def test_construction_layout(self):
        p = MultiscaleParams(M=11, L=4)
        A, B = build_multiscale_sets(p)
        assert len(A.columns) == len(B.columns) == 3
        for k, (left, right) in enumerate(zip(A.columns, B.columns), start=1):
            delta = p.delta(k)
            assert left.x == (-delta, -0.5 * delta)
            assert right.x == (0.5 * delta, delta)
            assert left.y0 - right.y0 == pytest.approx(2 * delta)
            # the tallest column still fits in the unit strip
            assert left.y0 + (left.count - 1) * left.pitch + left.height < 1.0

    def test_two_levels(self):
        report = decompose_E(MultiscaleParams(M=11, L=2))
        assert report.E1 > 0.0
        assert abs(report.E2) < 0.2 * report.E1
        assert report.E3_abs == 0.0
        assert report.I_lower <= report.I_total <= report.I_upper
        assert report.I_lower >= report.paper_floor
        assert MODE_EXACT in report.modes

    def test_aligned_part_grows_linearly_in_levels(self):
        two = decompose_E(MultiscaleParams(M=11, L=2))
        three = decompose_E(MultiscaleParams(M=11, L=3))
        assert three.E1 == pytest.approx(2.0 * two.E1, rel=1e-2)
        assert 0.0 < three.E3_abs < 0.1 * three.E1
        assert MODE_CLOSED_BOUND in three.modes
        assert three.I_lower >= three.paper_floor
        assert three.growth_ratio == pytest.approx(three.I_total / three.log_inv_eps)
        assert three.E3 is None

    def test_growth_curve(self):
        rows = growth_curve(11, 3)
        assert [row.L for row in rows] == [2, 3]
        assert rows[1].I > rows[0].I > 0.0
        assert rows[1].eps < rows[0].eps
        assert all(row.E3 is None for row in rows)
        assert rows[0].E3_abs == 0.0 < rows[1].E3_abs
        assert MODE_CLOSED_BOUND in rows[1].modes
        with pytest.raises(ValueError):
            growth_curve(11, 1)


class TestUpperProbe:
    """Random separated unions against the logarithmic bound."""

    def test_random_unions_stay_separated(self):
        rng = np.random.default_rng(3)
        eps = 0.01
        union = random_separated_union(rng, "R", eps, 6)
        assert union.rect_count == 6
        for x_lo, x_hi, y_lo, y_hi in union.rects():
            assert eps / 2 - 1e-15 <= x_lo < x_hi <= 1.0
            assert -1.0 <= y_lo < y_hi <= 1.0

    def test_probe_respects_the_bound(self):
        report = upper_bound_probe(0.01, 3, seed=1)
        assert len(report.ratios) == 3
        assert report.max_ratio == max(report.ratios)
        assert report.max_ratio <= report.bound_ratio
        assert report.bound_ratio == pytest.approx(separated_log_bound(0.01) / math.log(100.0))

    def test_probe_is_reproducible(self):
        assert upper_bound_probe(0.05, 2, seed=9).ratios == upper_bound_probe(0.05, 2, seed=9).ratios

    @pytest.mark.parametrize("eps,trials", [(0.0, 1), (0.5, 1), (0.1, 0)])
    def test_bad_probe_arguments(self, eps, trials):
        with pytest.raises(ValueError):
            upper_bound_probe(eps, trials, seed=0)


@pytest.mark.slow
class TestAcceptanceScale:
    """M = 16 growth curve and the seeded upper probe."""

    def test_growth_curve_m16(self):
        rows = growth_curve(16, 5)
        ratios = []
        for row in rows:
            assert row.E1 >= row.paper_floor
            assert row.I > 0.0
            ratios.append(row.I / (row.L * 16 * math.log(2.0)))
        assert max(ratios) <= 4.0 * min(ratios)

    @pytest.mark.parametrize("eps", [2.0 ** -4, 2.0 ** -6, 2.0 ** -8])
    def test_probe_over_one_hundred_pairs(self, eps):
        report = upper_bound_probe(eps, 100, seed=0)
        assert report.max_ratio <= report.bound_ratio
