"""
Semi-analytic evaluation of the shear interaction

    I(A, B) = iint_{A x B} K_{|x1 - y1|}(x2 - y2) dx dy,   K_r(s) = s / (r^2 + s^2)^2,

for unions of rectangles A in Omega_L = (-1, 0) x (-1, 1) and B in
Omega_R = (0, 1) x (-1, 1), and the multiscale sets whose interaction grows
like log(1/eps).

The vertical integrals of K are done in closed form. The remaining
horizontal integral depends on x1 and y1 only through rho = |x1| + y1 and is
a one-dimensional adaptive quadrature against the trapezoidal density of rho.

I is invariant under vertical translation and scales like delta under
(x, y) -> delta (x, y), so every block is evaluated in normalised
coordinates and rescaled.
"""

import logging
import math
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import integrate, special

from .config import EXACT_PAIR_BUDGET, QUAD_EPSABS, QUAD_EPSREL, QUAD_LIMIT, SAME_LEVEL_CUTOFF
from .parallel import WorkerPool, ordered_sum

logger = logging.getLogger(__name__)

Interval = Tuple[float, float]
Rect = Tuple[float, float, float, float]

MODE_EXACT = "exact"
MODE_ZETA_TAIL = "zeta-tail"
MODE_CLOSED_BOUND = "closed-bound"


# ---------------------------------------------------------------------------
# Kernel pieces
# ---------------------------------------------------------------------------

def shear_kernel(r: float, s: float) -> float:
    """K_r(s) = s / (r^2 + s^2)^2."""
    return s / (r * r + s * s) ** 2


def shear_kernel_antiderivative(r: float, s: float) -> float:
    """-1/2 (r^2 + s^2)^-1, an antiderivative of K_r in s."""
    return -0.5 / (r * r + s * s)


def _atan_difference(u: float, v: float) -> float:
    """arctan(u) - arctan(v) without cancellation when u and v are large and close."""
    if u * v > -1.0:
        return math.atan((u - v) / (1.0 + u * v))
    return math.atan(u) - math.atan(v)


def vertical_integral(rho: float, JL: Interval, JR: Interval) -> float:
    """iint_{x2 in JL, y2 in JR} K_rho(x2 - y2) dy2 dx2 in closed form."""
    a, b = JL
    c, d = JR
    upper = _atan_difference((b - c) / rho, (b - d) / rho)
    lower = _atan_difference((a - c) / rho, (a - d) / rho)
    return -0.5 * (upper - lower) / rho


def _overlap_density(rho: float, alpha: Interval, beta: Interval) -> float:
    """Length of {u in alpha : rho - u in beta}."""
    low = max(alpha[0], rho - beta[1])
    high = min(alpha[1], rho - beta[0])
    return max(high - low, 0.0)


def _check_interval(name: str, interval: Interval):
    if not interval[0] < interval[1]:
        raise ValueError(f"Invalid {name} interval {interval}: must be nondegenerate")


def kernel_block_integral(IL: Interval, IR: Interval, JL: Interval, JR: Interval,
                          epsabs: float = QUAD_EPSABS, epsrel: float = QUAD_EPSREL) -> float:
    """I of the single pair of rectangles IL x JL (left) and IR x JR (right)."""
    for name, interval in (("IL", IL), ("IR", IR), ("JL", JL), ("JR", JR)):
        _check_interval(name, interval)
    if IL[1] > 0.0 or IR[0] < 0.0:
        raise ValueError(f"Invalid x-intervals IL={IL}, IR={IR}: IL must lie left of 0 and IR right of 0")

    alpha = (-IL[1], -IL[0])
    beta = (IR[0], IR[1])
    if alpha[0] + beta[0] <= 0.0:
        raise ValueError(f"Invalid x-intervals IL={IL}, IR={IR}: both touch x1 = 0")

    kinks = sorted({alpha[0] + beta[0], alpha[0] + beta[1], alpha[1] + beta[0], alpha[1] + beta[1]})

    def integrand(rho: float) -> float:
        return _overlap_density(rho, alpha, beta) * vertical_integral(rho, JL, JR)

    pieces = []
    for low, high in zip(kinks, kinks[1:]):
        if high > low:
            value, _ = integrate.quad(integrand, low, high, epsabs=epsabs, epsrel=epsrel, limit=QUAD_LIMIT)
            pieces.append(value)
    return math.fsum(pieces)


def inverse_square_integral(alpha: Interval, beta: Interval) -> float:
    """iint_{u in alpha, v in beta} (u + v)^-2 du dv, in closed form."""
    a1, a2 = alpha
    b1, b2 = beta
    return math.log1p((a2 - a1) * (b2 - b1) / ((a1 + b1) * (a2 + b2)))


# ---------------------------------------------------------------------------
# Rectangle unions
# ---------------------------------------------------------------------------

class RectColumn(BaseModel):
    """count equal rectangles x x [y0 + n pitch, y0 + n pitch + height], n = 0..count-1."""
    model_config = ConfigDict(frozen=True)

    x: Interval
    y0: float
    height: float = Field(gt=0.0)
    pitch: float = 0.0
    count: int = Field(default=1, ge=1)

    @model_validator(mode='after')
    def _check_column(self):
        _check_interval("x", self.x)
        if self.count > 1 and self.pitch < self.height:
            raise ValueError(f"Invalid column: pitch {self.pitch} below rectangle height {self.height}")
        return self

    def rects(self) -> Iterator[Rect]:
        for n in range(self.count):
            bottom = self.y0 + n * self.pitch
            yield (self.x[0], self.x[1], bottom, bottom + self.height)

    @property
    def total_height(self) -> float:
        return self.count * self.height

    @property
    def x_scale(self) -> float:
        return max(abs(self.x[0]), abs(self.x[1]))


class RectUnion(BaseModel):
    """Union of rectangle columns on one side of x1 = 0."""
    model_config = ConfigDict(frozen=True)

    side: str
    columns: Tuple[RectColumn, ...] = ()

    @model_validator(mode='after')
    def _check_side(self):
        if self.side not in ("L", "R"):
            raise ValueError(f"Invalid side {self.side!r}: must be 'L' or 'R'")
        for column in self.columns:
            if self.side == "L" and column.x[1] > 0.0:
                raise ValueError(f"Invalid L rectangle x-range {column.x}: must satisfy x2 <= 0")
            if self.side == "R" and column.x[0] < 0.0:
                raise ValueError(f"Invalid R rectangle x-range {column.x}: must satisfy x1 >= 0")
        return self

    @classmethod
    def from_rects(cls, side: str, rects: Sequence[Rect]) -> 'RectUnion':
        columns = tuple(RectColumn(x=(r[0], r[1]), y0=r[2], height=r[3] - r[2]) for r in rects)
        return cls(side=side, columns=columns)

    def rects(self) -> Iterator[Rect]:
        for column in self.columns:
            yield from column.rects()

    @property
    def is_empty(self) -> bool:
        return not self.columns

    @property
    def rect_count(self) -> int:
        return sum(column.count for column in self.columns)

    def min_x_gap(self, other: 'RectUnion') -> float:
        """Smallest horizontal distance between the two unions' rectangles."""
        left, right = (self, other) if self.side == "L" else (other, self)
        return min(col.x[0] for col in right.columns) - max(col.x[1] for col in left.columns)

    def mirrored_x_intervals(self) -> List[Interval]:
        return [(-column.x[1], -column.x[0]) for column in self.columns]


class IntegralEstimate(BaseModel):
    """Value with an error radius; modes record which evaluation paths were used."""
    model_config = ConfigDict(frozen=True)

    value: float
    error_bound: float = 0.0
    modes: Tuple[str, ...] = ()

    @property
    def lower(self) -> float:
        return self.value - self.error_bound

    @property
    def upper(self) -> float:
        return self.value + self.error_bound

    @classmethod
    def combine(cls, estimates: Sequence['IntegralEstimate']) -> 'IntegralEstimate':
        modes = sorted({mode for estimate in estimates for mode in estimate.modes})
        return cls(value=ordered_sum(e.value for e in estimates),
                   error_bound=ordered_sum(e.error_bound for e in estimates),
                   modes=tuple(modes))


def _normalised_block(scale: float, IL: Interval, IR: Interval, JL: Interval, JR: Interval,
                      epsabs: float = QUAD_EPSABS) -> float:
    """kernel_block_integral evaluated after scaling all lengths by 1/scale."""
    shift = JR[0]
    unit = [(lo / scale, hi / scale) for lo, hi in (IL, IR)]
    JL_unit = ((JL[0] - shift) / scale, (JL[1] - shift) / scale)
    JR_unit = (0.0, (JR[1] - shift) / scale)
    return scale * kernel_block_integral(unit[0], unit[1], JL_unit, JR_unit, epsabs=epsabs)


def _column_bound(colA: RectColumn, colB: RectColumn) -> float:
    alpha = (-colA.x[1], -colA.x[0])
    beta = (colB.x[0], colB.x[1])
    return min(colA.total_height, colB.total_height) * inverse_square_integral(alpha, beta)


def _same_shape(colA: RectColumn, colB: RectColumn) -> bool:
    return (colA.count == colB.count and colA.count > 1
            and math.isclose(colA.pitch, colB.pitch, rel_tol=1e-12)
            and math.isclose(colA.height, colB.height, rel_tol=1e-12))


def offset_block_values(colA: RectColumn, colB: RectColumn, cutoff: int) -> Tuple[float, np.ndarray]:
    """Normalised block values for offsets e = nA - nB: the e = 0 value and P(d) = V(d) + V(-d), d = 1..cutoff."""
    scale = max(colA.x_scale, colB.x_scale)
    base = colA.y0 - colB.y0

    def block(e: int) -> float:
        # relative accuracy only: these values get tiny for large offsets
        bottom = (base + e * colA.pitch) / scale
        return kernel_block_integral(
            (colA.x[0] / scale, colA.x[1] / scale), (colB.x[0] / scale, colB.x[1] / scale),
            (bottom, bottom + colA.height / scale), (0.0, colB.height / scale),
            epsabs=0.0, epsrel=1e-10,
        )

    offsets = [0] + [sign * d for d in range(1, cutoff + 1) for sign in (1, -1)]
    with WorkerPool() as pool:
        values = pool.map_ordered(block, offsets)
    paired = np.array([values[2 * d - 1] + values[2 * d] for d in range(1, cutoff + 1)])
    return values[0], paired


def _hurwitz_tail(coefficient: float, count: float, first: int) -> float:
    """sum_{d=first}^{count-1} (count - d) coefficient / d^4 via Hurwitz zeta."""
    if count - 1 < first:
        return 0.0
    z4 = special.zeta(4, first) - special.zeta(4, count)
    z3 = special.zeta(3, first) - special.zeta(3, count)
    return coefficient * (count * z4 - z3)


def _offset_sum(diagonal: float, paired: np.ndarray, count: float, include_diagonal: bool,
                include_offsets: bool) -> Tuple[float, float]:
    """(sum, tail) of count V(0) + sum_{d >= 1} (count - d) P(d) in normalised units."""
    terms = []
    if include_diagonal:
        terms.append(count * diagonal)
    tail = 0.0
    if include_offsets:
        explicit = int(min(len(paired), count - 1))
        d = np.arange(1, explicit + 1, dtype=np.float64)
        terms.extend(((count - d) * paired[:explicit]).tolist())
        if count - 1 > len(paired):
            last = len(paired)
            tail = _hurwitz_tail(paired[-1] * float(last) ** 4, count, last + 1)
    return ordered_sum(terms), tail


def column_pair_integral(colA: RectColumn, colB: RectColumn,
                         cutoff: int = SAME_LEVEL_CUTOFF) -> IntegralEstimate:
    """I between one left column and one right column."""
    pairs = colA.count * colB.count
    if pairs <= EXACT_PAIR_BUDGET:
        scale = max(colA.x_scale, colB.x_scale)
        values = [
            _normalised_block(scale, (ra[0], ra[1]), (rb[0], rb[1]), (ra[2], ra[3]), (rb[2], rb[3]))
            for ra in colA.rects() for rb in colB.rects()
        ]
        return IntegralEstimate(value=ordered_sum(values), modes=(MODE_EXACT,))

    if _same_shape(colA, colB):
        scale = max(colA.x_scale, colB.x_scale)
        diagonal, paired = offset_block_values(colA, colB, min(cutoff, colA.count - 1))
        total, tail = _offset_sum(diagonal, paired, float(colA.count), True, True)
        return IntegralEstimate(value=scale * (total + tail), error_bound=scale * abs(tail),
                                modes=(MODE_ZETA_TAIL,) if tail else (MODE_EXACT,))

    return IntegralEstimate(value=0.0, error_bound=_column_bound(colA, colB), modes=(MODE_CLOSED_BOUND,))


def evaluate_I(A: RectUnion, B: RectUnion) -> IntegralEstimate:
    """I(A, B) as an ordered sum over column pairs (A outer, B inner)."""
    if A.side != "L" or B.side != "R":
        raise ValueError(f"Invalid unions: need an L union and an R union, got {A.side} and {B.side}")
    if A.is_empty or B.is_empty:
        return IntegralEstimate(value=0.0, modes=(MODE_EXACT,))
    estimates = [column_pair_integral(colA, colB) for colA in A.columns for colB in B.columns]
    return IntegralEstimate.combine(estimates)


def closed_pair_bound(A: RectUnion, B: RectUnion) -> float:
    """Rigorous bound on |I(A, B)|: sum over column pairs of min(heights) iint rho^-2."""
    if A.is_empty or B.is_empty:
        return 0.0
    return ordered_sum(_column_bound(colA, colB) for colA in A.columns for colB in B.columns)


# ---------------------------------------------------------------------------
# Multiscale construction
# ---------------------------------------------------------------------------

class MultiscaleParams(BaseModel):
    """Scale exponent M and number of levels L; eps = 2^-(L M)."""
    model_config = ConfigDict(frozen=True)

    M: int = Field(ge=11)
    L: int = Field(ge=2)

    @property
    def eps(self) -> float:
        return 2.0 ** (-self.L * self.M)

    @property
    def log_inv_eps(self) -> float:
        return self.L * self.M * math.log(2.0)

    def delta(self, k: int) -> float:
        return 2.0 ** (-k * self.M)

    def column_count(self, k: int) -> int:
        """floor(2^(kM) / (M+1)) + 1 columns at level k."""
        return (1 << (k * self.M)) // (self.M + 1) + 1

    @property
    def paper_floor(self) -> float:
        return (self.L - 1) / (1e3 * (self.M + 1))


def level_columns(p: MultiscaleParams, k: int) -> Tuple[RectColumn, RectColumn]:
    """Left and right columns of squares of side 2^-kM at level k."""
    delta = p.delta(k)
    count = p.column_count(k)
    left = RectColumn(x=(-delta, -0.5 * delta), y0=2.0 * delta, height=delta, pitch=p.M * delta, count=count)
    right = RectColumn(x=(0.5 * delta, delta), y0=0.0, height=delta, pitch=p.M * delta, count=count)
    return left, right


def build_multiscale_sets(p: MultiscaleParams) -> Tuple[RectUnion, RectUnion]:
    """A = union of I^L_k x J^L_{k,n}, B = union of I^R_k x J^R_{k,n}, 1 <= k <= L-1."""
    columns = [level_columns(p, k) for k in range(1, p.L)]
    A = RectUnion(side="L", columns=tuple(left for left, _ in columns))
    B = RectUnion(side="R", columns=tuple(right for _, right in columns))
    return A, B


class BoundsReport(BaseModel):
    """Split of I(A, B) into aligned, misaligned and cross-scale parts."""
    model_config = ConfigDict(frozen=True)

    M: int
    L: int
    eps: float
    log_inv_eps: float
    E1: float
    E2: float
    # cross-level part: bounded by E3_abs, never summed
    E3: Optional[float] = None
    E2_abs: float
    E3_abs: float
    E2_tail: float
    I_total: float
    I_lower: float
    I_upper: float
    paper_floor: float
    ratio_E2_M4: float
    ratio_E2_M3: float
    ratio_E3: float
    modes: Tuple[str, ...]

    @property
    def growth_ratio(self) -> float:
        """I / log(1/eps)."""
        return self.I_total / self.log_inv_eps


def unit_block_values(p: MultiscaleParams, cutoff: int = SAME_LEVEL_CUTOFF) -> Tuple[float, np.ndarray]:
    """Scale-free same-level values: aligned block and paired offsets 1..cutoff."""
    left, right = level_columns(p, 1)
    return offset_block_values(left, right, cutoff)


def decompose_E(p: MultiscaleParams, cutoff: int = SAME_LEVEL_CUTOFF) -> BoundsReport:
    """E1 (same level, same column), E2 (same level, other columns), E3 (different levels)."""
    diagonal, paired = unit_block_values(p, cutoff)
    levels = range(1, p.L)

    e1_terms = []
    e2_terms = []
    tails = []
    for k in levels:
        count = float(p.column_count(k))
        delta = p.delta(k)
        e1_terms.append(delta * count * diagonal)
        misaligned, tail = _offset_sum(diagonal, paired, count, False, True)
        e2_terms.append(delta * (misaligned + tail))
        tails.append(delta * abs(tail))
        logger.debug(f"Level {k}: {int(count)} columns, E1 part {e1_terms[-1]:.6g}, E2 part {e2_terms[-1]:.6g}")

    e3_bound_terms = []
    for kL in levels:
        for kR in levels:
            if kL != kR:
                left, _ = level_columns(p, kL)
                _, right = level_columns(p, kR)
                e3_bound_terms.append(_column_bound(left, right))

    E1 = ordered_sum(e1_terms)
    E2 = ordered_sum(e2_terms)
    E2_tail = ordered_sum(tails)
    E3_bound = ordered_sum(e3_bound_terms)
    I_total = E1 + E2
    error = E2_tail + E3_bound

    modes = {MODE_EXACT}
    if E2_tail > 0.0:
        modes.add(MODE_ZETA_TAIL)
    if e3_bound_terms:
        modes.add(MODE_CLOSED_BOUND)

    return BoundsReport(
        M=p.M, L=p.L, eps=p.eps, log_inv_eps=p.log_inv_eps,
        E1=E1, E2=E2, E2_abs=abs(E2), E3_abs=E3_bound, E2_tail=E2_tail,
        I_total=I_total, I_lower=I_total - error, I_upper=I_total + error,
        paper_floor=p.paper_floor,
        ratio_E2_M4=abs(E2) / (p.L / p.M ** 4),
        ratio_E2_M3=abs(E2) / (p.L / p.M ** 3),
        ratio_E3=E3_bound / (p.L * 2.0 ** (-p.M)),
        modes=tuple(sorted(modes)),
    )


class GrowthRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    L: int
    eps: float
    E1: float
    E2: float
    E3: Optional[float]
    I: float
    paper_floor: float
    E3_abs: float
    modes: Tuple[str, ...]


def growth_curve(M: int, max_levels: int) -> List[GrowthRow]:
    """Reports for L = 2 .. max_levels, sharing the scale-free block values."""
    if max_levels < 2:
        raise ValueError(f"Invalid level count L={max_levels}: must be >= 2")
    rows = []
    for L in range(2, max_levels + 1):
        report = decompose_E(MultiscaleParams(M=M, L=L))
        rows.append(GrowthRow(L=L, eps=report.eps, E1=report.E1, E2=report.E2, E3=report.E3,
                              I=report.I_total, paper_floor=report.paper_floor,
                              E3_abs=report.E3_abs, modes=report.modes))
    return rows


# ---------------------------------------------------------------------------
# Upper-bound probe
# ---------------------------------------------------------------------------

class ProbeReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    eps: float
    trials: int
    max_ratio: float
    bound_ratio: float
    ratios: List[float]


def separated_log_bound(eps: float) -> float:
    """Bound on |I(A, B)| for A, B in the strips with every |x1| >= eps/2.

    For fixed x1 and y1 the vertical sections have measure at most 2 and
    the integral of |K_rho| over a line is rho^-2.
    """
    return 2.0 * inverse_square_integral((0.5 * eps, 1.0), (0.5 * eps, 1.0))


def random_separated_union(rng: np.random.Generator, side: str, eps: float, count: int) -> RectUnion:
    """count rectangles in disjoint horizontal bands, each at horizontal distance >= eps/2 from 0."""
    rects = []
    band = 2.0 / count
    near_log = math.log(0.5 * eps)
    for index in range(count):
        inner = math.exp(near_log * (1.0 - rng.random()))
        outer = inner + (1.0 - inner) * rng.random()
        if outer <= inner:
            outer = min(1.0, inner * 2.0)
        low, high = sorted(rng.random(2))
        if high - low < 1e-3:
            high = min(1.0, low + 1e-3)
        bottom = -1.0 + band * (index + low)
        top = -1.0 + band * (index + high)
        if side == "L":
            rects.append((-outer, -inner, bottom, top))
        else:
            rects.append((inner, outer, bottom, top))
    return RectUnion.from_rects(side, rects)


def upper_bound_probe(eps: float, trials: int, seed: int, rects_per_side: int = 6) -> ProbeReport:
    """Largest |I(A, B)| / log(1/eps) over random unions separated by at least eps."""
    if not 0.0 < eps < 0.5:
        raise ValueError(f"Invalid separation eps={eps}: must lie in (0, 1/2)")
    if trials < 1:
        raise ValueError(f"Invalid number of trials {trials}: must be >= 1")
    rng = np.random.default_rng(seed)
    scale = math.log(1.0 / eps)
    ratios = []
    for _ in range(trials):
        A = random_separated_union(rng, "L", eps, rects_per_side)
        B = random_separated_union(rng, "R", eps, rects_per_side)
        estimate = evaluate_I(A, B)
        ratios.append(abs(estimate.value) / scale)
    logger.info(f"Upper probe eps={eps:g}: max ratio {max(ratios):.6g} over {trials} trials")
    return ProbeReport(eps=eps, trials=trials, max_ratio=max(ratios),
                       bound_ratio=separated_log_bound(eps) / scale, ratios=ratios)
