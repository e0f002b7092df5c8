"""
Periodic geometry and field storage on the flat torus T^2 = R^2 / Z^2.

Cells (i, j) cover [i h, (i+1) h) x [j h, (j+1) h) with h = 1/N; index i runs
along x1 and j along x2. All index arithmetic is modulo N. Balls are sets of
cells whose centres lie within geodesic distance r of the query centre
(closed balls), and ball averages are normalised by the stencil count.
"""

import logging
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from .error_handler import GridMismatchError, ResolutionError

logger = logging.getLogger(__name__)

# Relative slack when deciding whether a lattice point sits on the circle
_TIE_SLACK = 1e-9


class GridSpec(BaseModel):
    """Uniform N x N discretisation of the torus."""
    model_config = ConfigDict(frozen=True)

    N: int

    @field_validator('N')
    @classmethod
    def _power_of_two(cls, value: int) -> int:
        if value < 4 or value & (value - 1):
            raise ValueError(f"Invalid grid size N={value}: must be a power of two and at least 4")
        return value

    @property
    def h(self) -> Fraction:
        """Cell width as an exact rational."""
        return Fraction(1, self.N)

    @property
    def dx(self) -> float:
        return 1.0 / self.N

    @property
    def cell_area(self) -> float:
        return 1.0 / (self.N * self.N)


def _read_only(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


class IndicatorField(BaseModel):
    """Binary field 1_A on the grid."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    spec: GridSpec
    cells: np.ndarray

    @field_validator('cells', mode='before')
    @classmethod
    def _as_bool(cls, value) -> np.ndarray:
        return _read_only(np.array(value, dtype=bool, copy=True))

    @model_validator(mode='after')
    def _check_shape(self):
        expected = (self.spec.N, self.spec.N)
        if self.cells.shape != expected:
            raise ValueError(f"Invalid cell array shape {self.cells.shape}, expected {expected}")
        return self

    def __eq__(self, other) -> bool:
        if not isinstance(other, IndicatorField):
            return NotImplemented
        return self.spec == other.spec and bool(np.array_equal(self.cells, other.cells))

    __hash__ = None

    def count(self) -> int:
        return int(np.count_nonzero(self.cells))

    def measure(self) -> float:
        """|A| = (#true cells) h^2."""
        return float(self.measure_exact())

    def measure_exact(self) -> Fraction:
        return Fraction(self.count(), self.spec.N * self.spec.N)

    def as_float(self) -> np.ndarray:
        return self.cells.astype(np.float64)


class ScalarField(BaseModel):
    """Real field sampled at cell centres."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    spec: GridSpec
    values: np.ndarray

    @field_validator('values', mode='before')
    @classmethod
    def _as_float(cls, value) -> np.ndarray:
        return _read_only(np.array(value, dtype=np.float64, copy=True))

    @model_validator(mode='after')
    def _check_values(self):
        expected = (self.spec.N, self.spec.N)
        if self.values.shape != expected:
            raise ValueError(f"Invalid value array shape {self.values.shape}, expected {expected}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("Invalid scalar field: values must be finite (no NaN/Inf)")
        return self

    def __eq__(self, other) -> bool:
        if not isinstance(other, ScalarField):
            return NotImplemented
        return self.spec == other.spec and bool(np.array_equal(self.values, other.values))

    __hash__ = None

    def mean(self) -> float:
        return float(np.mean(self.values))


class DiskStencil(BaseModel):
    """Integer cell offsets inside the closed ball of radius r."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    r: float
    N: int
    offsets: np.ndarray
    # half-width of the row span for every row offset di in [-reach, reach]
    spans: Tuple[int, ...]

    @property
    def reach(self) -> int:
        return (len(self.spans) - 1) // 2

    @property
    def count(self) -> int:
        return int(self.offsets.shape[0])

    def span(self, di: int) -> int:
        return self.spans[di + self.reach]

    def contains(self, di: np.ndarray, dj: np.ndarray) -> np.ndarray:
        """Membership of (already geodesic) offsets, consistent with the offset list."""
        di = np.asarray(di)
        dj = np.asarray(dj)
        spans = np.asarray(self.spans)
        inside_rows = np.abs(di) <= self.reach
        widths = spans[np.clip(di + self.reach, 0, len(self.spans) - 1)]
        return inside_rows & (np.abs(dj) <= widths)


@lru_cache(maxsize=256)
def _stencil_cached(N: int, r: float) -> DiskStencil:
    radius_cells = r * N
    limit = radius_cells * radius_cells * (1.0 + _TIE_SLACK)
    reach = int(np.floor(radius_cells * (1.0 + _TIE_SLACK)))
    spans = []
    offsets = []
    for di in range(-reach, reach + 1):
        w = int(np.floor(np.sqrt(max(limit - di * di, 0.0))))
        while w * w + di * di > limit:
            w -= 1
        while (w + 1) * (w + 1) + di * di <= limit:
            w += 1
        spans.append(w)
        for dj in range(-w, w + 1):
            offsets.append((di, dj))
    return DiskStencil(r=r, N=N, offsets=_read_only(np.array(offsets, dtype=np.int64)), spans=tuple(spans))


def disk_stencil(spec: GridSpec, r: float) -> DiskStencil:
    """Offsets (di, dj) with |(di, dj)| h <= r, ties included."""
    if not 0.0 < r <= 0.25:
        raise ValueError(f"Invalid stencil radius {r}: must lie in (0, 1/4]")
    return _stencil_cached(spec.N, float(r))


def require_resolved(spec: GridSpec, r: float, what: str = "radius"):
    """Reject radii below one cell width."""
    if r < spec.dx * (1.0 - _TIE_SLACK):
        raise ResolutionError(f"{what} {r:g} is below the cell width 1/{spec.N}")


def require_same_grid(a, b):
    if a.spec != b.spec:
        raise GridMismatchError(f"Fields live on different grids: N={a.spec.N} and N={b.spec.N}")


def cell_centers(spec: GridSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Coordinates (x1, x2) of every cell centre, indexed [i, j]."""
    centers = (np.arange(spec.N, dtype=np.float64) + 0.5) / spec.N
    return np.meshgrid(centers, centers, indexing='ij')


def from_cells(spec: GridSpec, cells) -> IndicatorField:
    return IndicatorField(spec=spec, cells=cells)


def full_field(spec: GridSpec, value: bool = True) -> IndicatorField:
    return IndicatorField(spec=spec, cells=np.full((spec.N, spec.N), value, dtype=bool))


def complement(field: IndicatorField) -> IndicatorField:
    return IndicatorField(spec=field.spec, cells=~field.cells)


def translate(field: Union[IndicatorField, ScalarField], shift: Tuple[int, int]):
    """Move every cell (i, j) to (i + v1, j + v2) modulo N."""
    if isinstance(field, IndicatorField):
        return IndicatorField(spec=field.spec, cells=np.roll(field.cells, shift, axis=(0, 1)))
    return ScalarField(spec=field.spec, values=np.roll(field.values, shift, axis=(0, 1)))


def rotate90(field: Union[IndicatorField, ScalarField], quarter_turns: int = 1):
    """Rotate the whole torus counter-clockwise about the origin."""
    q = quarter_turns % 4
    if isinstance(field, IndicatorField):
        return IndicatorField(spec=field.spec, cells=np.rot90(field.cells, q))
    return ScalarField(spec=field.spec, values=np.rot90(field.values, q))


def make_half_torus(spec: GridSpec) -> IndicatorField:
    """Omega_L = {x : 0 <= x1 < 1/2}."""
    if spec.N % 2:
        raise ValueError(f"Invalid grid size N={spec.N}: half torus needs N even")
    cells = np.zeros((spec.N, spec.N), dtype=bool)
    cells[: spec.N // 2, :] = True
    return IndicatorField(spec=spec, cells=cells)


def make_checkerboard(spec: GridSpec, m: int) -> IndicatorField:
    """Alternating blocks of side 2^-m; the block at the origin is in the set."""
    if m < 1 or spec.N % (1 << m):
        raise ValueError(f"Invalid block exponent m={m}: 2^m must divide N={spec.N} and m >= 1")
    block = spec.N >> m
    index = np.arange(spec.N) // block
    cells = (index[:, None] + index[None, :]) % 2 == 0
    return IndicatorField(spec=spec, cells=cells)


def _row_span_sums(values: np.ndarray, reach: int, widths) -> Dict[int, np.ndarray]:
    """For each width w: S_w[i, j] = sum_{|dj| <= w} values[i, j + dj] (periodic)."""
    N = values.shape[1]
    padded = np.concatenate([values[:, N - reach:], values, values[:, :reach]], axis=1) if reach else values
    prefix = np.zeros((values.shape[0], padded.shape[1] + 1), dtype=values.dtype)
    np.cumsum(padded, axis=1, out=prefix[:, 1:])
    columns = np.arange(N) + reach
    sums = {}
    for w in sorted(set(widths)):
        sums[w] = prefix[:, columns + w + 1] - prefix[:, columns - w]
    return sums


def _ball_totals(values: np.ndarray, stencil: DiskStencil) -> np.ndarray:
    reach = stencil.reach
    if 2 * reach >= values.shape[0]:
        raise ResolutionError(f"stencil reach {reach} cells does not fit a grid of {values.shape[0]} cells")
    row_sums = _row_span_sums(values, reach, stencil.spans)
    total = np.zeros_like(values)
    for di in range(-reach, reach + 1):
        total += np.roll(row_sums[stencil.span(di)], -di, axis=0)
    return total


def ball_counts(field: IndicatorField, stencil: DiskStencil) -> np.ndarray:
    """#(A intersect B_r(x)) at every cell centre, exact integers."""
    if stencil.N != field.spec.N:
        raise GridMismatchError(f"Stencil built for N={stencil.N}, field has N={field.spec.N}")
    return _ball_totals(field.cells.astype(np.int64), stencil)


def ball_sums(field: IndicatorField, stencil: DiskStencil) -> ScalarField:
    """|A intersect B_r(x)| / |B_r(x)| at every cell centre."""
    require_resolved(field.spec, stencil.r)
    counts = ball_counts(field, stencil)
    return ScalarField(spec=field.spec, values=counts / stencil.count)


def ball_average(field: Union[IndicatorField, ScalarField], stencil: DiskStencil) -> np.ndarray:
    """Average of a real or binary field over every ball, as a raw array."""
    if isinstance(field, IndicatorField):
        return ball_counts(field, stencil) / stencil.count
    if stencil.N != field.spec.N:
        raise GridMismatchError(f"Stencil built for N={stencil.N}, field has N={field.spec.N}")
    return _ball_totals(np.array(field.values, dtype=np.float64), stencil) / stencil.count


def lattice_stencil(side: int, m: int) -> DiskStencil:
    """Offsets with di^2 + dj^2 <= m^2 on a periodic side x side lattice of any size."""
    if m < 1 or 2 * m >= side:
        raise ValueError(f"Invalid lattice radius m={m}: must satisfy 1 <= m < {side}/2")
    return _stencil_cached(side, m / side)


def lattice_counts(cells: np.ndarray, stencil: DiskStencil) -> np.ndarray:
    """Ball counts of a bare boolean lattice, with no power-of-two grid behind it."""
    cells = np.asarray(cells)
    if cells.shape != (stencil.N, stencil.N):
        raise GridMismatchError(f"Stencil built for side {stencil.N}, lattice has shape {cells.shape}")
    return _ball_totals(cells.astype(np.int64), stencil)


def symmetric_difference_measure(a: IndicatorField, b: IndicatorField) -> float:
    """|A sym-diff B| = h^2 #(cells where a != b)."""
    require_same_grid(a, b)
    differing = int(np.count_nonzero(a.cells != b.cells))
    return float(Fraction(differing, a.spec.N * a.spec.N))


def geodesic_offset(delta: np.ndarray, N: int) -> np.ndarray:
    """Minimal representative of an integer offset modulo N, in (-N/2, N/2]."""
    wrapped = np.mod(delta, N)
    return np.where(wrapped > N // 2, wrapped - N, wrapped)
