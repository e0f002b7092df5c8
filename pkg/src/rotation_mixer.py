"""
Grid-aligned square rotations, their cost ledger and the quadrisection scheme.

A move turns the open square (x - r, x + r)^2 by q counter-clockwise quarter
turns, where x = (ci h, cj h) is a cell corner and r = s h. The square is
the block of cells ci-s .. ci+s-1 by cj-s .. cj+s-1, so every move is an
exact permutation of cells. A move is billed q r^2.
"""

import logging
from fractions import Fraction
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .bianchini import SemiNormParams, bianchini_seminorm, mixing_scale
from .error_handler import GridMismatchError, ResolutionError
from .parallel import WorkerPool, ordered_sum
from .torus_grid import (
    GridSpec,
    IndicatorField,
    disk_stencil,
    geodesic_offset,
    require_resolved,
)

logger = logging.getLogger(__name__)

# Offsets processed per vectorised batch in lemma72_rhs
_OFFSET_CHUNK = 512


class RotationMove(BaseModel):
    """Quarter turns of the square of half-width s cells about corner (ci, cj)."""
    model_config = ConfigDict(frozen=True)

    N: int
    center: Tuple[int, int]
    halfwidth_cells: int = Field(ge=1)
    quarter_turns: int = Field(ge=1, le=3)

    @model_validator(mode='after')
    def _check_fits(self):
        if self.halfwidth_cells > self.N // 4:
            raise ValueError(
                f"Invalid half-width s={self.halfwidth_cells}: must satisfy 1 <= s <= N/4 = {self.N // 4}"
            )
        ci, cj = self.center
        if not (0 <= ci < self.N and 0 <= cj < self.N):
            raise ValueError(f"Invalid rotation centre {self.center}: must lie in [0, {self.N})^2")
        return self

    @property
    def cost(self) -> Fraction:
        """q (s/N)^2, exact."""
        return Fraction(self.quarter_turns * self.halfwidth_cells ** 2, self.N * self.N)

    @property
    def radius(self) -> float:
        return self.halfwidth_cells / self.N

    def inverse(self) -> 'RotationMove':
        return self.model_copy(update={'quarter_turns': 4 - self.quarter_turns})

    def square_indices(self) -> Tuple[np.ndarray, np.ndarray]:
        """Row and column indices (mod N) of the cells strictly inside the square."""
        ci, cj = self.center
        s = self.halfwidth_cells
        local = np.arange(2 * s)
        return (ci - s + local) % self.N, (cj - s + local) % self.N


def make_move(N: int, ci: int, cj: int, s: int, q: int) -> RotationMove:
    return RotationMove(N=N, center=(ci % N, cj % N), halfwidth_cells=s, quarter_turns=q)


class MoveSequence(BaseModel):
    """Ordered composition of rotations; the first move is applied first."""
    model_config = ConfigDict(frozen=True)

    N: int
    moves: Tuple[RotationMove, ...] = ()

    @model_validator(mode='after')
    def _same_grid(self):
        for move in self.moves:
            if move.N != self.N:
                raise ValueError(f"Invalid move for N={self.N}: move was built for N={move.N}")
        return self

    @property
    def total_cost(self) -> Fraction:
        return sum((move.cost for move in self.moves), Fraction(0))

    def concat(self, other: 'MoveSequence') -> 'MoveSequence':
        if other.N != self.N:
            raise ValueError(f"Invalid concatenation: sequences built for N={self.N} and N={other.N}")
        return MoveSequence(N=self.N, moves=self.moves + other.moves)

    def inverse(self) -> 'MoveSequence':
        return MoveSequence(N=self.N, moves=tuple(m.inverse() for m in reversed(self.moves)))

    def __len__(self) -> int:
        return len(self.moves)


def _rotate_in_place(cells: np.ndarray, move: RotationMove):
    rows, cols = move.square_indices()
    block = cells[np.ix_(rows, cols)]
    cells[np.ix_(rows, cols)] = np.rot90(block, move.quarter_turns)


def _check_grid(A: IndicatorField, N: int):
    if A.spec.N != N:
        raise GridMismatchError(f"Moves built for N={N} cannot act on a field with N={A.spec.N}")


def apply_rotation(A: IndicatorField, move: RotationMove) -> IndicatorField:
    """Permute the cells inside the square by q counter-clockwise quarter turns."""
    _check_grid(A, move.N)
    cells = np.array(A.cells)
    _rotate_in_place(cells, move)
    return IndicatorField(spec=A.spec, cells=cells)


def apply_sequence(A: IndicatorField, seq: MoveSequence) -> IndicatorField:
    _check_grid(A, seq.N)
    cells = np.array(A.cells)
    for move in seq.moves:
        _rotate_in_place(cells, move)
    return IndicatorField(spec=A.spec, cells=cells)


def quadrisection_moves(N: int, square_origin: Tuple[int, int], side_cells: int) -> MoveSequence:
    """Three rotations splitting the S x S square at the origin into four sub-squares.

    The square's cells [oi, oi+S) x [oj, oj+S) end up as four S/2 squares at
    offsets 0 and S in each direction. Total cost 6 (S/(2N))^2.
    """
    if side_cells < 2 or side_cells % 2:
        raise ValueError(f"Invalid square side S={side_cells}: must be even and at least 2")
    oi, oj = square_origin
    half = side_cells // 2
    moves = (
        make_move(N, oi + side_cells, oj + side_cells, half, 2),
        make_move(N, oi + side_cells, oj + half, half, 1),
        make_move(N, oi + half, oj + side_cells, half, 3),
    )
    return MoveSequence(N=N, moves=moves)


class SchemeLevel(BaseModel):
    """One row of the recursive scheme ledger."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    level: int = Field(ge=1)
    moves: int = Field(ge=1)
    cost: Fraction
    mixing_scale: Optional[float] = None
    seminorm: Optional[float] = None


class SchemeLedger(BaseModel):
    model_config = ConfigDict(frozen=True)

    rows: List[SchemeLevel]
    initial_seminorm: Optional[float] = None

    @property
    def total_cost(self) -> Fraction:
        return sum((row.cost for row in self.rows), Fraction(0))


def scheme_start(spec: GridSpec) -> IndicatorField:
    """The square (0, 1/2)^2."""
    cells = np.zeros((spec.N, spec.N), dtype=bool)
    cells[: spec.N // 2, : spec.N // 2] = True
    return IndicatorField(spec=spec, cells=cells)


def recursive_scheme(n: int, spec: GridSpec,
                     params: Optional[SemiNormParams] = None) -> Tuple[MoveSequence, SchemeLedger]:
    """Quadrisect every full dyadic square, level by level, starting from (0, 1/2)^2."""
    if n < 1:
        raise ValueError(f"Invalid number of levels n={n}: must be >= 1")
    N = spec.N
    if N < 2 ** (n + 1):
        raise ResolutionError(f"{n} levels need N >= {2 ** (n + 1)}, got N={N}")
    if params is not None:
        require_resolved(spec, params.radii[0], "eps")

    cells = np.array(scheme_start(spec).cells)
    initial = bianchini_seminorm(scheme_start(spec), params) if params is not None else None
    all_moves: List[RotationMove] = []
    rows: List[SchemeLevel] = []

    for level in range(1, n + 1):
        side = N >> level
        level_moves: List[RotationMove] = []
        for bj in range(0, N, side):
            for bi in range(0, N, side):
                if cells[bi:bi + side, bj:bj + side].all():
                    level_moves.extend(quadrisection_moves(N, (bi, bj), side).moves)
        for move in level_moves:
            _rotate_in_place(cells, move)
        all_moves.extend(level_moves)

        scale = seminorm = None
        if params is not None:
            current = IndicatorField(spec=spec, cells=cells)
            scale = mixing_scale(current, params).scale
            seminorm = bianchini_seminorm(current, params)
        level_cost = sum((m.cost for m in level_moves), Fraction(0))
        rows.append(SchemeLevel(level=level, moves=len(level_moves), cost=level_cost,
                                mixing_scale=scale, seminorm=seminorm))
        logger.info(f"Scheme level {level}: {len(level_moves)} moves, cost {float(level_cost):.6g}")

    return MoveSequence(N=N, moves=tuple(all_moves)), SchemeLedger(rows=rows, initial_seminorm=initial)


def _symmetric_excess(move: RotationMove, r: float) -> Tuple[int, int]:
    """X = #{(y in Q, z not in Q): |z - y| <= r, |z - u(y)| > r} and the stencil count."""
    N = move.N
    stencil = disk_stencil(GridSpec(N=N), r)
    rows, cols = move.square_indices()
    s = move.halfwidth_cells
    local_i, local_j = np.meshgrid(np.arange(2 * s), np.arange(2 * s), indexing='ij')
    y_i = rows[local_i].ravel()
    y_j = cols[local_j].ravel()

    # u(y) for y in Q: local rotation of the block
    image = np.zeros((2 * s, 2 * s, 2), dtype=np.int64)
    image[..., 0] = local_i
    image[..., 1] = local_j
    # cell at local position p moves to the position rot90 sends it to
    target = np.rot90(image, move.quarter_turns)
    u_i = np.empty((2 * s, 2 * s), dtype=np.int64)
    u_j = np.empty((2 * s, 2 * s), dtype=np.int64)
    u_i[target[..., 0], target[..., 1]] = rows[local_i]
    u_j[target[..., 0], target[..., 1]] = cols[local_j]
    u_i = u_i.ravel()
    u_j = u_j.ravel()

    row_in = np.zeros(N, dtype=bool)
    col_in = np.zeros(N, dtype=bool)
    row_in[rows] = True
    col_in[cols] = True

    excess = 0
    offsets = stencil.offsets
    for start in range(0, offsets.shape[0], _OFFSET_CHUNK):
        chunk = offsets[start:start + _OFFSET_CHUNK]
        z_i = (y_i[None, :] + chunk[:, 0:1]) % N
        z_j = (y_j[None, :] + chunk[:, 1:2]) % N
        outside = ~(row_in[z_i] & col_in[z_j])
        far = ~stencil.contains(geodesic_offset(z_i - u_i[None, :], N), geodesic_offset(z_j - u_j[None, :], N))
        excess += int(np.count_nonzero(outside & far))
    return excess, stencil.count


def lemma72_rhs(spec: GridSpec, move: RotationMove, params: SemiNormParams) -> float:
    """sum_j w_j h^2 sum_x #(u(B(x)) sym-diff B(u(x))) / count for the move's permutation u.

    Only pairs straddling the square's boundary contribute, and each such
    pair is counted four times in the symmetric differences.
    """
    require_resolved(spec, params.radii[0], "eps")
    cells = spec.N * spec.N

    def per_radius(r: float) -> float:
        excess, count = _symmetric_excess(move, r)
        return 4.0 * excess / (count * cells)

    with WorkerPool() as pool:
        values = pool.map_ordered(per_radius, params.radii)
    return ordered_sum(w * v for w, v in zip(params.weights, values))


class LedgerRow(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    index: int
    seminorm: float
    delta: float
    cost: Fraction
    ratio: float
    rhs: Optional[float] = None


class LedgerSummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    initial_seminorm: float
    rows: List[LedgerRow]

    @property
    def max_ratio(self) -> float:
        """Largest seminorm increase per unit cost over the moves."""
        return max((row.ratio for row in self.rows), default=0.0)

    @property
    def net_delta(self) -> float:
        if not self.rows:
            return 0.0
        return self.rows[-1].seminorm - self.initial_seminorm


def seminorm_ledger(A0: IndicatorField, seq: MoveSequence, params: SemiNormParams,
                    with_rhs: bool = True) -> LedgerSummary:
    """Seminorm after every move, its increment, and increment per unit cost."""
    _check_grid(A0, seq.N)
    current = A0
    before = bianchini_seminorm(current, params)
    initial = before
    rows = []
    for index, move in enumerate(seq.moves, start=1):
        current = apply_rotation(current, move)
        after = bianchini_seminorm(current, params)
        delta = after - before
        rhs = lemma72_rhs(A0.spec, move, params) if with_rhs else None
        rows.append(LedgerRow(index=index, seminorm=after, delta=delta, cost=move.cost,
                              ratio=delta / float(move.cost), rhs=rhs))
        before = after
    logger.debug(f"Ledger over {len(rows)} moves")
    return LedgerSummary(initial_seminorm=initial, rows=rows)


def _lattice_step(spec: GridSpec, units: Optional[int]) -> int:
    """Cells per torus unit; 1 when the corpus is drawn cell by cell."""
    if units is None:
        return 1
    if units < 1 or units > spec.N or spec.N % units:
        raise ValueError(f"Invalid units={units}: must divide N={spec.N}")
    return spec.N // units


def random_moves(spec: GridSpec, count: int, seed: int, max_halfwidth: int,
                 units: Optional[int] = None) -> MoveSequence:
    """Reproducible corpus of random rotations.

    With units=U, centres and half-widths are drawn on a U x U lattice of the
    torus and scaled to cells, so the same seed gives the same moves in torus
    coordinates at every N divisible by U. max_halfwidth is always in cells.
    """
    if max_halfwidth < 1 or max_halfwidth > spec.N // 4:
        raise ValueError(f"Invalid max half-width {max_halfwidth}: must lie in [1, {spec.N // 4}]")
    step = _lattice_step(spec, units)
    widest = max_halfwidth // step
    if widest < 1:
        raise ValueError(f"Invalid max half-width {max_halfwidth}: below one lattice step of {step} cells")
    lattice = spec.N // step
    rng = np.random.default_rng(seed)
    moves = []
    for _ in range(count):
        s = int(rng.integers(1, widest + 1)) * step
        ci, cj = (int(v) * step for v in rng.integers(0, lattice, size=2))
        q = int(rng.integers(1, 4))
        moves.append(make_move(spec.N, ci, cj, s, q))
    return MoveSequence(N=spec.N, moves=tuple(moves))


def random_field(spec: GridSpec, seed: int, density: float = 0.5,
                 coarse: Optional[int] = None) -> IndicatorField:
    """Random set, optionally drawn on a coarse x coarse grid and upsampled to N."""
    rng = np.random.default_rng(seed)
    if coarse is None:
        return IndicatorField(spec=spec, cells=rng.random((spec.N, spec.N)) < density)
    step = _lattice_step(spec, coarse)
    base = rng.random((coarse, coarse)) < density
    return IndicatorField(spec=spec, cells=np.kron(base, np.ones((step, step), dtype=bool)))
