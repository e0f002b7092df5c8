"""
Strip-shift puzzle on the discrete torus Z^2 / 2nZ^2.

Cells are indexed [x, y]. A strip move shifts every row y in [a, b] (mod 2n)
by +1 in x; a rotation move turns the whole torus by q quarter turns,
(x, y) -> (-y, x). Every generator application costs one move.

Exhaustive search works on classes of states modulo torus translations.
P_S composed with P_{S^c} is the unit translation, so modulo translations the
inverse of a strip move is the complementary strip move and the search graph
is undirected.
"""

import logging
from collections import deque
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .bianchini import mixed_counts
from .config import DEFAULT_KAPPA, SLIDE_BFS_MAX_N, GreedyStrategy, MoveKind
from .error_handler import SearchLimitError
from .torus_grid import lattice_counts, lattice_stencil

logger = logging.getLogger(__name__)


class SlideState(BaseModel):
    """Membership array of the evolving set on the 2n x 2n torus."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    n: int = Field(ge=1)
    cells: np.ndarray

    @field_validator('cells', mode='before')
    @classmethod
    def _as_bool(cls, value) -> np.ndarray:
        array = np.array(value, dtype=bool, copy=True)
        array.setflags(write=False)
        return array

    @model_validator(mode='after')
    def _check_state(self):
        side = 2 * self.n
        if self.cells.shape != (side, side):
            raise ValueError(f"Invalid slide state shape {self.cells.shape}, expected {(side, side)}")
        if int(np.count_nonzero(self.cells)) != 2 * self.n * self.n:
            raise ValueError(f"Invalid slide state: must hold exactly 2n^2 = {2 * self.n * self.n} cells")
        return self

    def __eq__(self, other) -> bool:
        if not isinstance(other, SlideState):
            return NotImplemented
        return self.n == other.n and bool(np.array_equal(self.cells, other.cells))

    __hash__ = None

    @property
    def side(self) -> int:
        return 2 * self.n


class SlideMove(BaseModel):
    """One generator: a +1 strip shift of rows a..b, or a global rotation."""
    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=1)
    kind: MoveKind
    a: int = 0
    b: int = 0
    quarter_turns: int = 0

    @model_validator(mode='after')
    def _check_move(self):
        side = 2 * self.n
        if self.kind == MoveKind.STRIP:
            if not 0 <= self.a < side or not 0 <= self.b - self.a <= side - 2:
                raise ValueError(
                    f"Invalid strip [{self.a}, {self.b}] for n={self.n}: need 0 <= a < {side} "
                    f"and strip height between 1 and {side - 1}"
                )
        elif self.quarter_turns not in (1, 2, 3):
            raise ValueError(f"Invalid rotation: quarter_turns must be 1, 2 or 3, got {self.quarter_turns}")
        return self

    @property
    def height(self) -> int:
        return self.b - self.a + 1

    def rows(self) -> np.ndarray:
        return np.arange(self.a, self.b + 1) % (2 * self.n)

    def label(self) -> str:
        if self.kind == MoveKind.STRIP:
            return f"S {self.a} {self.b}"
        return f"R {self.quarter_turns}"


def strip_move(n: int, a: int, b: int) -> SlideMove:
    return SlideMove(n=n, kind=MoveKind.STRIP, a=a, b=b)


def rotation_move(n: int, q: int) -> SlideMove:
    return SlideMove(n=n, kind=MoveKind.ROTATE, quarter_turns=q)


def _check_move_size(state: SlideState, move: SlideMove):
    if state.n != move.n:
        raise ValueError(f"Invalid move for this state: built for n={move.n}, state has n={state.n}")


def _apply_cells(cells: np.ndarray, move: SlideMove) -> np.ndarray:
    side = cells.shape[0]
    if move.kind == MoveKind.STRIP:
        out = np.array(cells)
        rows = move.rows()
        out[:, rows] = np.roll(cells[:, rows], 1, axis=0)
        return out
    out = cells
    back = (-np.arange(side)) % side
    for _ in range(move.quarter_turns):
        # new[x', y'] = old[y', -x']
        out = out.T[back, :]
    return out


def apply_slide(state: SlideState, move: SlideMove) -> SlideState:
    _check_move_size(state, move)
    return SlideState(n=state.n, cells=_apply_cells(state.cells, move))


def apply_slides(state: SlideState, moves: List[SlideMove]) -> SlideState:
    cells = state.cells
    for move in moves:
        _check_move_size(state, move)
        cells = _apply_cells(cells, move)
    return SlideState(n=state.n, cells=cells)


def inverse_move(move: SlideMove) -> List[SlideMove]:
    """Generator word undoing the move: 2n-1 repeats of a strip, or the opposite turn."""
    if move.kind == MoveKind.STRIP:
        return [move] * (2 * move.n - 1)
    return [rotation_move(move.n, 4 - move.quarter_turns)]


def all_moves(n: int) -> List[SlideMove]:
    """Every generator in a fixed order: strips by (a, height), then turns 1..3."""
    side = 2 * n
    moves = [strip_move(n, a, a + height - 1) for a in range(side) for height in range(1, side)]
    moves.extend(rotation_move(n, q) for q in (1, 2, 3))
    return moves


def start_state(n: int) -> SlideState:
    """A0 = [1, n] x [1, 2n]."""
    side = 2 * n
    cells = np.zeros((side, side), dtype=bool)
    cells[np.arange(1, n + 1) % side, :] = True
    return SlideState(n=n, cells=cells)


def goal_state(n: int) -> SlideState:
    """A1 = {(x, y) : x + y even}."""
    index = np.arange(2 * n)
    return SlideState(n=n, cells=(index[:, None] + index[None, :]) % 2 == 0)


# ---------------------------------------------------------------------------
# Exhaustive search on translation classes
# ---------------------------------------------------------------------------

def _source_index(n: int, move: SlideMove) -> np.ndarray:
    """src with new_flat = old_flat[src] for the move, positions p = x * 2n + y."""
    side = 2 * n
    labels = np.arange(side * side).reshape(side, side)
    return _apply_cells(labels, move).ravel()


def _translation_sources(n: int) -> np.ndarray:
    side = 2 * n
    labels = np.arange(side * side).reshape(side, side)
    return np.array([np.roll(labels, (dx, dy), axis=(0, 1)).ravel()
                     for dx in range(side) for dy in range(side)])


def _canonical_codes(flat: np.ndarray, translations: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Smallest bit code over all translates of each row of flat."""
    codes = np.stack([flat[:, src].astype(np.int64) @ weights for src in translations])
    return codes.min(axis=0)


def canonical_key(state: SlideState) -> int:
    """Class label of the state modulo torus translations."""
    side = state.side
    weights = np.left_shift(np.int64(1), np.arange(side * side, dtype=np.int64))
    flat = state.cells.reshape(1, -1)
    return int(_canonical_codes(flat, _translation_sources(state.n), weights)[0])


def bfs_search(n: int, start: SlideState, goal: SlideState, max_depth: int) -> Optional[List[SlideMove]]:
    """Shortest generator word taking start to a translate of goal, or None within max_depth.

    Replaying the word from start reaches a translate of goal exactly.
    """
    if n > SLIDE_BFS_MAX_N:
        raise SearchLimitError(f"Exhaustive search supports n <= {SLIDE_BFS_MAX_N}, got n={n}")
    if max_depth < 1:
        raise ValueError(f"Invalid max depth {max_depth}: must be >= 1")
    if start.n != n or goal.n != n:
        raise ValueError(f"Invalid states for n={n}: got n={start.n} and n={goal.n}")

    side = 2 * n
    weights = np.left_shift(np.int64(1), np.arange(side * side, dtype=np.int64))
    translations = _translation_sources(n)
    generators = all_moves(n)
    sources = np.array([_source_index(n, move) for move in generators])

    start_flat = start.cells.reshape(1, -1)
    start_code = int(_canonical_codes(start_flat, translations, weights)[0])
    goal_code = int(_canonical_codes(goal.cells.reshape(1, -1), translations, weights)[0])
    if start_code == goal_code:
        return []

    parents: Dict[int, Tuple[int, int]] = {start_code: (-1, -1)}
    frontier = start_flat
    frontier_codes = [start_code]

    for depth in range(1, max_depth + 1):
        # children ordered frontier-major, generator-minor
        children = frontier[:, sources].reshape(-1, side * side)
        codes = _canonical_codes(children, translations, weights)
        keep = []
        next_codes = []
        for index, code in enumerate(codes.tolist()):
            if code in parents:
                continue
            parent_index, generator = divmod(index, len(generators))
            parents[code] = (frontier_codes[parent_index], generator)
            if code == goal_code:
                return _reconstruct(parents, code, generators)
            keep.append(index)
            next_codes.append(code)
        logger.debug(f"BFS depth {depth}: {len(keep)} new classes, {len(parents)} visited")
        if not keep:
            return None
        frontier = children[keep]
        frontier_codes = next_codes
    return None


def _reconstruct(parents: Dict[int, Tuple[int, int]], code: int, generators: List[SlideMove]) -> List[SlideMove]:
    word = []
    while True:
        parent, generator = parents[code]
        if parent < 0:
            break
        word.append(generators[generator])
        code = parent
    return list(reversed(word))


def bfs_min_moves(n: int, start: SlideState, goal: SlideState, max_depth: int) -> Optional[int]:
    """Distance between the translation classes of start and goal, or None beyond max_depth."""
    word = bfs_search(n, start, goal, max_depth)
    return None if word is None else len(word)


# ---------------------------------------------------------------------------
# Greedy shear interleave
# ---------------------------------------------------------------------------

def halving_round(n: int) -> List[SlideMove]:
    """Band shears at heights n, n/2, ..., 1, each followed by a quarter turn.

    At height h the rows [kh, kh + h) form band k (the top band is clipped at
    row 2n - 1). Band 0 stays put and band k slides 3k cells mod 2n.
    """
    side = 2 * n
    moves = []
    h = n
    while True:
        for k in range(1, -(-side // h)):
            top = min(k * h + h - 1, side - 1)
            moves.extend(strip_move(n, k * h, top) for _ in range((3 * k) % side))
        moves.append(rotation_move(n, 1))
        if h == 1:
            return moves
        h //= 2


def cat_map_round(n: int) -> List[SlideMove]:
    """x -> x + y, quarter turn, x -> x - y - 1, quarter turn back."""
    side = 2 * n
    forward = [strip_move(n, k, side - 1) for k in range(1, side)]
    backward = [strip_move(n, 0, k - 1) for k in range(1, side)]
    return forward + [rotation_move(n, 3)] + backward + [rotation_move(n, 1)]


_ROUNDS = {
    GreedyStrategy.HALVING: halving_round,
    GreedyStrategy.CAT_MAP: cat_map_round,
}


def finest_mixed_scale(state: SlideState, kappa: float = DEFAULT_KAPPA) -> Optional[int]:
    """Smallest m (in cells) with the state mixed at every lattice scale m..2n/4."""
    finest = None
    for m in range(state.side // 4, 0, -1):
        stencil = lattice_stencil(state.side, m)
        if not mixed_counts(lattice_counts(state.cells, stencil), stencil.count, kappa):
            break
        finest = m
    return finest


def parity_agreement(state: SlideState) -> float:
    """Best fraction of cells agreeing with a translate of the parity set."""
    parity = goal_state(state.n).cells
    agree = float(np.mean(state.cells == parity))
    return max(agree, 1.0 - agree)


class GreedyStep(BaseModel):
    model_config = ConfigDict(frozen=True)

    moves: int
    finest_scale_cells: Optional[int]
    parity_agreement: float


class GreedyReport(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    state: SlideState
    strategy: GreedyStrategy
    moves_used: int
    finest_scale_cells: Optional[int]
    parity_agreement: float
    single_cell_moves: Optional[int] = None
    history: List[GreedyStep] = Field(default_factory=list)


def greedy_mix(n: int, budget: int, strategy: GreedyStrategy = GreedyStrategy.HALVING) -> GreedyReport:
    """Repeat rounds of the chosen strategy until the budget is spent."""
    if n < 2:
        raise ValueError(f"Invalid size n={n}: greedy mixing needs n >= 2")
    if budget < 0:
        raise ValueError(f"Invalid budget {budget}: must be >= 0")

    state = start_state(n)
    cells = state.cells
    round_moves = _ROUNDS[strategy](n)
    used = 0
    single_cell = None
    history = []

    while used < budget:
        for move in round_moves:
            if used >= budget:
                break
            cells = _apply_cells(cells, move)
            used += 1
        current = SlideState(n=n, cells=cells)
        scale = finest_mixed_scale(current)
        history.append(GreedyStep(moves=used, finest_scale_cells=scale,
                                  parity_agreement=parity_agreement(current)))
        if scale == 1 and single_cell is None:
            single_cell = used
        logger.debug(f"Greedy {strategy.value} round ending at move {used}: finest scale {scale}")

    final = SlideState(n=n, cells=cells)
    return GreedyReport(
        state=final,
        strategy=strategy,
        moves_used=used,
        finest_scale_cells=finest_mixed_scale(final),
        parity_agreement=parity_agreement(final),
        single_cell_moves=single_cell,
        history=history,
    )
