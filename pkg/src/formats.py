"""
Text formats for sets, move lists and slider states, and CSV report writing.

All text files use LF line endings and carry a versioned header line.
"""

import csv
import io
import os
import sys
from fractions import Fraction
from typing import Any, Iterable, List, Optional, Sequence, TextIO

import numpy as np

from .config import RunConfig, ensure_parent_exists
from .error_handler import FormatError
from .rotation_mixer import MoveSequence, RotationMove
from .slide_torus import SlideState
from .torus_grid import GridSpec, IndicatorField, from_cells

SET_HEADER = "mixlab-set v1"
MOVES_HEADER = "mixlab-moves v1"
SLIDE_HEADER = "mixlab-slide v1"


def _read_lines(path: str) -> List[str]:
    if not os.path.exists(path):
        raise FileNotFoundError(f"Input file not found: {path}")
    with open(path, 'r', newline='') as f:
        text = f.read()
    if '\r' in text:
        raise FormatError(f"{path}: CR characters found, files must use LF line endings")
    lines = text.split('\n')
    if lines and lines[-1] == '':
        lines.pop()
    return lines


def _expect_header(path: str, lines: List[str], header: str, size_key: str) -> int:
    if len(lines) < 2:
        raise FormatError(f"{path}: expected '{header}' and '{size_key} <int>' header lines")
    if lines[0] != header:
        raise FormatError(f"{path}: line 1 must be '{header}', got {lines[0]!r}")
    parts = lines[1].split(' ')
    if len(parts) != 2 or parts[0] != size_key or not parts[1].isdigit():
        raise FormatError(f"{path}: line 2 must be '{size_key} <int>', got {lines[1]!r}")
    return int(parts[1])


def _parse_grid(path: str, rows: List[str], side: int, first_line: int) -> np.ndarray:
    if len(rows) != side:
        raise FormatError(f"{path}: expected {side} grid rows, found {len(rows)}")
    cells = np.zeros((side, side), dtype=bool)
    for offset, row in enumerate(rows):
        line_no = first_line + offset
        if len(row) != side or set(row) - {'0', '1'}:
            raise FormatError(f"{path}: line {line_no} must be {side} characters from {{0,1}}")
        cells[:, offset] = np.frombuffer(row.encode('ascii'), dtype=np.uint8) == ord('1')
    return cells


def _grid_rows(cells: np.ndarray) -> List[str]:
    """Row j lists cells (0, j) .. (side-1, j)."""
    return [''.join('1' if v else '0' for v in cells[:, j]) for j in range(cells.shape[1])]


def read_set(path: str) -> IndicatorField:
    lines = _read_lines(path)
    N = _expect_header(path, lines, SET_HEADER, 'N')
    try:
        spec = GridSpec(N=N)
    except ValueError as e:
        raise FormatError(f"{path}: {e}")
    return from_cells(spec, _parse_grid(path, lines[2:], N, 3))


def format_set(field: IndicatorField) -> str:
    lines = [SET_HEADER, f"N {field.spec.N}"] + _grid_rows(field.cells)
    return '\n'.join(lines) + '\n'


def write_set(field: IndicatorField, path: str):
    ensure_parent_exists(path)
    with open(path, 'w', newline='\n') as f:
        f.write(format_set(field))


def read_moves(path: str) -> MoveSequence:
    lines = _read_lines(path)
    N = _expect_header(path, lines, MOVES_HEADER, 'N')
    moves = []
    for line_no, line in enumerate(lines[2:], start=3):
        parts = line.split(' ')
        if len(parts) != 5 or parts[0] != 'R':
            raise FormatError(f"{path}: line {line_no} must read 'R <ci> <cj> <s> <q>', got {line!r}")
        try:
            ci, cj, s, q = (int(v) for v in parts[1:])
            moves.append(RotationMove(N=N, center=(ci, cj), halfwidth_cells=s, quarter_turns=q))
        except ValueError as e:
            raise FormatError(f"{path}: line {line_no}: {e}")
    return MoveSequence(N=N, moves=tuple(moves))


def format_moves(seq: MoveSequence) -> str:
    lines = [MOVES_HEADER, f"N {seq.N}"]
    lines.extend(f"R {m.center[0]} {m.center[1]} {m.halfwidth_cells} {m.quarter_turns}" for m in seq.moves)
    return '\n'.join(lines) + '\n'


def write_moves(seq: MoveSequence, path: str):
    ensure_parent_exists(path)
    with open(path, 'w', newline='\n') as f:
        f.write(format_moves(seq))


def read_slide_state(path: str) -> SlideState:
    lines = _read_lines(path)
    n = _expect_header(path, lines, SLIDE_HEADER, 'n')
    if n < 1:
        raise FormatError(f"{path}: n must be at least 1")
    cells = _parse_grid(path, lines[2:], 2 * n, 3)
    try:
        return SlideState(n=n, cells=cells)
    except ValueError as e:
        raise FormatError(f"{path}: {e}")


def format_slide_state(state: SlideState) -> str:
    lines = [SLIDE_HEADER, f"n {state.n}"] + _grid_rows(state.cells)
    return '\n'.join(lines) + '\n'


def write_slide_state(state: SlideState, path: str):
    ensure_parent_exists(path)
    with open(path, 'w', newline='\n') as f:
        f.write(format_slide_state(state))


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def format_value(value: Any) -> str:
    """Numbers at full double precision; None as an empty field."""
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating, Fraction)):
        return format(float(value), '.17g')
    return str(value)


def write_csv_stream(stream: TextIO, config: RunConfig, header: Sequence[str], rows: Iterable[Sequence[Any]]):
    stream.write(config.comment_line() + '\n')
    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])


def write_csv(path: Optional[str], config: RunConfig, header: Sequence[str], rows: Iterable[Sequence[Any]]):
    """Write to path, or to standard output when path is None or '-'."""
    if path in (None, '-'):
        write_csv_stream(sys.stdout, config, header, rows)
        return
    ensure_parent_exists(path)
    with open(path, 'w', newline='') as f:
        write_csv_stream(f, config, header, rows)


def csv_text(config: RunConfig, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    write_csv_stream(buffer, config, header, rows)
    return buffer.getvalue()
