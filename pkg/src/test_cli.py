"""
Tests for the mixlab command line.
"""

import csv
import io

import pytest

from .bianchini import SemiNormParams, bianchini_seminorm
from .cli import default_scheme_eps, dispatch
from .config import DEFAULT_RHO
from .error_handler import error_handler
from .formats import read_moves, read_set, write_moves, write_set
from .rotation_mixer import random_field, random_moves
from .test_rotation_mixer import dyadic_lattice
from .torus_grid import GridSpec, make_half_torus


def csv_rows(text: str):
    """Data rows of a report, without the comment and header lines."""
    lines = text.splitlines()
    assert lines[0].startswith('# mixlab ')
    return list(csv.reader(io.StringIO('\n'.join(lines[1:]))))


@pytest.fixture(autouse=True)
def quiet_logging(monkeypatch):
    monkeypatch.setattr(error_handler, '_configured', True)
    monkeypatch.delenv('MIXLAB_THREADS', raising=False)
    monkeypatch.delenv('MIXLAB_LOG_LEVEL', raising=False)


@pytest.fixture
def half_set(tmp_path):
    path = str(tmp_path / "half.txt")
    write_set(make_half_torus(GridSpec(N=32)), path)
    return path


class TestUsage:
    """Exit code 2 for usage errors."""

    def test_help(self, capsys):
        assert dispatch(['--help']) == 0
        assert 'Examples:' in capsys.readouterr().out

    @pytest.mark.parametrize("argv", [
        [],
        ['frobnicate'],
        ['seminorm', '--set', 'x.txt'],
        ['seminorm', '--set', 'x.txt', '--eps', '0.1', '--bogus'],
        ['run-scheme', '--levels', '0', '--N', '16'],
        ['slider', '--n', '2', '--mode', 'dfs'],
        ['slider', '--n', '4', '--mode', 'greedy', '--strategy', 'baker'],
        ['counterexample', '--M', '11', '--L', '2', '--seed', '-1'],
        ['verify-prop22', '--flow', 'shear', '--T', '0.1', '--eps', '0.0625', '--steps', '2'],
        ['plot', '--kind', 'scheme-cost', '--out', 'x.svg', '--levels', '2'],
        ['plot', '--kind', 'counterexample', '--out', 'x.svg', '--M', '11'],
    ])
    def test_usage_errors(self, argv, capsys):
        assert dispatch(argv) == 2
        assert 'error:' in capsys.readouterr().err

    def test_bad_environment(self, monkeypatch, half_set):
        monkeypatch.setenv('MIXLAB_THREADS', 'zero')
        assert dispatch(['seminorm', '--set', half_set, '--eps', '0.0625']) == 1


class TestSeminormCommands:

    def test_seminorm_prints_one_value(self, half_set, capsys):
        assert dispatch(['seminorm', '--set', half_set, '--eps', '0.0625']) == 0
        out = capsys.readouterr().out.strip()
        expected = bianchini_seminorm(make_half_torus(GridSpec(N=32)), SemiNormParams.build(0.0625, rho=DEFAULT_RHO))
        assert float(out) == expected

    def test_missing_set_file(self, tmp_path, capsys):
        assert dispatch(['seminorm', '--set', str(tmp_path / "none.txt"), '--eps', '0.0625']) == 1
        assert 'File not found' in capsys.readouterr().err

    def test_eps_out_of_range(self, half_set):
        assert dispatch(['seminorm', '--set', half_set, '--eps', '0.2']) == 1

    def test_eps_below_resolution(self, half_set, capsys):
        assert dispatch(['seminorm', '--set', half_set, '--eps', '0.01']) == 1
        assert 'Grid too coarse' in capsys.readouterr().err

    def test_mixscale(self, half_set, tmp_path):
        out = tmp_path / "scale.csv"
        assert dispatch(['mixscale', '--set', half_set, '--kappa', '0.25', '--eps', '0.0625', '--csv', str(out)]) == 0
        rows = csv_rows(out.read_text())
        assert rows[0] == ['r', 'min_avg', 'max_avg']
        assert rows[-1] == ['scale', '']
        assert float(rows[1][0]) == 0.0625


class TestSchemeCommands:

    def test_default_eps(self):
        assert default_scheme_eps(16) == 0.0625
        assert default_scheme_eps(64) == pytest.approx(2.0 / 64)
        assert default_scheme_eps(4) is None

    def test_ledger_to_stdout(self, capsys):
        assert dispatch(['run-scheme', '--levels', '2', '--N', '16']) == 0
        rows = csv_rows(capsys.readouterr().out)
        assert rows[0] == ['level', 'moves', 'cost', 'mixing_scale', 'seminorm']
        assert [row[:3] for row in rows[1:]] == [['1', '3', '0.375'], ['2', '12', '0.375']]
        assert all(row[4] != '' for row in rows[1:])

    def test_outputs_to_files(self, tmp_path, capsys):
        final = str(tmp_path / "final.txt")
        moves = str(tmp_path / "moves.txt")
        assert dispatch(['run-scheme', '--levels', '2', '--N', '32', '--out', final, '--moves', moves]) == 0
        assert capsys.readouterr().out == ''
        assert (read_set(final).cells == dyadic_lattice(32, 2)).all()
        assert len(read_moves(moves)) == 15

    def test_too_many_levels(self):
        assert dispatch(['run-scheme', '--levels', '3', '--N', '8']) == 1

    def test_ledger_command(self, tmp_path):
        spec = GridSpec(N=32)
        set_path = str(tmp_path / "start.txt")
        moves_path = str(tmp_path / "moves.txt")
        write_set(random_field(spec, seed=2), set_path)
        write_moves(random_moves(spec, 4, seed=1, max_halfwidth=4), moves_path)
        out = tmp_path / "ledger.csv"
        assert dispatch(['ledger', '--set', set_path, '--moves', moves_path, '--eps', '0.0625', '--csv', str(out)]) == 0
        rows = csv_rows(out.read_text())
        assert rows[0] == ['index', 'seminorm', 'delta', 'cost', 'ratio', 'rhs']
        assert len(rows) == 1 + 4 + 3
        assert [row[0] for row in rows[-3:]] == ['initial_seminorm', 'max_ratio', 'net_delta']
        for row in rows[1:5]:
            assert float(row[2]) <= float(row[5]) + 1e-12

    def test_ledger_grid_mismatch(self, tmp_path, half_set):
        moves_path = str(tmp_path / "moves.txt")
        write_moves(random_moves(GridSpec(N=16), 2, seed=1, max_halfwidth=2), moves_path)
        assert dispatch(['ledger', '--set', half_set, '--moves', moves_path, '--eps', '0.0625']) == 1


class TestSliderCommand:

    def test_bfs_smallest_torus(self, capsys):
        assert dispatch(['slider', '--n', '1', '--mode', 'bfs']) == 0
        rows = csv_rows(capsys.readouterr().out)
        assert rows[0] == ['direction', 'distance', 'moves']
        assert [row[:2] for row in rows[1:]] == [['A0->A1', '1'], ['A1->A0', '1']]

    def test_bfs_too_large(self):
        assert dispatch(['slider', '--n', '3', '--mode', 'bfs']) == 1

    def test_greedy(self, tmp_path):
        out = tmp_path / "greedy.csv"
        state = tmp_path / "state.txt"
        assert dispatch(['slider', '--n', '4', '--mode', 'greedy', '--budget', '88',
                         '--out', str(out), '--state-out', str(state)]) == 0
        rows = csv_rows(out.read_text())
        assert [row[0] for row in rows[1:3]] == ['44', '88']
        assert rows[-1][0] == 'single_cell_moves'
        assert state.read_text().startswith('mixlab-slide v1\nn 4\n')

    def test_greedy_cat_map(self, capsys):
        assert dispatch(['slider', '--n', '8', '--mode', 'greedy', '--budget', '2000', '--strategy', 'cat-map']) == 0
        captured = capsys.readouterr()
        rows = csv_rows(captured.out)
        assert rows[-1] == ['single_cell_moves', '64']
        assert 'cat-map' in captured.err


class TestIdentityCommand:

    def test_translation_has_zero_gap(self, tmp_path):
        out = tmp_path / "prop.csv"
        assert dispatch(['verify-prop22', '--flow', 'translation', '--c1', '1', '--T', '0.0625',
                         '--eps', '0.0625', '--N', '64', '--steps', '2', '--csv', str(out)]) == 0
        rows = csv_rows(out.read_text())
        assert rows[0] == ['t', 'integrand']
        assert [row[0] for row in rows[-3:]] == ['lhs', 'rhs', 'gap']
        assert abs(float(rows[-3][1])) < 1e-10

    def test_set_and_grid_must_agree(self, half_set):
        assert dispatch(['verify-prop22', '--flow', 'shear', '--T', '0.1', '--eps', '0.0625',
                         '--N', '64', '--set', half_set, '--steps', '2']) == 1


class TestCounterexampleCommands:

    def test_two_levels(self, capsys):
        assert dispatch(['counterexample', '--M', '11', '--L', '2']) == 0
        rows = csv_rows(capsys.readouterr().out)
        assert rows[0] == ['L', 'eps', 'E1', 'E2', 'E3', 'I', 'paper_floor', 'E3_abs', 'modes']
        assert len(rows) == 2
        assert float(rows[1][5]) > float(rows[1][6]) > 0.0

    def test_cross_level_part_is_left_empty(self, capsys):
        assert dispatch(['counterexample', '--M', '11', '--L', '3']) == 0
        rows = csv_rows(capsys.readouterr().out)
        assert [row[4] for row in rows[1:]] == ['', '']
        assert float(rows[1][7]) == 0.0
        assert float(rows[2][7]) > 0.0
        assert 'closed-bound' in rows[2][8].split(';')
        assert 'exact' in rows[1][8].split(';')

    def test_probe_footer(self, capsys):
        assert dispatch(['counterexample', '--M', '11', '--L', '2', '--probe-trials', '1', '--seed', '4']) == 0
        rows = csv_rows(capsys.readouterr().out)
        assert [row[0] for row in rows[-2:]] == ['probe_max_ratio', 'probe_bound_ratio']
        assert float(rows[-2][1]) <= float(rows[-1][1])

    def test_small_M_rejected(self, capsys):
        assert dispatch(['counterexample', '--M', '10', '--L', '2']) == 1
        assert 'Validation error' in capsys.readouterr().err

    def test_plot(self, tmp_path):
        out = tmp_path / "cost.svg"
        assert dispatch(['plot', '--kind', 'scheme-cost', '--levels', '2', '--N', '16', '--out', str(out)]) == 0
        assert '<svg' in out.read_text()
