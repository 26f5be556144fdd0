import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from branchpoints.errors import ConfigError
from branchpoints.family import (
    CouplingSpec,
    FamilySpec,
    LevelSpec,
    build_matrix,
    dump_family,
    four_level_family,
    parse_family,
    two_level_family,
    unperturbed_crossings,
    with_coupling,
)

TWO_LEVEL = """\
n: 2
levels:
  - {e0: 1.0, e_slope: -0.5, c0: 0.0, c_slope: 0.0}
  - {e0: 0.0, e_slope: 1.0, c0: 0.0, c_slope: 0.0}
coupling: {mode: uniform, v: 0.05}
"""

FOUR_LEVEL = """\
n: 4
levels:
  - {e0: 1, e_slope: -0.3333333333333333}
  - {e0: 1, e_slope: -0.4166666666666667}
  - {e0: 1, e_slope: -0.5}
  - {e0: 0, e_slope: 1}
coupling: {mode: uniform, v: 0.005}
"""


def test_parse_two_level():
    spec = parse_family(TWO_LEVEL)
    assert spec == two_level_family(0.05)
    assert spec.n == 2
    assert spec.levels[0].e_slope == -0.5


def test_parse_four_level_matches_builtin():
    spec = parse_family(FOUR_LEVEL)
    ref = four_level_family(0.005)
    assert spec.n == 4
    np.testing.assert_allclose(spec.eps_slopes, ref.eps_slopes, rtol=1e-15)
    np.testing.assert_array_equal(spec.eps_offsets, [1, 1, 1, 0])


def test_parse_full_matrix_and_complex_entries():
    text = """\
n: 3
levels:
  - {e0: 0, e_slope: 1}
  - {e0: 1, e_slope: 0, c0: 0.2}
  - {e0: 2, e_slope: -1}
coupling:
  mode: full
  matrix:
    - [0, 0.1, [0.0, 0.02]]
    - [0.1, 0, 0.3]
    - [[0.0, 0.02], 0.3, 0]
"""
    spec = parse_family(text)
    V = spec.coupling_matrix()
    assert V[0, 2] == 0.02j
    assert np.array_equal(V, V.T)
    assert not spec.is_real()


@pytest.mark.parametrize(
    "text, field, line",
    [
        (TWO_LEVEL.replace("coupling", "  - {e0: 0, e_slope: 2}\ncoupling"), "levels", 2),
        (TWO_LEVEL.replace("e_slope: 1.0", "e_slpoe: 1.0"), "levels[1].e_slpoe", 4),
        (TWO_LEVEL.replace("n: 2", "n: 1"), "n", 1),
        (TWO_LEVEL.replace("c0: 0.0, c_slope: 0.0}\n  - {e0: 0.0", "c0: -1, c_slope: 0.0}\n  - {e0: 0.0"),
         "levels[0].c0", 3),
        (TWO_LEVEL + "extra: 1\n", "extra", 6),
    ],
)
def test_semantic_errors_carry_field_and_line(text, field, line):
    with pytest.raises(ConfigError) as info:
        parse_family(text)
    assert info.value.field == field
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_asymmetric_full_matrix_rejected():
    text = """\
n: 2
levels:
  - {e0: 1, e_slope: -0.5}
  - {e0: 0, e_slope: 1}
coupling:
  mode: full
  matrix: [[0, 0.1], [0.2, 0]]
"""
    with pytest.raises(ConfigError, match="not symmetric"):
        parse_family(text)


def test_syntax_error_reports_line():
    with pytest.raises(ConfigError, match="syntax") as info:
        parse_family("n: 2\nlevels: [\n")
    assert info.value.line is not None


def test_build_matrix_at_crossing():
    M = build_matrix(two_level_family(0.05), 2 / 3)
    np.testing.assert_allclose(M, [[2 / 3, 0.05], [0.05, 2 / 3]], rtol=0, atol=1e-15)


def test_width_enters_diagonal():
    spec = FamilySpec(2, (LevelSpec(1.0, -0.5, 0.2, 0.0), LevelSpec(0.0, 1.0)), CouplingSpec("uniform", 0.05))
    assert build_matrix(spec, 0.0)[0, 0] == 1.0 - 0.1j


def test_decoupled_real_matrix_is_diagonal():
    M = build_matrix(four_level_family(0.0), 0.37)
    assert not np.any(M.imag)
    assert np.count_nonzero(M - np.diag(np.diag(M))) == 0


def test_round_trip_through_dump():
    for spec in (two_level_family(0.5), four_level_family(0.03), with_coupling(two_level_family(), 0.05 + 0.01j)):
        assert parse_family(dump_family(spec)) == spec


def test_crossings_two_level():
    cr = unperturbed_crossings(two_level_family())
    assert len(cr) == 1
    assert (cr[0].i, cr[0].j) == (0, 1)
    assert cr[0].a_cr == pytest.approx(2 / 3, abs=1e-15)


def test_crossings_four_level():
    cr = unperturbed_crossings(four_level_family())
    with_4 = sorted(c.a_cr.real for c in cr if c.j == 3)
    np.testing.assert_allclose(with_4, [2 / 3, 12 / 17, 3 / 4], atol=1e-15)
    triple = [(c.i, c.j) for c in cr if abs(c.a_cr) < 1e-15]
    assert triple == [(0, 1), (0, 2), (1, 2)]
    reals = [c.a_cr.real for c in cr]
    assert reals == sorted(reals)


def test_identical_and_parallel_pairs():
    spec = FamilySpec(3, (LevelSpec(1, 1), LevelSpec(1, 1), LevelSpec(2, 1)), CouplingSpec("uniform", 0.1))
    assert unperturbed_crossings(spec) == []
    kinds = {(c.i, c.j): c.kind for c in unperturbed_crossings(spec, include_degenerate=True)}
    assert kinds[(0, 1)] == "identical"
    assert kinds[(0, 2)] == "parallel"


def test_crossings_agree_with_brute_force_scan():
    spec = four_level_family(0.0)
    grid = np.linspace(0.55, 0.85, 30001)
    step = grid[1] - grid[0]
    eps = np.array([spec.eps(a) for a in grid])
    for c in unperturbed_crossings(spec):
        if not 0.55 < c.a_cr.real < 0.85:
            continue
        k = np.argmin(np.abs(eps[:, c.i] - eps[:, c.j]))
        assert abs(grid[k] - c.a_cr.real) <= step


reals = st.floats(-3, 3, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.tuples(reals, reals, st.floats(0, 1), reals), min_size=2, max_size=5),
    reals, reals, reals, reals,
)
def test_build_matrix_is_linear(levels, v, x1, y1, x2):
    spec = FamilySpec(len(levels), tuple(LevelSpec(*lv) for lv in levels), CouplingSpec("uniform", v))
    a1, a2 = complex(x1, y1), complex(x2, -y1)
    lhs = build_matrix(spec, a1) + build_matrix(spec, a2) - 2 * build_matrix(spec, (a1 + a2) / 2)
    assert np.abs(lhs).max() <= 1e-12 * (1 + np.abs(build_matrix(spec, a1)).max())


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(reals, reals), min_size=2, max_size=5), reals, reals)
def test_hermitian_on_real_axis(levels, v, a):
    spec = FamilySpec(len(levels), tuple(LevelSpec(*lv) for lv in levels), CouplingSpec("uniform", v))
    M = build_matrix(spec, a)
    assert not np.any(M.imag)
    assert np.array_equal(M, M.T)
