import cmath

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from branchpoints.eigen import (
    biorthogonality_metrics,
    closed_form_2x2,
    coalescence_residual,
    eigendecompose,
    fix_phase,
    mixing_coefficients,
)
from branchpoints.errors import EigenSolverError
from branchpoints.family import CouplingSpec, FamilySpec, LevelSpec, build_matrix, two_level_family

V = 0.05
A_BP = 2 / 3 + 4j / 3 * V


def random_symmetric(rng, n, scale=1.0):
    X = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * (X + X.T) / 2


def test_symmetric_2x2_example():
    sys = eigendecompose([[2 / 3, V], [V, 2 / 3]])
    np.testing.assert_allclose(sys.values, [2 / 3 + V, 2 / 3 - V], atol=1e-15)
    s = 1 / np.sqrt(2)
    np.testing.assert_allclose(sys.vectors, [[s, s], [s, -s]], atol=1e-15)
    assert not sys.defective


def test_diagonal_matrix():
    sys = eigendecompose(np.diag([0.3 - 0.1j, 0.7]))
    np.testing.assert_array_equal(sys.values, [0.7, 0.3 - 0.1j])
    np.testing.assert_array_equal(np.abs(sys.vectors), [[0, 1], [1, 0]])


def test_defective_at_branch_point():
    sys = eigendecompose(build_matrix(two_level_family(V), A_BP))
    assert sys.defective
    assert abs(sys.values[0] - sys.values[1]) < 1e-6
    np.testing.assert_allclose(sys.values, 2 / 3 + 1j * V / 3, atol=1e-6)


def test_ordering_ties_by_imaginary_part():
    sys = eigendecompose(np.diag([1.0 - 0.2j, 1.0 + 0.1j, 2.0]))
    np.testing.assert_array_equal(sys.values, [2.0, 1.0 + 0.1j, 1.0 - 0.2j])


def test_validation():
    with pytest.raises(ValueError):
        eigendecompose([[1.0, 0.1], [0.2, 1.0]])
    with pytest.raises(ValueError):
        eigendecompose([[1.0]])
    with pytest.raises(ValueError):
        eigendecompose(np.zeros((2, 3)))
    with pytest.raises(EigenSolverError) as info:
        eigendecompose([[np.nan, 0], [0, 1]])
    assert info.value.matrix.shape == (2, 2)


def test_fix_phase():
    np.testing.assert_array_equal(fix_phase(np.array([0.1, -0.9])), [-0.1, 0.9])
    np.testing.assert_array_equal(fix_phase(np.array([-0.5, 0.5])), [0.5, -0.5])
    np.testing.assert_array_equal(fix_phase(np.array([0.2, -0.9j])), [-0.2, 0.9j])


# -- closed form --------------------------------------------------------------


def test_closed_form_examples():
    hi, lo = closed_form_2x2(2 / 3, 2 / 3, V)
    assert hi == pytest.approx(2 / 3 + V, abs=1e-16)
    assert lo == pytest.approx(2 / 3 - V, abs=1e-16)
    assert set(closed_form_2x2(0.3, 0.9 - 0.1j, 0)) == {0.3, 0.9 - 0.1j}
    e1, e2 = 0.4, 0.4 - 2j * V
    hi, lo = closed_form_2x2(e1, e2, V)
    assert hi == lo == (e1 + e2) / 2


def test_closed_form_branch_cut():
    # argument of the root lies in (-pi/2, pi/2]
    hi, lo = closed_form_2x2(0, 0, 1j)
    root = hi - lo
    assert -np.pi / 2 < cmath.phase(root) <= np.pi / 2


@settings(max_examples=300, deadline=None)
@given(arrays(np.float64, 6, elements=st.floats(-5, 5)))
def test_closed_form_matches_general_solver(x):
    e1, e2, v = complex(x[0], x[1]), complex(x[2], x[3]), complex(x[4], x[5])
    M = np.array([[e1, v], [v, e2]])
    ref = np.linalg.eigvals(M)
    got = np.array(closed_form_2x2(e1, e2, v))
    # close to a defect the spectrum is only sqrt(eps)-conditioned
    disc = abs((e1 - e2) ** 2 + 4 * v * v)
    tol = 1e-10 * (1 + np.abs(M).max()) + (1e-7 if disc < 1e-6 else 0)
    err = min(np.abs(ref - got).max(), np.abs(ref[::-1] - got).max())
    assert err <= tol


# -- randomized invariants ----------------------------------------------------


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**32 - 1))
def test_random_invariants(n, seed):
    rng = np.random.default_rng(seed)
    M = random_symmetric(rng, n)
    sys = eigendecompose(M)
    tr = np.trace(M)
    assert abs(sys.values.sum() - tr) <= 1e-10 * (1 + abs(tr))
    norm = np.abs(M).sum(axis=1).max()
    for lam in sys.values:
        assert abs(np.linalg.det(M - lam * np.eye(n))) <= 1e-8 * (1 + norm**n)
    if not sys.defective:
        B = sys.vectors
        assert np.abs(B @ B.T - np.eye(n)).max() <= 1e-8
        assert np.all(biorthogonality_metrics(sys).norms >= 1 - 1e-10)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**32 - 1))
def test_hermitian_regime(n, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, n))
    sys = eigendecompose(X + X.T)
    assert not np.any(sys.values.imag)
    m = biorthogonality_metrics(sys)
    np.testing.assert_allclose(m.norms, 1, atol=1e-12)
    mix = mixing_coefficients(sys)
    assert not np.any(mix.b.imag)
    np.testing.assert_allclose(mix.row_sums(), 1, atol=1e-8)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_offdiagonal_overlap_imaginary_for_2x2(seed):
    sys = eigendecompose(random_symmetric(np.random.default_rng(seed), 2))
    if sys.defective:
        return
    m = biorthogonality_metrics(sys)
    assert m.offdiag_real_max <= 1e-8 * m.max_norm


def test_degenerate_cluster_is_c_orthogonalized():
    rng = np.random.default_rng(7)
    Q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
    M = Q @ np.diag([1.0, 1.0, 2.0 - 0.3j, 0.5]) @ Q.T
    sys = eigendecompose((M + M.T) / 2)
    assert np.abs(sys.vectors @ sys.vectors.T - np.eye(4)).max() < 1e-8


# -- bi-orthogonality and coalescence ----------------------------------------


def test_hermitian_norms_are_one():
    sys = eigendecompose(build_matrix(two_level_family(V), 0.4))
    m = biorthogonality_metrics(sys)
    np.testing.assert_allclose(m.norms, 1, atol=1e-14)
    assert abs(m.overlaps[0, 1]) < 1e-14


def test_norm_grows_toward_branch_point():
    spec = two_level_family(V)
    norms = []
    for t in (0.9, 0.99, 0.999):
        sys = eigendecompose(build_matrix(spec, 2 / 3 + 1j * t * 4 / 3 * V))
        norms.append(biorthogonality_metrics(sys).max_norm)
    assert norms == sorted(norms)
    assert norms[-1] > 10


def test_open_level_overlap_is_imaginary():
    spec = FamilySpec(2, (LevelSpec(1.0, -0.5, 0.2, 0.0), LevelSpec(0.0, 1.0)), CouplingSpec("uniform", V))
    # eps1 - eps2 = -0.1i = -2iv at a = 2/3: that point is itself a branch point
    assert eigendecompose(build_matrix(spec, 2 / 3)).defective
    for a in (0.5, 0.6, 0.7, 1.0):
        m = biorthogonality_metrics(eigendecompose(build_matrix(spec, a)))
        assert abs(m.overlaps[0, 1].real) < 1e-8
        assert abs(m.overlaps[0, 1].imag) > 1e-3


def test_defective_metrics_are_flagged():
    m = biorthogonality_metrics(eigendecompose(build_matrix(two_level_family(V), A_BP)))
    assert np.isinf(m.max_norm)


def test_coalescence_residual_limits():
    u = np.array([0.6, 0.8j])
    assert coalescence_residual(u, -1j * u) == pytest.approx(0, abs=1e-15)
    assert coalescence_residual(np.array([1.0, 0]), np.array([0, 1.0])) == pytest.approx(np.sqrt(2))
    with pytest.raises(ValueError):
        coalescence_residual(np.zeros(2), u)


def test_coalescence_residual_closed_form():
    # along the approach ray the residual is exactly sqrt(2 (1 - t))
    spec = two_level_family(V)
    for t in (0.9, 0.99, 0.999, 0.9999):
        sys = eigendecompose(build_matrix(spec, 2 / 3 + 1j * t * 4 / 3 * V))
        r = coalescence_residual(*sys.pairs)
        assert r == pytest.approx(np.sqrt(2 * (1 - t)), rel=1e-6)


# -- mixing -------------------------------------------------------------------


def test_maximal_mixing_at_crossing():
    mix = mixing_coefficients(eigendecompose(build_matrix(two_level_family(V), 2 / 3)))
    np.testing.assert_allclose(mix.b_sq, 0.5, atol=1e-15)


def test_mixing_decoupled_is_identity():
    mix = mixing_coefficients(eigendecompose(build_matrix(two_level_family(0.0), 0.3)))
    np.testing.assert_array_equal(mix.b_sq, [[1, 0], [0, 1]])


def test_mixing_far_from_crossing():
    mix = mixing_coefficients(eigendecompose(build_matrix(two_level_family(V), 0.0)))
    # 2x2 oracle: b11^2 = (1 + d / sqrt(d^2 + 4 v^2)) / 2 with d = e1 - e2 = 1
    oracle = 0.5 * (1 + 1 / np.sqrt(1 + 4 * V**2))
    assert mix.b_sq[0, 0] == pytest.approx(oracle, rel=1e-14)
    assert mix.b_sq[0, 0] > 0.99


def test_mixing_rotated_basis_and_validation():
    sys = eigendecompose(build_matrix(two_level_family(V), 0.5))
    c, s = np.cos(0.3), np.sin(0.3)
    mix = mixing_coefficients(sys, np.array([[c, -s], [s, c]]))
    np.testing.assert_allclose(mix.row_sums(), 1, atol=1e-12)
    with pytest.raises(ValueError):
        mixing_coefficients(sys, np.array([[1.0, 0.1], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        mixing_coefficients(sys, np.eye(3))
