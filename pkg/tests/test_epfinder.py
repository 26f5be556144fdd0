import numpy as np
import pytest

from branchpoints.epfinder import (
    count_zeros,
    discriminant,
    encircle,
    find_branch_point,
    is_transposition,
    list_branch_points,
)
from branchpoints.errors import ConvergenceError, HigherOrderDegeneracyError
from branchpoints.family import (
    CouplingSpec,
    FamilySpec,
    LevelSpec,
    build_matrix,
    four_level_family,
    two_level_family,
)

V = 0.05


def a_bp(v):
    return 2 / 3 + 4j / 3 * v


def terminal_ratios(history):
    """Residual ratios over the last three iterates, stopping at the noise floor."""
    h = [r for _, r in history]
    floor = 1e-12 * h[0]
    end = next((k for k, r in enumerate(h) if r < floor), len(h) - 1)
    h = h[: end + 1]
    return [h[k - 1] / h[k] for k in range(max(1, len(h) - 3), len(h))]


# -- discriminant -------------------------------------------------------------


def test_discriminant_values():
    assert discriminant(two_level_family(V), 2 / 3) == pytest.approx(4 * V * V, abs=1e-17)
    assert abs(discriminant(two_level_family(0.0), 2 / 3)) < 1e-30
    assert abs(discriminant(two_level_family(V), a_bp(V))) < 1e-12


def test_discriminant_matches_eigenvalue_product():
    spec = four_level_family(0.03)
    a = 0.7 + 0.02j
    lam = np.linalg.eigvals(build_matrix(spec, a))
    ref = np.prod([(lam[i] - lam[j]) ** 2 for i in range(4) for j in range(i + 1, 4)])
    assert discriminant(spec, a) == pytest.approx(ref, rel=1e-8)
    # real family: conjugate symmetric
    assert discriminant(spec, a.conjugate()) == pytest.approx(np.conj(discriminant(spec, a)), rel=1e-8)


# -- root finding -------------------------------------------------------------


@pytest.mark.parametrize("v", [0.05, 0.5, 1.0])
def test_two_level_root(v):
    bp = find_branch_point(two_level_family(v), 2 / 3 + 0.1j)
    assert abs(bp.a_bp - a_bp(v)) < 1e-8
    assert abs(bp.value_bp - (0.5 + bp.a_bp / 4)) < 1e-8
    assert bp.pair == (0, 1)
    assert bp.disc_residual <= 1e-10


def test_conjugate_seed_gives_conjugate_root():
    bp = find_branch_point(two_level_family(V), 2 / 3 - 0.1j)
    assert abs(bp.a_bp - np.conj(a_bp(V))) < 1e-8


def test_coalescence_recorded_near_root():
    bp = find_branch_point(two_level_family(V), 2 / 3 + 0.1j)
    assert bp.coalescence < 1e-2
    assert abs(bp.coalescence_at - bp.a_bp) < 1e-2


def test_four_level_root_near_lowest_crossing():
    bp = find_branch_point(four_level_family(0.005), 2 / 3 + 0.01j)
    assert abs(bp.a_bp.real - 2 / 3) < 0.01
    assert bp.a_bp.imag > 0
    assert min(terminal_ratios(bp.history)) >= 10


def test_terminal_convergence_two_level():
    # the 2-level discriminant is quadratic in a, so Muller lands in one step
    bp = find_branch_point(two_level_family(V), 0.6 + 0.02j)
    assert len(bp.history) <= 4
    assert min(terminal_ratios(bp.history)) >= 10


def test_nonconvergence_carries_history():
    with pytest.raises(ConvergenceError) as info:
        find_branch_point(two_level_family(V), 5 + 3j, max_iter=2)
    assert len(info.value.history) >= 2


def test_triple_coalescence_is_reported():
    spec = FamilySpec(3, (LevelSpec(1, 1), LevelSpec(1, -1), LevelSpec(1, 0.5)), CouplingSpec("uniform", 0.0))
    with pytest.raises(HigherOrderDegeneracyError):
        find_branch_point(spec, 0.01 + 0.01j)


# -- monodromy ----------------------------------------------------------------


def test_encircling_branch_point_swaps_states():
    res = encircle(two_level_family(V), 2 / 3 + 0.0667j, 0.02, 256)
    assert res.permutation == (1, 0)
    assert is_transposition(res.permutation)
    assert 0 <= res.max_tracking_gap < 1


def test_empty_loop_is_identity():
    assert encircle(two_level_family(V), 2 / 3 + 0.3j, 0.02, 256).is_identity


def test_decoupled_loop_is_identity():
    assert encircle(two_level_family(0.0), 2 / 3, 0.02, 256).is_identity


def test_monodromy_is_deterministic():
    spec = two_level_family(V)
    runs = {encircle(spec, 2 / 3 + 0.0667j, 0.02, 256) for _ in range(5)}
    assert len(runs) == 1


def test_encircle_validation():
    with pytest.raises(ValueError):
        encircle(two_level_family(V), 2 / 3, 0.02, 32)
    with pytest.raises(ValueError):
        # passes through the branch point
        encircle(two_level_family(V), a_bp(V) - 0.02, 0.02, 256)


def test_is_transposition():
    assert is_transposition((0, 2, 1))
    assert not is_transposition((0, 1, 2))
    assert not is_transposition((1, 2, 0))


# -- listing and counting -----------------------------------------------------


def test_list_two_level_conjugate_pair():
    found = list_branch_points(two_level_family(V), (0, 1, -0.2, 0.2))
    assert len(found) == 2
    got = sorted((b.a_bp for b in found), key=lambda z: z.imag)
    assert abs(got[0] - np.conj(a_bp(V))) < 1e-8
    assert abs(got[1] - a_bp(V)) < 1e-8
    assert all(b.certified for b in found)


def test_list_decoupled_is_empty_with_note():
    found = list_branch_points(two_level_family(0.0), (0, 1, -0.2, 0.2))
    assert len(found) == 0
    assert "identically factorizable" in found.note


def test_list_four_level():
    found = list_branch_points(four_level_family(0.03), (0, 1, 0, 0.2))
    certified = sorted(b.a_bp.real for b in found if b.certified)
    assert len(certified) >= 3
    for target in (2 / 3, 12 / 17, 3 / 4):
        assert min(abs(r - target) for r in certified) < 0.02
    for b in found:
        if b.certified:
            i, j = b.pair
            assert b.permutation[i] == j and b.permutation[j] == i


def test_list_is_closed_under_conjugation():
    spec = four_level_family(0.03)
    found = list_branch_points(spec, (0.5, 1, -0.2, 0.2), certify=False)
    roots = [b.a_bp for b in found]
    for r in roots:
        assert min(abs(s - r.conjugate()) for s in roots) < 1e-6


def test_winding_count_matches_list():
    spec = four_level_family(0.03)
    region = (0.5, 1, 0.001, 0.2)
    found = list_branch_points(spec, region)
    assert count_zeros(spec, region) == len(found) == 3
    assert count_zeros(two_level_family(V), (0, 1, -0.2, 0.2)) == 2


def test_grid_validation():
    with pytest.raises(ValueError):
        list_branch_points(two_level_family(V), (0, 1, -0.2, 0.2), grid=3)
