import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ccbf.circulation import (MANIPULATOR_OMEGA, CirculationError, CirculationSpec, Parity,
                              all_pairings, cayley_orthonormal, default_pairing,
                              is_invertible_skew, omega_conjugate, omega_from_pairing,
                              random_orthonormal, tangent)

OMEGA_1 = np.array([[0.0, -1.0], [1.0, 0.0]])


def test_two_dimensional_pairings_give_both_rotations():
    np.testing.assert_array_equal(omega_from_pairing(2, [(1, 2)]).omega, -OMEGA_1)
    np.testing.assert_array_equal(omega_from_pairing(2, [(2, 1)]).omega, OMEGA_1)


def test_four_dimensional_pairing_example():
    W = omega_from_pairing(4, [(1, 3), (2, 4)]).omega
    expected = [[0, 0, 1, 0], [0, 0, 0, 1], [-1, 0, 0, 0], [0, -1, 0, 0]]
    np.testing.assert_array_equal(W, expected)


def test_odd_pairing_zeroes_the_unpaired_row():
    spec = omega_from_pairing(3, [(1, 2)], dead_index=3)
    np.testing.assert_array_equal(spec.omega, [[0, 1, 0], [-1, 0, 0], [0, 0, 0]])
    assert spec.parity is Parity.ODD_REDUCED
    assert spec.dead_index == 2
    assert np.linalg.matrix_rank(spec.omega) == 2


@pytest.mark.parametrize("n, pairs, dead", [
    (4, [(1, 2), (2, 3)], None),
    (4, [(1, 5), (2, 3)], None),
    (4, [(1, 2)], None),
    (4, [(1, 2, 3), (4, 4)], None),
    (3, [(1, 2)], 1),
    (4, [(1, 2), (3, 4)], 2),
])
def test_invalid_pairings(n, pairs, dead):
    with pytest.raises(CirculationError):
        omega_from_pairing(n, pairs, dead)


@pytest.mark.parametrize("n, count", [(2, 2), (4, 12), (6, 120)])
def test_pairing_enumeration_counts(n, count):
    mats = [omega_from_pairing(n, p).omega for p in all_pairings(n)]
    assert len(mats) == count == math.factorial(n) // math.factorial(n // 2)
    assert len({m.tobytes() for m in mats}) == count
    for m in mats:
        assert not CirculationSpec(m, Parity.EVEN_FULL).violations()


def test_default_pairing():
    assert default_pairing(4) == [(1, 2), (3, 4)]
    assert default_pairing(5) == [(1, 2), (3, 4)]


def test_conjugate_by_identity_is_unchanged():
    spec = omega_from_pairing(4, [(1, 3), (2, 4)])
    np.testing.assert_array_equal(omega_conjugate(spec, np.eye(4)).omega, spec.omega)


def test_conjugate_by_permutation_stays_valid():
    spec = omega_from_pairing(6, default_pairing(6))
    rng = np.random.default_rng(0)
    for _ in range(20):
        P = np.eye(6)[rng.permutation(6)]
        assert not omega_conjugate(spec, P).violations()


@pytest.mark.parametrize("theta", [0.0, 0.3, 1.0, math.pi, -2.2])
def test_planar_rotations_commute_with_omega(theta):
    c, s = math.cos(theta), math.sin(theta)
    R = np.array([[c, -s], [s, c]])
    W = omega_conjugate(CirculationSpec(OMEGA_1, Parity.EVEN_FULL), R).omega
    np.testing.assert_allclose(W, OMEGA_1, atol=1e-15)


def test_conjugate_rejects_non_orthonormal():
    spec = omega_from_pairing(2, [(1, 2)])
    with pytest.raises(CirculationError):
        omega_conjugate(spec, np.array([[1.0, 0.1], [0.0, 1.0]]))


def test_odd_conjugation_tracks_dead_axis():
    spec = omega_from_pairing(3, [(1, 2)])
    P = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, -1.0, 0.0]])
    out = omega_conjugate(spec, P)
    assert out.dead_index == 0
    assert not out.violations()
    with pytest.raises(CirculationError):
        omega_conjugate(spec, random_orthonormal(3, seed=1))


def test_cayley_examples():
    np.testing.assert_array_equal(cayley_orthonormal(np.zeros((3, 3))), np.eye(3))
    B = np.array([[0.0, 1.0], [0.0, 0.0]])
    A = B - B.T
    Q = cayley_orthonormal(B)
    np.testing.assert_allclose(Q, np.linalg.solve(np.eye(2) - A, np.eye(2) + A))
    np.testing.assert_allclose(Q.T @ Q, np.eye(2), atol=1e-12)


def test_cayley_fifteen():
    Q = random_orthonormal(15, seed=7)
    assert np.max(np.abs(Q.T @ Q - np.eye(15))) <= 1e-10


def test_tangent_examples():
    planar = CirculationSpec(OMEGA_1, Parity.EVEN_FULL)
    np.testing.assert_array_equal(tangent(planar, [1.0, 0.0]), [0.0, 1.0])
    four = omega_from_pairing(4, [(1, 3), (2, 4)])
    np.testing.assert_array_equal(four.tangent([0.0, 0.0, 1.0, 0.0]), [1.0, 0.0, 0.0, 0.0])
    odd = omega_from_pairing(3, [(1, 2)])
    np.testing.assert_array_equal(odd.tangent([0.0, 0.0, 1.0]), [0.0, 0.0, 0.0])


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([2, 3, 4, 5, 14, 15]), st.integers(0, 2**32 - 1))
def test_tangent_is_orthogonal_and_sized(n, seed):
    rng = np.random.default_rng(seed)
    spec = omega_from_pairing(n, default_pairing(n))
    if n % 2 == 0:
        spec = omega_conjugate(spec, random_orthonormal(n, seed))
    N = rng.normal(size=n)
    N /= np.linalg.norm(N)
    T = spec.tangent(N)
    assert abs(N @ T) <= 1e-12
    if spec.parity is Parity.EVEN_FULL:
        assert abs(np.linalg.norm(T) - 1.0) <= 1e-12
    else:
        assert abs(T @ T - (1.0 - N[spec.dead_index] ** 2)) <= 1e-12


def test_singular_candidates_are_rejected():
    assert not is_invertible_skew(omega_from_pairing(5, default_pairing(5)).omega)
    assert not is_invertible_skew(np.zeros((4, 4)))
    assert is_invertible_skew(omega_from_pairing(4, default_pairing(4)).omega)
    assert "orthonormality" in CirculationSpec(np.zeros((4, 4)), Parity.EVEN_FULL).violations()


def test_validation_names():
    assert "skew_symmetry" in CirculationSpec(np.eye(2), Parity.EVEN_FULL).violations()
    assert "even_dimension" in CirculationSpec(np.zeros((3, 3)), Parity.EVEN_FULL).violations()
    assert "dead_index" in CirculationSpec(np.zeros((3, 3)), Parity.ODD_REDUCED).violations()
    bad = omega_from_pairing(3, [(1, 2)]).omega.copy()
    bad[0, 2], bad[2, 0] = 0.5, -0.5
    assert "dead_row_column" in CirculationSpec(bad, Parity.ODD_REDUCED, 2).violations()
    with pytest.raises(CirculationError):
        CirculationSpec(np.eye(2), Parity.EVEN_FULL).check()


def test_manipulator_matrix():
    spec = CirculationSpec(MANIPULATOR_OMEGA, Parity.EVEN_FULL)
    assert not spec.violations()
    r = math.sqrt(3) / 3
    np.testing.assert_allclose(MANIPULATOR_OMEGA[0], [0, r, -r, r])


def test_fifteen_dimensional_matrix():
    spec = omega_from_pairing(15, default_pairing(15))
    assert spec.dead_index == 14
    N = np.arange(1.0, 16.0)
    T = spec.tangent(N)
    expected = []
    for i in range(0, 14, 2):
        expected += [N[i + 1], -N[i]]
    np.testing.assert_array_equal(T, expected + [0.0])


def test_dict_round_trip():
    spec = omega_from_pairing(5, default_pairing(5))
    back = CirculationSpec.from_dict(spec.to_dict())
    np.testing.assert_array_equal(back.omega, spec.omega)
    assert back.parity is spec.parity and back.dead_index == spec.dead_index
