import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cha.codes import (
    CodeKind,
    CodeMatrix,
    MaskPattern,
    build_code,
    build_cyclic_s_matrix,
    build_sylvester_hadamard,
    is_valid_s_order,
    mask_pattern_from_code,
    quadratic_residue_sequence,
    s_matrix_inverse,
)

S_ORDERS = [3, 7, 11, 19, 23, 31, 43, 59]
ALL_S_ORDERS_TO_103 = [n for n in range(2, 104) if all(n % d for d in range(2, n)) and n % 4 == 3]


def brute_valid(n):
    prime = n > 1 and all(n % d for d in range(2, n))
    return prime and n % 4 == 3


def brute_residues(n):
    return {k * k % n for k in range(1, n)}


def test_valid_orders_from_text():
    assert is_valid_s_order(7)
    assert is_valid_s_order(31)
    assert is_valid_s_order(59)
    assert not is_valid_s_order(13)
    assert not is_valid_s_order(9)
    assert not is_valid_s_order(1)


def test_valid_order_matches_brute_force():
    primes = np.ones(10_001, dtype=bool)
    primes[:2] = False
    for p in range(2, 101):
        if primes[p]:
            primes[p * p::p] = False
    for n in range(1, 10_001):
        assert is_valid_s_order(n) == (bool(primes[n]) and n % 4 == 3), n
    # spot-check the sieve itself against trial division
    for n in range(1, 400):
        assert (bool(primes[n]) and n % 4 == 3) == brute_valid(n)


def test_qr_small_orders():
    assert quadratic_residue_sequence(3).tolist() == [1, 1, 0]
    assert quadratic_residue_sequence(7).tolist() == [1, 1, 1, 0, 1, 0, 0]


@pytest.mark.parametrize("n", [11, 19, 23, 31, 43, 59])
def test_qr_matches_enumeration(n):
    seq = quadratic_residue_sequence(n)
    residues = brute_residues(n)
    expected = [1] + [int(j in residues) for j in range(1, n)]
    assert seq.tolist() == expected
    assert seq.sum() == (n + 1) // 2


@pytest.mark.parametrize("n", [13, 9, 1, 2, 5])
def test_qr_rejects_invalid(n):
    with pytest.raises(ValueError, match="invalid S-matrix order"):
        quadratic_residue_sequence(n)


def test_qr_rejection_names_condition():
    with pytest.raises(ValueError, match="mod 4"):
        quadratic_residue_sequence(13)
    with pytest.raises(ValueError, match="not prime"):
        quadratic_residue_sequence(15)


def test_cyclic_s_n3_rows():
    s = build_cyclic_s_matrix([1, 1, 0])
    assert s.kind is CodeKind.SMATRIX
    assert s.entries.tolist() == [[1, 1, 0], [1, 0, 1], [0, 1, 1]]


@pytest.mark.parametrize("n", ALL_S_ORDERS_TO_103)
def test_s_matrix_identities(n):
    s = build_code("smatrix", n)
    a = s.entries.astype(np.int64)
    eye = np.eye(n, dtype=np.int64)
    ones = np.ones((n, n), dtype=np.int64)
    assert np.array_equal(a @ a.T, (n + 1) // 4 * (eye + ones))
    assert np.array_equal(a @ ones, (n + 1) // 2 * ones)
    assert np.array_equal(ones @ a, (n + 1) // 2 * ones)
    i, j = np.indices((n, n))
    assert np.array_equal(a, a[0][(i + j) % n])


def test_row_sums_n31():
    s = build_code("smatrix", 31)
    assert set(s.entries.sum(axis=1)) == {16}
    assert set(s.entries.sum(axis=0)) == {16}


def test_cyclic_rejects_wrong_weight():
    with pytest.raises(ValueError, match="weight"):
        build_cyclic_s_matrix([1, 0, 0])


def test_cyclic_rejects_non_difference_set():
    # right weight (4) for n=7 but not a difference set
    with pytest.raises(ValueError, match="difference set"):
        build_cyclic_s_matrix([1, 1, 1, 1, 0, 0, 0])


@pytest.mark.parametrize("k", [1, 2, 4, 8, 16, 32, 64])
def test_sylvester(k):
    h = build_sylvester_hadamard(k)
    a = h.entries.astype(np.int64)
    assert h.kind is CodeKind.HADAMARD
    assert np.array_equal(a.T @ a, k * np.eye(k, dtype=np.int64))


def test_sylvester_small():
    assert build_sylvester_hadamard(1).entries.tolist() == [[1]]
    assert build_sylvester_hadamard(2).entries.tolist() == [[1, 1], [1, -1]]


@pytest.mark.parametrize("k", [0, 3, 12, 24])
def test_sylvester_rejects(k):
    with pytest.raises(ValueError):
        build_sylvester_hadamard(k)


def test_inverse_n3_against_numeric():
    s = build_cyclic_s_matrix([1, 1, 0])
    inv = s_matrix_inverse(s)
    np.testing.assert_allclose(inv, 0.5 * (2 * s.entries.T - 1))
    np.testing.assert_allclose(inv, np.linalg.inv(s.as_float()), atol=1e-12)


@pytest.mark.parametrize("n", S_ORDERS)
def test_inverse_two_sided(n):
    s = build_code("smatrix", n)
    inv = s_matrix_inverse(s)
    eye = np.eye(n)
    assert np.abs(s.as_float() @ inv - eye).max() <= 1e-10
    assert np.abs(inv @ s.as_float() - eye).max() <= 1e-10


@pytest.mark.parametrize("n", [7, 31, 59])
def test_inverse_matches_generic_solve(n):
    s = build_code("smatrix", n)
    numeric = np.linalg.solve(s.as_float(), np.eye(n))
    np.testing.assert_allclose(s_matrix_inverse(s), numeric, atol=1e-9)


def test_inverse_rejects_other_kinds():
    with pytest.raises(ValueError):
        s_matrix_inverse(build_sylvester_hadamard(4))


def test_degenerate_order_one_is_identity():
    w = build_code("smatrix", 1)
    assert w.kind is CodeKind.IDENTITY
    assert w.entries.tolist() == [[1]]


def test_code_matrix_is_immutable():
    s = build_code("smatrix", 7)
    with pytest.raises(ValueError):
        s.entries[0, 0] = 0


def test_from_entries_classifies():
    assert CodeMatrix.from_entries(np.eye(5, dtype=int)).kind is CodeKind.IDENTITY
    assert CodeMatrix.from_entries(build_sylvester_hadamard(8).entries).kind is CodeKind.HADAMARD
    assert CodeMatrix.from_entries(build_code("smatrix", 11).entries).kind is CodeKind.SMATRIX
    assert CodeMatrix.from_entries([[2, 1], [1, 1]]).kind is CodeKind.CUSTOM


def test_mask_n7():
    m = mask_pattern_from_code(quadratic_residue_sequence(7), 1.0, 1.0)
    assert len(m.cells) == 13
    assert m.window(0).tolist() == list(m.base)


def test_mask_n31_geometry():
    m = mask_pattern_from_code(quadratic_residue_sequence(31), 2.0, 1.5)
    assert len(m.cells) == 61
    assert m.array_span == pytest.approx(62.0)


@pytest.mark.parametrize("n", S_ORDERS)
def test_mask_windows_are_matrix_rows(n):
    base = quadratic_residue_sequence(n)
    m = mask_pattern_from_code(base, 1.0, 0.8)
    s = build_cyclic_s_matrix(base)
    for shift in range(n):
        assert np.array_equal(m.window(shift), s.entries[shift])
    assert all(m.cells[k] == base[k % n] for k in range(2 * n - 1))


def test_mask_geometry_rejected():
    with pytest.raises(ValueError, match="exceeds pitch"):
        mask_pattern_from_code(quadratic_residue_sequence(7), 1.0, 1.2)
    with pytest.raises(ValueError):
        MaskPattern((1, 1, 0), 1.0, 0.0)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(ALL_S_ORDERS_TO_103), st.integers(0, 10_000))
def test_window_property_random_shift(n, raw_shift):
    base = quadratic_residue_sequence(n)
    m = mask_pattern_from_code(base, 1.0, 1.0)
    shift = raw_shift % n
    assert np.array_equal(m.window(shift), np.roll(base, -shift))
