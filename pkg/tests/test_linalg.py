import numpy as np
import pytest

from qbinfer import linalg
from qbinfer.errors import DimensionMismatch, NotHermitian
from qbinfer.rand import random_hermitian, random_unitary


def test_eig_identity():
    w, v = linalg.eig_hermitian(np.eye(2))
    assert np.allclose(w, [1.0, 1.0])


def test_eig_diagonal_sorted_ascending():
    w, _ = linalg.eig_hermitian(np.diag([3.0, -1.0]))
    assert np.allclose(w, [-1.0, 3.0])


def test_eig_pauli_x_matches_characteristic_polynomial():
    # oracle: eigenvalues of [[0,1],[1,0]] solve l^2 - (tr)l + det = l^2 - 1 = 0
    tr, det = 0.0, -1.0
    disc = np.sqrt(tr * tr - 4 * det)
    expected = sorted([(tr - disc) / 2, (tr + disc) / 2])
    w, v = linalg.eig_hermitian(np.array([[0, 1], [1, 0]], dtype=complex))
    assert np.allclose(w, expected)
    m = np.array([[0, 1], [1, 0]], dtype=complex)
    assert np.allclose((v * w) @ v.conj().T, m, atol=1e-12)


def test_eig_rejects_non_hermitian():
    with pytest.raises(NotHermitian):
        linalg.eig_hermitian(np.array([[0, 1], [0, 0]], dtype=complex))


def test_eig_deterministic_phase_fix():
    gen = np.random.default_rng(5)
    m = random_hermitian(gen, 4)
    w1, v1 = linalg.eig_hermitian(m)
    w2, v2 = linalg.eig_hermitian(m.copy())
    assert np.array_equal(v1, v2)
    for j in range(4):
        nz = np.flatnonzero(np.abs(v1[:, j]) > 1e-12)[0]
        assert v1[nz, j].real > 0
        assert abs(v1[nz, j].imag) < 1e-12


def test_eig_reconstruction_random():
    gen = np.random.default_rng(11)
    for _ in range(30):
        d = int(gen.integers(2, 9))
        m = random_hermitian(gen, d)
        w, v = linalg.eig_hermitian(m)
        assert np.linalg.norm((v * w) @ v.conj().T - m) <= 1e-9
        assert np.abs(v.conj().T @ v - np.eye(d)).max() <= 1e-9
        assert np.all(np.diff(w) >= -1e-12)


def test_trace_norm_zero():
    assert linalg.trace_norm(np.zeros((3, 3))) == 0.0


def test_trace_norm_diagonal():
    assert linalg.trace_norm(np.diag([0.5, -0.5])) == pytest.approx(1.0, abs=1e-12)


def test_trace_norm_projector_difference():
    # oracle: eigenvalues of the 2x2 Hermitian difference by the closed form
    a = np.array([[1, 0], [0, 0]], dtype=complex)
    b = 0.5 * np.array([[1, 1], [1, 1]], dtype=complex)
    diff = a - b
    tr = float(np.trace(diff).real)
    det = float(np.linalg.det(diff).real)
    disc = np.sqrt(tr * tr - 4 * det)
    expected = abs((tr + disc) / 2) + abs((tr - disc) / 2)
    assert expected == pytest.approx(np.sqrt(2), abs=1e-12)
    assert linalg.trace_norm(diff) == pytest.approx(1.41421356, abs=1e-8)


def test_trace_norm_is_a_norm():
    gen = np.random.default_rng(7)
    for _ in range(50):
        d = int(gen.integers(2, 6))
        a = random_hermitian(gen, d)
        b = random_hermitian(gen, d)
        s = float(gen.normal())
        assert linalg.trace_norm(a + b) <= linalg.trace_norm(a) + linalg.trace_norm(b) + 1e-9
        assert linalg.trace_norm(s * a) == pytest.approx(abs(s) * linalg.trace_norm(a), abs=1e-9)


def test_schatten_norms():
    m = np.diag([3.0, -4.0])
    assert linalg.schatten_norm(m, 1) == pytest.approx(7.0)
    assert linalg.schatten_norm(m, 2) == pytest.approx(5.0)
    assert linalg.schatten_norm(m, np.inf) == pytest.approx(4.0)


def test_is_psd():
    assert linalg.is_psd(np.eye(3))
    assert not linalg.is_psd(np.diag([1.0, -1e-3]))
    plus = 0.5 * np.array([[1, 1], [1, 1]], dtype=complex)
    # oracle: rank-1 projector has eigenvalues {0, 1}
    assert sorted(np.round(np.linalg.eigvalsh(plus), 12)) == [0.0, 1.0]
    assert linalg.is_psd(plus)


def test_vec_unvec_roundtrip_column_stacking():
    m = np.array([[1, 2], [3, 4]], dtype=complex)
    assert np.array_equal(linalg.vec(m), np.array([1, 3, 2, 4], dtype=complex))
    assert np.array_equal(linalg.unvec(linalg.vec(m)), m)


def test_superop_identity():
    m = linalg.superop_matrix([np.eye(3)])
    assert np.array_equal(m, np.eye(9))


def test_superop_unitary_is_unitary():
    gen = np.random.default_rng(3)
    u = random_unitary(gen, 3)
    m = linalg.superop_matrix([u])
    assert np.abs(m.conj().T @ m - np.eye(9)).max() <= 1e-10


def test_superop_action_identity():
    gen = np.random.default_rng(9)
    for _ in range(20):
        d = int(gen.integers(2, 5))
        ops = [gen.normal(size=(d, d)) + 1j * gen.normal(size=(d, d)) for _ in range(3)]
        m = linalg.superop_matrix(ops)
        rho = random_hermitian(gen, d)
        direct = sum(k @ rho @ k.conj().T for k in ops)
        assert np.abs(linalg.apply_superop(m, rho) - direct).max() <= 1e-12


def test_superop_amplitude_damping_spectrum():
    g = 0.75
    k0 = np.array([[1, 0], [0, np.sqrt(1 - g)]], dtype=complex)
    k1 = np.array([[0, np.sqrt(g)], [0, 0]], dtype=complex)
    m = linalg.superop_matrix([k0, k1])
    # independent brute-force oracle: build the 4x4 matrix column by column
    # from the channel action on unvec'ed basis vectors
    oracle = np.zeros((4, 4), dtype=complex)
    for j in range(4):
        e = np.zeros(4)
        e[j] = 1.0
        basis_mat = linalg.unvec(e)
        out = k0 @ basis_mat @ k0.conj().T + k1 @ basis_mat @ k1.conj().T
        oracle[:, j] = linalg.vec(out)
    assert np.abs(m - oracle).max() <= 1e-14
    eigs = sorted(np.linalg.eigvals(oracle).real)
    assert np.allclose(eigs, [0.25, 0.5, 0.5, 1.0], atol=1e-10)
    assert np.allclose(sorted(np.linalg.eigvals(m).real), [1 - g, np.sqrt(1 - g), np.sqrt(1 - g), 1.0], atol=1e-10)


def test_superop_additive_in_kraus_terms():
    gen = np.random.default_rng(2)
    a = [gen.normal(size=(2, 2)) + 1j * gen.normal(size=(2, 2))]
    b = [gen.normal(size=(2, 2)) + 1j * gen.normal(size=(2, 2))]
    assert np.array_equal(
        linalg.superop_matrix(a + b), linalg.superop_matrix(a) + linalg.superop_matrix(b)
    )


def test_superop_preserves_hermiticity():
    gen = np.random.default_rng(21)
    for _ in range(20):
        d = int(gen.integers(2, 5))
        ops = [gen.normal(size=(d, d)) + 1j * gen.normal(size=(d, d)) for _ in range(2)]
        m = linalg.superop_matrix(ops)
        h = random_hermitian(gen, d)
        out = linalg.apply_superop(m, h)
        assert np.abs(out - out.conj().T).max() <= 1e-10


def test_superop_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        linalg.superop_matrix([np.eye(2), np.eye(3)])


def test_dim_cap():
    with pytest.raises(DimensionMismatch):
        linalg.as_cmatrix(np.eye(65))
