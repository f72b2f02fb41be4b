import numpy as np
import pytest
import scipy.linalg

from pdecert.linalg import (
    block_diag,
    nullspace_basis,
    smat,
    svec,
    svec_basis,
    svec_dim,
    sym_eig_max,
    sym_eig_min,
)
from pdecert.lmi import boundary_constraint
from pdecert.model import chatter_matrices, from_time_delay


def test_nullspace_full_rank_square():
    N = nullspace_basis(np.eye(2))
    assert N.shape == (2, 0)


def test_nullspace_one_dimensional():
    N = nullspace_basis(np.array([[1.0, -1.0]]))
    assert N.shape == (2, 1)
    expected = np.array([1.0, 1.0]) / np.sqrt(2.0)
    assert np.allclose(np.abs(N[:, 0]), expected)


def test_nullspace_boundary_constraint_dimension():
    # transport conversion with n = 2 at projection order 1: the constraint
    # matrix has full row rank n, so the kernel has dim - n columns
    A = np.array([[0.0, 1.0], [-2.0, -1.0]])
    plant, pde = from_time_delay(A, 0.5 * np.eye(2), h=0.7)
    n_filter = 2 * 2  # (order + 1) * width
    K = boundary_constraint(pde, plant, n_filter)
    dim = K.shape[1]
    N = nullspace_basis(K)
    assert N.shape[1] == dim - 2
    assert np.linalg.matrix_rank(K) == 2  # independent rank computation


def test_nullspace_invariants_random():
    rng = np.random.default_rng(0)
    for _ in range(25):
        rows, cols = rng.integers(1, 8, size=2)
        rank = int(rng.integers(0, min(rows, cols) + 1))
        K = (
            rng.standard_normal((rows, rank)) @ rng.standard_normal((rank, cols))
            if rank
            else np.zeros((rows, cols))
        )
        tol = 1e-9
        N = nullspace_basis(K, tol)
        assert N.shape == (cols, cols - np.linalg.matrix_rank(K))
        if N.shape[1]:
            kmax = max(np.abs(K).max(), 1e-30)
            assert np.abs(K @ N).max() <= 10 * tol * kmax
            assert np.abs(N.T @ N - np.eye(N.shape[1])).max() <= 1e-10


def test_nullspace_rejects_bad_tol():
    with pytest.raises(ValueError):
        nullspace_basis(np.eye(2), tol=0.0)


def test_block_diag_examples():
    assert np.array_equal(block_diag([[[1.0]], [[2.0]]]), np.diag([1.0, 2.0]))
    assert block_diag([]).shape == (0, 0)
    out = block_diag([np.eye(2), 3.0 * np.eye(1)])
    assert np.array_equal(out, np.diag([1.0, 1.0, 3.0]))


def test_sym_eig_min_examples():
    assert sym_eig_min(np.diag([1.0, 2.0])) == pytest.approx(1.0)
    assert sym_eig_min(np.array([[0.0, 1.0], [1.0, 0.0]])) == pytest.approx(-1.0)


def test_sym_eig_min_matches_second_solver():
    rng = np.random.default_rng(1)
    S = rng.standard_normal((10, 10))
    S = S + S.T
    expected = scipy.linalg.eigvalsh(S)[0]
    assert sym_eig_min(S) == pytest.approx(expected, abs=1e-8)


def test_sym_eig_min_shift_invariance():
    rng = np.random.default_rng(2)
    S = rng.standard_normal((6, 6))
    S = S + S.T
    base = sym_eig_min(S)
    for c in (-3.7, 0.25, 11.0):
        shifted = sym_eig_min(S + c * np.eye(6))
        assert shifted == pytest.approx(base + c, rel=1e-10, abs=1e-10)


def test_sym_eig_rejects_bad_input():
    with pytest.raises(ValueError):
        sym_eig_min(np.array([[np.nan, 0.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        sym_eig_min(np.zeros((0, 0)))
    with pytest.raises(ValueError):
        sym_eig_min(np.zeros((2, 3)))


def test_sym_eig_max_is_negated_min():
    rng = np.random.default_rng(3)
    S = rng.standard_normal((5, 5))
    S = S + S.T
    assert sym_eig_max(S) == pytest.approx(-sym_eig_min(-S))


def test_svec_roundtrip_and_inner_product():
    rng = np.random.default_rng(4)
    for d in (1, 2, 5):
        A = rng.standard_normal((d, d))
        A = A + A.T
        B = rng.standard_normal((d, d))
        B = B + B.T
        assert np.allclose(smat(svec(A)), A)
        assert svec(A) @ svec(B) == pytest.approx(np.trace(A @ B))
        assert svec(A).shape == (svec_dim(d),)


def test_svec_basis_orthonormal():
    basis = svec_basis(4)
    G = np.einsum("aij,bij->ab", basis, basis)
    assert np.allclose(G, np.eye(basis.shape[0]))


def test_smat_rejects_non_triangular_length():
    with pytest.raises(ValueError):
        smat(np.zeros(4))
