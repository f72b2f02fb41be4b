"""Dense real matrix kernels shared by the whole toolkit.

Matrices are plain numpy float arrays. Symmetric matrices are stored as
full square arrays; whenever a symmetric object has to live inside a flat
decision vector it is packed with :func:`svec`, the scaled upper-triangle
vector whose Euclidean inner product equals the trace inner product of
the corresponding matrices.
"""

from __future__ import annotations

import functools

import numpy as np
import scipy.linalg

__all__ = [
    "nullspace_basis",
    "block_diag",
    "sym_eig_min",
    "sym_eig_max",
    "symmetrize",
    "svec",
    "smat",
    "svec_dim",
    "svec_basis",
]


def symmetrize(a: np.ndarray) -> np.ndarray:
    """Symmetric part 0.5 * (A + A^T)."""
    a = np.asarray(a, dtype=float)
    return 0.5 * (a + a.T)


def nullspace_basis(K: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Orthonormal basis of the null space of ``K`` via SVD.

    Rank is the number of singular values above ``tol * sigma_max``; the
    returned columns span the remaining right-singular directions.  A
    full-column-rank ``K`` yields an array with zero columns, which is a
    valid (empty) basis and not an error.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    K = np.atleast_2d(np.asarray(K, dtype=float))
    rows, cols = K.shape
    if cols == 0:
        return np.zeros((0, 0))
    if rows == 0:
        return np.eye(cols)
    _, s, vt = np.linalg.svd(K)
    rank = 0
    if s.size and s[0] > 0.0:
        rank = int(np.count_nonzero(s > tol * s[0]))
    return vt[rank:].T.copy()


def block_diag(blocks) -> np.ndarray:
    """Block-diagonal concatenation; an empty list gives a 0 x 0 matrix."""
    blocks = [np.atleast_2d(np.asarray(b, dtype=float)) for b in blocks]
    if not blocks:
        return np.zeros((0, 0))
    return scipy.linalg.block_diag(*blocks)


def _check_sym(S: np.ndarray) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {S.shape}")
    if S.shape[0] < 1:
        raise ValueError("matrix must have dimension >= 1")
    if not np.isfinite(S).all():
        raise ValueError("matrix has non-finite entries")
    return S


def sym_eig_min(S: np.ndarray) -> float:
    """Smallest eigenvalue of a symmetric matrix."""
    S = _check_sym(S)
    return float(np.linalg.eigvalsh(symmetrize(S))[0])


def sym_eig_max(S: np.ndarray) -> float:
    """Largest eigenvalue of a symmetric matrix."""
    S = _check_sym(S)
    return float(np.linalg.eigvalsh(symmetrize(S))[-1])


# --- scaled upper-triangle packing -----------------------------------------
#
# Ordering is column-major over the upper triangle:
#   (0,0), (0,1), (1,1), (0,2), (1,2), (2,2), ...
# Off-diagonal entries carry a factor sqrt(2) so that
#   svec(A) . svec(B) == trace(A B).


def svec_dim(d: int) -> int:
    return d * (d + 1) // 2


@functools.lru_cache(maxsize=None)
def _triu_indices(d: int):
    ii = np.array([i for j in range(d) for i in range(j + 1)], dtype=int)
    jj = np.array([j for j in range(d) for i in range(j + 1)], dtype=int)
    scale = np.where(ii == jj, 1.0, np.sqrt(2.0))
    return ii, jj, scale


def svec(S: np.ndarray) -> np.ndarray:
    """Pack a symmetric matrix into its scaled upper-triangle vector."""
    S = np.asarray(S, dtype=float)
    d = S.shape[-1]
    ii, jj, scale = _triu_indices(d)
    return S[..., ii, jj] * scale


def smat(v: np.ndarray) -> np.ndarray:
    """Inverse of :func:`svec`."""
    v = np.asarray(v, dtype=float)
    nv = v.shape[-1]
    d = int((np.sqrt(8 * nv + 1) - 1) / 2 + 0.5)
    if svec_dim(d) != nv:
        raise ValueError(f"length {nv} is not a triangular number")
    ii, jj, scale = _triu_indices(d)
    out = np.zeros(v.shape[:-1] + (d, d))
    out[..., ii, jj] = v / scale
    out[..., jj, ii] = out[..., ii, jj]
    return out


@functools.lru_cache(maxsize=None)
def svec_basis(d: int) -> np.ndarray:
    """Orthonormal symmetric basis matrices, one per svec component.

    Shape (svec_dim(d), d, d); slice ``a`` is the matrix whose svec is the
    ``a``-th unit vector.
    """
    ii, jj, scale = _triu_indices(d)
    nv = svec_dim(d)
    out = np.zeros((nv, d, d))
    out[np.arange(nv), ii, jj] = 1.0 / scale
    out[np.arange(nv), jj, ii] = 1.0 / scale
    out.setflags(write=False)
    return out
