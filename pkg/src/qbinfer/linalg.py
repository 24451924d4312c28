"""Dense complex-matrix primitives shared by every other module.

All matrices are square numpy arrays of ``complex128``. The vectorization
convention is column stacking throughout: ``vec(M)`` stacks the columns of
``M``, so ``vec(A B C) = (C^T kron A) vec(B)`` and the matrix of the map
``rho -> sum_i K_i rho K_i^dag`` is ``sum_i conj(K_i) kron K_i``. Code must
satisfy the reconstruction identity checked in :func:`superop_matrix`, not a
remembered Kronecker formula.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, NotHermitian

# Default tolerances. CLI validation accepts overrides; library defaults stay fixed.
HERM_TOL = 1e-10
PSD_TOL = 1e-10
NORM_TOL = 1e-9
IMAG_TOL = 1e-10
DIM_MAX = 64


def as_cmatrix(m, name: str = "matrix") -> np.ndarray:
    """Coerce to a square complex128 array, checking finiteness and d <= 64."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[0] > DIM_MAX:
        raise DimensionMismatch(
            f"{name} dimension {a.shape[0]} outside supported range 1..{DIM_MAX}"
        )
    if not np.all(np.isfinite(a.real)) or not np.all(np.isfinite(a.imag)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def herm_defect(m: np.ndarray) -> float:
    """Max entry magnitude of m - m^dag."""
    return float(np.abs(m - m.conj().T).max())


def require_hermitian(m: np.ndarray, tol: float | None = None, name: str = "matrix") -> None:
    if tol is None:
        tol = HERM_TOL
    defect = herm_defect(m)
    if defect > tol:
        raise NotHermitian(f"{name} deviates from Hermitian by {defect:.3e} (tol {tol:.1e})")


def eig_hermitian(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix with a deterministic output contract.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues ascending and each
    eigenvector's first nonzero component rotated to be real and positive, so
    repeated calls on equal inputs give identical output.
    """
    a = as_cmatrix(m)
    require_hermitian(a)
    w, v = np.linalg.eigh(a)
    v = v.copy()
    for j in range(v.shape[1]):
        col = v[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size:
            pivot = col[nz[0]]
            col *= np.conj(pivot) / abs(pivot)
    return w, v


def schatten_norm(m, p: float = 1.0) -> float:
    """Schatten p-norm: p-th root of the sum of p-th powers of singular values."""
    a = as_cmatrix(m)
    if p < 1:
        raise ValueError("Schatten norm requires p >= 1")
    s = np.linalg.svd(a, compute_uv=False)
    if np.isinf(p):
        return float(s.max()) if s.size else 0.0
    return float(np.sum(s**p) ** (1.0 / p))


def trace_norm(m) -> float:
    """Sum of singular values; for Hermitian input the sum of |eigenvalues|."""
    return schatten_norm(m, 1.0)


def trace_distance(a, b) -> float:
    """Trace norm of the difference of two operators."""
    return trace_norm(np.asarray(a, dtype=complex) - np.asarray(b, dtype=complex))


def min_eigenvalue(m) -> float:
    a = as_cmatrix(m)
    require_hermitian(a)
    return float(np.linalg.eigvalsh(a)[0])


def is_psd(m, tol: float | None = None) -> bool:
    """True iff the smallest eigenvalue is >= -tol. Raises NotHermitian first."""
    if tol is None:
        tol = PSD_TOL
    return min_eigenvalue(m) >= -tol


def vec(m: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(m, dtype=complex).T.reshape(-1)


def unvec(v: np.ndarray, dim: int | None = None) -> np.ndarray:
    """Inverse of :func:`vec`."""
    v = np.asarray(v, dtype=complex).reshape(-1)
    if dim is None:
        dim = int(round(np.sqrt(v.size)))
    if dim * dim != v.size:
        raise DimensionMismatch(f"cannot unvec length {v.size} into a square matrix")
    return v.reshape(dim, dim).T


def superop_matrix(kraus) -> np.ndarray:
    """d^2 x d^2 matrix of ``rho -> sum_i K_i rho K_i^dag`` in the vec convention.

    The accumulation order follows the input list, so the matrix of a
    concatenation of two lists equals the entrywise sum of their matrices.
    """
    ops = [as_cmatrix(k, f"kraus[{i}]") for i, k in enumerate(kraus)]
    if not ops:
        raise DimensionMismatch("superop_matrix needs at least one Kraus operator")
    d = ops[0].shape[0]
    for i, k in enumerate(ops):
        if k.shape[0] != d:
            raise DimensionMismatch(f"kraus[{i}] has dimension {k.shape[0]}, expected {d}")
    m = np.zeros((d * d, d * d), dtype=complex)
    for k in ops:
        m += np.kron(k.conj(), k)
    return m


def apply_superop(m: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return unvec(m @ vec(rho))
