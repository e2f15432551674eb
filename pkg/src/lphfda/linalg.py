"""Dense real linear-algebra primitives.

Everything that touches a subgenerator, a Kronecker block or a covariance
eigenproblem goes through this module, so tolerances live here as named
constants.
"""

import warnings

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike, NDArray

from .errors import DimensionError, NumericError, SingularMatrixError, SymmetryError

#: target componentwise relative accuracy of :func:`mat_exp`
EXPM_REL_TOL = 1e-12
#: target residual ``||AX - B|| / ||B||`` of :func:`solve`
SOLVE_RESIDUAL_TOL = 1e-10
#: smallest admissible LU pivot relative to the largest one
SINGULAR_PIVOT_TOL = 1e-14
#: allowed asymmetry ``max|A - A^T|`` (scaled by ``max(1, max|A|)``)
SYMMETRY_TOL = 1e-10


def _as_matrix(A, name="A"):
    A = np.asarray(A, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim < 2:
        raise DimensionError(f"{name} must be two-dimensional, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NumericError(f"{name} has non-finite entries")
    return A


def _check_square(A, name="A"):
    if A.shape[-1] != A.shape[-2]:
        raise DimensionError(f"{name} must be square, got shape {A.shape}")


def mat_exp(A: ArrayLike, scale: ArrayLike = 1.0) -> NDArray:
    """Matrix exponential ``exp(A * scale)``.

    Parameters
    ----------
    A : array_like, shape (m, m)
        Square matrix.
    scale : float or array_like of shape (k,)
        Multiplier applied to ``A``. When an array is given the result is
        a stack of exponentials, one per entry.

    Returns
    -------
    ndarray, shape (m, m) or (k, m, m)

    Raises
    ------
    DimensionError
        If ``A`` is not square.
    NumericError
        If the result overflows.

    Notes
    -----
    Uses scaling and squaring with a degree-13 Padé approximant
    (``scipy.linalg.expm``, which accepts stacked inputs).
    """
    A = _as_matrix(A)
    _check_square(A)
    scale = np.asarray(scale, dtype=float)
    if not np.all(np.isfinite(scale)):
        raise NumericError("scale must be finite")
    if scale.ndim == 0:
        arg = A * scale
    else:
        arg = A[None, :, :] * scale.reshape(-1, 1, 1)
    with np.errstate(over="raise", invalid="raise"):
        try:
            E = scipy.linalg.expm(arg)
        except FloatingPointError as exc:
            raise NumericError(f"matrix exponential overflowed: {exc}") from exc
    if not np.all(np.isfinite(E)):
        raise NumericError("matrix exponential overflowed (norm too large after scaling)")
    return E


def kron(A: ArrayLike, B: ArrayLike) -> NDArray:
    """Kronecker product; block ``(i, j)`` of the result is ``A[i, j] * B``."""
    A = _as_matrix(np.atleast_2d(A), "A")
    B = _as_matrix(np.atleast_2d(B), "B")
    m, n = A.shape
    k, l = B.shape
    return (A[:, None, :, None] * B[None, :, None, :]).reshape(m * k, n * l)


def solve(A: ArrayLike, B: ArrayLike) -> NDArray:
    """Solve ``A X = B`` by LU factorisation with partial pivoting.

    Raises
    ------
    SingularMatrixError
        When the smallest pivot is below ``SINGULAR_PIVOT_TOL`` relative
        to the largest.
    """
    A = _as_matrix(A)
    _check_square(A)
    B = np.asarray(B, dtype=float)
    if B.shape[0] != A.shape[0]:
        raise DimensionError(f"cannot solve {A.shape} system with right-hand side {B.shape}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    pivots = np.abs(np.diag(lu))
    big = pivots.max() if pivots.size else 0.0
    rel = pivots.min() / big if big > 0 else 0.0
    if rel < SINGULAR_PIVOT_TOL:
        raise SingularMatrixError("matrix is singular to working precision", rel)
    return scipy.linalg.lu_solve((lu, piv), B, check_finite=False)


def sym_eigen(A: ArrayLike) -> tuple[NDArray, NDArray]:
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    Returns
    -------
    values : ndarray, shape (m,)
    vectors : ndarray, shape (m, m)
        Orthonormal eigenvectors stored as columns.
    """
    A = _as_matrix(A)
    _check_square(A)
    scale = max(1.0, float(np.abs(A).max(initial=0.0)))
    if np.abs(A - A.T).max(initial=0.0) > SYMMETRY_TOL * scale:
        raise SymmetryError("matrix is not symmetric")
    values, vectors = np.linalg.eigh(0.5 * (A + A.T))
    return values[::-1].copy(), vectors[:, ::-1].copy()


def block_bidiagonal(diagonal, superdiagonal) -> NDArray:
    """Assemble an upper block-bidiagonal matrix.

    Parameters
    ----------
    diagonal : sequence of ndarray
        Square blocks ``D_1, ..., D_n``.
    superdiagonal : sequence of ndarray
        ``n - 1`` blocks; block ``i`` sits right of ``D_i`` and must have
        shape ``(rows(D_i), cols(D_{i+1}))``.
    """
    diagonal = [_as_matrix(D, "diagonal block") for D in diagonal]
    superdiagonal = [_as_matrix(U, "superdiagonal block") for U in superdiagonal]
    if len(superdiagonal) != max(len(diagonal) - 1, 0):
        raise DimensionError("need exactly one superdiagonal block per adjacent pair")
    sizes = [D.shape[0] for D in diagonal]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    out = np.zeros((offsets[-1], offsets[-1]))
    for i, D in enumerate(diagonal):
        _check_square(D, "diagonal block")
        out[offsets[i]:offsets[i + 1], offsets[i]:offsets[i + 1]] = D
    for i, U in enumerate(superdiagonal):
        if U.shape != (sizes[i], sizes[i + 1]):
            raise DimensionError(f"superdiagonal block {i} has shape {U.shape}")
        out[offsets[i]:offsets[i + 1], offsets[i + 1]:offsets[i + 2]] = U
    return out
