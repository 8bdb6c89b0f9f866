"""Numerical primitives with fixed contracts.

Thin wrappers around LAPACK/SuperLU/pocketfft that pin down the conventions
the rest of the package relies on:

* ``qr_economy``     economy QR with orthonormal Q,
* ``dense_eig``      eigendecomposition of a small (possibly nonsymmetric)
                     real matrix, with a conditioning estimate,
* ``fft`` / ``ifft`` transform pair satisfying the circulant diagonalization
                     identity C = F^{-1} diag(fft(C e_1)) F for any length,
* ``sparse_factorize`` / ``sparse_solve``  reusable sparse LU.

All functions are pure; no shared mutable state.
"""

from dataclasses import dataclass

import numpy as np
import scipy.fft
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NonDiagonalizable, SingularMatrix

#: Largest matrix order accepted by dense_eig.
DENSE_EIG_BOUND = 4096


def qr_economy(A):
    """Economy-size QR of an n x k matrix, k <= n.

    Returns (Q, R) with Q orthonormal (n x k) and R upper triangular (k x k)
    such that Q @ R == A. Rank deficiency is not an error here: callers
    inspect the diagonal of R.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[1] > A.shape[0]:
        raise ValueError(f"expected n x k with k <= n, got {A.shape}")
    Q, R = np.linalg.qr(A, mode="reduced")
    return Q, R


@dataclass
class EigDecomposition:
    """Eigendecomposition A = S diag(lambdas) S^{-1} of a real square matrix."""

    S: np.ndarray
    lambdas: np.ndarray
    S_inv: np.ndarray
    cond_estimate: float


def dense_eig(A, max_cond=None):
    """Eigendecomposition of a small dense real matrix.

    Handles nonsymmetric input (LAPACK geev: Hessenberg reduction + shifted
    QR). ``cond_estimate`` is the cheap proxy ||S||_F ||S^{-1}||_F; when
    ``max_cond`` is given and the estimate exceeds it, NonDiagonalizable is
    raised so the caller can fall back to a factorization-based path.
    """
    A = np.asarray(A, dtype=float)
    k = A.shape[0]
    if A.shape != (k, k):
        raise ValueError(f"expected square matrix, got {A.shape}")
    if k > DENSE_EIG_BOUND:
        raise ValueError(f"matrix order {k} exceeds dense eig bound {DENSE_EIG_BOUND}")
    lambdas, S = np.linalg.eig(A)
    try:
        S_inv = np.linalg.inv(S)
    except np.linalg.LinAlgError as exc:
        raise NonDiagonalizable("eigenvector matrix is singular") from exc
    cond = float(np.linalg.norm(S) * np.linalg.norm(S_inv))
    if max_cond is not None and cond > max_cond:
        raise NonDiagonalizable(
            f"eigenvector condition estimate {cond:.3e} exceeds {max_cond:.3e}"
        )
    return EigDecomposition(S=S, lambdas=lambdas, S_inv=S_inv, cond_estimate=cond)


def fft(v, axis=-1):
    """Discrete Fourier transform, any length (mixed radix / Bluestein)."""
    return scipy.fft.fft(np.asarray(v), axis=axis)


def ifft(v, axis=-1):
    """Inverse of :func:`fft`."""
    return scipy.fft.ifft(np.asarray(v), axis=axis)


def circulant_eigenvalues(first_column):
    """Eigenvalues pi of the circulant with the given first column.

    The diagonalization identity reads C = F^{-1} diag(pi) F with
    pi = fft(C e_1); equivalently C x = ifft(pi * fft(x)).
    """
    return fft(np.asarray(first_column, dtype=float))


def sparse_factorize(A):
    """LU-factorize a square sparse matrix; the result is reusable.

    Raises SingularMatrix when the matrix is singular.
    """
    A = sp.csc_matrix(A)
    n, m = A.shape
    if n != m:
        raise ValueError(f"expected square matrix, got {A.shape}")
    if A.nnz == 0:
        raise SingularMatrix("all-zero matrix")
    try:
        return spla.splu(A)
    except RuntimeError as exc:
        raise SingularMatrix(str(exc)) from exc


def sparse_solve(fact, B):
    """Solve A X = B using a factorization from :func:`sparse_factorize`."""
    B = np.asarray(B, dtype=float)
    squeeze = B.ndim == 1
    X = fact.solve(B if not squeeze else B[:, None])
    if not np.all(np.isfinite(X)):
        raise SingularMatrix("solve produced non-finite values")
    return X[:, 0] if squeeze else X
