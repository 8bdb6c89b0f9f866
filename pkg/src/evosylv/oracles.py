"""Brute-force reference solvers used to validate every projection path.

These deliberately avoid the solver module: the time-stepping oracle is a
plain forward substitution on the block-triangular all-at-once system, the
dense oracle builds and inverts the full Kronecker matrix.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .discretization import LowRankRhs
from .errors import TooLarge
from .kernels import sparse_factorize, sparse_solve

#: Largest n^d * ell the dense all-at-once oracle accepts.
DENSE_KRON_BOUND = 20_000


@dataclass
class OracleSolution:
    U: np.ndarray
    method: str


def _rhs_columns(rhs, size, L):
    if isinstance(rhs, LowRankRhs):
        return rhs.left @ rhs.right.T
    R = np.asarray(rhs, dtype=float)
    if R.shape != (size, L):
        raise ValueError(f"expected {(size, L)} right-hand side, got {R.shape}")
    return R


def timestep_solve(op, rhs, timeop):
    """Sequential time stepping: one factorization of the full coefficient
    matrix, then column k solves

        (I - P + tau*beta*Kbar) u_k = rhs_k + sum_j alpha_j u_{k-j}.

    The initial values are folded into the first s right-hand-side columns,
    exactly as in the all-at-once formulation, so this is the forward
    substitution of the same block-triangular system.
    """
    L = timeop.ell
    B = _rhs_columns(rhs, op.size, L)
    alphas = timeop.scheme.alphas
    s = timeop.scheme.s
    U = np.empty((op.size, L))
    for k in range(L):
        b = B[:, k].copy()
        for j in range(1, min(s, k) + 1):
            b += alphas[j - 1] * U[:, k - j]
        U[:, k] = op.solve_full(b)
    return OracleSolution(U=U, method="timestep")


def dense_kron_solve(op, rhs, timeop):
    """Assemble the n^d ell x n^d ell all-at-once matrix and solve directly."""
    L = timeop.ell
    if op.size * L > DENSE_KRON_BOUND:
        raise TooLarge(
            f"n^d * ell = {op.size * L} exceeds dense oracle bound {DENSE_KRON_BOUND}")
    B = _rhs_columns(rhs, op.size, L)
    A_big = sp.kron(sp.identity(L), op.a_full(), format="csc") \
        - sp.kron(timeop.sigma, sp.identity(op.size), format="csc")
    u = sparse_solve(sparse_factorize(A_big), B.ravel(order="F"))
    return OracleSolution(U=u.reshape((op.size, L), order="F"), method="dense_kron")


def analytic_example1(x, t):
    """Closed-form solution of the example1 heat problem."""
    return np.sin(x) * np.exp(-t)
