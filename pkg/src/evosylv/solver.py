"""Outer projection solvers and the fast inner solves.

The outer methods (solve_eksm, solve_eksm_separable, solve_rksm) reduce the
space operator by Galerkin projection onto a (tensorized) extended or
rational Krylov subspace and monitor cheap residual-norm formulas. The inner
projected equation

    (I_m + tau*beta*T_m) Y - Y sigma^T = rhs_left rhs_right^T

is solved either column-by-column (one LU, ell triangular solves) or through
the circulant splitting of sigma: diagonalize the small coefficient matrix,
diagonalize the circulant by FFT, and absorb the rank-s corner correction
with the Sherman-Morrison-Woodbury identity. The two inner paths agree to
rounding and are tested against each other.
"""

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .discretization import SpaceOperator, kron_vectors
from .errors import (EigFallback, IndexOutOfRange, NotSeparable,
                     ResonantEigenvalue, ShiftSingular,
                     SingularProjectedMatrix)
from .kernels import DENSE_EIG_BOUND, NonDiagonalizable, dense_eig, fft, ifft
from .krylov import (Breakdown, ExtendedKrylovBasis, RationalKrylovBasis,
                     ShiftState, next_shift, spectral_bounds)

#: Eigenvector conditioning beyond which the FFT+SMW path declines.
SMW_COND_LIMIT = 1e12


@dataclass
class ProjectedProblem:
    """Reduced Sylvester equation data: A_small Y - Y sigma^T = L R^T."""

    A_small: np.ndarray
    rhs_left: np.ndarray
    rhs_right: np.ndarray
    timeop: object


def inner_solve_sequential(prob):
    """Column recursion: one LU of A_small, then ell small solves.

    y_k = A^{-1} (rhs_k + sum_{j=1}^{min(s, k-1)} alpha_j y_{k-j}).
    """
    A = np.asarray(prob.A_small, dtype=float)
    r = A.shape[0]
    L = prob.rhs_right.shape[0]
    if r == 0:
        return np.zeros((0, L))
    scheme = prob.timeop.scheme
    s, alphas = scheme.s, scheme.alphas
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A)
    if np.abs(np.diag(lu)).min() == 0.0:
        raise SingularProjectedMatrix("projected coefficient matrix is singular")
    B = prob.rhs_left @ prob.rhs_right.T
    Y = np.empty((r, L))
    for k in range(L):
        b = B[:, k].copy()
        for j in range(1, min(s, k) + 1):
            b += alphas[j - 1] * Y[:, k - j]
        Y[:, k] = scipy.linalg.lu_solve((lu, piv), b)
    return Y


class SmwCache:
    """Transform data reusable across iterations of one outer solve.

    M = F[e_1..e_s], N = F^{-T}[e_{l-s+1}..e_l] alpha_s^T, plus the
    transformed right factor; all fixed once ell, s and rhs_right are known.
    """

    def __init__(self, timeop, rhs_right):
        self.FRT = fft(np.asarray(rhs_right, dtype=float), axis=0).T
        self.M = fft(timeop.corr_left, axis=0)
        self.N = ifft(timeop.corr_right, axis=0) @ timeop.corr_alpha.T
        self.NM = self.N[:, :, None] * self.M[:, None, :]


def inner_solve_fft_smw(prob, cache=None, max_cond=SMW_COND_LIMIT):
    """Solve the projected equation via eigendecomposition + FFT + SMW.

    No loop over the ell columns: only batched transforms, Hadamard
    products, and one structured solve of order s * r for the corner
    correction. Raises EigFallback / ResonantEigenvalue when the
    decomposition cannot be trusted; callers then use the sequential path.
    """
    timeop = prob.timeop
    A = np.asarray(prob.A_small, dtype=float)
    r = A.shape[0]
    L = prob.rhs_right.shape[0]
    if r == 0:
        return np.zeros((0, L))
    if r > DENSE_EIG_BOUND:
        raise EigFallback(f"projected order {r} exceeds dense eig bound")
    if cache is None:
        cache = SmwCache(timeop, prob.rhs_right)
    try:
        ed = dense_eig(A, max_cond=max_cond)
    except NonDiagonalizable as exc:
        raise EigFallback(str(exc)) from exc
    lam = ed.lambdas
    pi = timeop.circ_eigs
    diff = lam[:, None] - pi[None, :]
    scale = max(np.abs(lam).max(), np.abs(pi).max(), 1.0)
    if np.abs(diff).min() < 1e-14 * scale:
        raise ResonantEigenvalue(
            "an eigenvalue of A_small collides with a circulant eigenvalue")
    H = 1.0 / diff
    s = timeop.scheme.s
    Z = H * ((ed.S_inv @ prob.rhs_left) @ cache.FRT)
    Cb = np.tensordot(H, cache.NM, axes=(1, 0))        # (r, s, s)
    try:
        P = np.linalg.solve(np.eye(s) + Cb, (Z @ cache.N)[:, :, None])[:, :, 0]
    except np.linalg.LinAlgError as exc:
        raise EigFallback(f"SMW correction solve failed: {exc}") from exc
    W = H * (P @ cache.M.T)
    Y = ed.S @ ifft(Z - W, axis=1)
    imag = np.linalg.norm(Y.imag)
    real_norm = np.linalg.norm(Y.real)
    if imag > 1e-10 * max(real_norm, 1e-300):
        raise EigFallback(
            f"imaginary residue {imag:.3e} exceeds 1e-10 of ||Y|| = {real_norm:.3e}")
    return np.ascontiguousarray(Y.real)


def solve_projected(prob, inner="fft_smw", cache=None):
    """Dispatch with automatic fallback to the sequential path."""
    if inner == "sequential":
        return inner_solve_sequential(prob), "sequential"
    if inner != "fft_smw":
        raise ValueError(f"unknown inner solver {inner!r}")
    try:
        return inner_solve_fft_smw(prob, cache=cache), "fft_smw"
    except (EigFallback, ResonantEigenvalue):
        return inner_solve_sequential(prob), "sequential"


# --- factored solutions and reports -------------------------------------------


@dataclass
class FactoredSolution:
    """U = (kron of bases) @ Y, never materialized unless asked."""

    layout: str       # 'full' | 'tensor2d' | 'tensor3d'
    bases: list
    Y: np.ndarray

    @property
    def ell(self):
        return self.Y.shape[1]


@dataclass
class SolveReport:
    iterations: int
    residual_history: list
    delta: float
    converged: bool
    basis_dims: list
    memory_units: int
    wall_time: float
    inner_solver: str


def extract_snapshot(sol, k):
    """Time slice k (1-based) of the approximate solution, factored form."""
    L = sol.Y.shape[1]
    if not 1 <= k <= L:
        raise IndexOutOfRange(f"snapshot index {k} outside 1..{L}")
    y = sol.Y[:, k - 1]
    if sol.layout == "full":
        return sol.bases[0] @ y
    rs = [V.shape[1] for V in sol.bases]
    Yt = y.reshape(rs, order="F")
    if len(sol.bases) == 2:
        V1, V2 = sol.bases
        return (V1 @ Yt @ V2.T).ravel(order="F")
    V1, V2, V3 = sol.bases
    out = np.einsum("ia,jb,kc,abc->ijk", V1, V2, V3, Yt)
    return out.ravel(order="F")


def materialize(sol):
    """Dense n^d x ell solution matrix (desk-scale helper)."""
    if sol.layout == "full":
        return sol.bases[0] @ sol.Y
    big = kron_vectors(sol.bases)
    return big @ sol.Y


def eksm_memory_units(m, width, nd, L):
    """Storage in vector units: 2(m+1)(p+1)(n^d + ell)."""
    return 2 * (m + 1) * width * (nd + L)


def rksm_memory_units(m, width, nd, L):
    """Storage in vector units: (m+1)(p+1)(n^d + ell)."""
    return (m + 1) * width * (nd + L)


def eksm_separable_memory_units(m, widths, n, L):
    """Tensorized storage: 2(m+1) sum_i p_i n + 2^d (m+1)^d prod_i p_i ell."""
    d = len(widths)
    prod = 1
    for w in widths:
        prod *= w
    return 2 * (m + 1) * sum(widths) * n + (2 ** d) * (m + 1) ** d * prod * L


def _zero_solution(layout, op_size, L, d, mem, inner, t0):
    bases = [np.zeros((op_size, 0))] if layout == "full" else \
        [np.zeros((op_size, 0)) for _ in range(d)]
    sol = FactoredSolution(layout, bases, np.zeros((0, L)))
    rep = SolveReport(iterations=1, residual_history=[0.0], delta=0.0,
                      converged=True, basis_dims=[0] * len(bases),
                      memory_units=mem, wall_time=time.perf_counter() - t0,
                      inner_solver=inner)
    return sol, rep


# --- extended Krylov, full space ----------------------------------------------


def solve_eksm(op, rhs, timeop, tol=1e-6, m_max=60, inner="fft_smw",
               history=None):
    """Left-projection extended Krylov solve of the all-at-once equation.

    Stops when tau*beta ||E_{m+1}^T Tbar_m Y_m||_F <= delta * tol; on an
    invariant-subspace breakdown the coupling block is empty and the
    residual vanishes (lucky termination).
    """
    t0 = time.perf_counter()
    tb = op.tau_beta
    L = timeop.ell
    w = rhs.width
    delta = rhs.initial_norm()
    if delta == 0.0:
        return _zero_solution("full", op.size, L, 1,
                              eksm_memory_units(1, w, op.size, L), inner, t0)
    basis = ExtendedKrylovBasis(op, rhs.left)
    cache = SmwCache(timeop, rhs.right) if inner == "fft_smw" else None
    PL = basis.V.T @ rhs.left
    res_hist, used_inner = [], set()
    converged = False
    broke = False
    Y = None
    m = 0
    for m in range(1, m_max + 1):
        if not broke and basis.n_blocks < m + 1:
            r_before = basis.width
            try:
                basis.step()
                PL = np.vstack([PL, basis.V[:, r_before:].T @ rhs.left])
            except Breakdown:
                broke = True
        m_eff = min(m, basis.n_blocks)
        T_m, I_m, C = basis.projections(m_eff)
        r = T_m.shape[0]
        prob = ProjectedProblem(A_small=I_m + tb * T_m, rhs_left=PL[:r],
                                rhs_right=rhs.right, timeop=timeop)
        Y, used = solve_projected(prob, inner, cache)
        used_inner.add(used)
        rel = tb * np.linalg.norm(C @ Y) / delta
        res_hist.append(rel)
        if history is not None:
            history.append({"m": m, "r": r, "Y": Y.copy(), "rel_residual": rel})
        if rel <= tol:
            converged = True
            break
        if broke:
            break
    r = Y.shape[0]
    sol = FactoredSolution("full", [basis.V[:, :r].copy()], Y)
    rep = SolveReport(iterations=m, residual_history=res_hist, delta=delta,
                      converged=converged, basis_dims=[r],
                      memory_units=eksm_memory_units(m, w, op.size, L),
                      wall_time=time.perf_counter() - t0,
                      inner_solver="fft_smw" if used_inner == {"fft_smw"} else "sequential")
    return sol, rep


# --- extended Krylov, tensorized ------------------------------------------------


def _one_dim_operator(factor, n, tau_beta):
    return SpaceOperator(d=1, n=n, matrix=sp.csr_matrix(factor),
                         boundary_indices=np.array([0, n - 1]),
                         tau_beta=tau_beta, factors=[sp.csr_matrix(factor)])


def _kron_chain(mats):
    out = mats[-1]
    for M in reversed(mats[:-1]):
        out = np.kron(out, M)
    return out


def solve_eksm_separable(op, rhs, timeop, tol=1e-6, m_max=60,
                         inner="fft_smw", history=None):
    """Tensorized extended Krylov solve: one 1D subspace per dimension.

    Requires a pure Kronecker-sum operator and separable right-hand-side
    factors. The reduced coefficient is the Kronecker sum of the small
    per-dimension projections; the residual combines one coupling term per
    dimension (squares add, the cross terms vanish by orthogonality).
    """
    t0 = time.perf_counter()
    if op.factors is None:
        raise NotSeparable("space operator is not a Kronecker sum")
    if rhs.separable is None:
        raise NotSeparable("right-hand side carries no separable factors")
    d, n = op.d, op.n
    if d < 2:
        raise NotSeparable("tensorized path needs d >= 2")
    tb = op.tau_beta
    L = timeop.ell
    groups = rhs.separable
    blocks = []
    for i in range(d):
        cols = [np.asarray(g[0][i], dtype=float).reshape(n, -1) for g in groups]
        blocks.append(np.hstack(cols))
    widths = [b.shape[1] for b in blocks]
    delta = rhs.initial_norm()
    if delta == 0.0:
        return _zero_solution("tensor%dd" % d, n, L, d,
                              eksm_separable_memory_units(1, widths, n, L), inner, t0)
    ops1d = [_one_dim_operator(op.factors[i], n, tb) for i in range(d)]
    bases = [ExtendedKrylovBasis(ops1d[i], blocks[i]) for i in range(d)]
    frozen = [False] * d
    cache = SmwCache(timeop, rhs.right) if inner == "fft_smw" else None

    res_hist, used_inner = [], set()
    converged = False
    Y = None
    m = 0
    for m in range(1, m_max + 1):
        for i in range(d):
            if not frozen[i] and bases[i].n_blocks < m + 1:
                try:
                    bases[i].step()
                except Breakdown:
                    frozen[i] = True
        projs = [bases[i].projections(min(m, bases[i].n_blocks)) for i in range(d)]
        rs = [p[0].shape[0] for p in projs]
        eyes = [np.eye(r) for r in rs]
        A_small = _kron_chain([p[1] for p in projs])
        for i in range(d):
            mats = list(eyes)
            mats[i] = projs[i][0]
            A_small = A_small + tb * _kron_chain(mats)
        proj_groups = []
        for g in groups:
            pg = [bases[i].V[:, :rs[i]].T @ np.asarray(g[0][i], dtype=float).reshape(n, -1)
                  for i in range(d)]
            proj_groups.append(kron_vectors(pg))
        rhs_left_proj = np.hstack(proj_groups)
        prob = ProjectedProblem(A_small=A_small, rhs_left=rhs_left_proj,
                                rhs_right=rhs.right, timeop=timeop)
        Y, used = solve_projected(prob, inner, cache)
        used_inner.add(used)
        Yt = Y.reshape(tuple(reversed(rs)) + (L,))
        sq = 0.0
        for i in range(d):
            C = projs[i][2]
            if C.shape[0]:
                contracted = np.tensordot(C, Yt, axes=(1, d - 1 - i))
                sq += float((contracted ** 2).sum())
        rel = tb * np.sqrt(sq) / delta
        res_hist.append(rel)
        if history is not None:
            history.append({"m": m, "r": rs, "Y": Y.copy(), "rel_residual": rel})
        if rel <= tol:
            converged = True
            break
        if all(frozen):
            break
    rs = [p[0].shape[0] for p in projs]
    sol = FactoredSolution("tensor%dd" % d,
                           [bases[i].V[:, :rs[i]].copy() for i in range(d)], Y)
    rep = SolveReport(iterations=m, residual_history=res_hist, delta=delta,
                      converged=converged, basis_dims=rs,
                      memory_units=eksm_separable_memory_units(m, widths, n, L),
                      wall_time=time.perf_counter() - t0,
                      inner_solver="fft_smw" if used_inner == {"fft_smw"} else "sequential")
    return sol, rep


# --- rational Krylov ------------------------------------------------------------


def _explicit_residual_norm(op, V, Y, rhs, timeop):
    U = V @ Y
    R = op.a_full() @ U - U @ timeop.sigma.T.toarray() \
        - rhs.left @ rhs.right.T
    return float(np.linalg.norm(R))


def solve_rksm(op, rhs, timeop, tol=1e-6, m_max=60, inner="fft_smw",
               history=None, seed=0):
    """Rational Krylov solve with adaptive real shifts.

    One sparse factorization of (Kbar - xi I) per iteration; the residual
    norm follows the rational Arnoldi relation and costs O(n m (p+1)) via
    the trace identity ||G C||_F^2 = trace((G^T G)(C C^T)).
    """
    t0 = time.perf_counter()
    tb = op.tau_beta
    L = timeop.ell
    w = rhs.width
    delta = rhs.initial_norm()
    if delta == 0.0:
        return _zero_solution("full", op.size, L, 1,
                              rksm_memory_units(1, w, op.size, L), inner, t0)
    s_min, s_max = spectral_bounds(op, seed=seed)
    state = ShiftState(s_min=s_min, s_max=s_max)
    basis = RationalKrylovBasis(op, rhs.left)
    cache = SmwCache(timeop, rhs.right) if inner == "fft_smw" else None
    PL = basis.V.T @ rhs.left
    res_hist, used_inner = [], set()
    converged = False
    broke = False
    Y = None
    m = 0
    for m in range(1, m_max + 1):
        if not broke and basis.n_blocks < m + 1:
            r_now = basis.state.block_bounds[m]
            state.ritz_values = np.linalg.eigvals(basis.state.T_full[:r_now, :r_now])
            xi = next_shift(state)
            r_before = basis.width
            try:
                for attempt in range(4):
                    try:
                        basis.step(xi)
                        break
                    except ShiftSingular:
                        xi = xi * (1.0 + 1e-6) + 1e-12 * state.s_max
                else:
                    raise ShiftSingular(f"could not place shift near {xi}")
                state.used_shifts.append(xi)
                if basis.width > r_before:
                    PL = np.vstack([PL, basis.V[:, r_before:].T @ rhs.left])
            except Breakdown:
                broke = True
        m_eff = min(m, basis.n_blocks)
        T_m, I_m, _ = basis.projections(m_eff)
        r = T_m.shape[0]
        prob = ProjectedProblem(A_small=I_m + tb * T_m, rhs_left=PL[:r],
                                rhs_right=rhs.right, timeop=timeop)
        Y, used = solve_projected(prob, inner, cache)
        used_inner.add(used)
        if broke:
            rel = 0.0
        elif basis.mid_deflated and op.size * L <= 20_000_000:
            rel = _explicit_residual_norm(op, basis.V[:, :r], Y, rhs, timeop) / delta
        else:
            Hbar = basis.Hbar
            Hm = Hbar[:r, :r]
            EH = Hbar[r:, :r]
            try:
                Cc = EH @ np.linalg.solve(Hm, Y)
            except np.linalg.LinAlgError:
                Cc = None
            if Cc is None:
                rel = _explicit_residual_norm(op, basis.V[:, :r], Y, rhs, timeop) / delta
            else:
                Vlast, KVlast = basis.last_block()
                Vm = basis.V[:, :r]
                G = state.used_shifts[-1] * Vlast - (KVlast - Vm @ (Vm.T @ KVlast))
                val = np.trace((G.T @ G) @ (Cc @ Cc.T))
                rel = tb * np.sqrt(max(val, 0.0)) / delta
        res_hist.append(rel)
        if history is not None:
            history.append({"m": m, "r": r, "Y": Y.copy(), "rel_residual": rel,
                            "shifts": list(state.used_shifts)})
        if rel <= tol:
            converged = True
            break
        if broke:
            break
    r = Y.shape[0]
    sol = FactoredSolution("full", [basis.V[:, :r].copy()], Y)
    rep = SolveReport(iterations=m, residual_history=res_hist, delta=delta,
                      converged=converged, basis_dims=[r],
                      memory_units=rksm_memory_units(m, w, op.size, L),
                      wall_time=time.perf_counter() - t0,
                      inner_solver="fft_smw" if used_inner == {"fft_smw"} else "sequential")
    return sol, rep
