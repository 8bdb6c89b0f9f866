"""Block extended and rational Arnoldi bases with deflation.

Both basis classes keep, alongside the orthonormal columns V:

* ``KV``      the cached products Kbar @ V (drives the explicit projection
              T = V^T Kbar V and the cheap residual couplings),
* ``T_full``  the explicit projection, grown incrementally,
* ``Vb``      the rows of V at boundary indices, from which the projection
              of the interior indicator is I - Vb^T Vb.

The explicit projection is used instead of recursion formulas: the 1/(tau
beta) boundary entries make the recursions lose accuracy for small tau.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import Breakdown, ShiftSingular, SingularMatrix, SingularOperator
from .kernels import sparse_factorize, sparse_solve

DEFLATION_TOL = 1e-12


def _cgs2_append(V, cand, deftol):
    """Orthogonalize candidate columns against V (and each other) with two
    classical Gram-Schmidt passes; drop columns whose remainder falls below
    deftol times the candidate block norm.

    Returns (new columns, accepted column indices, coefficient matrix). The
    coefficient matrix C satisfies cand = [V, Vnew] @ C up to deflation.
    """
    n, r0 = V.shape
    w = cand.shape[1]
    scale = np.linalg.norm(cand)
    if scale == 0.0:
        return np.zeros((n, 0)), [], np.zeros((r0, w))
    newcols = []
    coeffs = np.zeros((r0 + w, w))
    accepted = []
    for j in range(w):
        c = cand[:, j].copy()
        r_now = r0 + len(newcols)
        h = np.zeros(r_now)
        for _ in range(2):
            if r0:
                t = V.T @ c
                c -= V @ t
                h[:r0] += t
            for i, q in enumerate(newcols):
                t = q @ c
                c -= t * q
                h[r0 + i] += t
        nrm = np.linalg.norm(c)
        coeffs[:r_now, j] = h
        if nrm > deftol * scale:
            coeffs[r_now, j] = nrm
            newcols.append(c / nrm)
            accepted.append(j)
    r1 = r0 + len(newcols)
    Vnew = np.column_stack(newcols) if newcols else np.zeros((n, 0))
    return Vnew, accepted, coeffs[:r1, :]


class _ProjectionState:
    """Shared bookkeeping of V, KV, T_full and boundary rows."""

    def __init__(self, op, deftol):
        self.op = op
        self.deftol = deftol
        n = op.size if hasattr(op, "size") else op.matrix.shape[0]
        self.n = n
        self.V = np.zeros((n, 0))
        self.KV = np.zeros((n, 0))
        self.T_full = np.zeros((0, 0))
        self.Vb = np.zeros((len(op.boundary_indices), 0))
        self.block_bounds = [0]

    @property
    def width(self):
        return self.block_bounds[-1]

    @property
    def n_blocks(self):
        return len(self.block_bounds) - 1

    def append_block(self, Vnew, KVnew=None):
        r0 = self.width
        if KVnew is None:
            KVnew = self.op.matrix @ Vnew
        r1 = r0 + Vnew.shape[1]
        T = np.zeros((r1, r1))
        T[:r0, :r0] = self.T_full
        T[:r0, r0:] = self.V.T @ KVnew
        T[r0:, :r0] = Vnew.T @ self.KV
        T[r0:, r0:] = Vnew.T @ KVnew
        self.T_full = T
        self.V = np.hstack([self.V, Vnew])
        self.KV = np.hstack([self.KV, KVnew])
        self.Vb = np.hstack([self.Vb, Vnew[self.op.boundary_indices, :]])
        self.block_bounds.append(r1)

    def projections(self, m):
        """(T_m, I_m, coupling) for the first m blocks.

        The coupling is the next-block row slab of the projection,
        V_{m+1}^T Kbar V_m; empty when block m+1 does not exist (invariant
        subspace after breakdown).
        """
        r = self.block_bounds[m]
        I_m = np.eye(r) - self.Vb[:, :r].T @ self.Vb[:, :r]
        T_m = self.T_full[:r, :r]
        if m + 1 <= self.n_blocks:
            rn = self.block_bounds[m + 1]
            coupling = self.T_full[r:rn, :r]
        else:
            coupling = np.zeros((0, r))
        return T_m, I_m, coupling


class ExtendedKrylovBasis:
    """Block basis of EK_m(Kbar, B) = span[B, Kbar^{-1}B, Kbar B, ...].

    Each step multiplies the direct half of the previous block by Kbar and
    the inverse half by Kbar^{-1}, then orthogonalizes twice against the
    whole basis. Deflated directions shrink the corresponding half.
    """

    kind = "extended"

    def __init__(self, op, B, deflation_tol=DEFLATION_TOL):
        self.state = _ProjectionState(op, deflation_tol)
        self.op = op
        B = np.asarray(B, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        if np.linalg.norm(B) == 0.0:
            raise ValueError("starting block must be nonzero")
        try:
            Binv = op.solve(B)
        except SingularMatrix as exc:
            raise SingularOperator(str(exc)) from exc
        cand = np.hstack([B, Binv])
        Vnew, accepted, _ = _cgs2_append(self.state.V, cand, deflation_tol)
        if Vnew.shape[1] == 0:
            raise Breakdown("starting block is zero")
        w = B.shape[1]
        self._splits = [sum(1 for j in accepted if j < w)]
        self.state.append_block(Vnew)
        self.gamma = Vnew.T @ B

    @property
    def width(self):
        return self.state.width

    @property
    def n_blocks(self):
        return self.state.n_blocks

    @property
    def V(self):
        return self.state.V

    def projections(self, m):
        return self.state.projections(m)

    def step(self):
        """Append block m+1; raises Breakdown when nothing new survives."""
        st = self.state
        lo, hi = st.block_bounds[-2], st.block_bounds[-1]
        ndir = self._splits[-1]
        parts = []
        if ndir > 0:
            parts.append(st.KV[:, lo:lo + ndir])  # Kbar @ direct half, cached
        if hi - lo - ndir > 0:
            parts.append(self.op.solve(st.V[:, lo + ndir:hi]))
        if not parts:
            raise Breakdown("previous block is empty")
        n_dir_cand = parts[0].shape[1] if ndir > 0 else 0
        cand = np.hstack(parts)
        Vnew, accepted, _ = _cgs2_append(st.V, cand, st.deftol)
        if Vnew.shape[1] == 0:
            raise Breakdown("new block entirely deflated: invariant subspace")
        self._splits.append(sum(1 for j in accepted if j < n_dir_cand))
        st.append_block(Vnew)


class RationalKrylovBasis:
    """Block rational Krylov basis with recorded orthonormalization
    coefficients Hbar (block upper Hessenberg), as needed by the residual
    formula of the rational method."""

    kind = "rational"

    def __init__(self, op, B, deflation_tol=DEFLATION_TOL):
        self.state = _ProjectionState(op, deflation_tol)
        self.op = op
        B = np.asarray(B, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        if np.linalg.norm(B) == 0.0:
            raise ValueError("starting block must be nonzero")
        Vnew, _, _ = _cgs2_append(self.state.V, B, deflation_tol)
        if Vnew.shape[1] == 0:
            raise Breakdown("starting block is zero")
        self.state.append_block(Vnew)
        self.gamma = Vnew.T @ B
        self.Hbar = np.zeros((self.state.width, 0))
        self.shifts = []
        self.mid_deflated = False

    @property
    def width(self):
        return self.state.width

    @property
    def n_blocks(self):
        return self.state.n_blocks

    @property
    def V(self):
        return self.state.V

    def projections(self, m):
        return self.state.projections(m)

    def last_block(self):
        lo, hi = self.state.block_bounds[-2], self.state.block_bounds[-1]
        return self.state.V[:, lo:hi], self.state.KV[:, lo:hi]

    def step(self, shift):
        """Append (Kbar - shift I)^{-1} (last block), orthonormalized."""
        st = self.state
        lo, hi = st.block_bounds[-2], st.block_bounds[-1]
        A = self.op.matrix
        try:
            fact = sparse_factorize(A - shift * sp.identity(A.shape[0], format="csc"))
            cand = sparse_solve(fact, st.V[:, lo:hi])
        except SingularMatrix as exc:
            raise ShiftSingular(f"shift {shift} hits the spectrum") from exc
        r0 = st.width
        Vnew, accepted, coeffs = _cgs2_append(st.V, cand, st.deftol)
        if Vnew.shape[1] == 0:
            raise Breakdown("new block entirely deflated: invariant subspace")
        if len(accepted) < cand.shape[1]:
            self.mid_deflated = True
        r1 = r0 + Vnew.shape[1]
        Hext = np.zeros((r1, self.Hbar.shape[1] + cand.shape[1]))
        Hext[:r0, :self.Hbar.shape[1]] = self.Hbar
        Hext[:coeffs.shape[0], self.Hbar.shape[1]:] = coeffs
        self.Hbar = Hext
        self.shifts.append(float(shift))
        st.append_block(Vnew)


# --- adaptive shifts ---------------------------------------------------------


@dataclass
class ShiftState:
    """Spectral interval estimates plus the shift/Ritz history."""

    s_min: float
    s_max: float
    used_shifts: list = field(default_factory=list)
    ritz_values: np.ndarray = None


def spectral_bounds(op, seed=0, iterations=12):
    """Rough [s_min, s_max] for the spectrum of Kbar.

    Upper end from Gershgorin rows of the assembled matrix; lower end from a
    few inverse power iterations (Rayleigh quotient, real part).
    """
    A = op.matrix.tocsr()
    diag = A.diagonal()
    absrow = np.asarray(np.abs(A).sum(axis=1)).ravel()
    s_max = float(np.max(diag + (absrow - np.abs(diag))))
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.shape[0])
    v /= np.linalg.norm(v)
    for _ in range(iterations):
        w = op.solve(v)
        nw = np.linalg.norm(w)
        if not np.isfinite(nw) or nw == 0.0:
            break
        v = w / nw
    rq = float(v @ (A @ v))
    s_min = max(abs(rq), 1e-12 * s_max)
    s_min = min(s_min, 0.5 * s_max)
    return s_min, s_max


def next_shift(state, grid_points=1000):
    """Greedy adaptive shift: maximize prod|x - xi_used| / prod|x - ritz|
    over a grid on the mirrored spectral interval [-s_max, -s_min]; the
    first shift is -s_min.

    The poles sit on the far side of the spectrum because the time-coupling
    matrix is nilpotent: the solution columns are inverse powers of the full
    coefficient matrix, i.e. resolvents of Kbar at negative points, and
    in-spectrum poles stall the method.
    """
    if not state.used_shifts:
        return -state.s_min
    xs = -np.linspace(state.s_min, state.s_max, grid_points)
    with np.errstate(divide="ignore"):
        logf = np.zeros_like(xs)
        for xi in state.used_shifts:
            logf += np.log(np.abs(xs - xi))
        if state.ritz_values is not None and len(state.ritz_values):
            for th in state.ritz_values:
                logf -= np.log(np.abs(xs - th))
    for xi in state.used_shifts:
        logf[np.isclose(xs, xi, rtol=0, atol=1e-14 * max(1.0, abs(xi)))] = -np.inf
    return float(xs[int(np.argmax(logf))])
