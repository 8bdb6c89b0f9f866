import numpy as np
import pytest
import scipy.sparse as sp

from evosylv.discretization import (Grid, assemble_rhs, assemble_space_operator,
                                    boundary_index_set, compress_snapshots,
                                    first_derivative_1d, kron_vectors,
                                    laplacian_1d, modify_for_boundary,
                                    problem_spec, sample_space_function,
                                    square_grid)
from evosylv.errors import MissingInitialValues, NonSeparableWind
from evosylv.presets import get_preset
from evosylv.timeops import bdf_coefficients

rng = np.random.default_rng(5)


def heat_spec(d, n, ell, u0=None, g=None, f=None, s=1, T=1.0, **kw):
    grid = square_grid(d, n, ell, T=T)
    return problem_spec("heat", grid, s=s, u0=u0, g=g, f=f, **kw)


class TestOneDimOperators:
    def test_laplacian_stencil(self):
        K = laplacian_1d(5, 0.25).toarray()
        assert np.allclose(K[2], [0, -16, 32, -16, 0])
        assert np.allclose(K[0], 0) and np.allclose(K[4], 0)

    def test_derivative_stencil(self):
        B = first_derivative_1d(5, 0.25).toarray()
        assert np.allclose(B[2], [0, -2, 0, 2, 0])

    def test_laplacian_second_order_on_sine(self):
        n = 101
        x = np.linspace(0, np.pi, n)
        h = x[1] - x[0]
        K = laplacian_1d(n, h)
        # negative laplacian of sin is sin, to O(h^2)
        err = (K @ np.sin(x))[1:-1] - np.sin(x)[1:-1]
        assert np.abs(err).max() < 0.2 * h**2

    def test_modify_for_boundary_corners(self):
        K = modify_for_boundary(laplacian_1d(4, 1.0), 0.5).toarray()
        assert K[0, 0] == 2.0 and K[3, 3] == 2.0
        assert np.allclose(K[0, 1:], 0) and np.allclose(K[3, :3], 0)

    def test_boundary_rows_act_as_identity(self):
        n, tb = 6, 0.37
        K = modify_for_boundary(laplacian_1d(n, 0.2), tb)
        A_full = np.diag([0.0] + [1.0] * (n - 2) + [0.0]) + tb * K.toarray()
        assert np.allclose(A_full[0], np.eye(n)[0])
        assert np.allclose(A_full[n - 1], np.eye(n)[n - 1])
        P = np.zeros((n, n))
        P[0, 0] = P[n - 1, n - 1] = 1.0
        assert np.allclose(P @ A_full, P)

    @pytest.mark.parametrize("n", [3, 5, 8])
    @pytest.mark.parametrize("tb", [1e-3, 0.5, 10.0])
    def test_modified_matrix_nonsingular(self, n, tb):
        K = modify_for_boundary(laplacian_1d(n, 1.0 / (n - 1)), tb).toarray()
        assert abs(np.linalg.det(K)) > 0


class TestSpaceOperatorAssembly:
    def test_2d_heat_is_kron_sum(self):
        spec = heat_spec(2, 3, 4, u0=lambda x, y: x * y)
        op = assemble_space_operator(spec)
        K1 = op.factors[0].toarray()
        expected = np.kron(K1, np.eye(3)) + np.kron(np.eye(3), K1)
        assert op.matrix.shape == (9, 9)
        assert np.allclose(op.matrix.toarray(), expected)

    def test_1d_zero_wind_reduces_to_scaled_stiffness(self):
        grid = square_grid(1, 8, 4)
        zero = lambda x: np.zeros_like(x)
        spec = problem_spec("convection-diffusion", grid, epsilon=1.0,
                            wind=[(zero,)], u0=lambda x: x)
        op = assemble_space_operator(spec)
        K1 = modify_for_boundary(laplacian_1d(8, grid.h), spec.tau_beta)
        assert np.allclose(op.matrix.toarray(), K1.toarray())

    def test_1d_zero_wind_viscosity_scales_interior_only(self):
        grid = square_grid(1, 8, 4)
        zero = lambda x: np.zeros_like(x)
        eps = 0.3
        spec = problem_spec("convection-diffusion", grid, epsilon=eps,
                            wind=[(zero,)], u0=lambda x: x)
        K = assemble_space_operator(spec).matrix.toarray()
        K1 = modify_for_boundary(laplacian_1d(8, grid.h), spec.tau_beta).toarray()
        assert np.allclose(K[1:-1], eps * K1[1:-1])
        assert K[0, 0] == K1[0, 0] and K[-1, -1] == K1[-1, -1]

    def test_2d_wind_against_stencil_oracle(self):
        # wind (y, -x): assemble and compare every interior row against a
        # direct loop over the five-point stencil
        n = 4
        grid = square_grid(2, n, 4)
        spec = problem_spec(
            "convection-diffusion", grid, epsilon=0.7,
            wind=[(lambda x: np.ones_like(x), lambda y: y),
                  (lambda x: -x, lambda y: np.ones_like(y))],
            u0=lambda x, y: x * y)
        op = assemble_space_operator(spec)
        K = op.matrix.toarray()
        h = grid.h
        xs = grid.axes()[0]
        eps = 0.7

        def idx(i, j):
            return i + n * j

        for i in range(1, n - 1):
            for j in range(1, n - 1):
                row = np.zeros(n * n)
                # -eps * laplacian (negative laplacian convention)
                row[idx(i, j)] += 4 * eps / h**2
                for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    row[idx(i + di, j + dj)] -= eps / h**2
                # w1 = y d/dx, centered
                w1 = xs[j]
                row[idx(i + 1, j)] += w1 / (2 * h)
                row[idx(i - 1, j)] -= w1 / (2 * h)
                # w2 = -x d/dy
                w2 = -xs[i]
                row[idx(i, j + 1)] += w2 / (2 * h)
                row[idx(i, j - 1)] -= w2 / (2 * h)
                assert np.allclose(K[idx(i, j)], row), (i, j)

    def test_wind_shape_validated(self):
        grid = square_grid(2, 4, 4)
        with pytest.raises(NonSeparableWind):
            problem_spec("convection-diffusion", grid,
                         wind=[(lambda x: x,)], u0=lambda x, y: x)

    def test_bad_dimension_rejected(self):
        with pytest.raises(Exception):
            Grid(d=4, n=4, domain=((0, 1),) * 4, T=1.0, ell=2)


class TestBoundaryStructure:
    def test_interior_indicator_complements_boundary(self):
        for d, n in ((1, 5), (2, 4), (3, 3)):
            bnd = boundary_index_set(n, d)
            interior = np.setdiff1d(np.arange(n**d), bnd)
            grid_pts = np.array(
                np.unravel_index(interior, (n,) * d, order="F")).T
            assert ((grid_pts > 0) & (grid_pts < n - 1)).all()
            expected = sum((n**d - (n - 2)**d,))
            assert len(bnd) == n**d - (n - 2)**d

    def test_bc_constraint_exact_1d(self):
        spec = heat_spec(1, 6, 5, u0=np.sin)
        op = assemble_space_operator(spec)
        A = op.a_full().toarray()
        P = np.zeros((6, 6))
        P[0, 0] = P[5, 5] = 1.0
        assert np.allclose(P @ A, P)

    @pytest.mark.parametrize("d,n", [(2, 4), (2, 6), (3, 4)])
    def test_bc_constraint_with_face_terms(self, d, n):
        # A_full boundary rows equal identity rows plus the correction
        # tau*beta*[P1 (x) K1-terms] confined to boundary faces
        spec = heat_spec(d, n, 5, u0=lambda *x: sum(x))
        op = assemble_space_operator(spec)
        tb = spec.tau_beta
        A = op.a_full().toarray()
        K1 = op.factors[0].toarray()
        P1 = np.zeros((n, n))
        P1[0, 0] = P1[n - 1, n - 1] = 1.0
        Q1 = np.eye(n) - P1
        if d == 2:
            L = tb * (np.kron(P1, K1) + np.kron(Q1 @ K1, P1))
            P = np.kron(P1, np.eye(n)) + np.kron(Q1, P1)
        else:
            Iy = np.eye(n)
            L = tb * (np.kron(P1, np.kron(K1, Iy)) + np.kron(P1, np.kron(Iy, K1))
                      + np.kron(Q1 @ K1, np.kron(P1, Iy)) + np.kron(Q1, np.kron(P1, K1))
                      + np.kron(Q1 @ K1, np.kron(Q1, P1)) + np.kron(Q1, np.kron(Q1 @ K1, P1)))
            P = np.kron(P1, np.kron(Iy, Iy)) + np.kron(Q1, np.kron(P1, Iy)) \
                + np.kron(Q1, np.kron(Q1, P1))
        # kron slot order is (slowest .. fastest) = (dim d .. dim 1)
        assert np.allclose(P @ A, P + P @ L)

    @pytest.mark.parametrize("preset,n,kw", [
        ("example2", 5, {}), ("example3", 5, {"epsilon": 0.5}), ("example4", 4, {}),
    ])
    def test_defect_support_confined_to_boundary(self, preset, n, kw):
        spec = get_preset(preset, n, 6, **kw)
        op = assemble_space_operator(spec)
        D = op.boundary_defect().tocoo()
        assert np.isin(np.unique(D.col), op.boundary_indices).all()

    def test_heat_full_matrix_spectrum_positive(self):
        for d, n in ((1, 8), (2, 5), (3, 3)):
            spec = heat_spec(d, n, 7, u0=lambda *x: sum(x))
            A = assemble_space_operator(spec).a_full().toarray()
            lam = np.linalg.eigvals(A)
            assert lam.real.min() > 0
            assert np.abs(lam.imag).max() < 1e-8 * np.abs(lam.real).max()


class TestOrderingConvention:
    def test_first_coordinate_fastest(self):
        grid = square_grid(2, 4, 2)
        phi = lambda x: np.cos(x)
        psi = lambda y: y**2 + 1
        samples = sample_space_function(grid, lambda x, y: phi(x) * psi(y))
        x = grid.axes()[0]
        expected = kron_vectors([phi(x), psi(x)])[:, 0]
        assert np.allclose(samples, expected)

    def test_3d_sampling_matches_kron(self):
        grid = square_grid(3, 3, 2)
        f1, f2, f3 = (lambda x: x + 1), (lambda y: 2 * y - 1), (lambda z: z**2 + 0.5)
        samples = sample_space_function(grid, lambda x, y, z: f1(x) * f2(y) * f3(z))
        ax = grid.axes()[0]
        assert np.allclose(samples, kron_vectors([f1(ax), f2(ax), f3(ax)])[:, 0])


class TestRhsAssembly:
    def test_homogeneous_heat(self):
        spec = heat_spec(1, 8, 5, u0=np.sin)
        op = assemble_space_operator(spec)
        rhs = assemble_rhs(spec, op)
        assert rhs.width == 1
        assert np.allclose(rhs.left[:, 0], np.sin(spec.grid.axes()[0]))
        e1 = np.zeros(5)
        e1[0] = 1.0
        assert np.allclose(rhs.right[:, 0], e1)

    def test_time_constant_wall_telescopes_to_zero(self):
        # g = 1 on the left wall: beyond the initial column the source part
        # vanishes and the wall value enters through u0 only
        wall = lambda x: np.where(x == 0.0, 1.0, 0.0)
        spec = heat_spec(1, 8, 6, u0=wall, g=lambda x, t: wall(x))
        op = assemble_space_operator(spec)
        rhs = assemble_rhs(spec, op)
        assert rhs.width == 1          # source part compressed away entirely
        assert rhs.left[0, 0] == 1.0
        dense = rhs.dense()
        assert np.allclose(dense[:, 1:], 0.0)

    def test_example1_rhs_is_rank_one(self):
        spec = get_preset("example1", 32, 8)
        op = assemble_space_operator(spec)
        rhs = assemble_rhs(spec, op)
        assert rhs.width == 1
        assert np.linalg.matrix_rank(rhs.dense(), tol=1e-12) == 1

    def test_bdf_initial_columns(self):
        spec = get_preset("example1", 16, 12, s=3)
        op = assemble_space_operator(spec)
        rhs = assemble_rhs(spec, op)
        s, a = 3, bdf_coefficients(3).alphas
        tau = spec.grid.tau
        x = spec.grid.axes()[0]
        us = [np.sin(x) * np.exp(-k * tau) for k in range(s)]
        # c_q = sum_{i=q}^{s} alpha_i u_{s+q-1-i}, 1-based q
        for q in range(1, s + 1):
            expected = sum(a[i - 1] * us[s + q - 1 - i] for i in range(q, s + 1))
            assert np.allclose(rhs.left[:, q - 1], expected)
        L = 12 - s + 1
        assert np.allclose(rhs.right[:s, :s], np.eye(s))
        assert rhs.right.shape == (L, s)

    def test_missing_initial_values(self):
        spec = heat_spec(1, 8, 8, u0=np.sin, s=2)
        op = assemble_space_operator(spec)
        with pytest.raises(MissingInitialValues):
            assemble_rhs(spec, op)

    def test_separable_source_groups(self):
        spec = get_preset("example2_1", 4, 8)
        op = assemble_space_operator(spec)
        rhs = assemble_rhs(spec, op)
        assert rhs.separable is not None
        recon = np.hstack([kron_vectors(g[0]) for g in rhs.separable])
        assert np.linalg.norm(recon - rhs.left) <= 1e-12 * max(np.linalg.norm(rhs.left), 1)

    def test_separable_matches_dense_sampling(self):
        spec = get_preset("example2_1", 4, 8)
        op = assemble_space_operator(spec)
        rhs = assemble_rhs(spec, op)
        tau = spec.grid.tau
        cols = []
        for k in range(1, 9):
            cols.append(spec.tau_beta * sample_space_function(
                spec.grid, lambda x, y, z: spec.f(x, y, z, k * tau)))
        assert np.allclose(rhs.dense(), np.column_stack(cols))

    def test_initial_norm_matches_dense(self):
        spec = get_preset("example2_1", 4, 8)
        op = assemble_space_operator(spec)
        rhs = assemble_rhs(spec, op)
        assert abs(rhs.initial_norm() - np.linalg.norm(rhs.dense())) \
            <= 1e-12 * rhs.initial_norm()

    def test_initial_norm_three_term_formula(self):
        # delta^2 = u0'u0 + tb^2 trace((F1'F1)(F2'F2)) + 2 tb f1'u0
        n, L, p, tb = 20, 9, 3, 0.05
        u0 = rng.standard_normal(n)
        F1 = rng.standard_normal((n, p))
        F2 = rng.standard_normal((L, p))
        from evosylv.discretization import LowRankRhs
        e1 = np.zeros(L)
        e1[0] = 1.0
        rhs = LowRankRhs(left=np.column_stack([u0, F1]),
                         right=np.column_stack([e1, tb * F2]))
        f1 = F1 @ F2[0]
        expected = np.sqrt(u0 @ u0 + tb**2 * np.trace((F1.T @ F1) @ (F2.T @ F2))
                           + 2 * tb * f1 @ u0)
        assert abs(rhs.initial_norm() - expected) <= 1e-12 * expected


class TestCompressSnapshots:
    def test_rank_one(self):
        F = np.outer(rng.standard_normal(12), rng.standard_normal(7))
        F1, F2 = compress_snapshots(F, 1e-12)
        assert F1.shape[1] == 1
        assert np.linalg.norm(F - F1 @ F2.T) <= 1e-12 * np.linalg.norm(F)

    def test_separable_function_is_rank_one(self):
        x = np.linspace(0, 1, 15)
        t = np.linspace(0, 2, 10)
        F = np.outer(x * (1 - x), 1 + np.sin(np.pi * t / 2))
        F1, _ = compress_snapshots(F, 1e-10)
        assert F1.shape[1] == 1

    def test_random_tolerance(self):
        F = rng.standard_normal((20, 15))
        F1, F2 = compress_snapshots(F, 1e-10)
        assert np.linalg.norm(F - F1 @ F2.T) <= 1e-10 * np.linalg.norm(F)

    def test_zero_matrix(self):
        F1, F2 = compress_snapshots(np.zeros((4, 3)), 1e-10)
        assert F1.shape == (4, 0) and F2.shape == (3, 0)
