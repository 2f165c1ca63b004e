"""Null-space subproblem solves against hand values and the dense oracle."""

import numpy as np
import pytest
import scipy.linalg

from stochsqp import (
    CurvatureError,
    InconsistentStepError,
    KktInputs,
    RankError,
    decompose_step,
    least_squares_multiplier,
    multiplier_operator,
    multiplier_via_operator,
    null_space_basis,
    solve_kkt,
)

from conftest import dense_kkt_solve, random_kkt_instance

WORKED = dict(
    hess=np.eye(2),
    jac=np.array([[1.0, 0.0]]),
    grad=np.array([1.0, 1.0]),
    c=np.array([0.5]),
)


class TestSolve:
    def test_worked_example(self):
        sol = solve_kkt(KktInputs(**WORKED))
        assert np.allclose(sol.d, [-0.5, -1.0], atol=1e-14)
        assert np.allclose(sol.y, [-0.5], atol=1e-14)
        assert np.allclose(sol.v, [-0.5, 0.0], atol=1e-14)
        assert np.allclose(sol.u, [0.0, -1.0], atol=1e-14)

    def test_stationary_point_identity(self):
        rng = np.random.default_rng(0)
        hess, jac, _, _ = random_kkt_instance(rng, 7, 3)
        y_hat = rng.standard_normal(3)
        sol = solve_kkt(KktInputs(hess=hess, jac=jac, grad=-jac.T @ y_hat, c=np.zeros(3)))
        assert np.linalg.norm(sol.d) <= 1e-12
        assert np.allclose(sol.y, y_hat, atol=1e-11)

    def test_agreement_with_dense_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(25):
            hess, jac, grad, c = random_kkt_instance(rng, 20, 5)
            sol = solve_kkt(KktInputs(hess=hess, jac=jac, grad=grad, c=c))
            d_ref, y_ref = dense_kkt_solve(hess, jac, grad, c)
            assert np.linalg.norm(sol.d - d_ref) <= 1e-9
            assert np.linalg.norm(sol.y - y_ref) <= 1e-9
            scale = 1.0 + np.linalg.norm(grad) + np.linalg.norm(c)
            assert sol.residual <= 1e-10 * scale

    def test_rank_deficient_jacobian_rejected(self):
        jac = np.array([[1.0, 2.0, 0.0], [2.0, 4.0, 0.0]])
        with pytest.raises(RankError):
            solve_kkt(KktInputs(hess=np.eye(3), jac=jac,
                                grad=np.zeros(3), c=np.zeros(2)))

    def test_indefinite_reduced_matrix_rejected(self):
        with pytest.raises(CurvatureError):
            solve_kkt(KktInputs(hess=-np.eye(3), jac=np.array([[1.0, 0.0, 0.0]]),
                                grad=np.ones(3), c=np.zeros(1)))

    def test_square_jacobian_has_empty_tangent_space(self):
        rng = np.random.default_rng(2)
        hess, jac, grad, c = random_kkt_instance(rng, 4, 4)
        sol = solve_kkt(KktInputs(hess=hess, jac=jac, grad=grad, c=c))
        assert sol.basis.shape == (4, 0)
        assert np.array_equal(sol.u, np.zeros(4))
        d_ref, y_ref = dense_kkt_solve(hess, jac, grad, c)
        assert np.allclose(sol.d, d_ref, atol=1e-10)
        assert np.allclose(sol.y, y_ref, atol=1e-10)

    def test_asymmetric_hessian_rejected(self):
        hess = np.array([[1.0, 0.5], [0.2, 1.0]])
        with pytest.raises(ValueError, match="symmetric"):
            KktInputs(hess=hess, jac=WORKED["jac"], grad=WORKED["grad"], c=WORKED["c"])


class TestNullSpaceBasis:
    def test_axis_aligned(self):
        z = null_space_basis(np.array([[1.0, 0.0]]))
        assert z.shape == (2, 1)
        assert abs(abs(z[1, 0]) - 1.0) <= 1e-14
        assert abs(z[0, 0]) <= 1e-14

    def test_identity_padded(self):
        jac = np.hstack([np.eye(3), np.zeros((3, 2))])
        z = null_space_basis(jac)
        assert np.allclose(z[:3], 0.0, atol=1e-14)
        assert np.allclose(z[3:].T @ z[3:], np.eye(2), atol=1e-14)

    def test_orthonormal_and_annihilating(self):
        rng = np.random.default_rng(3)
        _, jac, _, _ = random_kkt_instance(rng, 8, 3)
        z = null_space_basis(jac)
        assert np.max(np.abs(z.T @ z - np.eye(5))) <= 1e-12
        assert np.linalg.norm(jac @ z) <= 1e-12 * np.linalg.norm(jac)

    def test_reduced_matrix_spectrum_is_basis_independent(self):
        # Compare the QR-derived basis against an SVD-derived one.
        rng = np.random.default_rng(4)
        hess, jac, _, _ = random_kkt_instance(rng, 8, 3)
        z1 = null_space_basis(jac)
        z2 = scipy.linalg.null_space(jac)
        e1 = np.sort(np.linalg.eigvalsh(z1.T @ hess @ z1))
        e2 = np.sort(np.linalg.eigvalsh(z2.T @ hess @ z2))
        assert np.max(np.abs(e1 - e2)) <= 1e-10


class TestDecomposeStep:
    def test_worked_example(self):
        u, v = decompose_step(np.array([-0.5, -1.0]), WORKED["jac"], WORKED["c"])
        assert np.allclose(v, [-0.5, 0.0], atol=1e-14)
        assert np.allclose(u, [0.0, -1.0], atol=1e-14)

    def test_zero_constraint_gives_pure_tangential(self):
        rng = np.random.default_rng(5)
        _, jac, _, _ = random_kkt_instance(rng, 6, 2)
        z = null_space_basis(jac)
        d = z @ rng.standard_normal(4)
        u, v = decompose_step(d, jac, np.zeros(2))
        assert np.linalg.norm(v) <= 1e-12
        assert np.allclose(u, d, atol=1e-12)

    def test_row_space_step_gives_zero_tangential(self):
        rng = np.random.default_rng(6)
        _, jac, _, _ = random_kkt_instance(rng, 6, 2)
        d = jac.T @ rng.standard_normal(2)
        u, v = decompose_step(d, jac, -jac @ d)
        assert np.linalg.norm(u) <= 1e-12
        assert np.allclose(v, d, atol=1e-12)

    def test_orthogonality(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            hess, jac, grad, c = random_kkt_instance(rng, 9, 4)
            sol = solve_kkt(KktInputs(hess=hess, jac=jac, grad=grad, c=c))
            bound = 1e-10 * max(np.linalg.norm(sol.u) * np.linalg.norm(sol.v), 1e-30)
            assert abs(sol.u @ sol.v) <= bound

    def test_inconsistent_step_rejected(self):
        with pytest.raises(InconsistentStepError):
            decompose_step(np.array([1.0, 0.0]), WORKED["jac"], WORKED["c"])


class TestMultiplierFormulas:
    def test_operator_worked_example(self):
        op = multiplier_operator(np.eye(2), WORKED["jac"], np.array([[0.0], [1.0]]))
        assert np.allclose(op, [[1.0, 0.0]], atol=1e-14)

    def test_operator_times_jacobian_transpose_is_identity(self):
        # With the identity model matrix the projector fixes the row
        # space, so the operator inverts jac' on it.
        rng = np.random.default_rng(8)
        _, jac, _, _ = random_kkt_instance(rng, 8, 3)
        op = multiplier_operator(np.eye(8), jac, null_space_basis(jac))
        assert np.max(np.abs(op @ jac.T - np.eye(3))) <= 1e-10

    def test_square_case_reduces_to_pseudoinverse(self):
        rng = np.random.default_rng(9)
        hess, jac, _, _ = random_kkt_instance(rng, 4, 4)
        op = multiplier_operator(hess, jac, np.zeros((4, 0)))
        assert np.allclose(op, np.linalg.inv(jac.T), atol=1e-10)

    def test_closed_form_matches_worked_example(self):
        op = multiplier_operator(np.eye(2), WORKED["jac"], np.array([[0.0], [1.0]]))
        y = multiplier_via_operator(op, np.eye(2), WORKED["jac"], WORKED["c"], WORKED["grad"])
        assert np.allclose(y, [-0.5], atol=1e-14)

    def test_zero_inputs_give_zero_multiplier(self):
        rng = np.random.default_rng(10)
        hess, jac, _, _ = random_kkt_instance(rng, 5, 2)
        op = multiplier_operator(hess, jac, null_space_basis(jac))
        y = multiplier_via_operator(op, hess, jac, np.zeros(2), np.zeros(5))
        assert np.linalg.norm(y) <= 1e-14

    def test_closed_form_equals_solver_multiplier(self):
        rng = np.random.default_rng(11)
        worst = 0.0
        for _ in range(50):
            n = int(rng.integers(3, 31))
            m = int(rng.integers(1, min(10, n - 1) + 1))
            hess, jac, grad, c = random_kkt_instance(rng, n, m)
            sol = solve_kkt(KktInputs(hess=hess, jac=jac, grad=grad, c=c))
            op = multiplier_operator(hess, jac, sol.basis)
            y = multiplier_via_operator(op, hess, jac, c, grad)
            worst = max(worst, np.linalg.norm(y - sol.y) / (1.0 + np.linalg.norm(sol.y)))
        assert worst <= 1e-8

    def test_least_squares_null_gradient(self):
        rng = np.random.default_rng(12)
        _, jac, _, _ = random_kkt_instance(rng, 6, 2)
        g = null_space_basis(jac) @ rng.standard_normal(4)
        assert np.linalg.norm(least_squares_multiplier(jac, g)) <= 1e-12

    def test_least_squares_recovers_exact_multiplier(self):
        rng = np.random.default_rng(13)
        _, jac, _, _ = random_kkt_instance(rng, 6, 2)
        y_hat = rng.standard_normal(2)
        assert np.allclose(least_squares_multiplier(jac, -jac.T @ y_hat), y_hat, atol=1e-12)

    def test_identity_model_offset_from_kkt_multiplier(self):
        # With the identity model matrix, the least-squares multiplier
        # differs from the subproblem multiplier by exactly the
        # pseudoinverse image of the normal-step curvature term.
        rng = np.random.default_rng(14)
        for _ in range(20):
            _, jac, grad, c = random_kkt_instance(rng, 7, 3)
            hess = np.eye(7)
            sol = solve_kkt(KktInputs(hess=hess, jac=jac, grad=grad, c=c))
            ls = least_squares_multiplier(jac, grad)
            gram = jac @ jac.T
            expected = -np.linalg.solve(gram, jac @ (jac.T @ np.linalg.solve(gram, c)))
            assert np.linalg.norm((ls - sol.y) - expected) <= 1e-10


class TestBasisInvariance:
    def test_solution_unchanged_by_rotated_basis(self):
        rng = np.random.default_rng(15)
        for _ in range(10):
            hess, jac, grad, c = random_kkt_instance(rng, 9, 3)
            inputs = KktInputs(hess=hess, jac=jac, grad=grad, c=c)
            first = solve_kkt(inputs)
            q = np.linalg.qr(rng.standard_normal((6, 6)))[0]
            second = solve_kkt(inputs, basis=first.basis @ q)
            for name in ("d", "y", "u", "v"):
                assert np.linalg.norm(getattr(first, name) - getattr(second, name)) <= 1e-9

    def test_invalid_basis_rejected(self):
        inputs = KktInputs(**WORKED)
        with pytest.raises(ValueError):
            solve_kkt(inputs, basis=np.array([[1.0], [0.0]]))  # not in the null space
