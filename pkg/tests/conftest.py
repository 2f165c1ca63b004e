"""Shared fixtures and independent test oracles.

The dense full-matrix KKT solve lives here (not in the library) so the
null-space implementation is always checked against a second route.
"""

import numpy as np
import pytest

from stochsqp import Problem, load_bundled_dataset, build_instance


def dense_kkt_solve(hess, jac, grad, c):
    """Independent oracle: factor the full (n+m) saddle-point matrix."""
    n = hess.shape[0]
    m = jac.shape[0]
    system = np.zeros((n + m, n + m))
    system[:n, :n] = hess
    system[:n, n:] = jac.T
    system[n:, :n] = jac
    rhs = np.concatenate([-grad, -c])
    solution = np.linalg.solve(system, rhs)
    return solution[:n], solution[n:]


def random_spd(rng, n, lo=0.5, hi=2.0):
    """Symmetric matrix with eigenvalues in [lo, hi]."""
    q = np.linalg.qr(rng.standard_normal((n, n)))[0]
    return q @ np.diag(rng.uniform(lo, hi, size=n)) @ q.T


def random_kkt_instance(rng, n, m, sval_lo=1.0, sval_hi=3.0):
    """Well-conditioned subproblem data (controlled Jacobian spectrum)."""
    hess = random_spd(rng, n)
    u = np.linalg.qr(rng.standard_normal((m, m)))[0]
    v = np.linalg.qr(rng.standard_normal((n, n)))[0][:, :m]
    jac = u @ np.diag(rng.uniform(sval_lo, sval_hi, size=m)) @ v.T
    grad = rng.standard_normal(n)
    c = rng.standard_normal(m)
    return hess, jac, grad, c


def sphere_problem(x0=(0.3, 1.0)):
    """Toy: minimize x_1 subject to ||x||^2 = 1 (minimizer (-1, 0), y* = 1/2)."""
    return Problem(
        n=2,
        m=1,
        objective=lambda x: float(x[0]),
        gradient=lambda x: np.array([1.0, 0.0]),
        constraints=lambda x: np.array([float(x @ x) - 1.0]),
        jacobian=lambda x: np.array([2.0 * x]),
        x0=np.asarray(x0, dtype=float),
        name="sphere-toy",
    )


def constrained_quadratic(rng, n=6, m=2):
    """Strongly convex QP with affine constraints and a closed-form solution.

    minimize 1/2 x'Px + q'x subject to Ax = b; the optimal pair solves
    the (n+m) linear system directly.
    """
    p_mat = random_spd(rng, n, 0.8, 2.5)
    q = rng.standard_normal(n)
    a_mat = rng.standard_normal((m, n))
    b = rng.standard_normal(m)
    x_star, y_star = dense_kkt_solve(p_mat, a_mat, q, -b)

    problem = Problem(
        n=n,
        m=m,
        objective=lambda x: 0.5 * float(x @ (p_mat @ x)) + float(q @ x),
        gradient=lambda x: p_mat @ x + q,
        constraints=lambda x: a_mat @ x - b,
        jacobian=lambda x: a_mat,
        x0=rng.standard_normal(n),
        name="toy-qp",
    )
    return problem, p_mat, x_star, y_star


@pytest.fixture(scope="session")
def bundled_dataset():
    return load_bundled_dataset()


@pytest.fixture(scope="session")
def bundled_instance(bundled_dataset):
    return build_instance(bundled_dataset, m_lin=10, seed=0)
