"""Null-space solution of the equality-constrained quadratic subproblem.

Each solve takes a symmetric matrix ``h``, a full-row-rank Jacobian
``jac`` (shape ``(m, n)``), a gradient vector ``g`` and a constraint
value ``c``, and returns the step/multiplier pair solving

    [ h     jac' ] [ d ]     [ g ]
    [ jac   0    ] [ y ]  = -[ c ].

The route factors ``jac'`` orthogonally, ``jac' = q1 r``, with ``z`` an
orthonormal basis of the Jacobian null space:

* the normal step ``v = -jac' (jac jac')^{-1} c`` lies in the row space
  and removes the linearized constraint violation,
* the tangential step ``u = z w`` solves the reduced system
  ``(z' h z) w = -z' (g + h v)``,
* the multiplier solves the triangular system ``r y = q1' (-g - h d)``.

``z' h z`` must be positive definite; a failed Cholesky factorization is
reported as :class:`CurvatureError` rather than silently regularized.
Every exported quantity (``d``, ``y``, ``u``, ``v``) is invariant under
the choice of null-space basis; only ``basis`` itself depends on the
factorization.  All functions here are pure and safe to call
concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import CurvatureError, InconsistentStepError, RankError
from .problem import Array

#: Relative singular-value threshold below which the Jacobian is
#: declared rank deficient: sigma_min >= RANK_RTOL * max(1, sigma_max).
RANK_RTOL = 1e-10


class JacobianFactors(NamedTuple):
    """Orthogonal factorization of a Jacobian transpose, ``jac' = q1 r``."""

    jac: Array  # (m, n)
    q_range: Array  # (n, m), orthonormal basis of the row space
    null_basis: Array  # (n, n - m), orthonormal basis of the null space
    r_upper: Array  # (m, m), upper triangular


@dataclass(frozen=True)
class KktInputs:
    """One subproblem: symmetric ``hess``, Jacobian ``jac``, ``grad``, ``c``."""

    hess: Array  # (n, n)
    jac: Array  # (m, n)
    grad: Array  # (n,)
    c: Array  # (m,)

    def __post_init__(self):
        m, n = self.jac.shape
        if not (1 <= m <= n):
            raise ValueError("jacobian must have 1 <= m <= n rows")
        if self.hess.shape != (n, n):
            raise ValueError("hess has wrong shape")
        if self.grad.shape != (n,) or self.c.shape != (m,):
            raise ValueError("grad or c has wrong shape")
        scale = 1.0 + float(np.max(np.abs(self.hess)))
        if float(np.max(np.abs(self.hess - self.hess.T))) > 1e-12 * scale:
            raise ValueError("hess is not symmetric to 1e-12 relative")


@dataclass(frozen=True)
class KktSolution:
    """Step ``d = u + v``, multiplier ``y``, and the basis used.

    ``u`` lies in the Jacobian null space, ``v`` in its row space, and
    ``residual`` is the verified value of
    ``||h d + jac' y + g|| + ||jac d + c||``.
    """

    d: Array
    y: Array
    u: Array
    v: Array
    basis: Array
    residual: float


def factor_jacobian(jac: Array) -> JacobianFactors:
    """Rank-check ``jac`` and factor its transpose orthogonally."""
    jac = np.asarray(jac, dtype=float)
    m, n = jac.shape
    svals = np.linalg.svd(jac, compute_uv=False)
    if svals[-1] < RANK_RTOL * max(1.0, svals[0]):
        raise RankError(
            f"jacobian is rank deficient: sigma_min={svals[-1]:.3e}, sigma_max={svals[0]:.3e}"
        )
    q, r = scipy.linalg.qr(jac.T, mode="full")
    return JacobianFactors(jac=jac, q_range=q[:, :m], null_basis=q[:, m:], r_upper=r[:m, :])


def null_space_basis(jac: Array) -> Array:
    """Orthonormal basis of the Jacobian null space, shape ``(n, n - m)``."""
    return factor_jacobian(jac).null_basis


def _check_basis(jac: Array, basis: Array):
    m, n = jac.shape
    if basis.shape != (n, n - m):
        raise ValueError(f"basis must have shape ({n}, {n - m})")
    if float(np.max(np.abs(basis.T @ basis - np.eye(n - m)), initial=0.0)) > 1e-8:
        raise ValueError("basis columns are not orthonormal")
    if np.linalg.norm(jac @ basis) > 1e-8 * (1.0 + np.linalg.norm(jac)):
        raise ValueError("basis columns do not span the jacobian null space")


def solve_with_factors(
    hess: Array,
    factors: JacobianFactors,
    grad: Array,
    c: Array,
    basis: Array | None = None,
) -> KktSolution:
    """Solve one subproblem reusing a Jacobian factorization.

    ``basis`` optionally replaces the factorization's null-space basis
    (it must be orthonormal with columns in the null space); the normal
    step and multiplier do not depend on it.
    """
    jac, q1, z, r = factors
    if basis is not None:
        _check_basis(jac, basis)
        z = basis

    # Normal step: jac = r' q1', so jac v = r' w with v = q1 w.
    w = scipy.linalg.solve_triangular(r.T, -c, lower=True)
    v = q1 @ w

    # Tangential step from the reduced system.
    if z.shape[1] > 0:
        reduced = z.T @ hess @ z
        try:
            chol = scipy.linalg.cho_factor(reduced)
        except np.linalg.LinAlgError as exc:
            raise CurvatureError(
                "reduced matrix z'hz is not positive definite; the quadratic model "
                "lacks the required curvature on the jacobian null space"
            ) from exc
        u = z @ scipy.linalg.cho_solve(chol, -(z.T @ (grad + hess @ v)))
    else:
        u = np.zeros_like(grad)
    d = u + v

    y = scipy.linalg.solve_triangular(r, q1.T @ (-grad - hess @ d))
    residual = float(
        np.linalg.norm(hess @ d + jac.T @ y + grad) + np.linalg.norm(jac @ d + c)
    )
    return KktSolution(d=d, y=y, u=u, v=v, basis=z, residual=residual)


def solve_kkt(inputs: KktInputs, basis: Array | None = None) -> KktSolution:
    """Solve one subproblem from scratch (factorization included)."""
    factors = factor_jacobian(inputs.jac)
    return solve_with_factors(inputs.hess, factors, inputs.grad, inputs.c, basis=basis)


def _gram_cho(jac: Array):
    return scipy.linalg.cho_factor(jac @ jac.T)


def decompose_step(d: Array, jac: Array, c: Array, rtol: float = 1e-8):
    """Split ``d`` into its null-space and row-space parts ``(u, v)``.

    Requires ``jac d = -c`` within tolerance (the step must solve the
    linearized constraint); ``v`` is the closed form
    ``-jac' (jac jac')^{-1} c`` and ``u = d - v``.
    """
    jac = np.asarray(jac, dtype=float)
    d = np.asarray(d, dtype=float)
    c = np.asarray(c, dtype=float)
    factor_jacobian(jac)  # rank gate
    gap = np.linalg.norm(jac @ d + c)
    scale = 1.0 + np.linalg.norm(c) + np.linalg.norm(jac) * np.linalg.norm(d)
    if gap > rtol * scale:
        raise InconsistentStepError(
            f"step does not satisfy the linearized constraint: ||jac d + c|| = {gap:.3e}"
        )
    v = -jac.T @ scipy.linalg.cho_solve(_gram_cho(jac), c)
    return d - v, v


def multiplier_operator(hess: Array, jac: Array, basis: Array) -> Array:
    """The ``(m, n)`` map sending gradient-side data to the multiplier.

    Equals ``pinv (I - h z (z' h z)^{-1} z')`` where
    ``pinv = (jac jac')^{-1} jac`` is the pseudoinverse of the
    transposed Jacobian and ``z`` spans the null space.
    """
    gram = _gram_cho(jac)
    pinv = scipy.linalg.cho_solve(gram, jac)
    if basis.shape[1] == 0:
        return pinv
    reduced = basis.T @ hess @ basis
    try:
        chol = scipy.linalg.cho_factor(reduced)
    except np.linalg.LinAlgError as exc:
        raise CurvatureError(
            "reduced matrix z'hz is not positive definite"
        ) from exc
    projector = np.eye(jac.shape[1]) - hess @ basis @ scipy.linalg.cho_solve(chol, basis.T)
    return pinv @ projector


def multiplier_via_operator(
    operator: Array, hess: Array, jac: Array, c: Array, grad: Array
) -> Array:
    """Closed-form multiplier ``M (h pinv' c - g)``.

    Must agree with the multiplier returned by :func:`solve_kkt` on the
    same inputs; the agreement is the cross-check of the operator
    derivation.
    """
    pinv_t_c = jac.T @ scipy.linalg.cho_solve(_gram_cho(jac), c)
    return operator @ (hess @ pinv_t_c - grad)


def least_squares_multiplier(jac: Array, grad: Array) -> Array:
    """Minimizer of ``||g + jac' y||``, i.e. ``-(jac jac')^{-1} jac g``."""
    jac = np.asarray(jac, dtype=float)
    factor_jacobian(jac)  # rank gate
    return -scipy.linalg.cho_solve(_gram_cho(jac), jac @ np.asarray(grad, dtype=float))
