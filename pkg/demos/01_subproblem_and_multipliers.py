"""One constrained quadratic subproblem, solved and dissected.

Walks through a single small solve: the step, its tangential/normal
split, and the three multiplier formulas (subproblem solve, closed-form
operator, least squares), cross-checked against a dense factorization
of the full saddle-point system.
"""

import numpy as np

from stochsqp import (
    KktInputs,
    decompose_step,
    least_squares_multiplier,
    multiplier_operator,
    multiplier_via_operator,
    null_space_basis,
    solve_kkt,
)

rng = np.random.default_rng(0)
n, m = 6, 2

q = np.linalg.qr(rng.standard_normal((n, n)))[0]
hess = q @ np.diag(rng.uniform(0.5, 2.0, n)) @ q.T
jac = rng.standard_normal((m, n))
grad = rng.standard_normal(n)
c = rng.standard_normal(m)

sol = solve_kkt(KktInputs(hess=hess, jac=jac, grad=grad, c=c))
print("step d                :", np.round(sol.d, 6))
print("multiplier y          :", np.round(sol.y, 6))
print("verified residual     :", f"{sol.residual:.2e}")

# The step splits into a normal part (restores linearized feasibility)
# and a tangential part (moves in the Jacobian's null space).
u, v = decompose_step(sol.d, jac, c)
print("\n||jac @ u||           :", f"{np.linalg.norm(jac @ u):.2e}  (tangential)")
print("||jac @ v + c||       :", f"{np.linalg.norm(jac @ v + c):.2e}  (normal step solves the linearization)")
print("u  .  v               :", f"{u @ v:+.2e}  (orthogonal parts)")

# The multiplier can be written explicitly as a pseudoinverse times a
# projection applied to gradient-side data; it must reproduce the
# multiplier from the linear-system solve.
basis = null_space_basis(jac)
operator = multiplier_operator(hess, jac, basis)
y_closed = multiplier_via_operator(operator, hess, jac, c, grad)
print("\nclosed-form multiplier:", np.round(y_closed, 6))
print("gap to solver y       :", f"{np.linalg.norm(y_closed - sol.y):.2e}")

# The least-squares multiplier drops the dependence on the model matrix.
y_ls = least_squares_multiplier(jac, grad)
print("least-squares y       :", np.round(y_ls, 6))

# Independent route: factor the whole (n+m) x (n+m) system densely.
system = np.block([[hess, jac.T], [jac, np.zeros((m, m))]])
dense = np.linalg.solve(system, np.concatenate([-grad, -c]))
print("\ndense-solve agreement :",
      f"{np.linalg.norm(dense[:n] - sol.d) + np.linalg.norm(dense[n:] - sol.y):.2e}")
