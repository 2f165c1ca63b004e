"""The stochastic SQP iteration loop and its per-iterate diagnostics.

Each iteration draws a mini-batch gradient estimate, forms the
quadratic-model matrix, solves the constrained subproblem, and moves by
``alpha_k = beta_k * tau * xi / (tau * lip_gradf + lip_jac)``.  The
``beta`` sequence must be unsummable but square-summable for stochastic
runs; the built-in power family ``beta1 * k**-p`` enforces
``1/2 < p <= 1``.  A constant schedule is also provided but is accepted
only with an exact (zero-variance) oracle, where the square-summability
requirement plays no role and the fixed step gives plain linear
convergence for reference solves.

In validation mode the loop additionally solves the subproblem with the
exact gradient (the "shadow" solve), records the trial values and the
guaranteed-reduction slack, and tallies violations in a summary.
Violations are surfaced, never fatal: the fixed parameters are a
hypothesis, and detecting when they fail is part of the job.

A run is strictly sequential and owns its state; concurrent replicates
must use separate configs (seeds) and generators.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from . import kkt
from .errors import ConfigError, EvaluationError
from .merit import MeritParams, phi, reduction_delta_q, tau_trial_true, xi_trial, check_reduction_lbnd
from .problem import Array, Problem, ProblemConstants, StochasticGradientOracle, sample_gradient


def step_size(tau: float, xi: float, lip_gradf: float, lip_jac: float, beta_k: float) -> float:
    """Step length ``beta_k * tau * xi / (tau * lip_gradf + lip_jac)``.

    The formula does not guarantee a value in (0, 1]; callers that care
    should inspect the result (the run summary counts values above 1).
    """
    for label, value in (("tau", tau), ("xi", xi), ("lip_gradf", lip_gradf), ("lip_jac", lip_jac)):
        if not value > 0:
            raise ValueError(f"{label} must be > 0")
    if not 0 < beta_k <= 1:
        raise ValueError("beta_k must lie in (0, 1]")
    alpha = beta_k * tau * xi / (tau * lip_gradf + lip_jac)
    assert alpha > 0
    return alpha


@dataclass(frozen=True)
class BetaSchedule:
    """Step-size damping sequence ``beta_k``.

    family "power": ``beta_k = beta1 * k**-p`` with ``1/2 < p <= 1``
    (unsummable, square-summable).  family "constant": ``beta_k =
    beta1``; valid only for exact-gradient runs and rejected by
    :func:`run` when the oracle declares nonzero variance.
    """

    family: str = "power"
    beta1: float = 1.0
    p: float = 1.0

    def __post_init__(self):
        if self.family not in ("power", "constant"):
            raise ConfigError(f"unknown beta family {self.family!r}")
        if not 0 < self.beta1 <= 1:
            raise ConfigError("beta1 must lie in (0, 1]")
        if self.family == "power" and not 0.5 < self.p <= 1:
            raise ConfigError(
                "power schedule needs 1/2 < p <= 1 to be unsummable but square-summable"
            )

    def __call__(self, k: int) -> float:
        if k < 1:
            raise ValueError("iteration index starts at 1")
        if self.family == "constant":
            return self.beta1
        return self.beta1 * float(k) ** (-self.p)


HessianSpec = Union[str, Array, Callable[[Array], Array]]


@dataclass
class SolverConfig:
    """Fixed parameters for one run.

    ``hessian`` selects the quadratic-model matrix: the string
    "identity", a fixed symmetric matrix, or a deterministic map
    ``x -> H(x)``.  The map receives only the iterate, never multiplier
    state, so it cannot depend on the noisy dual sequence.

    ``store`` controls trace memory: "full" keeps every per-iterate
    vector, "light" keeps only iterates, multipliers and scalars (what
    the estimators and trace files need).
    """

    merit: MeritParams = field(default_factory=MeritParams)
    lip_gradf: float = 1.0
    lip_jac: float = 1.0
    beta: BetaSchedule = field(default_factory=BetaSchedule)
    hessian: HessianSpec = "identity"
    batch_size: int = 16
    max_iters: int = 1000
    seed: int = 0
    validate: bool = False
    constants: ProblemConstants | None = None
    store: str = "full"

    def __post_init__(self):
        if not self.lip_gradf > 0 or not self.lip_jac > 0:
            raise ConfigError("Lipschitz constants must be > 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")
        if self.store not in ("full", "light"):
            raise ConfigError("store must be 'full' or 'light'")


def _resolve_hessian(spec: HessianSpec, n: int):
    """Return ``(map x -> H, identifier string)`` for a Hessian spec."""
    if isinstance(spec, str):
        if spec != "identity":
            raise ConfigError(f"unknown hessian spec {spec!r}")
        fixed = np.eye(n)
        return (lambda x: fixed), "identity"
    if isinstance(spec, np.ndarray):
        if spec.shape != (n, n):
            raise ConfigError("fixed hessian has wrong shape")
        if np.max(np.abs(spec - spec.T)) > 1e-12 * (1.0 + np.max(np.abs(spec))):
            raise ConfigError("fixed hessian is not symmetric")
        fixed = spec.astype(float)
        return (lambda x: fixed), "fixed"
    if callable(spec):
        label = getattr(spec, "__name__", "custom")
        return spec, f"map:{label}"
    raise ConfigError("hessian must be 'identity', an array, or a callable")


@dataclass(frozen=True)
class IterationRecord:
    """One iteration of a run; vector fields are ``None`` in light traces.

    ``x`` is the iterate the step was computed at, so consecutive
    records satisfy ``x_{k+1} = x_k + alpha_k * d_k`` exactly as stored.
    """

    k: int
    alpha: float
    beta: float
    phi: float
    norm_c: float
    dq_stoch: float
    xi_trial: float
    y: Array
    hessian_id: str
    x: Array | None = None
    g: Array | None = None
    d: Array | None = None
    u: Array | None = None
    v: Array | None = None
    d_true: Array | None = None
    y_true: Array | None = None
    dq_true: float = math.nan
    tau_trial_true: float = math.nan
    lbnd_slack: float = math.nan
    resid_true: float = math.nan
    kuv_slack: float = math.nan
    kuv_slack_true: float = math.nan


class Trace:
    """Struct-of-arrays iteration history.

    Behaves as a sequence of :class:`IterationRecord`: ``len(trace)`` is
    the iteration count and ``trace[i]`` builds the record for position
    ``i`` (0-based, so ``trace[i].k == i + 1``).  ``trace.record(k)``
    looks up by 1-based iteration number.  The underlying arrays are
    exposed directly (``trace.x``, ``trace.y``, ...) for vectorized
    post-processing.
    """

    _SCALARS = (
        "alpha",
        "beta",
        "phi",
        "norm_c",
        "dq_stoch",
        "xi_trial",
        "dq_true",
        "tau_trial_true",
        "lbnd_slack",
        "resid_true",
        "kuv_slack",
        "kuv_slack_true",
    )

    def __init__(self, n: int, m: int, iters: int, store: str, validate: bool, hessian_id: str):
        self.n, self.m, self.iters = n, m, iters
        self.store = store
        self.validate = validate
        self.hessian_id = hessian_id
        for name in self._SCALARS:
            setattr(self, name, np.full(iters, np.nan))
        self.x = np.empty((iters, n))
        self.y = np.empty((iters, m))
        self.y_true = np.full((iters, m), np.nan) if validate else None
        full = store == "full"
        self.g = np.empty((iters, n)) if full else None
        self.d = np.empty((iters, n)) if full else None
        self.u = np.empty((iters, n)) if full else None
        self.v = np.empty((iters, n)) if full else None
        self.d_true = np.empty((iters, n)) if full and validate else None

    def __len__(self) -> int:
        return self.iters

    def __getitem__(self, i: int) -> IterationRecord:
        if i < 0:
            i += self.iters
        if not 0 <= i < self.iters:
            raise IndexError("trace index out of range")

        def vec(name):
            arr = getattr(self, name)
            return None if arr is None else arr[i]

        return IterationRecord(
            k=i + 1,
            alpha=float(self.alpha[i]),
            beta=float(self.beta[i]),
            phi=float(self.phi[i]),
            norm_c=float(self.norm_c[i]),
            dq_stoch=float(self.dq_stoch[i]),
            xi_trial=float(self.xi_trial[i]),
            y=self.y[i],
            hessian_id=self.hessian_id,
            x=self.x[i],
            g=vec("g"),
            d=vec("d"),
            u=vec("u"),
            v=vec("v"),
            d_true=vec("d_true"),
            y_true=vec("y_true"),
            dq_true=float(self.dq_true[i]),
            tau_trial_true=float(self.tau_trial_true[i]),
            lbnd_slack=float(self.lbnd_slack[i]),
            resid_true=float(self.resid_true[i]),
            kuv_slack=float(self.kuv_slack[i]),
            kuv_slack_true=float(self.kuv_slack_true[i]),
        )

    def record(self, k: int) -> IterationRecord:
        """Record for 1-based iteration number ``k``."""
        return self[k - 1]


@dataclass
class ValidationSummary:
    """Violation tallies from a validation-mode run (diagnostic only)."""

    iterations: int = 0
    xi_violations: int = 0
    tau_violations: int = 0
    lbnd_violations: int = 0
    curvature_violations: int = 0
    alpha_above_one: int = 0
    first_xi_violation: int | None = None
    first_tau_violation: int | None = None

    @property
    def clean(self) -> bool:
        return (
            self.xi_violations == 0
            and self.tau_violations == 0
            and self.lbnd_violations == 0
            and self.curvature_violations == 0
        )


@dataclass
class RunResult:
    trace: Trace
    x_final: Array
    summary: ValidationSummary | None
    wall_time: float
    config: SolverConfig


def _kuv_slack(sol: kkt.KktSolution, hess: Array, kappa_uv: float, zeta: float) -> float:
    """Curvature-inequality slack when the tangential part dominates.

    Returns ``d'hd - (zeta/2) ||u||^2`` when ``||u||^2 >= kappa_uv
    ||v||^2`` and nan when the inequality's premise does not apply.
    """
    nu2 = float(sol.u @ sol.u)
    nv2 = float(sol.v @ sol.v)
    if nu2 < kappa_uv * nv2:
        return math.nan
    return float(sol.d @ (hess @ sol.d)) - 0.5 * zeta * nu2


def run(problem: Problem, oracle: StochasticGradientOracle, config: SolverConfig) -> RunResult:
    """Run the full iteration budget and return the trace.

    Deterministic given the config seed.  Rank or curvature failures in
    the subproblem abort with the iterate index attached; a non-finite
    iterate aborts with :class:`EvaluationError`.
    """
    if problem.x0 is None:
        raise ConfigError("problem must supply an initial point x0")
    if config.beta.family == "constant" and oracle.sigma2 > 0:
        raise ConfigError(
            "constant beta schedule is reserved for exact-gradient (sigma = 0) runs"
        )

    merit = config.merit
    hess_map, hess_id = _resolve_hessian(config.hessian, problem.n)
    rng = np.random.default_rng(config.seed)
    trace = Trace(problem.n, problem.m, config.max_iters, config.store, config.validate, hess_id)
    summary = ValidationSummary(iterations=config.max_iters) if config.validate else None

    kappa_uv = None
    if config.constants is not None:
        kappa_uv = derive_kuv(config.constants.zeta, config.constants.kappa_h)

    start = time.perf_counter()
    x = np.array(problem.x0, dtype=float)
    for k in range(1, config.max_iters + 1):
        i = k - 1
        try:
            f = float(problem.objective(x))
            c = np.asarray(problem.constraints(x), dtype=float)
            jac = np.asarray(problem.jacobian(x), dtype=float)
            if not (math.isfinite(f) and np.all(np.isfinite(c)) and np.all(np.isfinite(jac))):
                raise EvaluationError("problem evaluator returned a non-finite value")
            g = sample_gradient(oracle, x, config.batch_size, rng)
            hess = np.asarray(hess_map(x), dtype=float)
            factors = kkt.factor_jacobian(jac)
            sol = kkt.solve_with_factors(hess, factors, g, c)
        except (kkt.RankError, kkt.CurvatureError, EvaluationError) as exc:
            raise type(exc)(f"iteration {k}: {exc}") from exc

        beta_k = config.beta(k)
        alpha_k = step_size(merit.tau, merit.xi, config.lip_gradf, config.lip_jac, beta_k)
        dq_s = reduction_delta_q(merit.tau, c, g, hess, sol.d)

        trace.alpha[i] = alpha_k
        trace.beta[i] = beta_k
        trace.phi[i] = phi(merit.tau, f, c)
        trace.norm_c[i] = np.linalg.norm(c)
        trace.dq_stoch[i] = dq_s
        trace.xi_trial[i] = xi_trial(merit.tau, dq_s, sol.d)
        trace.x[i] = x
        trace.y[i] = sol.y
        if trace.g is not None:
            trace.g[i] = g
            trace.d[i] = sol.d
            trace.u[i] = sol.u
            trace.v[i] = sol.v
        if kappa_uv is not None:
            trace.kuv_slack[i] = _kuv_slack(sol, hess, kappa_uv, config.constants.zeta)

        if config.validate:
            grad = np.asarray(problem.gradient(x), dtype=float)
            try:
                shadow = kkt.solve_with_factors(hess, factors, grad, c)
            except (kkt.RankError, kkt.CurvatureError) as exc:
                raise type(exc)(f"iteration {k} (shadow solve): {exc}") from exc
            trace.y_true[i] = shadow.y
            if trace.d_true is not None:
                trace.d_true[i] = shadow.d
            trace.dq_true[i] = reduction_delta_q(merit.tau, c, grad, hess, shadow.d)
            tau_tr = tau_trial_true(merit.nu, c, grad, hess, shadow.d)
            trace.tau_trial_true[i] = tau_tr
            holds, slack = check_reduction_lbnd(merit.tau, merit.nu, c, grad, hess, shadow.d)
            trace.lbnd_slack[i] = slack
            trace.resid_true[i] = float(
                np.linalg.norm(grad + jac.T @ shadow.y) + np.linalg.norm(c)
            )
            if kappa_uv is not None:
                trace.kuv_slack_true[i] = _kuv_slack(
                    shadow, hess, kappa_uv, config.constants.zeta
                )

            slop = 1e-12
            if trace.xi_trial[i] < merit.xi - slop:
                summary.xi_violations += 1
                if summary.first_xi_violation is None:
                    summary.first_xi_violation = k
            if tau_tr < merit.tau - slop:
                summary.tau_violations += 1
                if summary.first_tau_violation is None:
                    summary.first_tau_violation = k
            if merit.tau <= tau_tr and not holds:
                summary.lbnd_violations += 1
            for slack_value in (trace.kuv_slack[i], trace.kuv_slack_true[i]):
                if not math.isnan(slack_value) and slack_value < -1e-10 * (1.0 + abs(slack_value)):
                    summary.curvature_violations += 1
            if alpha_k > 1.0:
                summary.alpha_above_one += 1

        x = x + alpha_k * sol.d
        if not np.all(np.isfinite(x)):
            raise EvaluationError(f"iteration {k}: iterate became non-finite")

    wall = time.perf_counter() - start
    return RunResult(trace=trace, x_final=x, summary=summary, wall_time=wall, config=config)


def true_shadow(problem: Problem, x: Array, hess: Array):
    """Subproblem solution with the exact gradient; returns ``(d, y)``.

    This is the unobservable counterpart of the stochastic step, used
    for the trial values and multiplier diagnostics.
    """
    x = np.asarray(x, dtype=float)
    inputs = kkt.KktInputs(
        hess=np.asarray(hess, dtype=float),
        jac=np.asarray(problem.jacobian(x), dtype=float),
        grad=np.asarray(problem.gradient(x), dtype=float),
        c=np.asarray(problem.constraints(x), dtype=float),
    )
    sol = kkt.solve_kkt(inputs)
    return sol.d, sol.y


def stationarity_residual(problem: Problem, x: Array, y: Array) -> float:
    """First-order violation ``||grad f + jac' y||_2 + ||c||_2``."""
    x = np.asarray(x, dtype=float)
    grad = np.asarray(problem.gradient(x), dtype=float)
    jac = np.asarray(problem.jacobian(x), dtype=float)
    c = np.asarray(problem.constraints(x), dtype=float)
    return float(np.linalg.norm(grad + jac.T @ np.asarray(y)) + np.linalg.norm(c))


def stationarity_residual_squared(problem: Problem, x: Array, y: Array) -> float:
    """Companion measure with the gradient term squared,
    ``||grad f + jac' y||_2^2 + ||c||_2``."""
    x = np.asarray(x, dtype=float)
    grad = np.asarray(problem.gradient(x), dtype=float)
    jac = np.asarray(problem.jacobian(x), dtype=float)
    c = np.asarray(problem.constraints(x), dtype=float)
    return float(np.linalg.norm(grad + jac.T @ np.asarray(y)) ** 2 + np.linalg.norm(c))


def derive_kuv(zeta: float, kappa_h: float) -> float:
    """Smallest ``kappa`` with ``2 kappa_h / sqrt(kappa) + kappa_h / kappa
    <= zeta / 2``, found by bisection.

    The left-hand side is strictly decreasing in ``kappa`` and depends
    only on the ratio ``kappa_h / zeta``, so the output is homogeneous
    of degree zero in ``(zeta, kappa_h)``.
    """
    if not 0 < zeta <= kappa_h:
        raise ValueError("need 0 < zeta <= kappa_h")

    def lhs(kappa: float) -> float:
        return 2.0 * kappa_h / math.sqrt(kappa) + kappa_h / kappa

    target = zeta / 2.0
    lo = 1.0  # lhs(1) = 3 kappa_h >= 3 zeta > target always
    hi = 2.0
    while lhs(hi) > target:
        hi *= 2.0
        if hi > 1e30:
            raise ArithmeticError("bisection bracket expansion failed")
    while hi - lo > 1e-12 * hi:
        mid = 0.5 * (lo + hi)
        if lhs(mid) <= target:
            hi = mid
        else:
            lo = mid
    return hi
