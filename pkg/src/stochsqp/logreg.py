"""Constrained logistic-regression benchmark instances.

Builds test problems of the form

    minimize   (1/N) sum_i log(1 + exp(-gamma_i * <d_i, x>))
    subject to A x = b,   ||x||^2 - 1 = 0

from data in LIBSVM text format.  The affine data ``(A, b)`` and the
initial point are standard-normal draws from a seed and are fixed for
the lifetime of the instance, so every replicate of an experiment sees
the same geometry and only the gradient noise varies.

Instances are immutable after construction and safe for shared
concurrent evaluation.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from importlib import resources
from typing import TextIO

import numpy as np
from scipy.special import expit

from .errors import ConstructionError, ParseError
from .problem import Array, Problem, StochasticGradientOracle

#: Relative singular-value threshold declaring a matrix full row rank.
RANK_RTOL = 1e-8

_BUNDLED_NAME = "synthetic200.libsvm"


@dataclass(frozen=True)
class Dataset:
    """Feature matrix (one column per sample) and +/-1 labels."""

    features: Array  # (n_features, n_samples)
    labels: Array  # (n_samples,), entries in {-1, +1}

    def __post_init__(self):
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-d array")
        if self.labels.shape != (self.features.shape[1],):
            raise ValueError("labels must have one entry per sample")
        if self.labels.size and not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")

    @property
    def n_features(self) -> int:
        return self.features.shape[0]

    @property
    def n_samples(self) -> int:
        return self.features.shape[1]


def _map_label(raw: float) -> float:
    # Accept both {-1,+1} and {0,1} conventions: zero maps to -1,
    # anything else maps to its sign.
    return 1.0 if raw > 0 else -1.0


def parse_libsvm(source: str | TextIO, n_features: int | None = None) -> Dataset:
    """Parse LIBSVM text ("label idx:val idx:val ...", 1-based indices).

    Indices must be strictly increasing within each line.  The feature
    dimension is the largest index seen unless ``n_features`` overrides
    it (the override must cover every index).  An empty stream yields an
    empty dataset, which instance construction later rejects.
    """
    stream = io.StringIO(source) if isinstance(source, str) else source
    rows: list[list[tuple[int, float]]] = []
    labels: list[float] = []
    max_index = 0
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line:
            continue
        tokens = line.split()
        try:
            raw_label = float(tokens[0])
        except ValueError:
            raise ParseError(f"line {lineno}: label {tokens[0]!r} is not a number") from None
        entries: list[tuple[int, float]] = []
        previous = 0
        for token in tokens[1:]:
            idx_text, _, val_text = token.partition(":")
            try:
                idx = int(idx_text)
                val = float(val_text)
            except ValueError:
                raise ParseError(f"line {lineno}: malformed entry {token!r}") from None
            if idx < 1:
                raise ParseError(f"line {lineno}: feature index {idx} is not >= 1")
            if idx <= previous:
                raise ParseError(f"line {lineno}: feature indices must be strictly increasing")
            previous = idx
            entries.append((idx, val))
        max_index = max(max_index, previous)
        labels.append(_map_label(raw_label))
        rows.append(entries)

    n = max_index if n_features is None else int(n_features)
    if n < max_index:
        raise ParseError(f"n_features={n} is smaller than the largest index {max_index}")
    features = np.zeros((n, len(rows)))
    for j, entries in enumerate(rows):
        for idx, val in entries:
            features[idx - 1, j] = val
    return Dataset(features=features, labels=np.asarray(labels))


def serialize_libsvm(dataset: Dataset) -> str:
    """Write a dataset back to LIBSVM text (nonzero entries only)."""
    lines = []
    for j in range(dataset.n_samples):
        label = "+1" if dataset.labels[j] > 0 else "-1"
        col = dataset.features[:, j]
        entries = " ".join(f"{i + 1}:{col[i]:.17g}" for i in np.nonzero(col)[0])
        lines.append(f"{label} {entries}".rstrip())
    return "\n".join(lines) + ("\n" if lines else "")


def load_libsvm_file(path, n_features: int | None = None) -> Dataset:
    with open(path, "r", encoding="ascii") as handle:
        return parse_libsvm(handle, n_features=n_features)


def load_bundled_dataset() -> Dataset:
    """Load the small synthetic dataset shipped with the package."""
    text = resources.files("stochsqp.data").joinpath(_BUNDLED_NAME).read_text()
    return parse_libsvm(text)


def _full_row_rank(matrix: Array) -> bool:
    if matrix.shape[0] == 0:
        return True
    svals = np.linalg.svd(matrix, compute_uv=False)
    return svals[-1] >= RANK_RTOL * svals[0]


@dataclass(frozen=True)
class ConstrainedLogRegInstance:
    """Logistic loss with seeded affine constraints plus the unit sphere.

    The constraint map is ``c(x) = (A x - b, ||x||^2 - 1)`` with
    Jacobian rows ``(A; 2 x')``, so the total constraint dimension is
    ``m_lin + 1``.
    """

    dataset: Dataset
    A: Array  # (m_lin, n)
    b: Array  # (m_lin,)
    x1: Array  # (n,) initial point

    @property
    def n(self) -> int:
        return self.dataset.n_features

    @property
    def m_lin(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.m_lin + 1

    # -- evaluators ----------------------------------------------------
    def _margins(self, x: Array, columns=None) -> Array:
        d = self.dataset.features if columns is None else self.dataset.features[:, columns]
        g = self.dataset.labels if columns is None else self.dataset.labels[columns]
        return g * (d.T @ x)

    def objective(self, x: Array) -> float:
        # log(1 + exp(-z)) = logaddexp(0, -z), stable for large |z|.
        return float(np.mean(np.logaddexp(0.0, -self._margins(x))))

    def gradient(self, x: Array) -> Array:
        z = self._margins(x)
        w = -self.dataset.labels * expit(-z)
        return self.dataset.features @ w / self.dataset.n_samples

    def constraints(self, x: Array) -> Array:
        return np.concatenate([self.A @ x - self.b, [float(x @ x) - 1.0]])

    def jacobian(self, x: Array) -> Array:
        return np.vstack([self.A, 2.0 * x])

    def problem(self) -> Problem:
        return Problem(
            n=self.n,
            m=self.m,
            objective=self.objective,
            gradient=self.gradient,
            constraints=self.constraints,
            jacobian=self.jacobian,
            x0=self.x1,
            name="constrained-logreg",
        )

    # -- oracles ---------------------------------------------------------
    def per_sample_variance(self, x: Array) -> float:
        """Exact population second moment of a single-sample gradient error."""
        z = self._margins(x)
        w = -self.dataset.labels * expit(-z)
        per_sample = self.dataset.features * w  # column i = gradient of sample i
        mean = per_sample.mean(axis=1, keepdims=True)
        return float(np.mean(np.sum((per_sample - mean) ** 2, axis=0)))

    def minibatch_oracle(self) -> StochasticGradientOracle:
        """Mini-batch oracle sampling with replacement (i.i.d. averaging)."""
        n_samples = self.dataset.n_samples

        def sample(x, batch, rng):
            if batch < 1:
                raise ValueError("batch size must be >= 1")
            idx = rng.integers(0, n_samples, size=batch)
            return logistic_minibatch_gradient(self, x, idx)

        return StochasticGradientOracle(sample=sample, sigma2=self.per_sample_variance(self.x1))

    def full_batch_oracle(self) -> StochasticGradientOracle:
        """Without-replacement full pass, exact by construction (sigma2 = 0)."""

        def sample(x, batch, rng):
            if batch < 1:
                raise ValueError("batch size must be >= 1")
            return self.gradient(x)

        return StochasticGradientOracle(sample=sample, sigma2=0.0)

    def lipschitz_bounds(self):
        """Certified ``(lip_gradf, lip_jac)`` for this instance family.

        The logistic Hessian is ``(1/N) D W D'`` with ``W`` diagonal and
        bounded by 1/4, so ``||D||_2^2 / (4N)`` bounds the gradient
        Lipschitz constant; the Jacobian map is affine in ``x`` with
        constant exactly 2 from the sphere row.
        """
        spectral = np.linalg.norm(self.dataset.features, ord=2)
        return float(spectral**2 / (4.0 * self.dataset.n_samples)), 2.0


def logistic_minibatch_gradient(instance: ConstrainedLogRegInstance, x: Array, indices) -> Array:
    """Average of per-sample logistic gradients over 0-based ``indices``.

    The per-sample gradient is ``-gamma_i * sigmoid(-gamma_i <d_i, x>) d_i``;
    the sigmoid saturates to 0 without overflow for large margins.
    """
    idx = np.asarray(indices)
    if idx.size == 0:
        raise ValueError("indices must be nonempty")
    if idx.min() < 0 or idx.max() >= instance.dataset.n_samples:
        raise ValueError("sample index out of range")
    d = instance.dataset.features[:, idx]
    g = instance.dataset.labels[idx]
    z = g * (d.T @ np.asarray(x, dtype=float))
    w = -g * expit(-z)
    return d @ w / idx.size


def build_instance(
    dataset: Dataset,
    m_lin: int,
    seed: int,
    max_tries: int = 10,
) -> ConstrainedLogRegInstance:
    """Draw ``(A, b, x1)`` from a seed and verify the rank conditions.

    Both ``A`` and the full Jacobian at the initial point must pass the
    singular-value threshold; a failed draw is retried with fresh
    standard normals, and :class:`ConstructionError` is raised after
    ``max_tries`` attempts.  Identical seeds produce bitwise-identical
    instances.
    """
    if dataset.n_samples < 1:
        raise ConstructionError("dataset is empty")
    n = dataset.n_features
    if m_lin + 1 > n:
        raise ConstructionError(f"m_lin + 1 = {m_lin + 1} exceeds the feature dimension {n}")
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        A = rng.standard_normal((m_lin, n))
        b = rng.standard_normal(m_lin)
        x1 = rng.standard_normal(n)
        jac_at_start = np.vstack([A, 2.0 * x1])
        if _full_row_rank(A) and _full_row_rank(jac_at_start):
            return ConstrainedLogRegInstance(dataset=dataset, A=A, b=b, x1=x1)
    raise ConstructionError(f"rank checks failed in {max_tries} attempts")


def load_bundled_instance(m_lin: int = 10, seed: int = 0) -> ConstrainedLogRegInstance:
    """Standard instance over the bundled dataset (fixed constraint seed)."""
    return build_instance(load_bundled_dataset(), m_lin=m_lin, seed=seed)
