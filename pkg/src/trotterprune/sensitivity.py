"""First-order Sobol sensitivity indices from a Saltelli design.

The partial variance attributed to input i is estimated as

    V_i = (1/N) sum_n (f(B)_n - f0) * (f(A_i(B))_n - f(A)_n)

with f0 the pooled sample mean.  Subtracting f0 leaves the expectation
unchanged (E[f(A_i(B)) - f(A)] = 0) but makes the estimator exactly
shift-invariant: without it, a model whose mean dwarfs its standard
deviation drowns the partial variances in sampling noise proportional to
the mean.  The total variance is the unbiased sample variance of the pooled
evaluations f(A) and f(B) (2N values; pooling halves the estimator noise
relative to using either matrix alone).  S_i = V_i / Var(y).  Estimator
noise can make individual S_i slightly negative; values are reported as
estimated, not clipped.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .sobol import SaltelliDesign

# Var(y) at or below this (relative) floor means a constant model.
DEGENERATE_VARIANCE_RTOL = 1e-14


class DegenerateVarianceError(ValueError):
    """Model output variance is numerically zero; indices are undefined."""


class ModelEvaluationError(RuntimeError):
    """The model raised on some design row; carries the row identity."""


@dataclass(frozen=True)
class ModelEvaluations:
    """Model outputs on the design: f(A), f(B) of shape (N,), f(A_i(B)) of (d, N)."""

    f_a: np.ndarray
    f_b: np.ndarray
    f_ab: np.ndarray

    @property
    def n_samples(self) -> int:
        return self.f_a.shape[0]

    @property
    def dimension(self) -> int:
        return self.f_ab.shape[0]


@dataclass(frozen=True)
class SensitivityReport:
    """First-order sensitivity estimates for one model.

    ``s_index[i] = partial_variance[i] / total_variance``; small negative
    entries are legitimate estimator noise.
    """

    f0: float
    total_variance: float
    partial_variance: np.ndarray  # (d,)
    s_index: np.ndarray           # (d,)
    n_samples: int
    dimension: int


def _evaluate_rows(model, rows: np.ndarray, label: str) -> np.ndarray:
    out = np.empty(rows.shape[0])
    for i in range(rows.shape[0]):
        try:
            out[i] = model(rows[i])
        except Exception as exc:
            raise ModelEvaluationError(f"model failed on {label} row {i}: {exc}") from exc
    return out


def evaluate_design(
    design: SaltelliDesign, model: Callable[[np.ndarray], float]
) -> ModelEvaluations:
    """Apply a scalar model row-wise to A, B and every A_i(B).

    Deterministic for a pure model; rows are visited in index order.
    """
    f_a = _evaluate_rows(model, design.a, "A")
    f_b = _evaluate_rows(model, design.b, "B")
    f_ab = np.empty((design.d, design.n_base))
    for i in range(design.d):
        f_ab[i] = _evaluate_rows(model, design.ab[i], f"AB[{i}]")
    for arr in (f_a, f_b, f_ab):
        arr.flags.writeable = False
    return ModelEvaluations(f_a=f_a, f_b=f_b, f_ab=f_ab)


def first_order_indices(ev: ModelEvaluations) -> SensitivityReport:
    """Estimate V_i, Var(y), f0 and S_i from design evaluations."""
    if ev.n_samples < 2:
        raise ValueError("need at least 2 samples to estimate a variance")
    pooled = np.concatenate([ev.f_a, ev.f_b])
    if not np.all(np.isfinite(pooled)) or not np.all(np.isfinite(ev.f_ab)):
        raise ValueError("model evaluations contain non-finite values")
    f0 = float(np.mean(pooled))
    total_variance = float(np.var(pooled, ddof=1))
    if total_variance <= DEGENERATE_VARIANCE_RTOL * max(1.0, f0 * f0):
        raise DegenerateVarianceError(
            f"total variance {total_variance:.3e} is numerically zero; "
            "sensitivity indices are undefined for a constant model"
        )
    partial_variance = np.mean((ev.f_b - f0) * (ev.f_ab - ev.f_a), axis=1)
    s_index = partial_variance / total_variance
    for arr in (partial_variance, s_index):
        arr.flags.writeable = False
    return SensitivityReport(
        f0=f0,
        total_variance=total_variance,
        partial_variance=partial_variance,
        s_index=s_index,
        n_samples=ev.n_samples,
        dimension=ev.dimension,
    )


def select_below_mean_threshold(report: SensitivityReport, ratio: float) -> set[int]:
    """Indices i with S_i strictly below mean(S) / ratio.

    The mean runs over all d estimated indices, negatives included, and
    negative estimates always count as below any positive threshold.
    """
    if not ratio >= 1:
        raise ValueError(f"ratio must be >= 1, got {ratio}")
    threshold = float(np.mean(report.s_index)) / ratio
    return {i for i, s in enumerate(report.s_index) if s < threshold}
