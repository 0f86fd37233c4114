"""First- and second-order product formulas, exact evolution and error metrics.

With tau = t/steps, a first-order step is the ordered product

    E_1(tau) E_2(tau) ... E_N(tau),        E_n(theta) = exp(-i H_n theta),

applied left to right in ascending term-index order (the ordering affects the
error constant, not the convergence order; it is fixed for reproducibility).
A second-order step is the palindromic Strang form: the forward half-step
product followed by the backward half-step product, each at tau/2.  The full
evolution is the step matrix raised to the ``steps`` power.

The error metric is the Frobenius norm of the difference between exact
evolution exp(-i H t) of the summed Hamiltonian and the product formula.
A "gate" is one term-exponential factor: a first-order step has N of them;
a second-order step has 2N - 1 because the two adjacent half-exponentials
of the last term merge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hamiltonian import ConfigError, TermSet
from .linalg import expm_from_eigensystem, frobenius_norm, hermitian_eigensystem

Eigensystems = list[tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class TrotterConfig:
    """Product-formula order (1 or 2), total time and step count."""

    order: int
    time: float
    steps: int = 1

    def __post_init__(self):
        if self.order not in (1, 2):
            raise ConfigError(f"order must be 1 or 2, got {self.order}")
        if self.steps < 1:
            raise ConfigError(f"steps must be >= 1, got {self.steps}")
        if not np.isfinite(self.time):
            raise ConfigError(f"time must be finite, got {self.time}")


@dataclass(frozen=True)
class TrotterErrorReport:
    """Frobenius error of one product formula against exact evolution."""

    epsilon: float
    gate_count: int
    order: int
    time: float
    steps: int
    term_count: int


def term_eigensystems(ts: TermSet) -> Eigensystems:
    """Eigendecomposition of every term, computed once and reusable across
    any number of (time, steps, order) evaluations."""
    return [hermitian_eigensystem(h) for h in ts.terms]


def _chain(factors: list[np.ndarray], reverse: bool = False) -> np.ndarray:
    """Ordered matrix product, first factor leftmost (or last, if reverse)."""
    seq = factors[::-1] if reverse else factors
    u = seq[0]
    for f in seq[1:]:
        u = u @ f
    return u


def exact_evolution(ts: TermSet, t: float) -> np.ndarray:
    """exp(-i H t) for the summed Hamiltonian H = sum_n H_n."""
    eigvals, eigvecs = hermitian_eigensystem(ts.total())
    return expm_from_eigensystem(eigvals, eigvecs, t)


def trotter_product(
    ts: TermSet, cfg: TrotterConfig, eigs: Eigensystems | None = None
) -> np.ndarray:
    """The product-formula unitary for the given order, time and step count.

    ``eigs`` lets callers reuse precomputed term eigendecompositions; only
    the phase diagonals depend on the time step.
    """
    if eigs is None:
        eigs = term_eigensystems(ts)
    tau = cfg.time / cfg.steps
    if cfg.order == 1:
        step = _chain([expm_from_eigensystem(w, q, tau) for w, q in eigs])
    else:
        halves = [expm_from_eigensystem(w, q, tau / 2) for w, q in eigs]
        step = _chain(halves) @ _chain(halves, reverse=True)
    if cfg.steps == 1:
        return step
    return np.linalg.matrix_power(step, cfg.steps)


def gate_count(term_count: int, order: int, steps: int) -> int:
    """Exponential-factor count of the product formula.

    Order 1: term_count per step.  Order 2: 2*term_count - 1 per step, the
    mid-step pair of half-exponentials of the last term counting as one
    (merging across adjacent steps is not counted).
    """
    if term_count < 1:
        raise ConfigError(f"term_count must be >= 1, got {term_count}")
    if order == 1:
        return term_count * steps
    if order == 2:
        return (2 * term_count - 1) * steps
    raise ConfigError(f"order must be 1 or 2, got {order}")


def trotter_error(
    ts: TermSet,
    cfg: TrotterConfig,
    eigs: Eigensystems | None = None,
    exact: np.ndarray | None = None,
) -> TrotterErrorReport:
    """Frobenius distance between exact evolution and the product formula.

    ``exact`` may be supplied to compare a truncated term set against the
    evolution of a larger Hamiltonian (the truncation-error use case).
    """
    if exact is None:
        exact = exact_evolution(ts, cfg.time)
    product = trotter_product(ts, cfg, eigs=eigs)
    return TrotterErrorReport(
        epsilon=frobenius_norm(exact - product),
        gate_count=gate_count(ts.n_terms, cfg.order, cfg.steps),
        order=cfg.order,
        time=cfg.time,
        steps=cfg.steps,
        term_count=ts.n_terms,
    )
