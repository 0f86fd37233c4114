"""Random Hermitian term ensembles and the weighted-norm model.

Terms are GUE-style: M = (G + G^dag)/2 with G having independent complex
Gaussian entries (real and imaginary parts each standard normal), giving
E|M_ij|^2 = 1 for every entry and hence E||M||_F^2 = dim^2.  Sparse terms
keep each upper-triangle entry (diagonal included) with independent
probability ``density`` and mirror the survivors Hermitian-conjugately, so
sparsity is a property of generation only; storage stays dense.

Randomness comes from the Philox 4x64 counter-based generator keyed by
(seed, stream): stream i < n_terms drives term i, and a reserved stream
drives the choice of which terms to weaken.  Streams are independent, so
term generation order cannot perturb the draws.

The model handed to the sensitivity analysis is beta -> ||sum_n beta_n H_n||_F.
A precomputed Gram matrix g[m][n] = Re tr(H_m^dag H_n) turns each evaluation
into the quadratic form sqrt(beta^T g beta), which is what makes the
N*(d+2)-point designs cheap: one O(d^2 dim^2) precomputation replaces an
O(dim^2 d) assembly per model call with O(d^2).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Iterable

import numpy as np

from .linalg import frobenius_norm

# Philox stream reserved for the weakened-subset selection; term streams are
# 0..n_terms-1, so any n_terms < 2^64 - 1 is collision-free.
SELECTION_STREAM = 2**64 - 1


class ConfigError(ValueError):
    """A configuration parameter is out of range or inconsistent."""


class NegativeFormError(ValueError):
    """Quadratic form went negative beyond rounding tolerance (corrupt Gram matrix)."""


def stream_rng(seed: int, stream: int) -> np.random.Generator:
    """Philox generator for one (seed, stream) pair."""
    key = np.array([seed, stream], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def random_hermitian(dim: int, density: float, rng: np.random.Generator) -> np.ndarray:
    """One random Hermitian matrix; exact zeros off the sparsity pattern.

    Draw order is fixed (real part, imaginary part, then the sparsity
    uniforms when density < 1), so a given generator state always yields the
    same matrix, and density == 1 consumes no sparsity draws.
    """
    if dim < 2:
        raise ConfigError(f"dim must be >= 2, got {dim}")
    if not 0 < density <= 1:
        raise ConfigError(f"density must be in (0, 1], got {density}")
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    h = (g + g.conj().T) / 2
    if density < 1:
        keep_upper = np.triu(rng.random((dim, dim)) < density)
        h = h * (keep_upper | keep_upper.T)
    return h


@dataclass(frozen=True)
class TermSet:
    """Ordered Hermitian terms with weakening metadata and provenance seed.

    ``terms`` has shape (n_terms, dim, dim), complex128, and is marked
    read-only; indices in ``weakened`` were multiplied by ``weaken_factor``
    after generation.  ``subset`` views carry the parent's seed/density so a
    truncated ensemble stays traceable to its origin.
    """

    qubits: int
    terms: np.ndarray
    weakened: tuple[int, ...]
    weaken_factor: float
    density: float
    seed: int

    @property
    def dim(self) -> int:
        return self.terms.shape[1]

    @property
    def n_terms(self) -> int:
        return self.terms.shape[0]

    def total(self) -> np.ndarray:
        """The summed Hamiltonian (Hermitian)."""
        return self.terms.sum(axis=0)

    def subset(self, keep: Iterable[int]) -> "TermSet":
        """New TermSet with only the given original term indices, in order."""
        keep = sorted(set(int(i) for i in keep))
        if keep and not (0 <= keep[0] and keep[-1] < self.n_terms):
            raise IndexError(f"term indices out of range: {keep}")
        terms = self.terms[keep].copy()
        terms.flags.writeable = False
        old_weak = set(self.weakened)
        weakened = tuple(new for new, old in enumerate(keep) if old in old_weak)
        return replace(self, terms=terms, weakened=weakened)


def build_term_set(
    qubits: int,
    n_terms: int,
    density: float = 1.0,
    weaken_count: int = 0,
    weaken_factor: float = 1.0,
    seed: int = 0,
) -> TermSet:
    """Generate n_terms random Hermitians of dim 2^qubits and weaken some.

    Exactly ``weaken_count`` distinct term indices are chosen uniformly (by
    ranking one i.i.d. uniform draw per term from the reserved selection
    stream) and their matrices are multiplied by ``weaken_factor``.  The term
    count is unchanged by weakening.
    """
    if qubits < 1:
        raise ConfigError(f"qubits must be >= 1, got {qubits}")
    if n_terms < 1:
        raise ConfigError(f"n_terms must be >= 1, got {n_terms}")
    if not 0 <= weaken_count <= n_terms:
        raise ConfigError(f"weaken_count must be in [0, {n_terms}], got {weaken_count}")
    if not weaken_factor > 0:
        raise ConfigError(f"weaken_factor must be positive, got {weaken_factor}")
    dim = 2**qubits
    terms = np.stack(
        [random_hermitian(dim, density, stream_rng(seed, i)) for i in range(n_terms)]
    )
    scores = stream_rng(seed, SELECTION_STREAM).random(n_terms)
    weakened = tuple(sorted(int(i) for i in np.argsort(scores, kind="stable")[:weaken_count]))
    for i in weakened:
        terms[i] *= weaken_factor
    terms.flags.writeable = False
    return TermSet(
        qubits=qubits,
        terms=terms,
        weakened=weakened,
        weaken_factor=weaken_factor,
        density=density,
        seed=seed,
    )


def gram_matrix(ts: TermSet) -> np.ndarray:
    """Real Gram matrix g[m][n] = Re tr(H_m^dag H_n), shape (n_terms, n_terms).

    Symmetric positive semidefinite with g[n][n] = ||H_n||_F^2.  Computed as
    W W^T on the real/imaginary interleaved view of the stacked terms (one
    BLAS call, no copies), then symmetrized to kill GEMM rounding skew.
    """
    w = ts.terms.reshape(ts.n_terms, -1).view(np.float64)
    g = w @ w.T
    return (g + g.T) / 2


def combination_norm(g: np.ndarray, beta: np.ndarray) -> float:
    """sqrt(beta^T g beta) = ||sum_n beta_n H_n||_F via the Gram matrix.

    Tiny negative quadratic forms (rounding on a PSD matrix) are clamped to
    zero; anything below -1e-10 * scale means g is corrupted.
    """
    beta = np.asarray(beta, dtype=np.float64)
    if beta.shape != (g.shape[0],):
        raise ValueError(f"beta has shape {beta.shape}, expected ({g.shape[0]},)")
    q = float(beta @ g @ beta)
    scale = float(np.trace(g)) * max(1.0, float(beta @ beta))
    if q < -1e-10 * scale:
        raise NegativeFormError(f"quadratic form {q:.3e} below tolerance for scale {scale:.3e}")
    return np.sqrt(max(q, 0.0))


def norm_model(g: np.ndarray) -> Callable[[np.ndarray], float]:
    """The scalar model beta -> combination_norm(g, beta) for evaluate_design."""
    return lambda beta: combination_norm(g, beta)


def assemble_combination(ts: TermSet, beta: np.ndarray) -> np.ndarray:
    """Direct assembly sum_n beta_n H_n (the slow path the Gram matrix replaces)."""
    return np.einsum("n,nij->ij", np.asarray(beta, dtype=np.float64), ts.terms)


TERMSET_LAYOUT_VERSION = 1


def save_term_set(ts: TermSet, path) -> None:
    """Write a TermSet to an .npz container for bit-exact re-runs.

    Layout version 1: scalars ``layout_version, qubits, weaken_factor,
    density, seed``, int64 array ``weakened``, complex128 array ``terms`` of
    shape (n_terms, dim, dim).
    """
    np.savez(
        path,
        layout_version=np.int64(TERMSET_LAYOUT_VERSION),
        qubits=np.int64(ts.qubits),
        weaken_factor=np.float64(ts.weaken_factor),
        density=np.float64(ts.density),
        seed=np.int64(ts.seed),
        weakened=np.array(ts.weakened, dtype=np.int64),
        terms=ts.terms,
    )


def load_term_set(path) -> TermSet:
    """Read a TermSet written by save_term_set."""
    with np.load(path) as data:
        version = int(data["layout_version"])
        if version != TERMSET_LAYOUT_VERSION:
            raise ValueError(f"unsupported TermSet layout version {version}")
        terms = data["terms"]
        terms.flags.writeable = False
        return TermSet(
            qubits=int(data["qubits"]),
            terms=terms,
            weakened=tuple(int(i) for i in data["weakened"]),
            weaken_factor=float(data["weaken_factor"]),
            density=float(data["density"]),
            seed=int(data["seed"]),
        )
