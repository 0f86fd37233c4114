"""Sobol low-discrepancy sequences and the Saltelli cross-sampling design.

Points are generated from the Joe & Kuo (2008) direction numbers bundled at
``data/joe-kuo-1280.txt``.  The file is plain text: a header line, then one
whitespace-separated line per dimension ``d s a m_1 ... m_s`` where ``s`` is
the degree of the primitive polynomial, ``a`` encodes its middle coefficients
and ``m_1..m_s`` are the initial direction values.  Dimension 1 (the base-2
van der Corput sequence) has no line.  An alternative table can be supplied
by path, e.g. to extend the 1280-dimension default capacity.

Generation uses Gray-code ordering: point i is the XOR of the direction
vectors selected by the bits of gray(i) = i ^ (i >> 1).  Within any block of
2^m consecutive indices starting at 0 the emitted point set equals the
natural-order set, and access is stateless by index, so disjoint index
ranges can be generated independently.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

MAXBIT = 32
_SCALE = 2.0 ** -MAXBIT
_INDEX_LIMIT = 2**31


class DimensionExceededError(ValueError):
    """Requested dimension exceeds the loaded direction-number table."""


def _parse_direction_lines(lines: list[str]) -> np.ndarray:
    """Direction vectors V[dim][bit] (uint64, bit < MAXBIT) from table rows."""
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):  # first line is a header
        if not line.strip():
            continue
        fields = line.split()
        d, s, a = int(fields[0]), int(fields[1]), int(fields[2])
        m = [int(x) for x in fields[3:]]
        if len(m) != s:
            raise ValueError(f"line {lineno}: expected {s} initial values, got {len(m)}")
        rows.append((d, s, a, m))
    if not rows:
        raise ValueError("direction-number table has no data rows")
    max_dim = max(d for d, _, _, _ in rows)

    table = np.zeros((max_dim, MAXBIT), dtype=np.uint64)
    # Dimension 1: van der Corput, every m_k = 1.
    table[0] = [1 << (MAXBIT - 1 - k) for k in range(MAXBIT)]
    for d, s, a, m in rows:
        v = [0] * MAXBIT
        for k in range(min(s, MAXBIT)):
            v[k] = m[k] << (MAXBIT - 1 - k)
        for k in range(s, MAXBIT):
            v[k] = v[k - s] ^ (v[k - s] >> s)
            for j in range(1, s):
                if (a >> (s - 1 - j)) & 1:
                    v[k] ^= v[k - j]
        table[d - 1] = v
    return table


@lru_cache(maxsize=4)
def load_direction_table(path: str | None = None) -> np.ndarray:
    """Load (and cache) a direction-vector table; None means the bundled file."""
    if path is None:
        text = resources.files("trotterprune").joinpath("data/joe-kuo-1280.txt").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    return _parse_direction_lines(text.splitlines())


class SobolGenerator:
    """Sobol sequence generator for a fixed dimension.

    ``points(n, skip)`` is stateless indexed access; ``draw(n)`` advances an
    internal cursor for sequential use.  Two generators with the same
    dimension and table produce bit-identical output.
    """

    def __init__(self, dimension: int, table_path: str | None = None):
        table = load_direction_table(table_path)
        if dimension < 1:
            raise ValueError(f"dimension must be positive, got {dimension}")
        if dimension > table.shape[0]:
            raise DimensionExceededError(
                f"dimension {dimension} exceeds table capacity {table.shape[0]}"
            )
        self.dimension = dimension
        self.index = 0
        self._capacity = table.shape[0]
        self._directions = table[:dimension]  # (dimension, MAXBIT)

    @property
    def capacity(self) -> int:
        """Number of dimensions the loaded table supports."""
        return self._capacity

    def points(self, n: int, skip: int = 0) -> np.ndarray:
        """Points skip .. skip+n-1 of the sequence, shape (n, dimension) in [0, 1)."""
        if n < 0 or skip < 0:
            raise ValueError("n and skip must be nonnegative")
        if n + skip > _INDEX_LIMIT:
            raise ValueError(f"n + skip must not exceed {_INDEX_LIMIT}")
        idx = np.arange(skip, skip + n, dtype=np.uint64)
        gray = idx ^ (idx >> np.uint64(1))
        acc = np.zeros((n, self.dimension), dtype=np.uint64)
        for bit in range(MAXBIT):
            sel = (gray >> np.uint64(bit)) & np.uint64(1) == 1
            if sel.any():
                acc[sel] ^= self._directions[:, bit]
        return acc * _SCALE

    def draw(self, n: int) -> np.ndarray:
        """Next n points after the cursor; advances the cursor."""
        pts = self.points(n, skip=self.index)
        self.index += n
        return pts


def sobol_points(dim: int, n: int, skip: int = 0, table_path: str | None = None) -> np.ndarray:
    """Convenience wrapper: points skip..skip+n-1 in dim dimensions."""
    return SobolGenerator(dim, table_path).points(n, skip=skip)


@dataclass(frozen=True)
class SaltelliDesign:
    """Sample matrices A, B and the column-swapped A_i(B) for first-order indices.

    ``ab[i]`` equals ``a`` in every column except column i, which is taken
    from ``b``.  Evaluating a model on all rows costs n_base * (d + 2) runs.
    """

    a: np.ndarray   # (N, d)
    b: np.ndarray   # (N, d)
    ab: np.ndarray  # (d, N, d)

    @property
    def d(self) -> int:
        return self.a.shape[1]

    @property
    def n_base(self) -> int:
        return self.a.shape[0]

    @property
    def evaluation_count(self) -> int:
        return self.n_base * (self.d + 2)


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def saltelli_design(d: int, n_base: int, table_path: str | None = None) -> SaltelliDesign:
    """Cross-sampling design from N points of the 2d-dimensional Sobol sequence.

    The first d coordinates of each point form A, the last d form B, and
    ab[i] is A with column i replaced by B's column i.  The all-zeros first
    point of the sequence is skipped (it would make weighted-norm models
    exactly zero), so generation starts at index 1.  n_base must be a power
    of two to keep the net balance of the Sobol blocks.
    """
    if d < 1:
        raise ValueError(f"d must be positive, got {d}")
    if not is_power_of_two(n_base):
        raise ValueError(f"n_base must be a power of two, got {n_base}")
    pts = sobol_points(2 * d, n_base, skip=1, table_path=table_path)
    a = np.ascontiguousarray(pts[:, :d])
    b = np.ascontiguousarray(pts[:, d:])
    ab = np.broadcast_to(a, (d, n_base, d)).copy()
    for i in range(d):
        ab[i, :, i] = b[:, i]
    for arr in (a, b, ab):
        arr.flags.writeable = False
    return SaltelliDesign(a=a, b=b, ab=ab)
