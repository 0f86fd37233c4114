"""Regenerate the bundled Sobol direction-number table.

The packaged table ``src/trotterprune/data/joe-kuo-1280.txt`` holds the
classic Joe & Kuo (2008) "new" direction numbers in their plain-text format:
a header line, then one line per dimension ``d s a m_1 ... m_s`` starting at
d=2 (dimension 1 is the base-2 van der Corput radical inverse and needs no
entry).  scipy packages the same table in binary form; this script decodes it
back into the text format so the repository carries the data without a scipy
dependency at runtime.

Usage: python scripts/make_direction_table.py [max_dim] [out_path]
"""

import os
import sys

import numpy as np
import scipy.stats._sobol as _sobol_mod

DEFAULT_MAX_DIM = 1280
DEFAULT_OUT = os.path.join(
    os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
    "src", "trotterprune", "data", "joe-kuo-1280.txt",
)


def main() -> int:
    max_dim = int(sys.argv[1]) if len(sys.argv) > 1 else DEFAULT_MAX_DIM
    out_path = sys.argv[2] if len(sys.argv) > 2 else DEFAULT_OUT

    data = np.load(
        os.path.join(os.path.dirname(_sobol_mod.__file__), "_sobol_direction_numbers.npz")
    )
    poly = data["poly"]
    vinit = data["vinit"]
    if max_dim > poly.shape[0]:
        raise SystemExit(f"table only covers {poly.shape[0]} dimensions")

    lines = ["d       s       a       m_i"]
    for dim in range(2, max_dim + 1):
        p = int(poly[dim - 1])
        s = p.bit_length() - 1
        # p encodes the primitive polynomial x^s + c_1 x^(s-1) + ... + c_(s-1) x + 1
        # as the bit string 1 c_1 ... c_(s-1) 1; a keeps only the middle bits.
        a = (p - (1 << s) - 1) >> 1
        m = [int(v) for v in vinit[dim - 1][:s]]
        if any(v <= 0 for v in m):
            raise SystemExit(f"bad initial values for dimension {dim}: {m}")
        lines.append(f"{dim} {s} {a} " + " ".join(str(v) for v in m))

    with open(out_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"wrote {max_dim - 1} table rows to {out_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
