#!/usr/bin/env python3
"""Regenerates the bundled descriptor fixtures under data/.

The QSAR fixture places activity in a disc of (mol_weight, logP) space, so
actives and inactives cannot be split by a hyperplane in the raw features.
"""
import math
import random
import sys
from pathlib import Path

HEADER = "compound_id,ec50_nM,n_donors,n_acceptors,rotatable_bonds,mol_weight,logP"


def row(cid, ec50, nd, na, rb, w, logp):
    return f"{cid},{ec50:.6g},{nd},{na},{rb},{w:.2f},{logp:.3f}"


def qsar(n, seed):
    rng = random.Random(seed)
    lines = [HEADER]
    for i in range(n):
        w = rng.uniform(180.0, 560.0)
        logp = rng.uniform(-1.0, 6.0)
        rb = rng.randint(0, 12)
        nd = rng.randint(0, 6)
        na = rng.randint(1, 11)
        u = (w - 370.0) / 190.0
        v = (logp - 2.5) / 3.5
        p = 7.6 - 3.2 * (u * u + v * v) + rng.gauss(0.0, 0.15)
        lines.append(row(f"QK{i + 1:03d}", 10.0 ** (9.0 - p), nd, na, rb, w, logp))
    return lines


def small(n, seed):
    rng = random.Random(seed)
    lines = [HEADER]
    for i in range(n):
        p = 5.0 + 2.0 * (i % 2) + rng.uniform(-0.5, 0.5)
        lines.append(row(f"S{i + 1:02d}", 10.0 ** (9.0 - p), rng.randint(0, 5), rng.randint(1, 10),
                         rng.randint(0, 10), rng.uniform(200, 480), rng.uniform(0, 5)))
    return lines


def separable():
    pts = [(-1, 0.0, 0.0), (-1, 0.5, 0.3), (-1, 0.2, 0.8), (-1, 0.9, 0.1),
           (1, 4.0, 4.0), (1, 4.6, 3.8), (1, 3.9, 4.7), (1, 4.4, 4.4)]
    lines = ["compound_id,label,x1,x2"]
    for i, (y, a, b) in enumerate(pts):
        lines.append(f"L{i + 1},{y},{a},{b}")
    return lines


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "data"
    out.mkdir(parents=True, exist_ok=True)
    (out / "qsar_disc.csv").write_text("\n".join(qsar(120, 20240611)) + "\n")
    (out / "small20.csv").write_text("\n".join(small(20, 7)) + "\n")
    (out / "separable8.csv").write_text("\n".join(separable()) + "\n")


if __name__ == "__main__":
    main()
