"""
How well do random sketches preserve norms?
===========================================

Each sketch maps R^n to R^m. On average it keeps squared lengths, and
the spread around 1 shrinks as m grows. The same loop also shows what
applying each sketch to a (d, n) block costs.
"""

import numpy as np

from sketchdfo.instrument import OpCounts
from sketchdfo.sketch import SketchConfig, apply_to_matrix_right, apply_to_vector, make_sketch

n = 2000
rng = np.random.default_rng(0)
v = rng.standard_normal(n)
v /= np.linalg.norm(v)

print(f"{'sketch':<12}{'m':>6}{'mean':>9}{'std':>9}")
for kind, s in [("gaussian", 1), ("sampling", 1), ("hashing", 1), ("hashing", 4)]:
    for m in (20, 100, 500):
        cfg = SketchConfig(kind, m=m, hash_nnz=s)
        ratios = [np.sum(apply_to_vector(make_sketch(cfg, n, rng), v) ** 2) for _ in range(500)]
        label = kind if kind != "hashing" else f"hashing/{s}"
        print(f"{label:<12}{m:>6}{np.mean(ratios):>9.3f}{np.std(ratios):>9.3f}")

# sampling is only a gather, hashing touches each entry s times,
# gaussian is a dense product
d, m = 50, 100
R = rng.standard_normal((d, n))
for kind in ("gaussian", "sampling", "hashing"):
    counts = OpCounts()
    apply_to_matrix_right(make_sketch(SketchConfig(kind, m=m), n), R, counts)
    print(kind, dict(counts))
