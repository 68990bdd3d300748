"""
Sketching when there are many more residuals than unknowns
===========================================================

A synthetic problem with d = 50 unknowns and n = 20000 residuals. With
only 2(d+1) evaluations, compare the best objective reached and the time
spent building models, with and without sketching.
"""

import numpy as np

from sketchdfo import SketchConfig, SolverConfig, random_nlls, run

d, n = 50, 20000
problem = random_nlls(d, n, seed=0)
print(f"f(x0) = {problem.objective(problem.x0):.1f}")

variants = [
    ("none", SketchConfig("none")),
    ("sampling m=d", SketchConfig("sampling", m=d)),
    ("hashing m=d", SketchConfig("hashing", m=d)),
    ("hashing m=5d", SketchConfig("hashing", m=5 * d)),
    ("gaussian m=d", SketchConfig("gaussian", m=d)),
]
model_tasks = ("sketch_build", "sketch_apply", "interp_solve", "model_build")

print(f"{'variant':<14}{'f_final':>12}{'model s':>10}{'total s':>10}")
for label, sketch in variants:
    finals, model_s, total_s = [], [], []
    for seed in range(3):
        cfg = SolverConfig(max_evals=2 * (d + 1), seed=seed,
                           sketch=SketchConfig(sketch.kind, m=sketch.m, seed=seed))
        res = run(problem, cfg)
        finals.append(res.f_final)
        model_s.append(sum(res.timings[k] for k in model_tasks))
        total_s.append(res.timings["total"])
    print(f"{label:<14}{np.mean(finals):>12.2f}{np.mean(model_s):>10.3f}{np.mean(total_s):>10.3f}")

# the gaussian sketch costs as much to draw and apply as the unsketched
# solve, so it saves nothing here; sampling and hashing do
