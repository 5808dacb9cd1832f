"""Success probability over the parameter grid, formula next to simulation."""

import numpy as np

from hyperecp import analysis

rows = analysis.sweep(step=0.1)
grid = sorted({r.alpha2 for r in rows})
p1 = np.array([r.p1 for r in rows]).reshape(len(grid), len(grid))
p2 = np.array([r.p2 for r in rows]).reshape(len(grid), len(grid))

np.set_printoptions(precision=4, suppress=True)
print("|alpha|^2 and |gamma|^2 grid:", grid)
print("single round:\n", p1)
print("gain from recycling:\n", p2 - p1)
print("largest formula/simulation gap:", max(r.max_dev for r in rows))
