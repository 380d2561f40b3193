"""
Largest eigenvalue of small GUE matrices
========================================

Computes the distribution of the largest eigenvalue of an M x M GUE
matrix in two independent ways (Hermite Gram determinant and a contour
Fredholm determinant) and compares both with sampled matrices.
"""

import numpy as np
import matplotlib.pyplot as plt

from shockline import rmt
from shockline.stats import ecdf

grid = np.linspace(-4, 4, 41)
rng = np.random.default_rng(3)
for M in (1, 2, 5):
    hermite = np.array([rmt.gue_m_cdf(s, M) for s in grid])
    contour = np.array([rmt.gue_m_cdf_contour(s, M) for s in grid])
    samples = rmt.sample_gue_max(M, rng, size=20_000)
    print(f"M={M}  max |hermite - contour| = {np.max(np.abs(hermite - contour)):.1e}")
    plt.plot(grid, hermite, label=f"M={M}")
    plt.step(grid, ecdf(samples)(grid), where="post", color="gray", lw=0.7)

# M = 1 is a standard normal
print("M=1 at 0:", rmt.gue_m_cdf(0.0, 1))
plt.xlabel("s")
plt.legend()
plt.show()
