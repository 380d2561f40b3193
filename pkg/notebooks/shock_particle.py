"""
The shock particle and its two reference systems
================================================

Runs the shock system together with the half-flat system A and the slow
step system B on one clock field, checks the pathwise min identity and
compares the rescaled shock particle with its limit law.
Takes a few seconds.
"""

import numpy as np
import matplotlib.pyplot as plt

from shockline import engine as E
from shockline import rmt
from shockline.stats import ecdf

alpha, M, eta, t = 0.25, 1, 0.0, 250.0
sc = E.shock_constants(alpha, M, eta, t)
n = sc.n_of_t
print("tracked label", n, "sigma", round(sc.sigma, 4))

# the three systems share one clock per label
systems = [E.make_initial(k, n, t, M=M, alpha=alpha, log_mode=E.LOG_NONE)
           for k in ("shock", "half_flat_A", "slow_step_B")]
res = E.sweep_batch(systems, 11, 3000, t, [n])
x, xa, xb = (res.final[:, k, 0] for k in range(3))
print("min identity violations:", int(np.sum(x != np.minimum(xa, xb))))

# x equals x^A exactly when A is the minimum; that event carries the atom
xh = sc.xi_hat(x)
print("P(x = x^A) =", np.mean(x == xa), " limit atom:", rmt.gue_m_cdf(sc.xi_c, M))

# beyond the atom the limit is F_GUE,M(s + xi_c); finite t smears the atom
s = np.linspace(-3, 3, 121)
limit = np.where(s < 0, 0.0, [rmt.gue_m_cdf(v + sc.xi_c, M) for v in s])
plt.step(s, ecdf(xh)(s), where="post", label=f"simulation t={t:g}")
plt.plot(s, limit, label="limit")
plt.xlabel("rescaled position")
plt.legend()
plt.show()
