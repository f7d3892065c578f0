"""
How spread out is a value vector?
=================================

The robust penalty depends on the value vector only through its p-variance,
the distance from ``v`` to the closest constant vector in the L_p norm.
"""

import numpy as np

from robustmdp import p_mean
from robustmdp.oracle import OracleConfig, kappa_grid

v = np.array([1.0, 2.0, 6.0, 3.5])

# closed forms: median for p=1, mean for p=2, midrange for p=inf
for p in (1, 2, np.inf):
    res = p_mean(v, p)
    print(f"p={p:<4} omega={res.omega:.4f} kappa={res.kappa:.4f}")

# any other exponent is solved by bisection on the derivative
res = p_mean(v, 3.0)
print(f"p=3    omega={res.omega:.6f} kappa={res.kappa:.6f} ({res.iterations} bisection steps)")

# a brute-force scan over candidate shifts agrees to the grid resolution
print("grid  kappa_3 =", round(kappa_grid(v, 3.0, OracleConfig(grid_step=1e-4)), 6))

# shifting v leaves kappa unchanged, scaling v scales it
print("shift:", p_mean(v + 10.0, 3.0).kappa, " scale x2:", p_mean(2 * v, 3.0).kappa)
