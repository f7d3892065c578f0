"""
Water-pouring over actions
==========================

In an s-rectangular state the agent picks a mixed action that trades the
average Q-value against a norm penalty. The optimum pours probability onto
the best actions until a common level is reached.
"""

import numpy as np

from robustmdp import water_fill

q_values = np.array([3.0, 2.6, 2.5, 0.4])

# a small budget keeps the policy greedy; larger budgets spread it out
for sigma in (0.05, 0.3, 1.0, 3.0):
    r = water_fill(q_values, sigma, 2)
    print(f"sigma={sigma:<4} level={r.zeta:.4f} active={r.chi} weights={np.round(r.weights, 3)}")

# the norm index changes the shape of the split
for p in (1, 2, 5, np.inf):
    r = water_fill(q_values, 1.0, p)
    print(f"p={p:<4} level={r.zeta:.4f} weights={np.round(r.weights, 3)}")
