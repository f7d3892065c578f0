"""
Robust value iteration on a random MDP
======================================

Compare the non-robust optimum with sa- and s-rectangular robust optima for
the same nominal model.
"""

import numpy as np

from robustmdp import SolveConfig, UncertaintySpec, random_instance, value_iteration

inst = random_instance(6, 3, seed=1, gamma=0.9)
cfg = SolveConfig(epsilon=1e-8)

nominal = value_iteration(inst, UncertaintySpec.nonrobust(inst.S, inst.A), cfg)
print("non-robust v*:", np.round(nominal.value, 3))

for rect in ("sa", "s"):
    unc = UncertaintySpec.uniform(inst, rect, 2, alpha=0.05, beta=0.001)
    rep = value_iteration(inst, unc, cfg)
    print(f"{rect:>2}-rect v*:   ", np.round(rep.value, 3), f"({rep.iterations} sweeps)")
    # robustness only ever costs value
    assert np.all(rep.value <= nominal.value + 1e-9)

# s-rectangular optimal policies may randomize; chi counts the active actions
print("s-rect policy:\n", np.round(rep.policy, 3))
print("active actions per state:", rep.chi_per_state)
