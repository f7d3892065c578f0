"""
Relative cost of robust sweeps
==============================

Time one Bellman sweep per setting and divide by the non-robust sweep on
the same instance. Closed-form norms stay within a small factor; p=10 in the
s-rectangular case pays for its bisection.
"""

import sys

from robustmdp.bench import BenchSpec, run_bench, write_csv

spec = BenchSpec(sizes=[(50, 10)], repeats=3, iters=30,
                 settings=["nr", "sa-p1", "sa-p2", "s-p1", "s-p2", "s-pinf", "s-p10"])
rows = run_bench(spec)
write_csv(rows, sys.stdout)
