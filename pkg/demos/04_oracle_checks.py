"""
Checking the fast operators against slow oracles
================================================

Each closed-form kernel has a brute-force counterpart that shares no code
with it. This script runs a small sweep and prints the comparison table.
"""

from robustmdp.checks import ORACLE_CSV_HEADER, run_oracle_checks

rows = run_oracle_checks(seed=0, cases=5, tols=[1e-6, 1e-10], grid_step=1e-3, samples=2000)

print(",".join(ORACLE_CSV_HEADER))
for row in rows:
    print(",".join(str(x) for x in row.as_csv()))
print("all passed:", all(r.passed for r in rows))
