"""Monte Carlo coverage of the three approximate intervals.

Runs the exponential (n = 5) and gamma (n = 15) scenarios and prints the
non-coverage discrepancy: empirical non-coverage divided by its nominal
value, so 1 is ideal, above 1 means the interval is too short.  Pass a
replicate count and worker count on the command line, e.g.

    python demos/03_coverage_experiment.py 2000 4
"""

import sys

from qbrci.simulate import SimConfig, simulate

reps = int(sys.argv[1]) if len(sys.argv) > 1 else 1000
workers = int(sys.argv[2]) if len(sys.argv) > 2 else 1

for scenario in ("exp5", "gamma15"):
    cfg = SimConfig(scenario, methods=("ML", "MBR", "QBR"), levels=(0.90, 0.95, 0.99),
                    kinds=("two-sided",), replicates=reps if scenario == "exp5" else reps // 10,
                    seed=42, workers=workers)
    report = simulate(cfg)
    print(f"\n{scenario}: {report.replicates} replicates")
    print(f"{'parameter':<10}{'level':>7}{'ML':>8}{'MBR':>8}{'QBR':>8}   (discrepancy)")
    params = sorted({r.parameter for r in report.rows}, key=[r.parameter for r in report.rows].index)
    for p in params:
        for level in cfg.levels:
            d = [report.get(p, m, level).discrepancy for m in ("ML", "MBR", "QBR")]
            print(f"{p:<10}{level:>7.2f}" + "".join(f"{v:8.2f}" for v in d))
