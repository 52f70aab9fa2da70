"""Small-sample intervals for an exponential rate.

With n = 3 observations the Wald interval for the rate reaches below zero,
while the interval from the quantile-modified score stays in the parameter
space and almost coincides with the exact chi-squared interval.  The second
half computes the exact coverage of each lower limit from the gamma law of
the sample sum, so no simulation is needed.
"""

import math

import numpy as np
from scipy import stats

from qbrci import Inference, exponential_model
from qbrci.specialfn import norm_quantile

y = np.array([0.4, 1.7, 0.9])  # sample mean 1, so the MLE of the rate is 1
inf = Inference(exponential_model(y))
print(f"n = {y.size}, MLE = {inf.mle[0]:.3f}, median-unbiased estimate = {inf.mbr[0]:.3f}\n")
for level in (0.90, 0.95, 0.99):
    print(f"{100 * level:g}% two-sided")
    for method in ("ML", "MBR", "QBR", "EXACT"):
        ci = inf.interval(0, level, method=method)
        print(f"  {method:<6}[{ci.lo:6.3f}, {ci.hi:6.3f}]")
    print()

# A lower limit c * theta_hat covers theta = 1 exactly when sum(y) > n c,
# and sum(y) ~ Gamma(n, 1).
print("exact coverage of the 97.5% lower limit")
print(f"{'n':>4}{'QBR':>10}{'ML':>10}")
u = norm_quantile(0.975)
for n in (3, 5, 10, 20, 50):
    c = Inference(exponential_model(np.ones(n))).root(0, 0.975).root
    qbr = stats.gamma.sf(n * c, n)
    ml = stats.gamma.sf(n * (1 - u / math.sqrt(n)), n)
    print(f"{n:>4}{qbr:>10.4f}{ml:>10.4f}")
