"""
Mass transport on the time axis
===============================

"""

from bridgegraph import builtin, cycle_visit_means, estimate_transports
from bridgegraph.mtp import PAIRED, transports_csv

spec = builtin("uniform3")

# each transport sends mass between times; on average sent = received
ests = estimate_transports(spec, 11, list(PAIRED), 2000, 16)
print(transports_csv("uniform3", ests))

# visits to y between returns of beta to x*, relative to pi(y)/pi(x*)
for y, c in cycle_visit_means(spec, 12, 2000, 16).items():
    print(y, round(c.mean, 3), "+/-", round(c.se, 3))
