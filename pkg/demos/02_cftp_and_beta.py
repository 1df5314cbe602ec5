"""
Coupling from the past meets the bi-recurrent path
==================================================

"""

import numpy as np
from bridgegraph import builtin, cftp_sample, estimate_birecurrent, make_oracle
from bridgegraph.cftp import coupling

spec = builtin("star")

# one noise stream: the backward coupling and its depth
o = make_oracle(7, 0)
res = coupling(spec, o)
print("tau =", res.tau, "sample =", res.sample, "depths tried:", res.depths_tried)

# the path started far in the past from x* lands on the same state at time 0
beta = estimate_birecurrent(spec, o, (0, 10), min_depth=16)
print("beta on [0, 10]:", beta.path())

# repeat over many streams: the two always agree, and the sample is stationary
samples = []
for i in range(2000):
    o = make_oracle(7, i)
    x = cftp_sample(spec, o)
    assert x == estimate_birecurrent(spec, o, (0, 0), min_depth=16).beta[0]
    samples.append(x)
print("empirical:", np.bincount(samples) / len(samples), " exact: [0.6 0.2 0.2]")
