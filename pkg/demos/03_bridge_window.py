"""
A window of the bridge graph
============================

"""

import numpy as np
from bridgegraph import build_slab, builtin, decompose_mortality, estimate_birecurrent, make_oracle
from bridgegraph import slab_components

spec = builtin("lazy-cycle5")
o = make_oracle(3, 0)

# start a path at x* at every time of [0, 2000] and keep the union
slab = build_slab(spec, o, (0, 2000))
for t in range(200, 210):
    print(t, slab.slice(t))

# all paths end up in one tree
print("components seen from the middle:", slab_components(slab).count)

# the one bi-infinite path, and the finite trees hanging off it
beta = estimate_birecurrent(spec, o, (0, 2000), min_depth=64)
dec = decompose_mortality(slab, beta, burn_in=100)
print("immortal:", len(dec.immortal), "mortal:", len(dec.mortal), "unknown:", len(dec.unknown))

# trees are mostly empty with the odd big one; on average they hold
# everything in a slice except the immortal vertex
sizes = list(dec.tree_sizes.values())
print("tree sizes at 200..219:", [dec.tree_sizes[t] for t in range(200, 220)])
print("mean tree size:", round(np.mean(sizes), 3),
      " mean slice size - 1:", round(np.mean([len(slab.slice(t)) for t in range(200, 1900)]) - 1, 3))
