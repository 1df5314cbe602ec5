"""
The slice chain, exactly
========================

"""

# three states, every row uniform, x* = 0
from bridgegraph import builtin, enumerate_SB, pb_stationary
spec = builtin("uniform3")

# which slices can the bridge graph show at a fixed time?
sb = enumerate_SB(spec)
print("S_B:", sb.subsets)

# transition matrix between slices, in exact rationals
m = pb_stationary(spec)
for e, row in zip(m.states, m.entries):
    print(e, [str(v) for v in row])

# its stationary law; the first entry is the intensity of {x*} slices
print("pi_B:", [str(v) for v in m.pi])

# on the star chain the full slice {0,1,2} never shows up
print("star S_B:", enumerate_SB(builtin("star")).subsets)
