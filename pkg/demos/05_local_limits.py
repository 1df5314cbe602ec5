"""
Balls seen from a random root
=============================

"""

from bridgegraph import builtin, lwc_distance, sample_root_sizebiased

spec = builtin("uniform3")

# root law: pick a time, then a vertex of that slice; the ball shapes that come out
law = sample_root_sizebiased(spec, 5, 50, 1)
for key, w in sorted(law.normalized().items(), key=lambda kv: -kv[1])[:5]:
    print(round(w, 3), key[:60])

# finite windows approach the limit as they grow
for row in lwc_distance(spec, 5, 2, [25, 50, 100, 200], n_windows=16):
    print(row.n, round(row.tv, 4), "censored:", round(row.censored_fraction, 4))
