"""
Exploring a percolated random regular graph
===========================================

Build a random 3-regular multigraph half-edge by half-edge, keep each edge
with probability p, and watch the walk that records the exploration.
"""

import numpy as np

from rrgperc import DegreeSequence, explore
from rrgperc.components import union_find_components

n, d = 2000, 3
p = 1 / (d - 1)
rng = np.random.default_rng(1)

run = explore(DegreeSequence.regular(n, d), p, rng)
print(f"{run.steps} pairing steps for {n} vertices of degree {d}")

# component boundaries are the times the active count returns to zero
traces = run.traces()
print("five largest components:", run.all_component_sizes()[:5].tolist())
print("first component ends at step", traces[0].t_end)

# the same graph, labelled from scratch by disjoint-set union
oracle = union_find_components(run.graph())
print("union-find agrees:", np.array_equal(oracle.sizes, run.all_component_sizes()))

# the walk drifts downward roughly like -t^2 / (2 d (d-1) n) at p = 1/(d-1)
y = run.path.values
for t in (0, n // 4, n // 2, n):
    print(f"Y[{t:5d}] = {y[t]:5d}   running minimum {y[: t + 1].min():5d}")
