"""
The giant and what is left after removing it
============================================

Above criticality one component holds a positive fraction of the vertices.
Removing it leaves tuples with fewer free half-edges; exploring that
remainder gives the second largest component.
"""

import numpy as np

from rrgperc import walk_theory as wt
from rrgperc.harness import ExperimentConfig, supercritical_two_phase

n, d, eps = 2 * 10 ** 5, 3, 0.1
cfg = ExperimentConfig(mode="supercritical", n=n, d=d, eps=eps, trials=1)
rec = supercritical_two_phase(cfg, np.random.default_rng(4))

print(f"|C1| = {rec.sizes[0]}   first-order prediction {wt.predict_giant(n, d, eps):.0f}"
      f"   tree-limit value {n * wt.giant_fraction_tree(d, (1 + eps) / (d - 1)):.0f}")
print(f"|M1| = {rec.M1}   first-order prediction {wt.predict_damage(n, d, eps):.0f}"
      f"   tree-limit value {n * wt.damage_fraction_tree(d, (1 + eps) / (d - 1)):.0f}")
print(f"second largest before removal {rec.C2_phase1}, largest in the remainder {rec.remainder_sizes[0]}")
print(f"scale 2(d-2)/(d-1) eps^-2 ln(n eps^3) = {wt.predict_second(n, d, eps):.0f}")
