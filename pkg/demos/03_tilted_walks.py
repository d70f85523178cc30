"""
Hitting times of a subcritical walk
===================================

A walk with steps -1 or +1 and slight downward drift hits zero at a time
whose law decays like l^(-3/2) phi(theta0)^l.  The exact law comes from a
forward recursion over walk values; the fitted shape is checked on a window.
"""

from math import log

from rrgperc import walk_theory as wt

law = wt.two_point_law(3, 0.45)
theta0 = wt.solve_theta0(law)
print(f"theta0 = {theta0:.8f}  (closed form {0.5 * log(0.55 / 0.45):.8f})")
print(f"phi(theta0) = {wt.mgf(law, theta0):.8f}")

dp = wt.tau_tail_dp(law, 1, 4000)
c, fit = wt.tau_tail_fit(law, dp, window=(100, 2000))
print(f"fitted constant {c:.4f}; exact/fitted stays in [{fit.min_ratio:.3f}, {fit.max_ratio:.3f}]")
print(f"mass absorbed by step 4000: {fit.mass:.6f}")

# closer to criticality the second moment of the hitting time blows up like eps^-3
for eps in (0.2, 0.1, 0.05):
    w = wt.two_point_law(3, (1 - eps) / 2)
    _, rep = wt.tau_tail_fit(w, wt.tau_tail_dp(w, 1, 40000))
    print(f"eps={eps:<5} E[tau^2] = {rep.second_moment:10.1f}   eps^3 E[tau^2] = {eps ** 3 * rep.second_moment:.3f}")
