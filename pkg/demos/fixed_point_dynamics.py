"""The map T(x) = x - h(x) / ||g||^2 g with a positive floor h* > 0.

When h is not shifted all the way down to its minimum, the minimizer is a
repelling fixed point of T. This script shows the three consequences: a
neighbourhood where every point is pushed away, an exact 3-cycle, and a
set of converging starts that is only a countable preimage tree.
"""

import numpy as np

from polyak_surrogate import counterexamples as ce
from polyak_surrogate.problems import get_problem

h = get_problem("shifted_quad?a=1")  # x^2 / 2 + 1
region = ce.instability_region(h)
xs = ce.sample_region(h, region, 1000, seed=0)
rep = ce.instability_check(h, region, xs)
print(f"h = x^2/2 + 1: region h - h* < {region.threshold:.4f}; "
      f"{rep.n_expanding}/{rep.n_checked} samples move away (min ratio {rep.min_ratio:.3f})")

cyc = ce.run_cycle("extended", 30)
print("\n3-cycle on h = x^2 + 1 from cot(pi/7):", np.round(cyc.xs[:7], 6).tolist())
print(f"  period multiplier {cyc.multiplier:.4f}; average-iterate gap stays >= "
      f"{cyc.min_avg_gap:.4f}")
dbl = ce.run_cycle("double", 120)
drift = np.abs(dbl.xs[3:] - dbl.xs[:-3])
print("  double precision drift |x_{t+3} - x_t| at t = 1, 30, 60, 90:",
      [f"{drift[t]:.1e}" for t in (0, 29, 59, 89)])

tree = ce.preimage_tree(0.5, 12)
print("\npreimages of x* = 0 under T for a = 0.5, level sizes:", tree.sizes)
sim = ce.nonconvergence_sim(0.5, 2000, 2000, seed=1)
print(f"random starts that settle within 1e-3 of x*: {sim.n_converged}/{sim.n_starts}")
