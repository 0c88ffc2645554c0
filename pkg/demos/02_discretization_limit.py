"""A continuous observation is really a cell of a fine partition.

Record a N(0, 1) measurement to a given resolution and the exact discrete
P-value of the recorded cell is well defined.  As the resolution improves
it settles on ``P(f(X) <= f(x0))``.  Here both sides are computed exactly
and the gap is printed for each halving of the cell width.
"""

import math

from invariant_pvalue.discretization import convergence_sweep, laplace, normal

for name, f, x0, exact in [("normal", normal(), 1.5, None), ("laplace", laplace(), 2.0, math.exp(-2.0))]:
    rows = convergence_sweep(f, x0, [2.0 ** -j for j in range(13)])
    print(f"{name}, x0 = {x0}: density P-value {rows[0][2]:.6f}"
          + (f" (closed form {exact:.6f})" if exact else ""))
    print("   width      partition P   gap")
    for w, p, _, gap in rows[::2]:
        print(f"   {w:<10.6g} {p:.6f}      {gap:.2e}")
    print()

# The coarse normal case is a good sanity check by hand: with unit cells,
# the cell (1, 2] and every cell no more likely than it, tails included,
# add up to 2 (1 - Phi(1)).
print("unit-width partition, x0 = 1.5:", f"{convergence_sweep(normal(), 1.5, [1.0])[0][1]:.5f}")
