"""Order-2 moment recursion of the noisy Duffing map against hand-derived recursions.

The map is chaotic, so second-order truncated moments stop describing the
true distribution after a few steps; what the demo shows is that the
generic recursion and the closed-form one agree to rounding error.

    python demos/duffing_moments.py
"""

import numpy as np

from uqprop.dynamics import DuffingParams, duffing_closed_form, duffing_model
from uqprop.plasma import plasma_run

p = DuffingParams(a=2.75, b=0.2, sigma=0.1)
x0 = [0.1, 0.1]
sets = plasma_run(duffing_model(p), x0, 0.0, 50.0, 1.0, 2, "map", output_times="all")
ref = duffing_closed_form(x0, p, 50)

print(" k   central x   central y    E[dW_y^2]   max rel diff")
for k in (1, 2, 3, 5, 10, 20, 50):
    ms = sets[k]
    want = ref["noise"][k]
    rel = np.max(np.abs(ms.moments[1:] - want)) / np.max(np.abs(want))
    print(f"{k:2d}  {ms.central[0]:10.6f}  {ms.central[1]:10.6f}  {ms.moment((0, 2)):11.4e}  {rel:9.1e}")
