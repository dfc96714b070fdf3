#!/usr/bin/env python
"""Shrink the truncation width delta and watch congestion get squeezed out.

With delta > 0 the laws freeze just below the packing threshold, so a hard
collision legally overshoots phi*.  Tightening delta lets the singular
pressure push back earlier: the overshoot shrinks toward the threshold from
above and the fraction of the domain past it decays like 1/(-log delta) --
the logarithmic signature of the truncated law.  The price appears in the
entropy budget, whose excursion above its initial value grows as delta -> 0.
"""

import math
import tempfile
import warnings

from congesto import ConstitutiveParams, FlowParams, PeriodicGrid2D, run_sweep

flow = FlowParams(cons=ConstitutiveParams(eps=0.05))
grid = PeriodicGrid2D(32, 32)
ladder = [0.1, 0.03, 0.01, 0.003]

with tempfile.TemporaryDirectory() as out_dir:
    with warnings.catch_warnings():
        # truncated members legitimately cross the packing threshold
        warnings.simplefilter("ignore", RuntimeWarning)
        records, fits = run_sweep(
            "colliding_blobs", grid, flow, "delta", ladder, out_dir,
        )

print(f"{'delta':>8} {'max rho/phi*':>13} {'cong. frac':>11} "
      f"{'frac * (-log d)':>16} {'entropy overshoot':>18}")
for r in records:
    prod = r.peak_congested_fraction * (-math.log(r.param_value))
    print(f"{r.param_value:8.3f} {r.final_metrics.max_rho_ratio:13.6f} "
          f"{r.peak_congested_fraction:11.4f} {prod:16.4f} "
          f"{r.entropy_overshoot:18.3f}")

fit = fits["congested_overshoot"]
print(f"\ncongested fraction ~ (-log delta)^{fit.slope:.2f} "
      f"(fit residual {fit.residual:.3f})")
print("the product in column four stays bounded while the raw fraction")
print("decays; the entropy overshoot grows, matching the log(1/delta)")
print("bound that is all the truncated law guarantees")
