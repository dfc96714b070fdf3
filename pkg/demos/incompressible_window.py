#!/usr/bin/env python
"""The incompressible regime: density slaved to a prescribed limit pressure.

When the limit pressure pi0 is strictly positive everywhere, the density
profile rho = phi* (1 - eps**a phi* / pi0) sits strictly below packing and
the pressure expands as pi = pi0 + eps * pi0**2/(2 phi*) + o(eps).  The
total mass of any such profile lives in a window just below phi* * area;
a run started on the profile must keep it there.
"""

import numpy as np

from congesto import (
    ConstitutiveParams,
    FlowParams,
    PeriodicGrid2D,
    build_scenario,
    expansion_first_order_coeff,
    incompressible_expansion_residual,
    mass_window_check,
    run,
)


def main():
    phi = 0.64

    # first-order expansion coefficient, measured against its closed form
    coeff = expansion_first_order_coeff(1e-4, phi, ConstitutiveParams(eps=1e-4))
    print("first-order pressure coefficient at pi0 = phi*:")
    print(f"  measured  {coeff:.6f}")
    print(f"  pi0^2/(2 phi*) = {phi / 2:.6f}\n")

    print("expansion remainder across the stiffness ladder (a = 2):")
    print(f"{'eps':>8} {'|pi - pi0 - eps pi0^2/(2 phi*)|':>32}")
    for eps in (1e-1, 3e-2, 1e-2, 3e-3):
        r = incompressible_expansion_residual(eps, phi, ConstitutiveParams(eps=eps))
        print(f"{eps:8.3f} {r:32.3e}")
    print("  (slope eps^2: the remainder is quadratic once a >= 2)\n")

    # run from the limit profile and check the mass window
    flow = FlowParams(cons=ConstitutiveParams(eps=0.05))
    grid = PeriodicGrid2D(32, 32)
    scenario = build_scenario("incompressible_start", grid, flow, t_end=0.05)
    traj = run(scenario, snapshots=2)
    window = mass_window_check(traj)

    print(f"mass window on a {grid.nx}x{grid.ny} incompressible_start run:")
    print(f"  lower {window.lower:.6f} <= mass <= upper {window.upper:.6f}")
    print(f"  held: {window.passed}, margin below packing mass: {window.margin:.3e}")
    print(f"  max rho/phi* over the run: "
          f"{float(np.max(traj.series['max_rho_ratio'])):.6f}")


if __name__ == "__main__":
    main()
