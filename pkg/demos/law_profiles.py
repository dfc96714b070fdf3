#!/usr/bin/env python
"""Tabulate the singular constitutive laws across density.

Shows the blow-up of the shear viscosity, bulk viscosity and pressure as the
density approaches the packing threshold phi* = 0.64, the kinematic floor
mu/rho >= 1 everywhere, and the effect of the delta-truncation that freezes
the laws just below the threshold so the flow can legally overshoot it.
"""

from congesto import ConstitutiveParams, sample_laws

p = ConstitutiveParams(eps=0.05, a=2.0, gamma=1.0)

print(f"laws at eps = {p.eps}, a = {p.a}, gamma = {p.gamma}, phi* = {p.phi_star}")
print(f"{'rho/phi*':>9} {'mu':>12} {'mu/rho':>10} {'lambda':>12} {'pi':>12}")
for ratio in (0.05, 0.25, 0.5, 0.75, 0.9, 0.97, 0.99, 0.995):
    rho = ratio * p.phi_star
    row = sample_laws(rho, p)
    print(f"{ratio:9.3f} {row.mu:12.5g} {row.mu / rho:10.5f} "
          f"{row.lam:12.5g} {row.pi:12.5g}")

# the truncated law keeps every value finite past the threshold
pt = ConstitutiveParams(eps=0.05, delta=0.05)
print(f"\ntruncated at delta = {pt.delta}: the laws continue past phi*")
print(f"{'rho/phi*':>9} {'mu':>12} {'lambda':>12} {'pi':>12}")
for ratio in (0.94, 0.95, 1.0, 1.1, 1.25):
    rho = ratio * pt.phi_star
    row = sample_laws(rho, pt)
    print(f"{ratio:9.3f} {row.mu:12.5g} {row.lam:12.5g} {row.pi:12.5g}")
print("(lambda is identically zero on the frozen branch, where the")
print(" exponent no longer varies with density)")
