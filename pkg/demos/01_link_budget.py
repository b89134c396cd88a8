"""Fixed losses of the ground-to-GEO link.

The geometric term dominates: a 1 m telescope and a 50 cm satellite
aperture separated by 38 600 km lose about 43.7 dB to beam divergence.
System and absorption losses add 3.3 dB on top.
"""
import math

from geoqkd.geometry import LinkGeometry, eff_to_db, fixed_loss_budget, geometric_loss

g = LinkGeometry()
print(f"slant range at {math.degrees(g.elevation):.0f} deg elevation: {g.slant_range / 1e3:.2f} km")
print(f"geometric efficiency: {geometric_loss(g):.3e} ({eff_to_db(geometric_loss(g)):.2f} dB)")

budget = fixed_loss_budget(g)
print(f"fixed budget (system 2.8 dB, absorption 0.5 dB): {budget.total_db:.2f} dB")

# the loss falls by 20 log10 of the diameter ratio
for d in (0.2, 0.4, 0.6, 0.8, 1.0):
    print(f"  D_OGS = {d:.1f} m -> {fixed_loss_budget(g.with_diameter(d)).total_db:.2f} dB")
