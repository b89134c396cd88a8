"""Why mode pairing cannot pair arbitrarily far apart.

The relative phase of the two lasers drifts; a pair spaced L rounds apart
sees an X-basis error e_ph(L). Averaged over the spacing law of the pairs
this gives the misalignment error e_d, which grows with L_max.
"""
import numpy as np

from geoqkd.protocols.mp import MPParams, e_ph, mp_pairing_rate, phase_misalignment_curve

params = MPParams()
for L in (1e3, 1e4, 1e5, 184206, 1e6):
    print(f"e_ph(L = {L:>9.0f}) = {float(e_ph(L, params)):.4f}")

p = 1e-5  # typical click probability per round on the 100 cm channel
lmax = np.array([1000, 10_000, 100_000, 184_206, 1_000_000])
for L, ed in zip(lmax, phase_misalignment_curve([p], params, lmax)[0]):
    print(f"L_max = {L:>8d}: pairs/round {mp_pairing_rate(p, params.l_min, int(L)):.3e}, e_d = {ed:.4f}")
