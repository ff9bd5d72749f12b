"""SARG on single photons, and why two-photon pulses still help.

The single-photon bound is the minimum of the rate over a one-parameter
family of filtered states. Adding noise (q > 0) raises the tolerable QBER.
"""

import numpy as np

from qkdbounds import singlephoton as sp

for Q in (0.05, 0.10, 0.11, 0.12):
    print(f"Q1 = {Q:.2f}: rate {sp.rate_sarg1(Q).value:+.4f}")

print("threshold at q = 0:       ", f"{sp.threshold('sarg').qber:.4f}")
print("threshold with optimal q: ", f"{sp.threshold('sarg', 'optimized').qber:.4f}")

print("\ntwo-photon pulses: Eve's uncertainty S2 versus Q2")
for Q2 in np.linspace(0.0, 1 / 6, 5):
    print(f"  Q2 = {Q2:.4f}: S2 = {sp.s2_sarg(Q2).value:.4f}")
print("  above Q2 = 1/6 Eve learns everything:", sp.s2_sarg(0.2).full_information)
