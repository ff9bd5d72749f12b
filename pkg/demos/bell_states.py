"""Key rates of Bell-diagonal states, with and without bit flips.

The two-qubit engine purifies the state, measures Alice's qubit, flips
the outcome with probability q and computes S(U|E) - H(U|Y). At q = 0
it reduces to 1 - H(lambda).
"""

from qkdbounds.bellcore import BellDiagonal, bell_keyrate
from qkdbounds.bellcore import shannon_entropy

lam = BellDiagonal(0.81, 0.09, 0.09, 0.01)
print(f"state {lam.as_array()}  QBER {lam.qber:.3f}  phase error {lam.phase_error:.3f}")
print(f"1 - H(lambda)         = {1 - shannon_entropy(lam.as_array()):.6f}")

# flipping bits hurts Bob a little and Eve a little more
for q in (0.0, 0.05, 0.1, 0.2, 0.3):
    rb = bell_keyrate(lam, q)
    print(f"q = {q:.2f}: rate {rb.value:+.6f}  "
          f"S(U|E) {rb.witness['s_u_given_e']:.4f}  H(U|Y) {rb.witness['h_u_given_y']:.4f}")
