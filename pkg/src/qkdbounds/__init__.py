"""Lower bounds on secret-key rates for BB84, six-state and SARG key distribution."""

from .bellcore import (
    BellDiagonal,
    CqDecomposition,
    DensityOperator,
    RateBound,
    binary_entropy,
    keyrate_two_qubit,
    measure_and_randomize,
    purify_bell_diagonal,
    von_neumann_entropy,
)
from .channel import ChannelParams, PulseObservables, bb84_observables, sarg_observables
from .errors import ConvergenceError, DomainError, InfeasibleObservations, NoSignChange, ZeroWeightError
from .postproc import advantage_distill, keyrate_after_ad, xor_three
from .singlephoton import rate_bb84, rate_sarg1, rate_sixstate, threshold
from .wcp import WcpBound, bb84_wcp_bound, decoy_bound, optimize_mu, sarg_wcp_bound

__version__ = "0.1.0"
