"""Oracle suites: each closed form is compared against an independent evaluation.

Functions are looked up through their modules at call time, so a patched
module attribute is what gets checked.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from . import bellcore, channel, postproc, singlephoton

SEED = 20060301


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    deviation: float
    tol: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<24} max deviation {self.deviation:.3e} (tol {self.tol:.0e})"


def _random_states(n: int, seed: int) -> list:
    rng = np.random.default_rng(seed)
    return [bellcore.BellDiagonal.from_array(rng.dirichlet(np.ones(4)), renormalize=True) for _ in range(n)]


def ad_vs_enumeration(n_states: int = 50, max_m: int = 6) -> SuiteResult:
    dev = 0.0
    for lam in _random_states(n_states, SEED):
        for m in range(1, max_m + 1):
            ref, p_ref = postproc.ad_oracle(lam, m)
            got = postproc.advantage_distill(lam, m)
            dev = max(dev, float(np.max(np.abs(ref.as_array() - got.lam_out.as_array()))),
                      abs(p_ref - got.p_succ))
    return SuiteResult("ad_vs_enumeration", dev <= 1e-12, dev, 1e-12)


def xor_vs_enumeration(n_states: int = 50) -> SuiteResult:
    dev = 0.0
    for lam in _random_states(n_states, SEED + 1):
        diff = postproc.xor_three(lam).as_array() - postproc.xor_oracle(lam).as_array()
        dev = max(dev, float(np.max(np.abs(diff))))
    return SuiteResult("xor_vs_enumeration", dev <= 1e-12, dev, 1e-12)


def bell_identity(n_states: int = 100) -> SuiteResult:
    dev = 0.0
    for lam in _random_states(n_states, SEED + 2):
        got = bellcore.keyrate_two_qubit(
            bellcore.measure_and_randomize(bellcore.purify_bell_diagonal(lam), 0.0)).value
        dev = max(dev, abs(got - (1.0 - bellcore.shannon_entropy(lam.as_array()))))
    return SuiteResult("bell_identity", dev <= 1e-9, dev, 1e-9)


def _brute_type_classes(counts: tuple[int, ...], m: int) -> dict:
    items = [k for k, c in enumerate(counts) for _ in range(c)]
    law: Counter = Counter()
    arrangements = set(itertools.permutations(items))
    for perm in arrangements:
        acc = [0, 0, 0, 0]
        for b in range(len(perm) // m):
            block = perm[b * m:(b + 1) * m]
            flips = {bellcore.BELL_INDICES[k][0] for k in block}
            if len(flips) == 1:
                i = flips.pop()
                j = sum(bellcore.BELL_INDICES[k][1] for k in block) % 2
                acc[2 * i + j] += 1
        law[tuple(acc)] += 1
    return {k: Fraction(v, len(arrangements)) for k, v in law.items()}


def lemma1_trend() -> SuiteResult:
    """Exact block statistics against brute-force permutations, and per-block convergence to i.i.d."""
    dev = 0.0
    for counts in ((2, 0, 2, 0), (4, 0, 4, 0), (2, 1, 2, 1)):
        exact = postproc._exact_type_classes(counts, 2)
        brute = _brute_type_classes(counts, 2)
        keys = set(exact) | set(brute)
        dev = max(dev, max(float(abs(exact.get(k, 0) - brute.get(k, 0))) for k in keys))
    tvs = [postproc.block_marginal_tv((k, 0, k, 0), 2) for k in (2, 4, 6)]
    trend = all(b <= a + 1e-15 for a, b in zip(tvs, tvs[1:]))
    return SuiteResult("lemma1_trend", dev <= 1e-12 and trend, dev, 1e-12)


def channel_series(n_draws: int = 40) -> SuiteResult:
    rng = np.random.default_rng(SEED + 3)
    dev = 0.0
    for _ in range(n_draws):
        p = channel.ChannelParams(alpha=0.25, length=float(rng.uniform(0, 100)),
                                  eta_det=float(rng.uniform(0.05, 1)), p_d=float(10 ** rng.uniform(-7, -3)),
                                  V=float(rng.uniform(0.8, 1)), mu=float(rng.uniform(0.01, 1)))
        for protocol in ("bb84", "sarg"):
            obs = channel.observables(protocol, p)
            r, rq = channel.series_totals(protocol, p)
            dev = max(dev, abs(obs.r_mu - r), abs(obs.r_mu * obs.q_mu - rq))
    return SuiteResult("channel_series", dev <= 1e-10, dev, 1e-10)


def sarg_fast_path(n_states: int = 8) -> SuiteResult:
    dev = 0.0
    for k, lam in enumerate(_random_states(n_states, SEED + 4)):
        q = 0.5 * k / n_states
        s, h, _ = singlephoton.sarg_batch(lam.as_array()[None, :], q)
        ref = singlephoton.sarg_keyrate_engine(lam, q).value
        dev = max(dev, abs(float(s[0] - h[0]) - ref))
    return SuiteResult("sarg_fast_path", dev <= 1e-10, dev, 1e-10)


SUITES: dict[str, Callable[[], SuiteResult]] = {
    "ad_vs_enumeration": ad_vs_enumeration,
    "xor_vs_enumeration": xor_vs_enumeration,
    "bell_identity": bell_identity,
    "lemma1_trend": lemma1_trend,
    "channel_series": channel_series,
    "sarg_fast_path": sarg_fast_path,
}


def run_all() -> list[SuiteResult]:
    results = []
    for name, suite in SUITES.items():
        try:
            results.append(suite())
        except Exception as exc:  # a crashing suite is a failing suite
            results.append(SuiteResult(f"{name} ({type(exc).__name__})", False, math.inf, 0.0))
    return results
