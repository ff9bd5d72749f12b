"""Key-rate lower bounds per pulse for weak coherent pulses.

Eve may split any multi-photon pulse and may tune the per-photon-number
sifting rates R_n and error rates Q_n freely as long as the averages she
produces match the observed (R_mu, Q_mu). Without decoy states the bound is
the infimum over such assignments; with (ideal) decoy states the R_n and Q_n
are pinned to their channel values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any

import numpy as np

from . import channel, singlephoton
from .bellcore import binary_entropy
from .channel import ChannelParams, PulseObservables, poisson_pn, poisson_tail
from .errors import DomainError, InfeasibleObservations
from .optimize import SearchSpec, bisect_sign_change, golden_section, grid_then_golden

MU_RANGE = (1e-4, 2.0)
WITNESS_TOL = 1e-10
_TABLE_POINTS = 501


@dataclass(frozen=True)
class CompatibilitySet:
    """Linear constraints on (R_n, R_n Q_n) that Eve's per-photon-number assignment must satisfy."""

    protocol: str
    r_mu: float
    q_mu: float
    mu: float

    @property
    def pn(self) -> np.ndarray:
        return poisson_pn(self.mu, np.arange(4))

    @property
    def multiphoton_sifting(self) -> float:
        """Largest correct-result rate the uncontrolled photon numbers can absorb."""
        if self.protocol == "bb84":
            return 0.5 * poisson_tail(self.mu, 2)
        return 0.25 * poisson_tail(self.mu, 3)

    def violations(self, witness: dict[str, float], tol: float = WITNESS_TOL) -> list[str]:
        """Names of the constraints ``witness`` breaks (empty if compatible)."""
        p = self.pn
        bad = []
        e_mu = self.r_mu * self.q_mu
        r1, q1 = witness.get("R1", 0.0), witness.get("Q1", 0.0)
        if r1 < -tol or not -tol <= q1 <= 0.5 + tol:
            bad.append("range_1")
        if self.protocol == "bb84":
            if r1 > p[1] / 2 + tol:
                bad.append("Y1<=1/2")
            if self.r_mu - r1 > self.multiphoton_sifting + tol:
                bad.append("multiphoton_sifting")
            if r1 * q1 > e_mu + tol:
                bad.append("errors")
            return bad
        r2, q2 = witness.get("R2", 0.0), witness.get("Q2", 0.0)
        if r2 < -tol or not -tol <= q2 <= 0.5 + tol:
            bad.append("range_2")
        a, b = r1 * (1 - q1), r2 * (1 - q2)
        if a > p[1] / 4 + tol:
            bad.append("correct_1")
        if b > p[2] / 4 + tol:
            bad.append("correct_2")
        if abs(a + b - (self.r_mu * (1 - self.q_mu) - self.multiphoton_sifting)) > tol:
            bad.append("correct_total")
        if r1 * q1 + r2 * q2 > e_mu + tol:
            bad.append("errors")
        return bad

    def contains(self, witness: dict[str, float], tol: float = WITNESS_TOL) -> bool:
        return not self.violations(witness, tol)


@dataclass
class WcpBound:
    """Lower bound in key bits per pulse; ``abort`` is set iff the bound is not positive."""

    value: float
    witness: dict[str, Any] = field(default_factory=dict)
    abort: bool = False
    r_mu: float = 1.0

    def __post_init__(self):
        self.abort = bool(self.value <= 0)
        if self.value > self.r_mu + 1e-15:
            raise DomainError(f"bound {self.value} exceeds the sifting rate {self.r_mu}")


def _check_obs(r_mu: float, q_mu: float, mu: float) -> None:
    if not mu > 0:
        raise DomainError(f"mu must be positive, got {mu}")
    if not 0.0 <= r_mu <= 1.0 or not 0.0 <= q_mu <= 1.0 or r_mu * q_mu > r_mu:
        raise InfeasibleObservations(f"sifting rate {r_mu} and QBER {q_mu} are not physical")


def _flipped(q_mu: float, q: float) -> float:
    return (1 - q) * q_mu + q * (1 - q_mu)


def _error_cost(r_mu: float, q_mu: float, q: float) -> float:
    return r_mu * (binary_entropy(_flipped(q_mu, q)) - binary_entropy(q))


@lru_cache(maxsize=64)
def _bb84_s1_grid(q: float) -> tuple[np.ndarray, np.ndarray]:
    qs = np.linspace(0.0, 0.5, _TABLE_POINTS)
    return qs, singlephoton.s1_bb84_table(qs, q)


@lru_cache(maxsize=64)
def _sarg_s1_store(q: float) -> dict[int, float]:
    return {}


def _sarg_s1_lattice(q: float, idx: np.ndarray, lattice: int) -> np.ndarray:
    """S1 for SARG at Q1 = idx / lattice, memoized per q (grid searches revisit the same points)."""
    store = _sarg_s1_store(float(q))
    idx = np.asarray(idx, dtype=np.int64)
    missing = sorted({int(i) for i in idx if (lattice, int(i)) not in store})
    if missing:
        vals = singlephoton.s1_sarg_table(np.array(missing, dtype=float) / lattice, q)
        for i, v in zip(missing, vals):
            store[(lattice, i)] = float(v)
    return np.array([store[(lattice, int(i))] for i in idx])


def bb84_min_s1(q1_max: float, q: float) -> tuple[float, float]:
    """Smallest single-photon S(U|E) over QBERs Q1 in [0, q1_max]; returns ``(Q1*, value)``."""
    if q == 0.0:
        return q1_max, 1.0 - binary_entropy(q1_max)
    qs, vals = _bb84_s1_grid(float(q))
    end = float(singlephoton.s1_bb84_table([q1_max], q)[0])
    inside = qs <= q1_max
    k = int(np.argmin(vals[inside]))
    if vals[inside][k] < end:
        return float(qs[inside][k]), float(vals[inside][k])
    return q1_max, end


def bb84_wcp_bound(r_mu: float, q_mu: float, mu: float, q: float = 0.0) -> WcpBound:
    """BB84 bound without decoy states.

    Eve blocks as many single photons as the multi-photon pulses allow,
    leaving R1_min = R_mu - (1/2) sum_{n>=2} p_n, and puts all errors on the
    single photons.
    """
    _check_obs(r_mu, q_mu, mu)
    singlephoton._check_q(q)
    cost = _error_cost(r_mu, q_mu, q)
    r1_min = r_mu - 0.5 * poisson_tail(mu, 2)
    if r1_min <= 0:
        return WcpBound(-cost, {"R1": 0.0, "Q1": 0.0, "q": q}, r_mu=r_mu)
    q1_max = min(r_mu * q_mu / r1_min, 0.5)
    q1, s1 = bb84_min_s1(q1_max, q)
    value = r1_min * (s1 - binary_entropy(q)) - cost
    return WcpBound(value, {"R1": r1_min, "Q1": q1, "q": q}, r_mu=r_mu)


def bb84_wcp_search(r_mu: float, q_mu: float, mu: float) -> WcpBound:
    """Direct search over single-photon assignments (R1, Q1) at q = 0.

    Does not presume where Eve's optimum lies; agrees with
    :func:`bb84_wcp_bound` when the closed form is right.
    """
    _check_obs(r_mu, q_mu, mu)
    cset = CompatibilitySet("bb84", r_mu, q_mu, mu)
    lo = max(r_mu - cset.multiphoton_sifting, 0.0)
    hi = min(cset.pn[1] / 2, r_mu)
    e_mu = r_mu * q_mu
    cost = r_mu * binary_entropy(q_mu)
    if hi < lo:
        raise InfeasibleObservations("no single-photon assignment matches the observations")
    if lo <= 0:
        return WcpBound(-cost, {"R1": 0.0, "Q1": 0.0, "q": 0.0}, r_mu=r_mu)

    def g(r1):
        return r1 * (1 - binary_entropy(min(e_mu / r1, 0.5)))

    r1, v = grid_then_golden(g, lo, hi, 400, 1e-15 + 1e-12 * hi)
    return WcpBound(v - cost, {"R1": r1, "Q1": min(e_mu / r1, 0.5), "q": 0.0}, r_mu=r_mu)


# ---------------------------------------------------------------------------
# SARG

def _sarg_lp(a_lo, a_hi, c, e_mu, k1, k2, w1, w2):
    """Vertex enumeration on the segment a = R1(1-Q1) in [a_lo, a_hi], b = c - a.

    Objective w1 a + w2 b subject to k1 a + k2 b <= e_mu. Arrays broadcast.
    Returns ``(value, a)``; infeasible cells get +inf.
    """
    slope = k1 - k2
    # error constraint: k2 c + slope a <= e_mu
    with np.errstate(divide="ignore", invalid="ignore"):
        cut = (e_mu - k2 * c) / slope
    lo = np.where(slope < 0, np.maximum(a_lo, cut), a_lo)
    hi = np.where(slope > 0, np.minimum(a_hi, cut), a_hi)
    flat_ok = (slope != 0) | (k2 * c <= e_mu + 1e-18)
    ok = (lo <= hi + 1e-18) & flat_ok
    v_lo = w1 * lo + w2 * (c - lo)
    v_hi = w1 * hi + w2 * (c - hi)
    pick_lo = v_lo <= v_hi
    val = np.where(ok, np.where(pick_lo, v_lo, v_hi), np.inf)
    return val, np.where(pick_lo, lo, hi)


def sarg_wcp_bound(r_mu: float, q_mu: float, mu: float, q: float = 0.0,
                   grid: int = 101, refinements: int = 2) -> WcpBound:
    """SARG bound without decoy states: numerical infimum over (R1, Q1, R2, Q2).

    For fixed (Q1, Q2) the objective is linear in (R1, R2) on a segment, so
    the inner step checks the segment's end points; the outer step is a
    ``grid`` x ``grid`` scan of [0, 1/2]^2 followed by ``refinements`` passes
    with a 10x finer step around the best cell.
    """
    _check_obs(r_mu, q_mu, mu)
    singlephoton._check_q(q)
    cset = CompatibilitySet("sarg", r_mu, q_mu, mu)
    p = cset.pn
    hq = binary_entropy(q)
    cost = _error_cost(r_mu, q_mu, q)
    c = r_mu * (1 - q_mu) - cset.multiphoton_sifting
    if c <= 0:
        return WcpBound(-cost, {"R1": 0.0, "Q1": 0.0, "R2": 0.0, "Q2": 0.0, "q": q}, r_mu=r_mu)
    if c > p[1] / 4 + p[2] / 4 + 1e-15:
        raise InfeasibleObservations("more correct results than one- and two-photon pulses can give")
    e_mu = r_mu * q_mu
    a_lo, a_hi = max(0.0, c - p[2] / 4), min(p[1] / 4, c)

    def solve(q1s, s1, q2s):
        s2 = singlephoton.s2_sarg_array(q2s, q)
        Q1, Q2 = q1s[:, None], q2s[None, :]
        w1 = ((s1 - hq) / (1 - q1s))[:, None]
        w2 = ((s2 - hq) / (1 - q2s))[None, :]
        val, a = _sarg_lp(a_lo, a_hi, c, e_mu, Q1 / (1 - Q1), Q2 / (1 - Q2), w1, w2)
        i, j = np.unravel_index(int(np.argmin(val)), val.shape)
        return float(val[i, j]), float(q1s[i]), float(q2s[j]), float(np.broadcast_to(a, val.shape)[i, j])

    # every grid point is k / lattice with integer k
    lattice = 2 * (grid - 1) * 10 ** refinements
    stride = 10 ** refinements
    k1 = np.arange(grid) * stride
    q2s = np.linspace(0.0, 0.5, grid)
    best = solve(k1 / lattice, _sarg_s1_lattice(q, k1, lattice), q2s)
    if not np.isfinite(best[0]):
        raise InfeasibleObservations("no (R1, R2) assignment matches the observations")
    for _ in range(refinements):
        _, c1, c2, _ = best
        stride //= 10
        k1 = np.clip(round(c1 * lattice) + stride * np.arange(-10, 11), 0, lattice // 2)
        q2n = np.clip(c2 + stride / lattice * np.arange(-10, 11), 0.0, 0.5)
        cand = solve(k1 / lattice, _sarg_s1_lattice(q, k1, lattice), q2n)
        if cand[0] < best[0]:
            best = cand
    val, q1, q2, a = best
    r1 = a / (1 - q1)
    r2 = (c - a) / (1 - q2)
    return WcpBound(val - cost, {"R1": r1, "Q1": q1, "R2": r2, "Q2": q2, "q": q}, r_mu=r_mu)


# ---------------------------------------------------------------------------
# Decoy states and mu optimization

def decoy_bound(protocol: str, obs: PulseObservables, q: float = 0.0) -> WcpBound:
    """Bound with per-photon-number yields and error rates known exactly.

    Only single photons (BB84) or one- and two-photon pulses (SARG) carry
    key; pulses with no photon never do.
    """
    if obs.per_n is None or len(obs.per_n) < 3:
        raise DomainError("decoy evaluation needs per-photon-number observables")
    singlephoton._check_q(q)
    hq = binary_entropy(q)
    y, e = obs.yields, obs.errors
    pn = poisson_pn(obs.mu, np.arange(len(y)))
    value = -_error_cost(obs.r_mu, obs.q_mu, q)
    witness: dict[str, Any] = {"q": q}
    r1, q1 = float(pn[1] * y[1]), min(float(e[1]), 0.5)
    witness.update(R1=r1, Q1=q1)
    if protocol == "bb84":
        s1 = 1 - binary_entropy(q1) if q == 0 else float(singlephoton.s1_bb84_table([q1], q)[0])
        value += r1 * (s1 - hq)
    elif protocol == "sarg":
        s1 = float(singlephoton.s1_sarg_table([q1], q)[0])
        r2, q2 = float(pn[2] * y[2]), min(float(e[2]), 0.5)
        s2 = singlephoton.s2_sarg(q2, q).value
        value += r1 * (s1 - hq) + r2 * (s2 - hq)
        witness.update(R2=r2, Q2=q2)
    else:
        raise DomainError(f"no decoy bound for protocol {protocol!r}")
    return WcpBound(value, witness, r_mu=obs.r_mu)


def evaluate(protocol: str, params: ChannelParams, decoy: bool = False, q: float = 0.0) -> WcpBound:
    """Bound for the observables the channel model predicts at ``params``."""
    obs = channel.observables(protocol, params)
    if decoy:
        return decoy_bound(protocol, obs, q)
    if protocol == "bb84":
        return bb84_wcp_bound(obs.r_mu, obs.q_mu, params.mu, q)
    return sarg_wcp_bound(obs.r_mu, obs.q_mu, params.mu, q)


def _optimize_log_mu(f, n_grid: int = 60, rel_tol: float = 1e-4) -> tuple[float, float]:
    lo, hi = math.log(MU_RANGE[0]), math.log(MU_RANGE[1])
    xs = np.linspace(lo, hi, n_grid + 1)
    ys = np.array([f(math.exp(x)) for x in xs])
    k = int(np.argmax(ys))  # first maximum, i.e. smallest mu on ties
    spec = SearchSpec(float(xs[max(k - 1, 0)]), float(xs[min(k + 1, n_grid)]), tol=rel_tol)
    x, y = golden_section(lambda lx: f(math.exp(lx)), spec, maximize=True)
    if y > ys[k]:
        return math.exp(x), y
    return math.exp(float(xs[k])), float(ys[k])


def optimize_mu(protocol: str, params: ChannelParams, decoy: bool = False,
                q: float | str = 0.0, rounds: int = 3) -> tuple[float, WcpBound]:
    """Maximize the bound over the mean photon number (and over q when ``q == "auto"``).

    Returns ``(mu*, bound)``; the bound's ``abort`` flag is set when no mu in
    the search range gives a positive rate.
    """
    if q == "auto":
        def f_mu(qq):
            return lambda m: evaluate(protocol, params.with_(mu=m), decoy, qq).value

        mu, val = _optimize_log_mu(f_mu(0.0))
        best_q = 0.0
        for _ in range(rounds):
            qn, vq = singlephoton.optimize_q(
                lambda qq: evaluate(protocol, params.with_(mu=mu), decoy, qq).value, n_grid=20, tol=1e-4)
            if vq <= val:
                break
            best_q, val = qn, vq
            mn, vm = _optimize_log_mu(f_mu(best_q))
            if vm <= val:
                break
            mu, val = mn, vm
        bound = evaluate(protocol, params.with_(mu=mu), decoy, best_q)
        return mu, bound
    mu, _ = _optimize_log_mu(lambda m: evaluate(protocol, params.with_(mu=m), decoy, float(q)).value)
    return mu, evaluate(protocol, params.with_(mu=mu), decoy, float(q))


def cutoff_distance(protocol: str, params: ChannelParams, decoy: bool = False,
                    q: float | str = 0.0, lo: float = 0.0, hi: float = 300.0,
                    tol: float = 0.5) -> float:
    """Largest fiber length (km) at which the mu-optimized bound stays positive."""
    def f(length):
        return optimize_mu(protocol, params.with_(length=length), decoy, q)[1].value

    return bisect_sign_change(f, SearchSpec(lo, hi, tol=tol)).root
