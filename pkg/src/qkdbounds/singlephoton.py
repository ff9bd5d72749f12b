"""Single-photon key-rate bounds for BB84, six-state and SARG.

For each protocol a one-parameter family of Bell-diagonal states is
compatible with an observed QBER Q; the bound is the infimum of the
two-qubit rate over that family. SARG is evaluated on the filtered
tripartite state produced by one representative encoding/decoding pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, Iterable

import mpmath
import numpy as np

from . import postproc
from .bellcore import (
    BELL_INDICES,
    BellDiagonal,
    DensityOperator,
    RateBound,
    _h_vec,
    _plogp,
    bell_keyrate_array,
    bell_s_u_given_e_array,
    bell_state,
    binary_entropy,
    measure_and_randomize,
    s_u_given_e,
    keyrate_two_qubit,
)
from .errors import DomainError, ZeroWeightError
from .optimize import SearchSpec, bisect_sign_change, golden_section, grid_then_golden

PROTOCOLS = ("bb84", "six-state", "sarg")
N_GRID = 200
PARAM_TOL = 1e-9
POSITIVE_TOL = 1e-12


@dataclass(frozen=True)
class GammaFamily:
    """States compatible with QBER ``qber``, parametrized by lam11 in ``[lam11_lo, lam11_hi]``."""

    protocol: str
    qber: float
    lam11_lo: float
    lam11_hi: float
    generator: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)

    def weights(self, lam11) -> np.ndarray:
        """Bell weights for one or many lam11 values, shape (..., 4)."""
        return self.generator(np.asarray(lam11, dtype=float))

    def state(self, lam11: float) -> BellDiagonal:
        if not self.lam11_lo - 1e-15 <= lam11 <= self.lam11_hi + 1e-15:
            raise DomainError(f"lam11={lam11} outside [{self.lam11_lo}, {self.lam11_hi}]")
        return BellDiagonal.from_array(self.weights(lam11))


def _check_q(q: float) -> None:
    if not 0.0 <= q <= 0.5:
        raise DomainError(f"flip probability must lie in [0, 0.5], got {q}")


# ---------------------------------------------------------------------------
# BB84 and six-state

def gamma_bb84(Q: float) -> GammaFamily:
    """lam00 = 1 - 2Q + lam11, lam01 = lam10 = Q - lam11, lam11 in [0, Q]."""
    if not 0.0 <= Q <= 0.5:
        raise DomainError(f"BB84 QBER must lie in [0, 0.5], got {Q}")

    def gen(l11):
        return np.stack([1 - 2 * Q + l11, Q - l11, Q - l11, l11 + 0 * l11], axis=-1)

    return GammaFamily("bb84", Q, 0.0, Q, gen)


def gamma_sixstate(Q: float) -> BellDiagonal:
    """Isotropic Bell-diagonal state (1 - 3Q/2, Q/2, Q/2, Q/2)."""
    if not 0.0 <= Q <= 2.0 / 3.0 + 1e-15:
        raise DomainError(f"six-state QBER must lie in [0, 2/3], got {Q}")
    return BellDiagonal.from_array([1 - 1.5 * Q, Q / 2, Q / 2, Q / 2], renormalize=True)


def _minimize_family(fam: GammaFamily, vec: Callable[[np.ndarray], np.ndarray]) -> tuple[float, float]:
    lo, hi = fam.lam11_lo, fam.lam11_hi
    if hi - lo <= 0:
        return lo, float(vec(fam.weights(np.array([lo])))[0])

    def scalar(x):
        return float(vec(fam.weights(np.array([x])))[0])

    return grid_then_golden(scalar, lo, hi, N_GRID, PARAM_TOL,
                            vector_f=lambda xs: vec(fam.weights(xs)))


def s1_bb84(Q: float, q: float = 0.0) -> float:
    """Infimum of S(U|E) over the BB84 family; equals 1 - h(Q) at q = 0."""
    _check_q(q)
    fam = gamma_bb84(Q)
    if q == 0.0:
        return 1.0 - binary_entropy(Q)
    return _minimize_family(fam, lambda lam: bell_s_u_given_e_array(lam, q))[1]


def s1_bb84_engine(Q: float, q: float = 0.0) -> tuple[float, float]:
    """``(lam11*, min S(U|E))`` for the BB84 family by numerical minimization at any q."""
    _check_q(q)
    return _minimize_family(gamma_bb84(Q), lambda lam: bell_s_u_given_e_array(lam, q))


def rate_bb84(Q: float, q: float = 0.0) -> RateBound:
    """Single-photon BB84 bound: infimum over lam11 of S(U|E) - H(U|Y)."""
    _check_q(q)
    x, v = _minimize_family(gamma_bb84(Q), lambda lam: bell_keyrate_array(lam, q))
    return RateBound(v, {"lam11": x, "q": q})


def rate_sixstate(Q: float, q: float = 0.0) -> RateBound:
    _check_q(q)
    lam = gamma_sixstate(Q)
    return RateBound(float(bell_keyrate_array(lam.as_array(), q)), {"q": q})


# ---------------------------------------------------------------------------
# SARG, single photon

_S = 1.0 / math.sqrt(2.0)
# Alice sends one of {|0_z>, |0_x>}; Bob's outcome 0 <-> projection on |1_x>, 1 <-> |1_z>
SARG_A1 = np.array([[1.0, 0.0], [_S, _S]])
SARG_B1 = np.array([[_S, -_S], [0.0, 1.0]])
_ZZ = np.diag([1.0, -1.0, -1.0, 1.0])


def _sarg_filter_columns() -> np.ndarray:
    """16x4 map from sqrt(lam) to the filtered (unnormalized) A (x) B (x) E vector."""
    ab = np.kron(SARG_A1, SARG_B1)
    cols = []
    for k, (i, j) in enumerate(BELL_INDICES):
        e = np.zeros(4)
        e[k] = 1.0
        cols.append(np.kron(np.real(ab @ bell_state(i, j)), e))
    return np.array(cols).T


_SARG_MAP = _sarg_filter_columns()


@dataclass(frozen=True)
class SargFilteredState:
    lam: BellDiagonal
    weight: float
    abe_state: DensityOperator


def sarg_filtered_state(lam: BellDiagonal) -> SargFilteredState:
    """Apply (A1 (x) B1 (x) 1) to the purification of ``lam``, then average with sigma_z (x) sigma_z.

    ``abe_state`` is renormalized; ``weight`` keeps the trace before renormalization.
    """
    psi = _SARG_MAP @ np.sqrt(np.clip(lam.as_array(), 0.0, None))
    w = float(psi @ psi)
    if w <= 1e-15:
        raise ZeroWeightError("SARG filter annihilates this state")
    rho = np.outer(psi, psi) / w
    zz = np.kron(_ZZ, np.eye(4))
    rho = 0.5 * (rho + zz @ rho @ zz)
    return SargFilteredState(lam, w, DensityOperator(rho.astype(complex), (2, 2, 4), 1.0))


def sarg_keyrate_engine(lam: BellDiagonal, q: float = 0.0, method: str = "jacobi") -> RateBound:
    """Matrix-engine rate on the SARG filtered state (slow, exact reference path)."""
    st = sarg_filtered_state(lam)
    rb = keyrate_two_qubit(measure_and_randomize(st.abe_state, q), method)
    rb.witness["weight"] = st.weight
    return rb


def sarg_batch(lam: np.ndarray, q: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized ``(S(U|E), H(U|Y), qber)`` of SARG filtered states for weights of shape (N, 4).

    The sigma_z (x) sigma_z average leaves the measured statistics and Eve's
    conditional states untouched, so it is skipped here.
    """
    lam = np.atleast_2d(np.clip(np.asarray(lam, dtype=float), 0.0, None))
    psi = np.sqrt(lam) @ _SARG_MAP.T
    w = np.einsum("ni,ni->n", psi, psi)
    t = (psi / np.sqrt(w)[:, None]).reshape(-1, 2, 2, 4)
    rho_x = np.einsum("nxye,nxyf->nxef", t, t)
    p_xy = np.einsum("nxye,nxye->nxy", t, t)
    ue = np.stack([(1 - q) * rho_x[:, 0] + q * rho_x[:, 1],
                   (1 - q) * rho_x[:, 1] + q * rho_x[:, 0]], axis=1)
    ev_ue = np.linalg.eigvalsh(ue).reshape(len(lam), -1)
    ev_e = np.linalg.eigvalsh(rho_x[:, 0] + rho_x[:, 1])
    s_ue = _plogp(np.clip(ev_ue, 0.0, None)).sum(axis=1)
    s_e = _plogp(np.clip(ev_e, 0.0, None)).sum(axis=1)
    qber = p_xy[:, 0, 1] + p_xy[:, 1, 0]
    joint = (1 - q) * p_xy + q * p_xy[:, ::-1, :]
    h_uy = _plogp(joint).sum(axis=(1, 2)) - _plogp(joint.sum(axis=1)).sum(axis=1)
    return s_ue - s_e, h_uy, qber


def sarg_qber(lam: BellDiagonal) -> float:
    """QBER of the SARG filtered state."""
    return float(sarg_batch(lam.as_array()[None, :], 0.0)[2][0])


def gamma_sarg1(Q: float) -> GammaFamily:
    """lam00 = 1 - Q/(1-Q) + lam11, lam01 = lam10 = Q/(2(1-Q)) - lam11, lam11 in [0, Q/(2(1-Q))]."""
    if not 0.0 <= Q <= 0.5:
        raise DomainError(f"SARG QBER must lie in [0, 0.5], got {Q}")
    a = Q / (2.0 * (1.0 - Q))

    def gen(l11):
        return np.stack([1 - 2 * a + l11, a - l11, a - l11, l11 + 0 * l11], axis=-1)

    return GammaFamily("sarg", Q, 0.0, a, gen)


def rate_sarg1(Q: float, q: float = 0.0) -> RateBound:
    """Single-photon SARG bound: infimum over lam11 of the filtered-state rate."""
    _check_q(q)

    def vec(lam):
        s, h, _ = sarg_batch(lam, q)
        return s - h

    x, v = _minimize_family(gamma_sarg1(Q), vec)
    return RateBound(v, {"lam11": x, "q": q})


def s1_sarg(Q1: float, q: float = 0.0) -> float:
    """Infimum over lam11 of S(U|E) for the SARG family at QBER ``Q1``."""
    _check_q(q)
    return _minimize_family(gamma_sarg1(Q1), lambda lam: sarg_batch(lam, q)[0])[1]


def family_min_table(Q1s: np.ndarray, upper: Callable[[np.ndarray], np.ndarray],
                     weights: Callable[[np.ndarray, np.ndarray], np.ndarray],
                     value: Callable[[np.ndarray], np.ndarray], n_grid: int = N_GRID,
                     zooms: int = 3, zoom_points: int = 41) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise minimum over lam11 in [0, upper(Q)] for many QBER values at once.

    Nested grids replace the golden polish so that every QBER is handled in
    one vectorized pass. Returns ``(minimum, argmin lam11)``.
    """
    Q1s = np.atleast_1d(np.asarray(Q1s, dtype=float))
    hi = upper(Q1s)
    rows = np.arange(len(Q1s))

    def scan(l11):
        lam = np.clip(weights(Q1s[:, None], l11), 0.0, None)
        vals = value(lam.reshape(-1, 4)).reshape(l11.shape)
        k = np.argmin(vals, axis=1)
        return vals[rows, k], l11[rows, k]

    best, arg = scan(hi[:, None] * np.linspace(0.0, 1.0, n_grid + 1)[None, :])
    width = hi / n_grid
    offs = np.linspace(-1.0, 1.0, zoom_points)
    for _ in range(zooms):
        b2, a2 = scan(np.clip(arg[:, None] + width[:, None] * offs[None, :], 0.0, hi[:, None]))
        better = b2 < best
        best = np.where(better, b2, best)
        arg = np.where(better, a2, arg)
        width = width * 2.0 / (zoom_points - 1)
    return best, arg


def _sarg_upper(Q):
    return Q / (2.0 * (1.0 - Q))


def _sarg_weights(Q, l11):
    a = _sarg_upper(Q)
    return np.stack(np.broadcast_arrays(1 - 2 * a + l11, a - l11, a - l11, l11), axis=-1)


def _bb84_weights(Q, l11):
    return np.stack(np.broadcast_arrays(1 - 2 * Q + l11, Q - l11, Q - l11, l11), axis=-1)


def s1_sarg_table(Q1s: np.ndarray, q: float = 0.0) -> np.ndarray:
    """``s1_sarg`` for many QBER values at once."""
    return family_min_table(Q1s, _sarg_upper, _sarg_weights, lambda lam: sarg_batch(lam, q)[0])[0]


def s1_bb84_table(Q1s: np.ndarray, q: float = 0.0) -> np.ndarray:
    """Minimum over lam11 of S(U|E) on the BB84 family, for many QBER values at once."""
    return family_min_table(Q1s, lambda Q: Q, _bb84_weights,
                            lambda lam: bell_s_u_given_e_array(lam, q))[0]


# ---------------------------------------------------------------------------
# SARG, two photons

def g_sarg(x):
    """g(x) = (3 - 2x + sqrt(6 - 6 sqrt(2) x + 4 x^2)) / 6."""
    x = np.asarray(x, dtype=float)
    out = (3.0 - 2.0 * x + np.sqrt(6.0 - 6.0 * math.sqrt(2.0) * x + 4.0 * x * x)) / 6.0
    return float(out) if out.ndim == 0 else out


def big_b(Q2):
    """Largest phase error Eve can reach on two-photon pulses at QBER ``Q2``."""
    Q2 = np.asarray(Q2, dtype=float)
    out = 0.5 + 0.5 * np.sqrt(np.clip(Q2 * (1.0 - 1.5 * Q2), 0.0, None)) - math.sqrt(2.0) / 4.0 * (1.0 - 3.0 * Q2)
    return float(out) if out.ndim == 0 else out


def sarg2_worst_state(Q2: float) -> BellDiagonal:
    """Worst-case two-photon state: phase error B(Q2), lam11 = Q2 B(Q2)."""
    if not 0.0 <= Q2 <= 1.0 / 6.0 + 1e-15:
        raise DomainError(f"two-photon SARG state defined for Q2 in [0, 1/6], got {Q2}")
    b = big_b(Q2)
    l11 = Q2 * b
    l01 = b - l11
    return BellDiagonal.from_array([1 - Q2 - l01, l01, Q2 - l11, l11], renormalize=True)


@dataclass(frozen=True)
class S2Result:
    value: float
    full_information: bool


def s2_sarg(Q2: float, q: float = 0.0) -> S2Result:
    """Eve's uncertainty S(U|E) on two-photon SARG pulses at QBER ``Q2``.

    Above Q2 = 1/6 Eve can learn the bit completely, so S(U|E) falls to its
    floor h(q) and the flag ``full_information`` is set.
    """
    _check_q(q)
    if Q2 < 0:
        raise DomainError(f"Q2 must be non-negative, got {Q2}")
    if Q2 > 1.0 / 6.0:
        return S2Result(binary_entropy(q), True)
    if q == 0.0:
        return S2Result(max(1.0 - binary_entropy(min(big_b(Q2), 0.5)), 0.0), False)
    lam = sarg2_worst_state(Q2).as_array()
    return S2Result(float(bell_s_u_given_e_array(lam, q)), False)


def s2_sarg_array(Q2s: np.ndarray, q: float = 0.0) -> np.ndarray:
    """Vectorized ``s2_sarg(...).value``."""
    Q2s = np.asarray(Q2s, dtype=float)
    ok = Q2s <= 1.0 / 6.0
    qc = np.clip(Q2s, 0.0, 1.0 / 6.0)
    b = np.minimum(big_b(qc), 0.5)
    l11 = qc * b
    l01 = b - l11
    lam = np.clip(np.stack([1 - qc - l01, l01, qc - l11, l11], axis=-1), 0.0, None)
    vals = bell_s_u_given_e_array(lam, q)
    return np.where(ok, vals, binary_entropy(q))


# ---------------------------------------------------------------------------
# q optimization and thresholds

def optimize_q(rate: Callable[[float], float], n_grid: int = 50,
               tol: float = 1e-6) -> tuple[float, float]:
    """Maximize ``rate(q)`` over q in [0, 0.5]; the grid includes q = 0."""
    return grid_then_golden(rate, 0.0, 0.5, n_grid, tol, maximize=True)


def single_photon_rate(protocol: str, Q: float, q: float = 0.0) -> RateBound:
    """Dispatch to the protocol's single-photon bound at fixed q."""
    if protocol == "bb84":
        return rate_bb84(Q, q)
    if protocol == "six-state":
        return rate_sixstate(Q, q)
    if protocol == "sarg":
        return rate_sarg1(Q, q)
    raise DomainError(f"unknown protocol {protocol!r}")


def single_photon_rate_optimized(protocol: str, Q: float) -> RateBound:
    q, v = optimize_q(lambda qq: single_photon_rate(protocol, Q, qq).value)
    rb = single_photon_rate(protocol, Q, q)
    rb.witness["q"] = q
    return rb


def _family_state(protocol: str, Q: float) -> BellDiagonal:
    if protocol == "six-state":
        return gamma_sixstate(Q)
    if protocol == "bb84":
        # product-form worst case, exact at q = 0
        return gamma_bb84(Q).state(Q * Q)
    raise DomainError(f"advantage distillation is implemented for bb84 and six-state, not {protocol!r}")


def _ad_dps(m: int) -> int:
    return 40 + m


def best_rate_after_ad(lam: BellDiagonal, m_values: Iterable[int], q_mode: str = "optimized",
                       q: float = 0.0, xor: bool = False, stop_at_positive: bool = False
                       ) -> dict[str, Any]:
    """Largest per-distilled-bit rate over block sizes ``m_values`` (and q if optimized).

    Evaluated in arbitrary precision. Returns a dict with keys ``value``
    (mpf), ``m``, ``q``, ``positive``.
    """
    best: dict[str, Any] = {"value": None, "m": None, "q": None, "positive": False}
    for m in sorted(set(int(v) for v in m_values), reverse=True):
        with mpmath.workdps(_ad_dps(m)):
            tiny = mpmath.mpf(10) ** (-(_ad_dps(m) - 10))
            lam_mp = [mpmath.mpf(float(v)) for v in lam.as_array()]

            def f(qq):
                return postproc.ad_keyrate_mp(lam_mp, m, qq, xor)

            if q_mode == "optimized":
                qs = [mpmath.mpf(k) / 80 for k in range(40)]
                vals = [f(x) for x in qs]
                k = max(range(len(vals)), key=lambda i: vals[i])
                a = qs[max(k - 1, 0)]
                b = min(qs[k] + mpmath.mpf(1) / 80, mpmath.mpf("0.5"))
                qb, vb = _golden_mp(f, a, b, mpmath.mpf("1e-7"))
                if vals[k] >= vb:
                    qb, vb = qs[k], vals[k]
            else:
                qb, vb = mpmath.mpf(q), f(q)
            pos = vb > tiny
            if best["value"] is None or vb > best["value"]:
                best.update(value=vb, m=m, q=float(qb))
            if pos:
                best.update(value=vb, m=m, q=float(qb), positive=True)
                if stop_at_positive:
                    return best
    return best


def _golden_mp(f, a, b, tol):
    invphi = (mpmath.sqrt(5) - 1) / 2
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


@dataclass
class ThresholdResult:
    qber: float
    protocol: str
    q_mode: str
    bracket: tuple[float, float]
    evaluations: int
    witness: dict[str, Any] = field(default_factory=dict)


_UPPER = {"bb84": 0.5, "six-state": 0.5, "sarg": 0.5}


def threshold(protocol: str, q_mode: str = "fixed", q: float = 0.0,
              ad_blocks: Iterable[int] | None = None, xor: bool = False,
              tol: float = 1e-4) -> ThresholdResult:
    """Largest QBER with a positive key-rate bound, by bisection on the sign of the bound.

    Args:
        protocol: "bb84", "six-state" or "sarg".
        q_mode: "fixed" (use ``q``) or "optimized" (maximize over q in [0, 0.5]).
        ad_blocks: Block sizes for advantage distillation; the best one counts.
        xor: Follow advantage distillation by three-pair XOR.
        tol: Width of the final QBER bracket.
    """
    if protocol not in PROTOCOLS:
        raise DomainError(f"unknown protocol {protocol!r}")
    if q_mode not in ("fixed", "optimized"):
        raise DomainError(f"q_mode must be 'fixed' or 'optimized', got {q_mode!r}")
    _check_q(q)
    blocks = sorted(set(ad_blocks)) if ad_blocks is not None else None
    if xor and blocks is None:
        blocks = [1]
    last: dict[str, Any] = {}

    if blocks is not None:
        def f(Q):
            res = best_rate_after_ad(_family_state(protocol, Q), blocks, q_mode, q, xor,
                                     stop_at_positive=True)
            if res["positive"]:
                last[Q] = {"m": res["m"], "q": res["q"]}
            return 1.0 if res["positive"] else -1.0
    else:
        def f(Q):
            if q_mode == "optimized":
                rb = single_photon_rate_optimized(protocol, Q)
            else:
                rb = single_photon_rate(protocol, Q, q)
            last[Q] = dict(rb.witness)
            return rb.value

    res = bisect_sign_change(f, SearchSpec(0.0, _UPPER[protocol], tol=tol),
                             positive=lambda v: v > POSITIVE_TOL)
    witness = last.get(res.lo, {})
    return ThresholdResult(res.root, protocol, q_mode, (res.lo, res.hi), res.evaluations, witness)
