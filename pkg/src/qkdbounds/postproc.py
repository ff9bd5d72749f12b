"""Two-way classical post-processing acting on Bell-diagonal states.

Advantage distillation keeps a block of m pairs only when both parties'
blocks are internally constant, and XOR blocking replaces three pairs by the
parity of their bits. Each closed form has an exhaustive-enumeration twin used
as an independent oracle in the tests and in ``verify``.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import mpmath
import numpy as np

from .bellcore import BELL_INDICES, BellDiagonal, RateBound, bell_keyrate, bell_keyrate_mp
from .errors import DomainError

AD_ORACLE_MAX_M = 8
MAX_BLOCK = 10_000


@dataclass(frozen=True)
class ADResult:
    lam_out: BellDiagonal
    p_succ: float
    qber_out: float
    m: int


@dataclass(frozen=True)
class TypeClassDistribution:
    """Probabilities of output type classes ``(n00, n01, n10, n11)`` over n_bar blocks.

    Blocks that fail advantage distillation count towards no class, so the
    class totals can be smaller than ``n_bar``.
    """

    probs: dict[tuple[int, int, int, int], float]
    n_bar: int

    def __post_init__(self):
        total = sum(self.probs.values())
        if abs(total - 1.0) > 1e-12:
            raise DomainError(f"type-class probabilities sum to {total}")

    def ball_mass(self, center: Sequence[float], eps: float) -> float:
        """Mass of classes whose frequencies ``n_k / n_bar`` are within ``eps`` (max norm) of ``center``."""
        c = np.asarray(center, dtype=float)
        mass = 0.0
        for key, p in self.probs.items():
            if np.max(np.abs(np.asarray(key) / self.n_bar - c)) <= eps:
                mass += p
        return mass


def _ad_weights(lam: Sequence, m: int):
    """Unnormalized advantage-distillation output and success probability.

    Pure arithmetic, so it works with floats and mpmath numbers alike. The
    dominant branch is factored out to keep large m finite.
    """
    l00, l01, l10, l11 = lam
    s0, d0 = l00 + l01, l00 - l01
    s1, d1 = l10 + l11, l10 - l11
    if s0 >= s1:
        ref = s0
    else:
        ref = s1
    # scaled by ref**m
    a0 = 1 if ref == s0 else (s0 / ref) ** m
    a1 = 1 if ref == s1 else (s1 / ref) ** m
    b0 = (d0 / ref) ** m
    b1 = (d1 / ref) ** m
    out = (a0 + b0, a0 - b0, a1 + b1, a1 - b1)
    norm = 2 * (a0 + a1)
    return tuple(v / norm for v in out), ref, a0 + a1


def advantage_distill(lam: BellDiagonal, m: int) -> ADResult:
    """Bell weights after advantage distillation on blocks of ``m`` pairs.

    lam'_ij = [(lam_i0 + lam_i1)^m + (-1)^j (lam_i0 - lam_i1)^m] / T with
    T = 2 [(1-Q)^m + Q^m], where Q is the input QBER.
    """
    if not isinstance(m, (int, np.integer)) or m < 1:
        raise DomainError(f"block size must be a positive integer, got {m!r}")
    if m > MAX_BLOCK:
        raise DomainError(f"block size {m} exceeds supported maximum {MAX_BLOCK}")
    out, ref, scaled_sum = _ad_weights(tuple(lam.as_array()), int(m))
    out = np.clip(np.array(out, dtype=float), 0.0, None)
    lam_out = BellDiagonal.from_array(out / out.sum())
    p_succ = float(ref ** m * scaled_sum)
    # Q^m / ((1-Q)^m + Q^m), read off the stable weights
    qber_out = float(out[2] + out[3]) / float(out.sum())
    return ADResult(lam_out, p_succ, qber_out, int(m))


def ad_oracle(lam: BellDiagonal, m: int) -> tuple[BellDiagonal, float]:
    """Advantage distillation by enumerating all 4^m Bell-index assignments.

    Returns ``(lam_out, p_succ)``. A block survives iff all flip indices agree;
    the survivor carries that flip index and the parity of the phase indices.
    """
    if m < 1 or m > AD_ORACLE_MAX_M:
        raise DomainError(f"enumeration oracle supports 1 <= m <= {AD_ORACLE_MAX_M}, got {m}")
    w = lam.as_array()
    out = np.zeros(4)
    for combo in itertools.product(range(4), repeat=m):
        flips = {BELL_INDICES[k][0] for k in combo}
        if len(flips) != 1:
            continue
        i = flips.pop()
        j = sum(BELL_INDICES[k][1] for k in combo) % 2
        out[2 * i + j] += math.prod(w[k] for k in combo)
    p = float(out.sum())
    return BellDiagonal.from_array(out / p), p


def xor_three(lam: BellDiagonal) -> BellDiagonal:
    """Bell weights after XOR of three pairs with phase-flip correction on the kept pair."""
    l = lam.as_matrix()
    out = np.zeros((2, 2))
    for i in (0, 1):
        for j in (0, 1):
            a = l[i, j]
            b = l[i, 1 - j]
            c = l[1 - i, j]
            d = l[1 - i, 1 - j]
            out[i, j] = a * a * (a + 3 * b) + 3 * c * c * (a + b) + 6 * a * c * d
    return BellDiagonal.from_array(out.reshape(4) / out.sum())


def xor_oracle(lam: BellDiagonal) -> BellDiagonal:
    """XOR of three pairs by enumerating all (i, j, k, l, m, n) in {0,1}^6."""
    l = lam.as_matrix()
    out = np.zeros((2, 2))
    for i, j, k, ll, m, n in itertools.product((0, 1), repeat=6):
        w = l[i, j] * l[k, ll] * l[m, n]
        flip = i ^ k ^ m
        phase = j ^ ((ll ^ j) & (n ^ j))
        out[flip, phase] += w
    return BellDiagonal.from_array(out.reshape(4))


def keyrate_after_ad(lam: BellDiagonal, m: int, q: float = 0.0,
                     xor: bool = False, method: str = "jacobi") -> RateBound:
    """One-way key rate evaluated on the advantage-distilled (and optionally XORed) state.

    ``value`` is per distilled bit; ``per_raw_bit`` rescales by p_succ / m
    (and a further 1/3 for XOR).
    """
    ad = advantage_distill(lam, m)
    state = xor_three(ad.lam_out) if xor else ad.lam_out
    rb = bell_keyrate(state, q, method)
    factor = ad.p_succ / m / (3 if xor else 1)
    rb.per_raw_bit = rb.value * factor
    rb.witness.update({"m": m, "p_succ": ad.p_succ, "qber_out": ad.qber_out, "xor": xor})
    return rb


def _xor_mp(lam):
    l = [[lam[0], lam[1]], [lam[2], lam[3]]]
    out = []
    for i in (0, 1):
        for j in (0, 1):
            a, b, c, d = l[i][j], l[i][1 - j], l[1 - i][j], l[1 - i][1 - j]
            out.append(a * a * (a + 3 * b) + 3 * c * c * (a + b) + 6 * a * c * d)
    s = sum(out)
    return [v / s for v in out]


def ad_keyrate_mp(lam: Sequence, m: int, q, xor: bool = False):
    """High-precision per-distilled-bit rate after AD; run inside ``mpmath.workdps``."""
    lam_mp = [mpmath.mpf(v) for v in lam]
    out, _, _ = _ad_weights(lam_mp, m)
    out = list(out)
    if xor:
        out = _xor_mp(out)
    return bell_keyrate_mp(out, q)


# ---------------------------------------------------------------------------
# Small-n concentration check

def _block_outcome(comp: tuple[int, int, int, int]) -> int | None:
    """Output Bell index of a block with the given composition, or None if discarded."""
    flips = {BELL_INDICES[k][0] for k in range(4) if comp[k]}
    if len(flips) != 1:
        return None
    i = flips.pop()
    j = sum(comp[k] * BELL_INDICES[k][1] for k in range(4)) % 2
    return 2 * i + j


def _compositions(total: int, parts: int = 4):
    if parts == 1:
        yield (total,)
        return
    for k in range(total + 1):
        for rest in _compositions(total - k, parts - 1):
            yield (k,) + rest


def _exact_type_classes(counts: tuple[int, ...], m: int) -> dict[tuple[int, ...], Fraction]:
    """Exact type-class law when the counted Bell indices are shuffled and cut into blocks."""
    n_bar = sum(counts) // m
    comps = list(_compositions(m))
    states: dict[tuple, Fraction] = {(tuple(counts), (0, 0, 0, 0)): Fraction(1)}
    for _ in range(n_bar):
        nxt: dict[tuple, Fraction] = defaultdict(Fraction)
        for (rem, acc), p in states.items():
            left = sum(rem)
            denom = math.comb(left, m)
            for comp in comps:
                if any(c > r for c, r in zip(comp, rem)):
                    continue
                ways = math.prod(math.comb(r, c) for r, c in zip(rem, comp))
                new_rem = tuple(r - c for r, c in zip(rem, comp))
                out = _block_outcome(comp)
                new_acc = acc if out is None else tuple(a + (k == out) for k, a in enumerate(acc))
                nxt[(new_rem, new_acc)] += p * Fraction(ways, denom)
        states = nxt
    law: dict[tuple[int, ...], Fraction] = defaultdict(Fraction)
    for (_, acc), p in states.items():
        law[acc] += p
    return dict(law)


def _iid_type_classes(cell: Sequence[float], n_bar: int) -> dict[tuple[int, ...], float]:
    """Multinomial law of output classes for n_bar independent blocks (cell[4] = discard)."""
    law: dict[tuple[int, ...], float] = {}
    for comp in _compositions(n_bar, 5):
        p = math.factorial(n_bar) / math.prod(math.factorial(c) for c in comp)
        p *= math.prod(cell[k] ** comp[k] for k in range(5))
        key = comp[:4]
        law[key] = law.get(key, 0.0) + p
    return law


def lemma1_check(counts: Sequence[int], m: int) -> tuple[float, float]:
    """Compare the exact block statistics of a fixed Bell-index multiset with the i.i.d. model.

    The multiset given by ``counts`` (n00, n01, n10, n11) is uniformly
    permuted and cut into n_bar = n / m blocks, each run through advantage
    distillation. Returns the total-variation distance between the exact law of
    the output type classes and the law obtained from i.i.d. blocks drawn with
    weights ``counts / n``, plus the exact mass inside the max-norm ball of
    radius n_bar^(-1/3) around the i.i.d. expected frequencies.
    """
    counts = tuple(int(c) for c in counts)
    if len(counts) != 4 or any(c < 0 for c in counts):
        raise DomainError("counts must be four non-negative integers")
    n = sum(counts)
    if n == 0 or n > 16:
        raise DomainError(f"total count must be in 1..16, got {n}")
    if m < 1 or n % m:
        raise DomainError(f"block size {m} must divide n = {n}")
    n_bar = n // m
    lam = BellDiagonal.from_array(np.asarray(counts, dtype=float) / n)
    lam_out, p_succ = ad_oracle(lam, m)
    cell = list(p_succ * lam_out.as_array()) + [1.0 - p_succ]
    exact = _exact_type_classes(counts, m)
    iid = _iid_type_classes(cell, n_bar)
    keys = set(exact) | set(iid)
    tv = 0.5 * sum(abs(float(exact.get(k, 0)) - iid.get(k, 0.0)) for k in keys)
    dist = TypeClassDistribution({k: float(v) for k, v in exact.items()}, n_bar)
    mass = dist.ball_mass(cell[:4], n_bar ** (-1.0 / 3.0))
    return float(tv), float(mass)


def block_marginal_tv(counts: Sequence[int], m: int) -> float:
    """Total-variation distance between one block's composition law and its i.i.d. counterpart.

    Drawing m pairs without replacement from the fixed multiset approaches
    i.i.d. sampling as n grows, so this distance shrinks with n at a fixed ratio.
    """
    counts = tuple(int(c) for c in counts)
    n = sum(counts)
    if n < m or m < 1:
        raise DomainError(f"need at least m={m} pairs, got {n}")
    total = math.comb(n, m)
    tv = 0.0
    for comp in _compositions(m):
        exact = math.prod(math.comb(r, c) for r, c in zip(counts, comp)) / total
        iid = math.factorial(m) / math.prod(math.factorial(c) for c in comp)
        iid *= math.prod((r / n) ** c for r, c in zip(counts, comp))
        tv += abs(exact - iid)
    return 0.5 * tv
