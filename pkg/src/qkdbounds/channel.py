"""Expected observables of a lossy depolarizing fiber channel with threshold detectors.

Dark counts are per detector and per pulse. Double clicks are resolved
randomly, which is already folded into the yield formulas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import gammainc, gammaln

from .errors import DomainError

N_MAX = 25


@dataclass(frozen=True)
class ChannelParams:
    """Fiber and detector description.

    Args:
        alpha: Attenuation in dB/km.
        length: Fiber length in km.
        eta_det: Detector efficiency.
        p_d: Dark-count probability per detector per pulse.
        V: Visibility.
        mu: Mean photon number of the source.
    """

    alpha: float = 0.25
    length: float = 0.0
    eta_det: float = 0.1
    p_d: float = 1e-5
    V: float = 1.0
    mu: float = 0.1

    def __post_init__(self):
        if self.alpha < 0 or self.length < 0:
            raise DomainError("attenuation and length must be non-negative")
        for name in ("eta_det", "p_d", "V"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {v}")
        if not self.mu > 0:
            raise DomainError(f"mu must be positive, got {self.mu}")

    @property
    def t(self) -> float:
        return 10.0 ** (-self.alpha * self.length / 10.0)

    @property
    def eta(self) -> float:
        return self.t * self.eta_det

    @property
    def F(self) -> float:
        return 0.5 * (1.0 + self.V)

    @property
    def D(self) -> float:
        return 0.5 * (1.0 - self.V)

    @property
    def pbar(self) -> float:
        return 1.0 - self.p_d

    def with_(self, **changes) -> "ChannelParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class PulseObservables:
    """Sifting rate and QBER per pulse, optionally with per-photon-number yields and error rates."""

    r_mu: float
    q_mu: float
    mu: float
    per_n: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if not 0.0 <= self.r_mu <= 1.0:
            raise DomainError(f"sifting rate must lie in [0, 1], got {self.r_mu}")
        if not 0.0 <= self.q_mu <= 1.0:
            raise DomainError(f"QBER must lie in [0, 1], got {self.q_mu}")

    @property
    def yields(self) -> np.ndarray:
        return np.array([y for y, _ in self.per_n or ()])

    @property
    def errors(self) -> np.ndarray:
        return np.array([e for _, e in self.per_n or ()])


def poisson_pn(mu: float, n):
    """p_n = e^-mu mu^n / n!, evaluated in log space."""
    if mu < 0:
        raise DomainError(f"mu must be non-negative, got {mu}")
    n = np.asarray(n)
    if np.any(n < 0):
        raise DomainError("photon number must be non-negative")
    if mu == 0:
        out = (n == 0).astype(float)
    else:
        out = np.exp(-mu + n * math.log(mu) - gammaln(n + 1))
    return float(out) if out.ndim == 0 else out


def poisson_tail(mu: float, n0: int) -> float:
    """Sum of p_n over n >= n0, via the regularized lower incomplete gamma function."""
    if n0 <= 0:
        return 1.0
    if mu <= 0:
        return 0.0
    return float(gammainc(n0, mu))


def _per_n(yields, errs) -> tuple[tuple[float, float], ...]:
    qn = np.divide(errs, yields, out=np.zeros_like(errs), where=yields > 0)
    return tuple((float(y), float(e)) for y, e in zip(yields, qn))


def bb84_yields(p: ChannelParams, n_max: int = N_MAX) -> tuple[np.ndarray, np.ndarray]:
    """``(Y_n, Y_n Q_n)`` for n = 0..n_max."""
    n = np.arange(n_max + 1)
    eta, pb = p.eta, p.pbar
    y = 0.5 * (1.0 - pb ** 2 * (1.0 - eta) ** n)
    yq = 0.25 * (1.0 + pb * (1.0 - p.F * eta) ** n - pb * (1.0 - p.D * eta) ** n - pb ** 2 * (1.0 - eta) ** n)
    return y, np.clip(yq, 0.0, None)


def sarg_yields(p: ChannelParams, n_max: int = N_MAX) -> tuple[np.ndarray, np.ndarray]:
    n = np.arange(n_max + 1)
    eta, pb = p.eta, p.pbar
    y = 0.5 * (1.0 + 0.5 * pb * (1.0 - p.F * eta) ** n - 0.5 * pb * (1.0 - p.D * eta) ** n
               - pb ** 2 * (1.0 - eta) ** n)
    _, yq = bb84_yields(p, n_max)
    return y, yq


def _errors_term(p: ChannelParams) -> float:
    mu, eta, pb = p.mu, p.eta, p.pbar
    val = 0.25 * (1.0 + pb * math.exp(-mu * p.F * eta) - pb * math.exp(-mu * p.D * eta)
                  - pb ** 2 * math.exp(-mu * eta))
    return max(val, 0.0)  # cancellation can leave -1e-18 at V = 1


def bb84_observables(p: ChannelParams, n_max: int = N_MAX) -> PulseObservables:
    mu, eta, pb = p.mu, p.eta, p.pbar
    r = 0.5 * (1.0 - pb ** 2 * math.exp(-mu * eta))
    rq = _errors_term(p)
    return PulseObservables(r, rq / r if r > 0 else 0.0, mu, _per_n(*bb84_yields(p, n_max)))


def sarg_observables(p: ChannelParams, n_max: int = N_MAX) -> PulseObservables:
    mu, eta, pb = p.mu, p.eta, p.pbar
    r = 0.5 * (1.0 + 0.5 * pb * math.exp(-mu * p.F * eta) - 0.5 * pb * math.exp(-mu * p.D * eta)
               - pb ** 2 * math.exp(-mu * eta))
    rq = _errors_term(p)
    return PulseObservables(r, rq / r if r > 0 else 0.0, mu, _per_n(*sarg_yields(p, n_max)))


def observables(protocol: str, p: ChannelParams, n_max: int = N_MAX) -> PulseObservables:
    if protocol == "bb84":
        return bb84_observables(p, n_max)
    if protocol == "sarg":
        return sarg_observables(p, n_max)
    raise DomainError(f"no channel model for protocol {protocol!r}")


def series_totals(protocol: str, p: ChannelParams, n_max: int = N_MAX) -> tuple[float, float]:
    """``(R_mu, R_mu Q_mu)`` as photon-number sums through ``n_max``."""
    y, yq = (bb84_yields if protocol == "bb84" else sarg_yields)(p, n_max)
    pn = poisson_pn(p.mu, np.arange(n_max + 1))
    return float(pn @ y), float(pn @ yq)
