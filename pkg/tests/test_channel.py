import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qkdbounds import channel as ch
from qkdbounds.errors import DomainError

PERFECT = ch.ChannelParams(alpha=0.25, length=0.0, eta_det=1.0, p_d=0.0, V=1.0, mu=0.1)


def test_derived_quantities():
    p = ch.ChannelParams(length=40.0)
    assert p.t == pytest.approx(0.1)
    assert p.eta == pytest.approx(0.01)
    assert (p.F, p.D, p.pbar) == (1.0, 0.0, 1 - 1e-5)
    assert p.with_(V=0.9).D == pytest.approx(0.05)


@pytest.mark.parametrize("kw", [dict(eta_det=1.5), dict(p_d=-1e-6), dict(V=1.1), dict(mu=0.0), dict(length=-1)])
def test_parameter_validation(kw):
    with pytest.raises(DomainError):
        ch.ChannelParams(**kw)


def test_poisson_weights():
    n = np.arange(6)
    ref = np.array([math.exp(-0.3) * 0.3 ** k / math.factorial(k) for k in n])
    assert np.allclose(ch.poisson_pn(0.3, n), ref, rtol=1e-14)
    assert ch.poisson_pn(0.0, 0) == 1.0
    assert ch.poisson_tail(0.3, 2) == pytest.approx(1 - ref[0] - ref[1], rel=1e-13)
    assert ch.poisson_tail(0.3, 0) == 1.0
    assert ch.poisson_tail(1e-6, 3) == pytest.approx(1e-18 / 6, rel=1e-5)
    with pytest.raises(DomainError):
        ch.poisson_pn(-1.0, 1)


def test_perfect_apparatus_single_photon():
    y, yq = ch.bb84_yields(PERFECT)
    assert (y[1], yq[1] / y[1]) == (0.5, 0.0)
    y, yq = ch.sarg_yields(PERFECT)
    assert (y[1], yq[1] / y[1]) == (0.25, 0.0)
    assert y[0] == 0.0


def test_dark_counts_alone():
    p = PERFECT.with_(p_d=1e-3)
    y, yq = ch.bb84_yields(p)
    assert y[0] == pytest.approx(0.5 * (1 - (1 - 1e-3) ** 2))
    assert yq[0] / y[0] == pytest.approx(0.5)


def test_visibility_errors_on_single_photons():
    p = PERFECT.with_(V=0.9)
    y, yq = ch.bb84_yields(p)
    assert yq[1] / y[1] == pytest.approx(0.05)


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 150), st.floats(0.01, 1), st.floats(1e-8, 1e-3), st.floats(0.7, 1), st.floats(0.01, 1.5))
def test_closed_forms_match_photon_sums(length, eta_det, p_d, V, mu):
    p = ch.ChannelParams(length=length, eta_det=eta_det, p_d=p_d, V=V, mu=mu)
    for protocol in ("bb84", "sarg"):
        obs = ch.observables(protocol, p)
        r, rq = ch.series_totals(protocol, p)
        assert abs(obs.r_mu - r) <= 1e-10
        assert abs(obs.r_mu * obs.q_mu - rq) <= 1e-10
        assert len(obs.per_n) == ch.N_MAX + 1


def test_observables_per_photon_number():
    obs = ch.observables("sarg", PERFECT.with_(mu=0.2))
    assert obs.yields[1] == 0.25 and obs.errors[1] == 0.0
    assert obs.yields[2] == pytest.approx(0.5 * (1 + 0.5 * 0 - 0.5 - 0))
    with pytest.raises(DomainError):
        ch.observables("six-state", PERFECT)


def test_long_fiber_is_dark_count_limited():
    obs = ch.observables("bb84", ch.ChannelParams(length=400.0))
    assert obs.q_mu == pytest.approx(0.5, abs=1e-3)
