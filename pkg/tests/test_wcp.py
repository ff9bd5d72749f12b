import math

import numpy as np
import pytest

from qkdbounds import wcp
from qkdbounds.bellcore import binary_entropy
from qkdbounds.channel import ChannelParams, observables
from qkdbounds.errors import DomainError, InfeasibleObservations

NOISELESS = ChannelParams(alpha=0.25, length=0.0, eta_det=0.1, p_d=0.0, V=1.0, mu=0.1)
TYPICAL = ChannelParams(alpha=0.25, eta_det=0.1, p_d=1e-5, V=1.0)


def test_noiseless_bb84_example():
    obs = observables("bb84", NOISELESS)
    assert obs.r_mu == pytest.approx(0.0049751, abs=5e-8)
    b = wcp.bb84_wcp_bound(obs.r_mu, obs.q_mu, 0.1)
    assert b.witness["R1"] == pytest.approx(0.0026357, abs=5e-8)
    assert b.witness["Q1"] == 0.0
    assert b.value == pytest.approx(0.0026357, abs=5e-8)
    assert not b.abort


def test_bb84_closed_form_at_q_zero():
    r, qm, mu = 0.004, 0.02, 0.1
    b = wcp.bb84_wcp_bound(r, qm, mu)
    r1 = r - 0.5 * (1 - math.exp(-mu) * (1 + mu))
    q1 = r * qm / r1
    assert b.value == pytest.approx(r1 * (1 - binary_entropy(q1)) - r * binary_entropy(qm), abs=1e-15)


def test_bb84_aborts_when_multiphotons_explain_everything():
    b = wcp.bb84_wcp_bound(0.001, 0.01, 0.5)
    assert b.abort and b.value <= 0 and b.witness["R1"] == 0.0


def test_full_randomization_kills_key():
    b = wcp.bb84_wcp_bound(0.004, 0.02, 0.1, q=0.5)
    assert b.value == pytest.approx(0.0, abs=1e-12)
    assert b.value <= wcp.bb84_wcp_bound(0.004, 0.02, 0.1, q=0.05).value


def test_bad_observations():
    with pytest.raises(InfeasibleObservations):
        wcp.bb84_wcp_bound(1.2, 0.1, 0.1)
    with pytest.raises(DomainError):
        wcp.bb84_wcp_bound(0.1, 0.1, 0.0)
    with pytest.raises(DomainError):
        wcp.WcpBound(0.5, r_mu=0.1)


@pytest.mark.parametrize("length", [0.0, 10.0, 25.0, 40.0])
@pytest.mark.parametrize("mu", [0.01, 0.05, 0.2])
def test_bb84_closed_form_matches_search(length, mu):
    obs = observables("bb84", TYPICAL.with_(length=length, mu=mu))
    closed = wcp.bb84_wcp_bound(obs.r_mu, obs.q_mu, mu)
    search = wcp.bb84_wcp_search(obs.r_mu, obs.q_mu, mu)
    assert abs(closed.value - search.value) <= 1e-8


def test_bb84_witness_is_compatible():
    for length in (0.0, 20.0):
        obs = observables("bb84", TYPICAL.with_(length=length, mu=0.05))
        for q in (0.0, 0.1):
            b = wcp.bb84_wcp_bound(obs.r_mu, obs.q_mu, 0.05, q)
            cset = wcp.CompatibilitySet("bb84", obs.r_mu, obs.q_mu, 0.05)
            assert cset.contains(b.witness), cset.violations(b.witness)


def test_compatibility_set_flags_violations():
    cset = wcp.CompatibilitySet("bb84", 0.004, 0.02, 0.1)
    assert "Y1<=1/2" in cset.violations({"R1": 0.1, "Q1": 0.0})
    assert "errors" in cset.violations({"R1": 0.004, "Q1": 0.5})
    assert "range_1" in cset.violations({"R1": 0.004, "Q1": 0.7})


# ---- SARG -----------------------------------------------------------------------

def test_sarg_noiseless_short_distance_positive():
    mu, bound = wcp.optimize_mu("sarg", NOISELESS.with_(length=5.0))
    assert bound.value > 0 and not bound.abort


@pytest.mark.parametrize("length,mu", [(5.0, 0.2), (15.0, 0.1), (20.0, 0.05)])
def test_sarg_grid_matches_finer_grid(length, mu):
    obs = observables("sarg", TYPICAL.with_(length=length, mu=mu))
    coarse = wcp.sarg_wcp_bound(obs.r_mu, obs.q_mu, mu)
    fine = wcp.sarg_wcp_bound(obs.r_mu, obs.q_mu, mu, grid=1001, refinements=1)
    assert abs(coarse.value - fine.value) <= 1e-6


def test_sarg_witness_is_compatible():
    obs = observables("sarg", TYPICAL.with_(length=10.0, mu=0.15))
    for q in (0.0, 0.1):
        b = wcp.sarg_wcp_bound(obs.r_mu, obs.q_mu, 0.15, q)
        cset = wcp.CompatibilitySet("sarg", obs.r_mu, obs.q_mu, 0.15)
        assert cset.contains(b.witness), cset.violations(b.witness)


def test_sarg_aborts_when_multiphotons_explain_everything():
    b = wcp.sarg_wcp_bound(0.02, 0.3, 1.5)
    assert b.abort and b.value <= 0


def test_sarg_lp_vertex_choice():
    # minimize 2a + 1(c-a) with a in [0, 1], c = 1, error k1 a + k2 (c-a) <= e
    val, a = wcp._sarg_lp(0.0, 1.0, 1.0, 0.5, 0.0, 1.0, 2.0, 1.0)
    assert (float(val), float(a)) == (1.5, 0.5)
    val, _ = wcp._sarg_lp(0.0, 1.0, 1.0, -1.0, 0.0, 1.0, 2.0, 1.0)
    assert np.isinf(val)


# ---- decoy states and mu ---------------------------------------------------

def test_decoy_noiseless_bb84():
    obs = observables("bb84", NOISELESS)
    b = wcp.decoy_bound("bb84", obs)
    assert b.value == pytest.approx(0.1 * math.exp(-0.1) * 0.05, rel=1e-12)


@pytest.mark.parametrize("protocol", ["bb84", "sarg"])
def test_decoy_beats_no_decoy(protocol):
    for length in (0.0, 10.0, 20.0):
        p = TYPICAL.with_(length=length, mu=0.1)
        assert wcp.evaluate(protocol, p, decoy=True).value >= wcp.evaluate(protocol, p).value - 1e-15


def test_decoy_needs_per_photon_data():
    obs = observables("bb84", NOISELESS)
    with pytest.raises(DomainError):
        wcp.decoy_bound("bb84", type(obs)(obs.r_mu, obs.q_mu, obs.mu))
    with pytest.raises(DomainError):
        wcp.decoy_bound("six-state", obs)


@pytest.mark.parametrize("protocol", ["bb84", "sarg"])
def test_optimal_mu_is_local_maximum(protocol):
    p = TYPICAL.with_(length=10.0)
    mu, b = wcp.optimize_mu(protocol, p)
    assert wcp.MU_RANGE[0] <= mu <= wcp.MU_RANGE[1]
    for factor in (0.5, 2.0):
        assert b.value >= wcp.evaluate(protocol, p.with_(mu=mu * factor)).value


def test_bound_decreases_with_distance():
    vals = [wcp.evaluate("bb84", TYPICAL.with_(length=L, mu=0.05)).value for L in (0, 5, 10, 15, 20)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_randomization_helps_near_cutoff():
    p = TYPICAL.with_(V=0.95, length=25.0)
    _, b0 = wcp.optimize_mu("bb84", p, decoy=True)
    _, ba = wcp.optimize_mu("bb84", p, decoy=True, q="auto")
    assert ba.value >= b0.value


def test_cutoff_distance_brackets_sign_change():
    p = TYPICAL.with_(V=0.95)
    d = wcp.cutoff_distance("bb84", p)
    assert wcp.optimize_mu("bb84", p.with_(length=d - 1.0))[1].value > 0
    assert wcp.optimize_mu("bb84", p.with_(length=d + 1.0))[1].value <= 0
