import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qkdbounds import bellcore as bc
from qkdbounds.errors import DomainError, ZeroWeightError


def h_exact(x):
    with mpmath.workdps(50):
        x = mpmath.mpf(x)
        return float(-x * mpmath.log(x, 2) - (1 - x) * mpmath.log(1 - x, 2))


weights = st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4).filter(lambda w: sum(w) > 1e-3)


def as_state(w):
    return bc.BellDiagonal.from_array(np.asarray(w) / sum(w), renormalize=True)


# ---- entropies ---------------------------------------------------------------

def test_binary_entropy_basic_values():
    assert bc.binary_entropy(0.5) == 1.0
    assert bc.binary_entropy(0.0) == 0.0
    assert bc.binary_entropy(1.0) == 0.0
    assert bc.binary_entropy(0.11) == pytest.approx(h_exact(0.11), abs=1e-14)
    assert bc.binary_entropy(0.11) == pytest.approx(0.49991, abs=1e-5)


@pytest.mark.parametrize("x", [-0.01, 1.01, float("nan")])
def test_binary_entropy_rejects_out_of_range(x):
    with pytest.raises(DomainError):
        bc.binary_entropy(x)


def test_binary_entropy_tolerates_tiny_excursions():
    assert bc.binary_entropy(-1e-13) == 0.0


def test_von_neumann_entropy_examples():
    assert bc.von_neumann_entropy(np.eye(4) / 4) == pytest.approx(2.0, abs=1e-12)
    v = np.array([1, 1j, 0, 0]) / math.sqrt(2)
    assert bc.von_neumann_entropy(np.outer(v, v.conj())) == pytest.approx(0.0, abs=1e-12)
    d = np.diag([0.81, 0.09, 0.09, 0.01])
    shannon = bc.shannon_entropy([0.81, 0.09, 0.09, 0.01])
    assert bc.von_neumann_entropy(d) == pytest.approx(shannon, abs=1e-12)
    assert bc.von_neumann_entropy(d) == pytest.approx(2 * h_exact(0.1), abs=1e-12)


def test_von_neumann_entropy_rejects_bad_input():
    with pytest.raises(DomainError):
        bc.von_neumann_entropy(np.array([[0.5, 0.1], [0.3, 0.5]]))
    with pytest.raises(DomainError):
        bc.von_neumann_entropy(np.diag([1.2, -0.2]))


@pytest.mark.parametrize("dim", [2, 3, 4, 8, 16])
def test_jacobi_reconstructs_random_hermitian(dim):
    rng = np.random.default_rng(dim)
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    m = a + a.conj().T
    w, v = bc.jacobi_eigh(m)
    assert np.max(np.abs(v @ np.diag(w) @ v.conj().T - m)) < 1e-10
    assert abs(w.sum() - np.trace(m).real) < 1e-10
    assert np.allclose(w, np.linalg.eigvalsh(m), atol=1e-10)


def test_jacobi_handles_degenerate_and_diagonal():
    w, v = bc.jacobi_eigh(np.eye(5))
    assert np.allclose(w, 1.0) and np.allclose(v, np.eye(5))
    m = np.zeros((4, 4))
    m[0, 3] = m[3, 0] = 1.0
    assert np.allclose(bc.jacobi_eigh(m)[0], [-1, 0, 0, 1])


# ---- states ------------------------------------------------------------------

def test_bell_diagonal_validation():
    with pytest.raises(DomainError):
        bc.BellDiagonal(0.5, 0.5, 0.5, -0.5)
    with pytest.raises(DomainError):
        bc.BellDiagonal(0.5, 0.5, 0.1, 0.0)
    lam = bc.BellDiagonal(0.81, 0.09, 0.09, 0.01)
    assert lam.qber == pytest.approx(0.1)
    assert lam.phase_error == pytest.approx(0.1)


def test_purification_of_perfect_state():
    psi = bc.purify_bell_diagonal(bc.BellDiagonal(1, 0, 0, 0))
    assert np.allclose(psi, np.kron(bc.bell_state(0, 0), [1, 0, 0, 0]))


def _reduced_ab(psi):
    t = psi.reshape(4, 4)
    return t @ t.conj().T


def test_purification_of_uniform_state():
    psi = bc.purify_bell_diagonal(bc.BellDiagonal(0.25, 0.25, 0.25, 0.25))
    assert np.linalg.norm(psi) == pytest.approx(1.0)
    assert np.allclose(_reduced_ab(psi), np.eye(4) / 4)


def test_purification_reconstructs_bell_mixture():
    lam = bc.BellDiagonal(0.81, 0.09, 0.09, 0.01)
    expected = sum(w * np.outer(bc.bell_state(i, j), bc.bell_state(i, j).conj())
                   for w, (i, j) in zip(lam.as_array(), bc.BELL_INDICES))
    assert np.allclose(_reduced_ab(bc.purify_bell_diagonal(lam)), expected, atol=1e-14)
    assert np.allclose(lam.density_matrix(), expected)


def test_density_operator_partial_trace():
    lam = bc.BellDiagonal(0.7, 0.1, 0.15, 0.05)
    psi = bc.purify_bell_diagonal(lam)
    rho = bc.DensityOperator.from_vector(psi, dims=(2, 2, 4))
    ab = rho.partial_trace(keep=(0, 1))
    assert np.allclose(ab.matrix, lam.density_matrix())
    assert np.allclose(rho.partial_trace(keep=(0,)).matrix, np.eye(2) / 2)


# ---- measurement and key rates -------------------------------------------------

def test_measure_perfect_state():
    d = bc.measure_and_randomize(bc.purify_bell_diagonal(bc.BellDiagonal(1, 0, 0, 0)), 0.0)
    assert np.allclose(d.joint_uy, np.diag([0.5, 0.5]))
    for cond in d.cond_e:
        assert bc.von_neumann_entropy(cond) == pytest.approx(0.0, abs=1e-12)


def test_full_randomization_decouples_eve():
    psi = bc.purify_bell_diagonal(bc.BellDiagonal(0.6, 0.2, 0.15, 0.05))
    d = bc.measure_and_randomize(psi, 0.5)
    assert np.allclose(d.weight_u, [0.5, 0.5])
    assert np.allclose(d.cond_e[0], d.cond_e[1])
    assert np.allclose(d.cond_e[0], d.rho_e())
    assert bc.s_u_given_e(d) == pytest.approx(1.0, abs=1e-12)


def test_measured_error_rate_matches_bit_error():
    d = bc.measure_and_randomize(bc.purify_bell_diagonal(bc.BellDiagonal(0.81, 0.09, 0.09, 0.01)), 0.0)
    assert d.joint_uy[0, 1] + d.joint_uy[1, 0] == pytest.approx(0.1, abs=1e-14)


def test_zero_weight_input_is_rejected():
    with pytest.raises(ZeroWeightError):
        bc.measure_and_randomize(np.zeros(16), 0.0)


def test_subnormalized_input_gives_same_entropies():
    psi = bc.purify_bell_diagonal(bc.BellDiagonal(0.6, 0.2, 0.15, 0.05))
    full = bc.measure_and_randomize(psi, 0.2)
    part = bc.measure_and_randomize(0.3 * psi, 0.2)
    assert part.weight == pytest.approx(0.09)
    assert bc.s_u_given_e(part) == pytest.approx(bc.s_u_given_e(full), abs=1e-12)
    assert bc.h_u_given_y(part) == pytest.approx(bc.h_u_given_y(full), abs=1e-12)


def test_keyrate_examples():
    q = 0.1
    lam = bc.BellDiagonal((1 - q) ** 2, q * (1 - q), q * (1 - q), q * q)
    rb = bc.bell_keyrate(lam)
    assert rb.value == pytest.approx(1 - 2 * h_exact(0.1), abs=1e-9)
    assert rb.value == pytest.approx(0.06200, abs=1e-5)
    assert rb.witness["s_u_given_e"] == pytest.approx(1 - h_exact(0.1), abs=1e-9)
    assert rb.witness["s_u_given_e"] == pytest.approx(0.53100, abs=1e-5)
    assert bc.bell_keyrate(bc.BellDiagonal(1, 0, 0, 0)).value == pytest.approx(1.0, abs=1e-12)


def test_rate_bound_must_not_exceed_one():
    with pytest.raises(DomainError):
        bc.RateBound(1.5, {})


@settings(max_examples=60, deadline=None)
@given(weights)
def test_identity_at_q_zero(w):
    lam = as_state(w)
    assert bc.bell_keyrate(lam).value == pytest.approx(1 - bc.shannon_entropy(lam.as_array()), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(weights)
def test_subadditivity_bound(w):
    lam = as_state(w)
    floor = 1 - bc.binary_entropy(lam.qber) - bc.binary_entropy(lam.phase_error)
    assert bc.bell_keyrate(lam).value >= floor - 1e-9


@settings(max_examples=40, deadline=None)
@given(weights)
def test_eve_uncertainty_monotone_in_flip_probability(w):
    lam = as_state(w)
    psi = bc.purify_bell_diagonal(lam)
    qs = np.linspace(0, 0.5, 11)
    s = [bc.s_u_given_e(bc.measure_and_randomize(psi, q)) for q in qs]
    assert all(b >= a - 1e-10 for a, b in zip(s, s[1:]))
    assert all(v >= bc.binary_entropy(q) - 1e-10 for v, q in zip(s, qs))
    assert s[-1] == pytest.approx(1.0, abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(weights, st.floats(0.0, 0.5))
def test_closed_form_matches_engine(w, q):
    lam = as_state(w)
    assert float(bc.bell_keyrate_array(lam.as_array(), q)) == pytest.approx(bc.bell_keyrate(lam, q).value, abs=1e-10)
    with mpmath.workdps(30):
        assert float(bc.bell_keyrate_mp(list(lam.as_array()), q)) == pytest.approx(bc.bell_keyrate(lam, q).value, abs=1e-10)


def test_engine_works_with_larger_eve():
    # embed a 4-dim Eve into 8 dims: same entropies
    lam = bc.BellDiagonal(0.6, 0.2, 0.15, 0.05)
    psi = bc.purify_bell_diagonal(lam).reshape(4, 4)
    big = np.zeros((4, 8), dtype=complex)
    big[:, :4] = psi
    d = bc.measure_and_randomize(big.reshape(-1), 0.1)
    assert bc.keyrate_two_qubit(d).value == pytest.approx(bc.bell_keyrate(lam, 0.1).value, abs=1e-12)
