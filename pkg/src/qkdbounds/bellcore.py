"""Entropy engine for two-qubit states held by Alice and Bob plus Eve's register.

The central quantity is ``S(U|E) - H(U|Y)``: Alice measures her qubit in the
computational basis (outcome X), optionally flips the result with probability
q (giving U), Bob measures his qubit (Y), and Eve keeps a quantum register E.

Bell basis convention: ``|Phi_ij> = (|0,i> + (-1)**j |1,1+i>) / sqrt(2)``, so
``i`` is the bit-flip index and ``j`` the phase index. Array forms of a
Bell-diagonal state are always ordered ``(lam00, lam01, lam10, lam11)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import mpmath
import numpy as np

from .errors import DomainError, ZeroWeightError

HERMITIAN_TOL = 1e-12
NEG_EIG_TOL = 1e-10
ZERO_CLAMP = 1e-14
SUM_TOL = 1e-12

BELL_INDICES = ((0, 0), (0, 1), (1, 0), (1, 1))


# ---------------------------------------------------------------------------
# Domain types

@dataclass(frozen=True)
class BellDiagonal:
    """Eigenvalues of a two-qubit state that is diagonal in the Bell basis."""

    lam00: float
    lam01: float
    lam10: float
    lam11: float

    def __post_init__(self):
        vals = self.as_array()
        if np.any(~np.isfinite(vals)):
            raise DomainError(f"non-finite Bell weights {vals}")
        if np.any(vals < -SUM_TOL) or np.any(vals > 1 + SUM_TOL):
            raise DomainError(f"Bell weights must lie in [0, 1], got {vals}")
        if abs(vals.sum() - 1.0) > SUM_TOL:
            raise DomainError(f"Bell weights must sum to 1, got sum {vals.sum()!r}")

    @classmethod
    def from_array(cls, lam: Sequence[float], renormalize: bool = False) -> "BellDiagonal":
        vals = np.asarray(lam, dtype=float).reshape(4)
        if renormalize:
            vals = np.clip(vals, 0.0, None)
            vals = vals / vals.sum()
        return cls(*(float(v) for v in vals))

    def as_array(self) -> np.ndarray:
        return np.array([self.lam00, self.lam01, self.lam10, self.lam11], dtype=float)

    def as_matrix(self) -> np.ndarray:
        """Weights as a 2x2 table indexed ``[i, j]``."""
        return self.as_array().reshape(2, 2)

    @property
    def qber(self) -> float:
        """Bit error rate e_b = lam10 + lam11."""
        return self.lam10 + self.lam11

    @property
    def phase_error(self) -> float:
        """Phase error rate e_p = lam01 + lam11."""
        return self.lam01 + self.lam11

    def entropy(self) -> float:
        """Shannon entropy of the four weights (the von Neumann entropy of the state)."""
        return shannon_entropy(self.as_array())

    def density_matrix(self) -> np.ndarray:
        rho = np.zeros((4, 4), dtype=complex)
        for w, (i, j) in zip(self.as_array(), BELL_INDICES):
            v = bell_state(i, j)
            rho += w * np.outer(v, v.conj())
        return rho


@dataclass(frozen=True)
class DensityOperator:
    """Hermitian positive semidefinite matrix with an explicit trace ("weight").

    Args:
        matrix: Square complex array.
        dims: Subsystem dimensions whose product is the matrix size.
        weight: Declared trace. Sub-normalized operators carry weight < 1.
    """

    matrix: np.ndarray
    dims: tuple[int, ...] = ()
    weight: float = 1.0

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DomainError(f"density operator must be square, got shape {m.shape}")
        dims = tuple(self.dims) if self.dims else (m.shape[0],)
        if int(np.prod(dims)) != m.shape[0]:
            raise DomainError(f"dims {dims} do not match matrix size {m.shape[0]}")
        _check_hermitian(m)
        tr = float(np.real(np.trace(m)))
        if abs(tr - self.weight) > 1e-10:
            raise DomainError(f"trace {tr} differs from declared weight {self.weight}")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, dims: tuple[int, ...] = ()) -> "DensityOperator":
        m = np.asarray(matrix, dtype=complex)
        return cls(m, dims, float(np.real(np.trace(m))))

    @classmethod
    def from_vector(cls, psi: np.ndarray, dims: tuple[int, ...] = ()) -> "DensityOperator":
        psi = np.asarray(psi, dtype=complex).reshape(-1)
        return cls.from_matrix(np.outer(psi, psi.conj()), dims)

    def normalized(self) -> "DensityOperator":
        if self.weight <= 0:
            raise ZeroWeightError("cannot normalize a zero-weight operator")
        return DensityOperator(self.matrix / self.weight, self.dims, 1.0)

    def partial_trace(self, keep: Sequence[int]) -> "DensityOperator":
        """Reduced operator on the subsystems listed in ``keep`` (in their original order)."""
        keep = sorted(keep)
        n = len(self.dims)
        t = self.matrix.reshape(self.dims + self.dims)
        traced = [k for k in range(n) if k not in keep]
        # trace out from the highest index down so axis numbers stay valid
        for k in sorted(traced, reverse=True):
            cur = t.ndim // 2
            t = np.trace(t, axis1=k, axis2=k + cur)
        d = int(np.prod([self.dims[k] for k in keep])) if keep else 1
        return DensityOperator(t.reshape(d, d), tuple(self.dims[k] for k in keep), self.weight)


@dataclass(frozen=True)
class CqDecomposition:
    """Classical-quantum description of (U, Y, E) after measurement.

    ``cond_e[u]`` is Eve's state conditioned on U = u (trace one), ``weight_u``
    the marginal of U and ``joint_uy`` the 2x2 table of P(U=u, Y=y). ``weight``
    is the trace of the input before renormalization (a sifting probability).
    """

    weight_u: np.ndarray
    cond_e: tuple[np.ndarray, np.ndarray]
    joint_uy: np.ndarray
    q: float = 0.0
    weight: float = 1.0

    def __post_init__(self):
        if abs(float(np.sum(self.weight_u)) - 1.0) > 1e-10:
            raise DomainError("U marginal must sum to 1")
        if np.any(self.joint_uy < -1e-12) or abs(float(self.joint_uy.sum()) - 1.0) > 1e-10:
            raise DomainError("joint (U, Y) table must be a probability table")
        for c in self.cond_e:
            if abs(float(np.real(np.trace(c))) - 1.0) > 1e-10:
                raise DomainError("conditional Eve states must have unit trace")

    def joint_ue_blocks(self) -> tuple[np.ndarray, np.ndarray]:
        return tuple(w * c for w, c in zip(self.weight_u, self.cond_e))  # type: ignore[return-value]

    def rho_e(self) -> np.ndarray:
        b0, b1 = self.joint_ue_blocks()
        return b0 + b1


@dataclass
class RateBound:
    """A key-rate bound together with the parameters that attain it.

    ``unit`` is "raw-key bit" for single-photon bounds and "pulse" for
    weak-coherent-pulse bounds. ``per_raw_bit`` is filled in by two-way
    post-processing, where ``value`` counts bits per distilled bit.
    """

    value: float
    witness: dict[str, Any] = field(default_factory=dict)
    unit: str = "raw-key bit"
    per_raw_bit: float | None = None

    def __post_init__(self):
        if self.value > 1 + 1e-9:
            raise DomainError(f"rate bound {self.value} exceeds one bit")


# ---------------------------------------------------------------------------
# Entropies

def binary_entropy(x):
    """h(x) = -x log2 x - (1-x) log2 (1-x), with 0 log 0 = 0.

    Accepts scalars or arrays. Values outside [0, 1] by more than 1e-12
    raise DomainError; smaller excursions are clipped.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr < -1e-12) or np.any(arr > 1 + 1e-12) or np.any(np.isnan(arr)):
        raise DomainError(f"binary entropy argument outside [0, 1]: {x!r}")
    arr = np.clip(arr, 0.0, 1.0)
    out = _plogp(arr) + _plogp(1.0 - arr)
    if np.ndim(out) == 0:
        return float(out)
    return out


def _plogp(p):
    p = np.asarray(p, dtype=float)
    safe = np.where(p > ZERO_CLAMP, p, 1.0)
    return np.where(p > ZERO_CLAMP, -p * np.log2(safe), 0.0)


def shannon_entropy(p) -> float:
    p = np.asarray(p, dtype=float).reshape(-1)
    if np.any(p < -1e-12):
        raise DomainError("probabilities must be non-negative")
    return float(np.sum(_plogp(p)))


def entropy_of_eigenvalues(ev: np.ndarray) -> float:
    ev = np.asarray(ev, dtype=float)
    if np.any(ev < -NEG_EIG_TOL):
        raise DomainError(f"negative eigenvalue {ev.min()} below tolerance")
    return float(np.sum(_plogp(ev)))


def _check_hermitian(m: np.ndarray) -> None:
    if np.max(np.abs(m - m.conj().T), initial=0.0) > HERMITIAN_TOL:
        raise DomainError("matrix is not Hermitian within 1e-12")


def jacobi_eigh(matrix: np.ndarray, tol: float = 1e-13,
                max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi diagonalization of a small complex Hermitian matrix.

    Returns ``(w, V)`` with ascending eigenvalues and ``matrix = V diag(w) V^H``.
    Sweeps stop once the off-diagonal Frobenius norm drops below
    ``tol * max(1, ||matrix||_F)``.
    """
    a = np.array(matrix, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError("jacobi_eigh needs a square matrix")
    _check_hermitian(a)
    a = 0.5 * (a + a.conj().T)
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    scale = max(1.0, float(np.linalg.norm(a)))

    def off(m):
        return float(np.linalg.norm(m - np.diag(np.diag(m))))

    for _ in range(max_sweeps):
        if off(a) < tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag < 1e-300:
                    continue
                phase = apq / mag
                app, aqq = a[p, p].real, a[q, q].real
                theta = (aqq - app) / (2.0 * mag)
                t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # unitary acting on columns (p, q): phase fix then real rotation
                rot = np.array([[c, s], [-s * np.conj(phase), c * np.conj(phase)]], dtype=complex)
                idx = [p, q]
                a[:, idx] = a[:, idx] @ rot
                a[idx, :] = rot.conj().T @ a[idx, :]
                v[:, idx] = v[:, idx] @ rot
                a[q, p] = 0.0
                a[p, q] = 0.0
    else:
        if off(a) >= tol * scale:
            from .errors import ConvergenceError
            raise ConvergenceError("Jacobi sweeps did not converge")
    w = np.real(np.diag(a))
    order = np.argsort(w)
    return w[order], v[:, order]


def hermitian_eigvalsh(matrix: np.ndarray, method: str = "jacobi") -> np.ndarray:
    """Eigenvalues of a Hermitian matrix via Jacobi sweeps or LAPACK (``method="lapack"``)."""
    if method == "jacobi":
        return jacobi_eigh(matrix)[0]
    if method == "lapack":
        m = np.asarray(matrix, dtype=complex)
        _check_hermitian(m)
        return np.linalg.eigvalsh(m)
    raise DomainError(f"unknown eigen method {method!r}")


def von_neumann_entropy(rho, method: str = "jacobi") -> float:
    """Von Neumann entropy in bits of a unit-trace density operator."""
    m = rho.matrix if isinstance(rho, DensityOperator) else np.asarray(rho, dtype=complex)
    tr = float(np.real(np.trace(m)))
    if abs(tr - 1.0) > 1e-10:
        raise DomainError(f"von_neumann_entropy expects unit trace, got {tr}")
    return entropy_of_eigenvalues(hermitian_eigvalsh(m, method))


# ---------------------------------------------------------------------------
# States

def bell_state(i: int, j: int) -> np.ndarray:
    """Vector of |Phi_ij> on A (x) B, basis order |a b>."""
    v = np.zeros(4, dtype=complex)
    v[0 * 2 + i] += 1.0
    v[1 * 2 + (1 - i)] += (-1.0) ** j
    return v / math.sqrt(2.0)


def purify_bell_diagonal(lam: BellDiagonal) -> np.ndarray:
    """Pure state sum_ij sqrt(lam_ij) |Phi_ij>_AB |e_ij>_E with a four-level E.

    Returns a length-16 vector in the A (x) B (x) E basis.
    """
    psi = np.zeros(16, dtype=complex)
    for k, (w, (i, j)) in enumerate(zip(lam.as_array(), BELL_INDICES)):
        e = np.zeros(4)
        e[k] = 1.0
        psi += math.sqrt(max(w, 0.0)) * np.kron(bell_state(i, j), e)
    return psi


def measure_and_randomize(state, q: float = 0.0) -> CqDecomposition:
    """Computational-basis measurement of A and B with Alice's bit flipped w.p. q.

    Args:
        state: Pure vector or DensityOperator / matrix on A (x) B (x) E with
            A and B qubits. Sub-normalized input is allowed; everything is
            renormalized and the input trace is kept as ``weight``.
        q: Flip probability in [0, 0.5].
    """
    if not -1e-15 <= q <= 0.5 + 1e-15:
        raise DomainError(f"flip probability must lie in [0, 0.5], got {q}")
    if isinstance(state, DensityOperator):
        rho = state.matrix
    else:
        arr = np.asarray(state, dtype=complex)
        rho = np.outer(arr, arr.conj()) if arr.ndim == 1 else arr
    dim = rho.shape[0]
    if dim % 4:
        raise DomainError(f"state dimension {dim} is not 4 * dim(E)")
    de = dim // 4
    if de > 8:
        raise DomainError("Eve's register is limited to dimension 8")
    w = float(np.real(np.trace(rho)))
    if w <= 1e-15:
        raise ZeroWeightError("input state has zero weight")
    t = rho.reshape(2, 2, de, 2, 2, de) / w
    # diagonal (x, y) blocks of E
    blocks = np.array([[t[x, y, :, x, y, :] for y in range(2)] for x in range(2)])
    p_xy = np.real(np.einsum("xyii->xy", blocks))
    rho_e_x = blocks.sum(axis=1)
    flip = np.array([1.0 - q, q])
    ue = [flip[0] * rho_e_x[u] + flip[1] * rho_e_x[1 - u] for u in range(2)]
    joint_uy = np.array([flip[0] * p_xy[u] + flip[1] * p_xy[1 - u] for u in range(2)])
    joint_uy = np.clip(joint_uy, 0.0, None)
    joint_uy = joint_uy / joint_uy.sum()
    weight_u = np.array([float(np.real(np.trace(b))) for b in ue])
    cond = []
    for wu, b in zip(weight_u, ue):
        if wu > 1e-15:
            cond.append(b / wu)
        else:
            cond.append(np.eye(de, dtype=complex) / de)
    weight_u = weight_u / weight_u.sum()
    return CqDecomposition(weight_u, (cond[0], cond[1]), joint_uy, float(q), w)


def s_u_given_e(decomp: CqDecomposition, method: str = "jacobi") -> float:
    """S(U|E) = S(rho_UE) - S(rho_E) in bits."""
    b0, b1 = decomp.joint_ue_blocks()
    ev_ue = np.concatenate([hermitian_eigvalsh(b0, method), hermitian_eigvalsh(b1, method)])
    ev_e = hermitian_eigvalsh(b0 + b1, method)
    return entropy_of_eigenvalues(ev_ue) - entropy_of_eigenvalues(ev_e)


def h_u_given_y(decomp: CqDecomposition) -> float:
    """H(U|Y) = H(U, Y) - H(Y) in bits."""
    return shannon_entropy(decomp.joint_uy) - shannon_entropy(decomp.joint_uy.sum(axis=0))


def keyrate_two_qubit(decomp: CqDecomposition, method: str = "jacobi") -> RateBound:
    """One-way key rate S(U|E) - H(U|Y) for a single measured two-qubit signal."""
    s = s_u_given_e(decomp, method)
    h = h_u_given_y(decomp)
    return RateBound(s - h, {"q": decomp.q, "s_u_given_e": s, "h_u_given_y": h})


def bell_keyrate(lam: BellDiagonal, q: float = 0.0, method: str = "jacobi") -> RateBound:
    """Matrix-engine key rate of a Bell-diagonal state with flip probability ``q``."""
    return keyrate_two_qubit(measure_and_randomize(purify_bell_diagonal(lam), q), method)


# ---------------------------------------------------------------------------
# Closed forms for Bell-diagonal inputs
#
# Given X = x, Eve's state splits into orthogonal blocks labelled by the flip
# index i, each spanned by {e_i0, e_i1}. After mixing the two values of X with
# weights (1-q, q), block i has weight s_i = lam_i0 + lam_i1 and eigenvalues
# s_i (1 +- r_i) / 2 with s_i r_i = sqrt((lam_i0 - lam_i1)^2 + 4 (1-2q)^2 lam_i0 lam_i1).

def bell_s_u_given_e_array(lam: np.ndarray, q) -> np.ndarray:
    """Vectorized S(U|E) for Bell-diagonal weights of shape (..., 4)."""
    lam = np.clip(np.asarray(lam, dtype=float), 0.0, None)
    q = np.asarray(q, dtype=float)
    c = 1.0 - 2.0 * q
    total = np.ones(np.broadcast_shapes(lam.shape[:-1], q.shape))
    for i in (0, 1):
        x, y = lam[..., 2 * i], lam[..., 2 * i + 1]
        s = x + y
        safe = np.where(s > ZERO_CLAMP, s, 1.0)
        r = np.sqrt(np.clip((x - y) ** 2 + 4.0 * c * c * x * y, 0.0, None)) / safe
        r = np.clip(r, 0.0, 1.0)
        term = s * (_h_vec((1.0 + r) / 2.0) - _h_vec(np.clip(x / safe, 0.0, 1.0)))
        total = total + np.where(s > ZERO_CLAMP, term, 0.0)
    return total


def bell_keyrate_array(lam: np.ndarray, q) -> np.ndarray:
    """Vectorized S(U|E) - H(U|Y) for Bell-diagonal weights of shape (..., 4)."""
    lam = np.asarray(lam, dtype=float)
    q = np.asarray(q, dtype=float)
    eb = np.clip(lam[..., 2] + lam[..., 3], 0.0, 1.0)
    return bell_s_u_given_e_array(lam, q) - _h_vec((1.0 - q) * eb + q * (1.0 - eb))


def _h_vec(x):
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    return _plogp(x) + _plogp(1.0 - x)


def _h_mp(x):
    if x <= 0 or x >= 1:
        return mpmath.mpf(0)
    return -(x * mpmath.log(x, 2) + (1 - x) * mpmath.log(1 - x, 2))


def bell_keyrate_mp(lam: Sequence, q) -> "mpmath.mpf":
    """Arbitrary-precision S(U|E) - H(U|Y) for Bell-diagonal weights.

    Runs at the caller's ``mpmath.mp.dps``. Needed after long advantage
    distillation, where the rate is many orders of magnitude below 1e-16.
    """
    l00, l01, l10, l11 = (mpmath.mpf(v) for v in lam)
    q = mpmath.mpf(q)
    c = 1 - 2 * q
    out = mpmath.mpf(1)
    for x, y in ((l00, l01), (l10, l11)):
        s = x + y
        if s <= 0:
            continue
        r = mpmath.sqrt((x - y) ** 2 + 4 * c * c * x * y) / s
        out += s * (_h_mp((1 + r) / 2) - _h_mp(x / s))
    eb = l10 + l11
    return out - _h_mp((1 - q) * eb + q * (1 - eb))
