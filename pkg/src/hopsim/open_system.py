"""Gate-level error channel extraction for the multi-qubit parity gate.

The parity interaction -zeta0/4 * sum_k Z_0 Z_k evolves for tau = pi/zeta0
under amplitude damping and pure dephasing on every qubit.  The resulting
propagator, composed with the inverse of the ideal gate, is Pauli-twirled
into a correlated Pauli channel; a two-qubit-depolarizing reference built
from the equivalent CZ ladder is fidelity-matched to it to set lambda.

Superoperators act on column-stacking vectorized density matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize

from .pauli import PauliChannel, PauliString

TRACE_TOL = 1e-9
NEGATIVE_WEIGHT_ABORT = -1e-6


class ChannelExtractionError(RuntimeError):
    pass


@dataclass(frozen=True)
class NoiseParams:
    """Decoherence rates tied to the parity-gate operating point.

    Rates are per nanosecond; zeta0 is the check-data ZZ in MHz, fixing the
    gate time tau = pi/zeta0.  The dimensionless strength p = tau * gamma2
    is the single knob exported to the code-level error model.  Default
    regime: gamma_phi = gamma1 / 2 (equal T1 and T2).
    """

    gamma1: float
    gamma_phi: float
    zeta0_over_2pi_mhz: float = 5.0

    @classmethod
    def from_p(cls, p: float, zeta0_over_2pi_mhz: float = 5.0) -> "NoiseParams":
        tau = 1e3 / (2 * zeta0_over_2pi_mhz)  # ns; pi / (2 pi f)
        gamma2 = p / tau
        # gamma2 = gamma1/2 + gamma_phi with gamma_phi = gamma1/2.
        return cls(gamma1=gamma2, gamma_phi=gamma2 / 2,
                   zeta0_over_2pi_mhz=zeta0_over_2pi_mhz)

    @property
    def gamma2(self) -> float:
        return self.gamma1 / 2 + self.gamma_phi

    @property
    def tau_ns(self) -> float:
        return 1e3 / (2 * self.zeta0_over_2pi_mhz)

    @property
    def p(self) -> float:
        return self.tau_ns * self.gamma2


def hop_unitary(n_data: int) -> np.ndarray:
    """Diagonal parity-gate unitary exp(i pi/4 sum_k Z_0 Z_k), qubit 0 = check."""
    if n_data not in (2, 4):
        raise ValueError("parity gate supports 2 or 4 data qubits")
    n = n_data + 1
    dim = 1 << n
    states = np.arange(dim)
    b0 = states & 1
    phase = np.zeros(dim)
    for k in range(1, n):
        bk = (states >> k) & 1
        phase += np.where(b0 == bk, 1.0, -1.0)
    return np.diag(np.exp(1j * np.pi / 4 * phase))


def _qubit_op(op: np.ndarray, qubit: int, n: int) -> np.ndarray:
    """Embed a single-qubit operator; qubit 0 is the least significant bit."""
    mats = [np.eye(2)] * n
    mats[qubit] = op
    out = np.array([[1.0 + 0j]])
    # Least-significant qubit varies fastest, so kron from the top down.
    for m in reversed(mats):
        out = np.kron(out, m)
    return out


_SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def interaction_hamiltonian(
    n_data: int,
    zeta0_over_2pi_mhz: float = 5.0,
    nnn_terms: list[tuple[int, int, float]] | None = None,
) -> np.ndarray:
    """Dispersive parity Hamiltonian (rad/ns) with optional extra ZZ terms.

    ``nnn_terms`` entries are (j, k, zeta_jk/2pi in MHz) data-data cross
    couplings added with the same -zeta/4 ZZ convention.
    """
    n = n_data + 1
    zeta0 = 2 * np.pi * zeta0_over_2pi_mhz * 1e-3  # rad/ns
    h = np.zeros((1 << n, 1 << n), dtype=complex)
    for k in range(1, n):
        h += -zeta0 / 4 * _qubit_op(_Z, 0, n) @ _qubit_op(_Z, k, n)
    for j, k, zjk_mhz in nnn_terms or []:
        zjk = 2 * np.pi * zjk_mhz * 1e-3
        h += -zjk / 4 * _qubit_op(_Z, j, n) @ _qubit_op(_Z, k, n)
    return h


@dataclass
class Superoperator:
    """Dense superoperator on column-stacking vectorized density matrices."""

    dim: int
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.matrix.shape != (self.dim**2, self.dim**2):
            raise ValueError("superoperator shape mismatch")

    @classmethod
    def from_unitary(cls, u: np.ndarray) -> "Superoperator":
        return cls(u.shape[0], np.kron(u.conj(), u))

    def apply_to_matrix(self, rho: np.ndarray) -> np.ndarray:
        vec = rho.reshape(-1, order="F")
        out = self.matrix @ vec
        return out.reshape(self.dim, self.dim, order="F")

    def compose(self, other: "Superoperator") -> "Superoperator":
        """self after other."""
        return Superoperator(self.dim, self.matrix @ other.matrix)

    def trace_preservation_defect(self) -> float:
        mixed = np.eye(self.dim) / self.dim
        return abs(np.trace(self.apply_to_matrix(mixed)) - 1.0)


def liouvillian(
    h: np.ndarray,
    noise: NoiseParams,
    n_qubits: int,
    nnn_terms: list[tuple[int, int, float]] | None = None,
) -> Superoperator:
    """Markovian generator: commutator with h plus damping/dephasing dissipators.

    Jump operators sqrt(gamma1) sigma_- and sqrt(gamma_phi) Z act on every
    qubit.  ``nnn_terms`` adds extra ZZ lines to h (same units contract as
    interaction_hamiltonian).
    """
    dim = h.shape[0]
    if dim != 1 << n_qubits:
        raise ValueError("Hamiltonian dimension does not match qubit count")
    if nnn_terms:
        zeta_terms = np.zeros_like(h)
        for j, k, zjk_mhz in nnn_terms:
            zjk = 2 * np.pi * zjk_mhz * 1e-3
            zeta_terms += -zjk / 4 * (
                _qubit_op(_Z, j, n_qubits) @ _qubit_op(_Z, k, n_qubits)
            )
        h = h + zeta_terms
    eye = np.eye(dim)
    lind = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    jumps = []
    for q in range(n_qubits):
        if noise.gamma1 > 0:
            jumps.append(np.sqrt(noise.gamma1) * _qubit_op(_SIGMA_MINUS, q, n_qubits))
        if noise.gamma_phi > 0:
            jumps.append(np.sqrt(noise.gamma_phi) * _qubit_op(_Z, q, n_qubits))
    for L in jumps:
        ldl = L.conj().T @ L
        lind += (
            np.kron(L.conj(), L)
            - 0.5 * np.kron(eye, ldl)
            - 0.5 * np.kron(ldl.T, eye)
        )
    return Superoperator(dim, lind)


def propagator(lindblad: Superoperator, tau: float) -> Superoperator:
    """exp(L * tau) by scaling-and-squaring; trace preservation is verified."""
    v = Superoperator(lindblad.dim, scipy.linalg.expm(lindblad.matrix * tau))
    defect = v.trace_preservation_defect()
    if defect > TRACE_TOL:
        raise ChannelExtractionError(f"propagator trace defect {defect:.2e}")
    return v


def _pauli_vec_matrix(n: int) -> np.ndarray:
    """Columns: column-stacking vectorizations of all 4^n Paulis (raster order)."""
    dim = 1 << n
    cols = np.zeros((dim * dim, 4**n), dtype=complex)
    j = np.arange(dim)
    for x in range(dim):
        rows = j ^ x
        flat = rows + dim * j  # vec index of entry (row, col=j)
        for z in range(dim):
            signs = (-1.0) ** np.bitwise_count(np.bitwise_and(z, j))
            phase = 1j ** int(bin(x & z).count("1"))
            cols[flat, (x << n) | z] = phase * signs
    return cols


def _symplectic_signs(n: int) -> np.ndarray:
    """S[j, k] = (-1)^<j,k> for raster-ordered Pauli indices."""
    idx = np.arange(4**n, dtype=np.uint32)
    x = (idx >> n).astype(np.uint32)
    z = (idx & ((1 << n) - 1)).astype(np.uint32)
    anti = (
        np.bitwise_count(np.bitwise_and(x[:, None], z[None, :]))
        + np.bitwise_count(np.bitwise_and(z[:, None], x[None, :]))
    ) & 1
    return 1.0 - 2.0 * anti


def twirl_channel(v: Superoperator, u_target: np.ndarray) -> PauliChannel:
    """Pauli-twirl the residual channel of v relative to the target unitary.

    Pauli fidelities f_k = Tr[P_k Lambda(P_k)] / 2^n of Lambda = v o U^-1
    are transformed through the commutation-sign matrix into the diagonal
    of the twirled process matrix.
    """
    dim = v.dim
    n = dim.bit_length() - 1
    if u_target.shape[0] != dim:
        raise ValueError("target unitary dimension mismatch")
    u_inv_super = Superoperator.from_unitary(u_target.conj().T)
    lam = v.compose(u_inv_super).matrix
    pmat = _pauli_vec_matrix(n)
    f = np.real(np.sum(pmat.conj() * (lam @ pmat), axis=0)) / dim
    weights = (_symplectic_signs(n) @ f) / 4**n
    low = weights.min()
    if low < NEGATIVE_WEIGHT_ABORT:
        raise ChannelExtractionError(
            f"twirled weight {low:.3e} below tolerance; propagator too inaccurate"
        )
    weights = np.clip(weights, 0.0, None)
    weights /= weights.sum()
    return PauliChannel.from_array(n, weights)


def hop_channel(
    p: float,
    n_data: int = 4,
    zeta0_over_2pi_mhz: float = 5.0,
    nnn_terms: list[tuple[int, int, float]] | None = None,
) -> PauliChannel:
    """Twirled correlated Pauli channel of the noisy parity gate at strength p."""
    noise = NoiseParams.from_p(p, zeta0_over_2pi_mhz)
    n = n_data + 1
    h = interaction_hamiltonian(n_data, zeta0_over_2pi_mhz, nnn_terms)
    lind = liouvillian(h, noise, n)
    v = propagator(lind, noise.tau_ns)
    return twirl_channel(v, hop_unitary(n_data))


def _cz_conjugate(x: int, z: int, a: int, b: int) -> tuple[int, int]:
    """Propagate a phase-free Pauli through CZ on qubits a, b."""
    if (x >> a) & 1:
        z ^= 1 << b
    if (x >> b) & 1:
        z ^= 1 << a
    return x, z


def cz_reference_channel(lam: float, n_data: int = 4) -> PauliChannel:
    """Correlated Pauli channel of the CZ ladder with per-gate depolarizing noise.

    Each CZ between the check qubit and data qubit k is followed by the
    16-outcome two-qubit depolarizing channel at rate lam; interleaved
    errors are conjugated through the remaining CZs, and the stagewise
    distributions are convolved exactly.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError("depolarizing rate must lie in [0, 1]")
    n = n_data + 1
    dist: dict[tuple[int, int], float] = {(0, 0): 1.0}
    for k in range(1, n):
        stage: dict[tuple[int, int], float] = {}
        for x2 in range(4):
            for z2 in range(4):
                prob = 1 - 15 * lam / 16 if (x2, z2) == (0, 0) else lam / 16
                # Embed the (check, data k) Pauli into the n-qubit register.
                x = (x2 & 1) | (((x2 >> 1) & 1) << k)
                z = (z2 & 1) | (((z2 >> 1) & 1) << k)
                for m in range(k + 1, n):
                    x, z = _cz_conjugate(x, z, 0, m)
                stage[(x, z)] = stage.get((x, z), 0.0) + prob
        new: dict[tuple[int, int], float] = {}
        for (x1, z1), p1 in dist.items():
            for (x2, z2), p2 in stage.items():
                key = (x1 ^ x2, z1 ^ z2)
                new[key] = new.get(key, 0.0) + p1 * p2
        dist = new
    weights = {PauliString(n, x, z): w for (x, z), w in dist.items()}
    return PauliChannel(n, weights)


class FidelityMatchError(RuntimeError):
    pass


def match_lambda(
    p: float,
    gate_arity: int = 5,
    zeta0_over_2pi_mhz: float = 5.0,
    tol: float = 1e-8,
    hop_fidelity: float | None = None,
) -> float:
    """Two-qubit depolarizing rate with the same process fidelity as the parity gate.

    Bisects lam in [0, 0.5] until |F_HOP(p) - F_CZ(lam)| < tol.  A
    precomputed parity-gate fidelity can be passed to skip the propagator.
    """
    if p < 0:
        raise ValueError("p must be non-negative")
    if gate_arity not in (5, 3):
        raise ValueError("gate arity must be 5 or 3")
    n_data = gate_arity - 1
    if hop_fidelity is None:
        hop_fidelity = hop_channel(p, n_data, zeta0_over_2pi_mhz).fidelity
    if p == 0:
        return 0.0

    def excess(lam: float) -> float:
        return cz_reference_channel(lam, n_data).fidelity - hop_fidelity

    lo, hi = 0.0, 0.5
    if excess(lo) < -tol or excess(hi) > tol:
        raise FidelityMatchError("no fidelity crossing in lambda bracket [0, 0.5]")
    while hi - lo > 1e-14:
        mid = 0.5 * (lo + hi)
        e = excess(mid)
        if abs(e) < tol:
            return mid
        if e > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
