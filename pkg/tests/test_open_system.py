import numpy as np
import pytest

from hopsim.open_system import (
    ChannelExtractionError,
    NoiseParams,
    Superoperator,
    cz_reference_channel,
    hop_channel,
    hop_unitary,
    interaction_hamiltonian,
    liouvillian,
    match_lambda,
    propagator,
    twirl_channel,
)
from hopsim.pauli import PauliString, all_paulis


def test_noise_params_from_p():
    noise = NoiseParams.from_p(0.05)
    assert noise.tau_ns == pytest.approx(100.0)
    assert noise.gamma2 == pytest.approx(5e-4)
    assert noise.gamma_phi == pytest.approx(noise.gamma1 / 2)
    assert noise.p == pytest.approx(0.05)


def test_hop_unitary_matches_expm():
    import scipy.linalg

    for n_data in (2, 4):
        n = n_data + 1
        h = np.zeros((1 << n, 1 << n), dtype=complex)
        for k in range(1, n):
            h += (
                PauliString(n, 0, 1).matrix()
                @ PauliString(n, 0, 1 << k).matrix()
            )
        want = scipy.linalg.expm(1j * np.pi / 4 * h)
        assert np.max(np.abs(hop_unitary(n_data) - want)) < 1e-12


def test_hop_unitary_maps_parity_onto_check():
    # |+>_check (x) |b> picks up the data-parity sign on the check qubit,
    # up to a fixed parity-independent offset (-1 for the two-data gate)
    u = hop_unitary(2)
    for b1 in (0, 1):
        for b2 in (0, 1):
            state = np.zeros(8, dtype=complex)
            state[(b2 << 2) | (b1 << 1) | 0] = 1 / np.sqrt(2)
            state[(b2 << 2) | (b1 << 1) | 1] = 1 / np.sqrt(2)
            out = u @ state
            # measure check in X basis: sign of <1|..> / <0|..>
            ratio = out[(b2 << 2) | (b1 << 1) | 1] / out[(b2 << 2) | (b1 << 1) | 0]
            assert ratio == pytest.approx(-((-1.0) ** (b1 ^ b2)))


def test_unitary_superoperator_roundtrip():
    rng = np.random.default_rng(3)
    mat = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    u, _ = np.linalg.qr(mat)
    sup = Superoperator.from_unitary(u)
    rho = rng.normal(size=(4, 4))
    rho = rho @ rho.T + np.eye(4)
    rho /= np.trace(rho)
    assert np.allclose(sup.apply_to_matrix(rho), u @ rho @ u.conj().T)
    assert sup.trace_preservation_defect() < 1e-12


def test_single_qubit_twirl_matches_analytic():
    # pure relaxation/dephasing oracle: Pauli transfer eigenvalues
    # lambda_x = lambda_y = exp(-(G1/2 + 2*Gphi) t), lambda_z = exp(-G1 t)
    noise = NoiseParams(gamma1=2e-3, gamma_phi=5e-4)
    t = 80.0
    lind = liouvillian(np.zeros((2, 2), dtype=complex), noise, 1)
    chan = twirl_channel(propagator(lind, t), np.eye(2))
    lx = np.exp(-(noise.gamma1 / 2 + 2 * noise.gamma_phi) * t)
    lz = np.exp(-noise.gamma1 * t)
    assert chan.weight(PauliString.from_label("X")) == pytest.approx(
        (1 - lz) / 4, abs=1e-12
    )
    assert chan.weight(PauliString.from_label("Y")) == pytest.approx(
        (1 - lz) / 4, abs=1e-12
    )
    assert chan.weight(PauliString.from_label("Z")) == pytest.approx(
        (1 + lz - 2 * lx) / 4, abs=1e-12
    )
    assert chan.fidelity == pytest.approx((1 + 2 * lx + lz) / 4, abs=1e-12)


def test_interaction_hamiltonian_diagonal_and_units():
    h = interaction_hamiltonian(2, zeta0_over_2pi_mhz=5.0)
    assert np.allclose(h, np.diag(np.diag(h)))
    # |000>: both ZZ terms +1 -> energy -2 * zeta/4
    zeta = 2 * np.pi * 5.0e-3
    assert h[0, 0] == pytest.approx(-zeta / 2)
    # gate phase check: evolving for tau under h reproduces the unitary
    import scipy.linalg

    tau = NoiseParams.from_p(0.01).tau_ns
    u = scipy.linalg.expm(-1j * h * tau)
    target = hop_unitary(2)
    ratio = u[0, 0] / target[0, 0]
    assert np.max(np.abs(u - ratio * target)) < 1e-10


def test_propagator_trace_guard():
    # a non-trace-preserving generator must be rejected
    bad = Superoperator(2, np.eye(4) * 0.1)
    with pytest.raises(ChannelExtractionError):
        propagator(bad, 1.0)


def test_hop_channel_structure():
    chan = hop_channel(0.02, n_data=2)
    assert chan.n == 3
    assert abs(sum(chan.weights.values()) - 1) < 1e-9
    assert 0.9 < chan.fidelity < 1.0
    # dephasing-dominated gate: pure-Z correlated terms outweigh X-heavy ones
    zz = chan.weight(PauliString.from_label("ZZI"))
    xx = chan.weight(PauliString.from_label("XXI"))
    assert zz > xx


def test_hop_channel_p_zero_is_identity():
    chan = hop_channel(0.0, n_data=2)
    assert chan.fidelity == pytest.approx(1.0, abs=1e-10)


def test_cz_reference_channel_against_bruteforce():
    # independent oracle: enumerate all interleaved two-qubit error placements
    lam = 0.01
    n_data = 2
    n = n_data + 1
    got = cz_reference_channel(lam, n_data)

    def cz_conj(x, z, a, b):
        if (x >> a) & 1:
            z ^= 1 << b
        if (x >> b) & 1:
            z ^= 1 << a
        return x, z

    dist = {(0, 0): 1.0}
    for k in range(1, n):
        new = {}
        for (x1, z1), p1 in dist.items():
            for x2 in range(4):
                for z2 in range(4):
                    p2 = 1 - 15 * lam / 16 if (x2, z2) == (0, 0) else lam / 16
                    x = (x2 & 1) | (((x2 >> 1) & 1) << k)
                    z = (z2 & 1) | (((z2 >> 1) & 1) << k)
                    for m in range(k + 1, n):
                        x, z = cz_conj(x, z, 0, m)
                    key = (x1 ^ x, z1 ^ z)
                    new[key] = new.get(key, 0.0) + p1 * p2
        dist = new
    for p in all_paulis(n):
        assert got.weight(p) == pytest.approx(
            dist.get((p.x, p.z), 0.0), abs=1e-14
        )


def test_cz_reference_fidelity_monotone():
    fids = [cz_reference_channel(lam, 4).fidelity for lam in (0.0, 0.02, 0.05, 0.1)]
    assert fids[0] == pytest.approx(1.0)
    assert all(a > b for a, b in zip(fids, fids[1:]))


def test_match_lambda_fixed_point():
    lam = match_lambda(0.02, gate_arity=3)
    hop_fid = hop_channel(0.02, n_data=2).fidelity
    assert cz_reference_channel(lam, 2).fidelity == pytest.approx(hop_fid, abs=1e-7)


def test_match_lambda_regressions():
    # frozen pipeline outputs at the three-qubit gate (cheap propagator)
    assert match_lambda(0.0, gate_arity=3) == 0.0
    assert match_lambda(0.05, gate_arity=3) == pytest.approx(0.0764, abs=5e-4)
