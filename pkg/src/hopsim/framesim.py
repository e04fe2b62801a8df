"""Pauli-frame Monte Carlo sampling of detection events and observable flips.

The frame tracks, per qubit and shot lane, whether the accumulated error
anticommutes with Z (x bit) and with X (z bit).  Clifford layers update
the bits; measurements read the relevant bit relative to the deterministic
noiseless reference (always 0 here, since circuits are built over an
implicit codeword preparation).  Noise draws are sparse: a binomial count
of events per site, then uniform placement over lanes.

The same engine runs in injection mode (deterministic faults, one per
lane) for detector-error-model extraction, and a dense density-matrix
oracle validates detector marginals on small cropped circuits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .code import MEASURE_OPS, CircuitIR, Instruction

DEFAULT_BATCH = 4096
DENSE_MAX_QUBITS = 12
DENSE_MAX_MEASUREMENTS = 14

_TWO_QUBIT_PAULIS = [(x, z) for x in range(4) for z in range(4)][1:]  # skip II


class SamplingError(RuntimeError):
    pass


@dataclass
class SampleResult:
    shots: int
    detection_events: np.ndarray  # (shots, n_detectors) bool
    observable_flips: np.ndarray  # (shots, n_observables) bool
    seed: int

    def __post_init__(self):
        if self.detection_events.shape[0] != self.shots:
            raise ValueError("detector row count mismatch")
        if self.observable_flips.shape[0] != self.shots:
            raise ValueError("observable row count mismatch")


def _sparse_lanes(rng: np.random.Generator, n: int, p: float) -> np.ndarray:
    """Indices of Bernoulli(p) successes among n lanes, drawn sparsely."""
    if p <= 0.0 or n == 0:
        return np.empty(0, dtype=np.int64)
    k = rng.binomial(n, p)
    if k == 0:
        return np.empty(0, dtype=np.int64)
    return rng.choice(n, size=k, replace=False)


class _RandomNoise:
    """Draws noise events from the instruction parameters."""

    def __init__(self, rng: np.random.Generator, channels):
        self.rng = rng
        self.channels = channels

    def pauli_events(self, ins: Instruction, batch: int):
        """Yield (lanes, x_masks, z_masks); masks are bits over ins.qubits."""
        rng = self.rng
        if ins.op == "DEPOL1":
            nq = len(ins.qubits)
            lanes = _sparse_lanes(rng, nq * batch, ins.param)
            if lanes.size:
                which = rng.integers(1, 4, size=lanes.size)  # 1=X 2=Z 3=Y
                qpos = lanes // batch
                yield (
                    lanes % batch,
                    np.where(which != 2, 1, 0) << qpos,
                    np.where(which != 1, 1, 0) << qpos,
                )
        elif ins.op == "DEPOL2":
            lanes = _sparse_lanes(rng, batch, 15 * ins.param / 16)
            if lanes.size:
                pick = rng.integers(0, 15, size=lanes.size)
                table = np.array(_TWO_QUBIT_PAULIS)
                yield lanes, table[pick, 0], table[pick, 1]
        elif ins.op == "CHANNEL":
            for stage in self.channels[ins.param].stages:
                lanes = _sparse_lanes(rng, batch, stage.prob)
                if lanes.size:
                    yield (
                        lanes,
                        np.full(lanes.size, stage.pauli.x),
                        np.full(lanes.size, stage.pauli.z),
                    )
        else:
            raise SamplingError(f"unknown noise op {ins.op}")

    def reset_flips(self, ins: Instruction, batch: int) -> np.ndarray:
        return _sparse_lanes(self.rng, batch, ins.param or 0.0)

    def measure_flips(self, ins: Instruction, batch: int) -> np.ndarray:
        return _sparse_lanes(self.rng, batch, ins.param or 0.0)


class _InjectedNoise:
    """Deterministic faults keyed by (layer, instruction index) site.

    ``paulis``: site -> (lanes, x_masks, z_masks); ``flips``: site -> lanes
    whose reset error or measurement record is flipped.
    """

    def __init__(self, paulis=None, flips=None):
        self.paulis = paulis or {}
        self.flips = flips or {}
        self._site = None

    def set_site(self, t: int, idx: int):
        self._site = (t, idx)

    def pauli_events(self, ins: Instruction, batch: int):
        ev = self.paulis.get(self._site)
        if ev is not None:
            yield ev

    def reset_flips(self, ins: Instruction, batch: int) -> np.ndarray:
        return self.flips.get(self._site, np.empty(0, dtype=np.int64))

    measure_flips = reset_flips


class FrameEngine:
    """Propagates X/Z error frames for one circuit over a lane batch."""

    def __init__(self, circuit: CircuitIR):
        circuit.validate()
        self.circuit = circuit

    def run(self, batch: int, noise) -> tuple[np.ndarray, np.ndarray]:
        """Returns (detector events, observable flips), each (batch, count)."""
        c = self.circuit
        x = np.zeros((c.n_qubits, batch), dtype=bool)
        z = np.zeros((c.n_qubits, batch), dtype=bool)
        records = np.zeros((c.n_measurements, batch), dtype=bool)
        m = 0
        for t, layer in enumerate(c.layers):
            for idx, ins in enumerate(layer):
                if hasattr(noise, "set_site"):
                    noise.set_site(t, idx)
                op = ins.op
                if op == "H":
                    q = list(ins.qubits)
                    x[q], z[q] = z[q].copy(), x[q].copy()
                elif op == "CZ":
                    a, b = ins.qubits
                    z[a] ^= x[b]
                    z[b] ^= x[a]
                elif op == "CX":
                    a, b = ins.qubits
                    x[b] ^= x[a]
                    z[a] ^= z[b]
                elif op == "HOP":
                    # effective gate is the CZ ladder; the local sqrt-Z
                    # factors are virtual-Z-compensated and their effect is
                    # folded into the attached channel's X/Y relabeling
                    chk = ins.qubits[0]
                    data = list(ins.qubits[1:])
                    xc = x[chk].copy()
                    z[chk] ^= np.logical_xor.reduce(x[data], axis=0)
                    for q in data:
                        z[q] ^= xc
                elif op in ("RESET_X", "RESET_Z"):
                    q = ins.qubits[0]
                    x[q] = False
                    z[q] = False
                    lanes = noise.reset_flips(ins, batch)
                    if lanes.size:
                        # failed |+> prep is a Z error; failed |0> prep an X
                        (z if op == "RESET_X" else x)[q, lanes] = True
                elif op in ("MEASURE_X", "MEASURE_Z"):
                    q = ins.qubits[0]
                    records[m] = z[q] if op == "MEASURE_X" else x[q]
                    lanes = noise.measure_flips(ins, batch)
                    if lanes.size:
                        records[m, lanes] ^= True
                    m += 1
                else:  # noise instruction
                    for lanes, xm, zm in noise.pauli_events(ins, batch):
                        for i, q in enumerate(ins.qubits):
                            sel = lanes[(xm >> i) & 1 == 1]
                            if sel.size:
                                x[q, sel] ^= True
                            sel = lanes[(zm >> i) & 1 == 1]
                            if sel.size:
                                z[q, sel] ^= True
        dets = np.zeros((batch, len(c.detectors)), dtype=bool)
        for k, refs in enumerate(c.detectors):
            dets[:, k] = np.logical_xor.reduce(records[list(refs)], axis=0)
        obs = np.zeros((batch, len(c.observables)), dtype=bool)
        for k, refs in enumerate(c.observables):
            obs[:, k] = np.logical_xor.reduce(records[list(refs)], axis=0)
        return dets, obs


def sample(
    circuit: CircuitIR,
    shots: int,
    seed: int,
    batch_size: int = DEFAULT_BATCH,
) -> SampleResult:
    """Monte Carlo detection events; counter-based streams per shot batch."""
    engine = FrameEngine(circuit)
    det_parts, obs_parts = [], []
    done = 0
    batch_idx = 0
    while done < shots:
        batch = min(batch_size, shots - done)
        rng = np.random.Generator(np.random.Philox(key=[seed, batch_idx]))
        noise = _RandomNoise(rng, circuit.channels)
        dets, obs = engine.run(batch, noise)
        det_parts.append(dets)
        obs_parts.append(obs)
        done += batch
        batch_idx += 1
    return SampleResult(
        shots, np.concatenate(det_parts), np.concatenate(obs_parts), seed
    )


# --- binary sample block ----------------------------------------------------

_MAGIC = b"HOPSIM01"


def write_samples(path, result: SampleResult) -> None:
    """Binary block: magic, uint64 shots/detectors/observables/seed, then
    row-major bit-packed detector rows followed by observable rows."""
    n_det = result.detection_events.shape[1]
    n_obs = result.observable_flips.shape[1]
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        np.array([result.shots, n_det, n_obs, result.seed], dtype="<u8").tofile(fh)
        np.packbits(result.detection_events, axis=1).tofile(fh)
        np.packbits(result.observable_flips, axis=1).tofile(fh)


def read_samples(path) -> SampleResult:
    with open(path, "rb") as fh:
        if fh.read(8) != _MAGIC:
            raise ValueError(f"{path} is not a sample block")
        shots, n_det, n_obs, seed = np.fromfile(fh, dtype="<u8", count=4)
        shots, n_det, n_obs = int(shots), int(n_det), int(n_obs)
        det = np.fromfile(fh, dtype=np.uint8, count=shots * ((n_det + 7) // 8))
        det = np.unpackbits(det.reshape(shots, -1), axis=1)[:, :n_det].astype(bool)
        obs = np.fromfile(fh, dtype=np.uint8, count=shots * ((n_obs + 7) // 8))
        obs = np.unpackbits(obs.reshape(shots, -1), axis=1)[:, :n_obs].astype(bool)
    return SampleResult(shots, det, obs, int(seed))


# --- dense oracle -----------------------------------------------------------

def _embed(op: np.ndarray, qubits: tuple[int, ...], n: int) -> np.ndarray:
    """Embed a 2^k operator (qubit order = ``qubits``, qubit 0 = LSB of the
    local index) into the full 2^n space."""
    dim = 1 << n
    k = len(qubits)
    full = np.zeros((dim, dim), dtype=complex)
    rest = [q for q in range(n) if q not in qubits]
    for loc_col in range(1 << k):
        for loc_row in range(1 << k):
            amp = op[loc_row, loc_col]
            if amp == 0:
                continue
            base_row = sum(((loc_row >> i) & 1) << q for i, q in enumerate(qubits))
            base_col = sum(((loc_col >> i) & 1) << q for i, q in enumerate(qubits))
            idx = np.zeros(1 << len(rest), dtype=np.int64)
            for i, q in enumerate(rest):
                bits = (np.arange(1 << len(rest)) >> i) & 1
                idx |= bits << q
            full[base_row + idx, base_col + idx] += amp
    return full


def _hop_diag(k_data: int) -> np.ndarray:
    """Effective (virtual-Z-compensated) parity gate: the plain CZ ladder."""
    states = np.arange(1 << (k_data + 1))
    b0 = states & 1
    par = np.zeros(states.size, dtype=np.int64)
    for k in range(1, k_data + 1):
        par ^= (states >> k) & 1
    return np.diag(np.where(b0 & par, -1.0, 1.0).astype(complex))


_H1 = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
_PLUS = np.array([[0.5, 0.5], [0.5, 0.5]], dtype=complex)
_ZERO = np.array([[1, 0], [0, 0]], dtype=complex)


def _pauli_full(x: int, z: int, qubits: tuple[int, ...], n: int) -> np.ndarray:
    from .pauli import PauliString

    gx = gz = 0
    for i, q in enumerate(qubits):
        gx |= ((x >> i) & 1) << q
        gz |= ((z >> i) & 1) << q
    return PauliString(n, gx, gz).matrix()


def dense_oracle(circuit: CircuitIR) -> np.ndarray:
    """Exact detector marginal probabilities by mixed-state evolution.

    Branches over projective measurement outcomes; record-flip noise is
    folded analytically via E[(-1)^record] = (-1)^outcome (1 - 2 p_flip).
    Marginals are reported relative to the circuit's own noiseless
    reference outcomes (detectors fire when they deviate from it), matching
    frame-propagation semantics.  Guarded to small cropped circuits.
    """
    n = circuit.n_qubits
    if n > DENSE_MAX_QUBITS:
        raise SamplingError(f"dense oracle limited to {DENSE_MAX_QUBITS} qubits")
    if circuit.n_measurements > DENSE_MAX_MEASUREMENTS:
        raise SamplingError("dense oracle measurement budget exceeded")
    branches = _dense_branches(circuit, noisy=True)
    reference = _dense_branches(circuit, noisy=False)
    if len(reference) != 1:
        raise SamplingError("noiseless reference is not deterministic")
    ref_signs = reference[0][2]
    marginals = np.zeros(len(circuit.detectors))
    for k, refs in enumerate(circuit.detectors):
        ref = 1.0
        for m in refs:
            ref *= ref_signs[m]
        acc = 0.0
        for p, _r, s in branches:
            prod = 1.0
            for m in refs:
                prod *= s[m]
            acc += p * (1 - ref * prod) / 2
        marginals[k] = acc
    return marginals


def _dense_branches(circuit: CircuitIR, noisy: bool):
    n = circuit.n_qubits
    dim = 1 << n
    rho0 = np.zeros((dim, dim), dtype=complex)
    rho0[0, 0] = 1.0
    # branch: (probability, rho, list of (-1)^outcome * (1 - 2 p_flip))
    branches = [(1.0, rho0, [])]
    for layer in circuit.layers:
        for ins in layer:
            op = ins.op
            if op == "H":
                u = np.eye(dim)
                for q in ins.qubits:
                    u = _embed(_H1, (q,), n) @ u
                branches = [(p, u @ r @ u.conj().T, s) for p, r, s in branches]
            elif op in ("CZ", "CX"):
                a, b = ins.qubits
                if op == "CZ":
                    u2 = np.diag([1, 1, 1, -1]).astype(complex)
                else:
                    # control = first qubit (local bit 0)
                    u2 = np.array(
                        [[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]],
                        dtype=complex,
                    )
                u = _embed(u2, (a, b), n)
                branches = [(p, u @ r @ u.conj().T, s) for p, r, s in branches]
            elif op == "HOP":
                u = _embed(_hop_diag(len(ins.qubits) - 1), ins.qubits, n)
                branches = [(p, u @ r @ u.conj().T, s) for p, r, s in branches]
            elif op in ("RESET_X", "RESET_Z"):
                q = ins.qubits[0]
                pf = (ins.param or 0.0) if noisy else 0.0
                p0 = _embed(_ZERO if op == "RESET_Z" else _PLUS, (q,), n)
                p1_mat = _embed(
                    np.eye(2) - (_ZERO if op == "RESET_Z" else _PLUS), (q,), n
                )
                flip = _pauli_full(
                    1 if op == "RESET_Z" else 0,
                    1 if op == "RESET_X" else 0,
                    (q,),
                    n,
                )
                new = []
                for p, r, s in branches:
                    # measure-and-restate: the flip operator maps the wrong
                    # outcome back to the target state in either basis
                    r2 = p0 @ r @ p0 + flip @ (p1_mat @ r @ p1_mat) @ flip.conj().T
                    if pf > 0:
                        r2 = (1 - pf) * r2 + pf * flip @ r2 @ flip.conj().T
                    new.append((p, r2, s))
                branches = new
            elif op in ("MEASURE_X", "MEASURE_Z"):
                q = ins.qubits[0]
                pf = (ins.param or 0.0) if noisy else 0.0
                p_plus = _embed(_PLUS if op == "MEASURE_X" else _ZERO, (q,), n)
                p_minus = np.eye(dim) - p_plus
                new = []
                for p, r, s in branches:
                    for outcome, proj in ((0, p_plus), (1, p_minus)):
                        pr = float(np.real(np.trace(proj @ r @ proj)))
                        if pr < 1e-15:
                            continue
                        new.append(
                            (
                                p * pr,
                                proj @ r @ proj / pr,
                                s + [(-1.0) ** outcome * (1 - 2 * pf)],
                            )
                        )
                branches = new
            elif op == "DEPOL1":
                if not noisy:
                    continue
                for q in ins.qubits:
                    mats = [
                        _pauli_full(x, z, (q,), n) for x, z in ((1, 0), (1, 1), (0, 1))
                    ]
                    branches = [
                        (
                            p,
                            (1 - ins.param) * r
                            + ins.param / 3 * sum(m @ r @ m.conj().T for m in mats),
                            s,
                        )
                        for p, r, s in branches
                    ]
            elif op == "DEPOL2":
                if not noisy:
                    continue
                mats = [
                    _pauli_full(x, z, ins.qubits, n) for x, z in _TWO_QUBIT_PAULIS
                ]
                lam = ins.param
                branches = [
                    (
                        p,
                        (1 - 15 * lam / 16) * r
                        + lam / 16 * sum(m @ r @ m.conj().T for m in mats),
                        s,
                    )
                    for p, r, s in branches
                ]
            elif op == "CHANNEL":
                if not noisy:
                    continue
                for stage in circuit.channels[ins.param].stages:
                    m = _pauli_full(stage.pauli.x, stage.pauli.z, ins.qubits, n)
                    branches = [
                        (
                            p,
                            (1 - stage.prob) * r + stage.prob * m @ r @ m.conj().T,
                            s,
                        )
                        for p, r, s in branches
                    ]
            else:
                raise SamplingError(f"unknown op {op}")
    return branches
