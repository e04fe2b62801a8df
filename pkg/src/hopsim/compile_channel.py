"""Compilation of correlated Pauli channels into single-outcome stages.

A single-outcome stage applies one fixed Pauli A with probability q (else
identity).  A product of such stages approximates a general Pauli channel:
the naive assignment q_A = p_A is correct to first order, and subtracting
the second-order double-fault feed-in C'_A = (1/2) sum_B p_B p_{A xor B}
pushes the error to third order.  The double-fault sums over all stage
Paulis are XOR-convolutions, evaluated with a Walsh-Hadamard transform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pauli import PauliChannel, PauliString, pauli_index

MAX_COMPOSE_QUBITS = 5


class CompilationError(ValueError):
    pass


@dataclass(frozen=True)
class SingleOutcomeStage:
    """Apply ``pauli`` with probability ``prob``, identity otherwise."""

    pauli: PauliString
    prob: float

    def __post_init__(self):
        if not 0.0 <= self.prob < 0.5:
            raise ValueError(f"stage probability {self.prob} outside [0, 0.5)")
        if self.pauli.is_identity:
            raise ValueError("stage Pauli must be non-identity")


@dataclass
class CompiledChannel:
    """Ordered list of single-outcome stages acting on the same qubits."""

    n: int
    stages: list[SingleOutcomeStage]

    def truncated(self, floor: float) -> "CompiledChannel":
        """Drop the smallest stages while their total probability stays < floor."""
        order = sorted(self.stages, key=lambda s: s.prob)
        dropped = 0.0
        keep_from = 0
        for i, st in enumerate(order):
            if dropped + st.prob >= floor:
                break
            dropped += st.prob
            keep_from = i + 1
        kept = set(order[keep_from:])
        return CompiledChannel(self.n, [s for s in self.stages if s in kept])


def _xor_convolve(arr: np.ndarray) -> np.ndarray:
    """Self XOR-convolution (sum_B arr[B] arr[A^B]) via Walsh-Hadamard."""
    m = arr.size
    wh = arr.copy()
    h = 1
    while h < m:
        wh = wh.reshape(-1, 2, h)
        a = wh[:, 0, :].copy()
        b = wh[:, 1, :].copy()
        wh[:, 0, :] = a + b
        wh[:, 1, :] = a - b
        wh = wh.reshape(m)
        h *= 2
    wh *= wh
    h = 1
    while h < m:
        wh = wh.reshape(-1, 2, h)
        a = wh[:, 0, :].copy()
        b = wh[:, 1, :].copy()
        wh[:, 0, :] = a + b
        wh[:, 1, :] = a - b
        wh = wh.reshape(m)
        h *= 2
    return wh / m


def naive_compile(channel: PauliChannel) -> CompiledChannel:
    """One stage per non-identity Pauli with q_A = p_A (error O(p^2))."""
    stages = [
        SingleOutcomeStage(pauli, prob)
        for pauli, prob in channel.sorted_items()
        if not pauli.is_identity
    ]
    return CompiledChannel(channel.n, stages)


def corrected_compile(channel: PauliChannel) -> CompiledChannel:
    """Stages with the second-order correction applied (error O(p^3)).

    The stage product realizes, to second order,
        p_hat_A = q_A (1 - S + q_A) + D_A(q),
    with S the total stage probability and D_A the unordered-pair double
    faults multiplying to A.  Solving for q_A at second order gives
        q_A = p_A + p_A (S - p_A) - D_A(p).
    D_A is an XOR self-convolution, evaluated with a Walsh-Hadamard
    transform.  Stages are only created for Paulis present in the input; a
    correction overshooting a (necessarily higher-order) target weight
    clamps that stage probability to zero.
    """
    n = channel.n
    arr = channel.as_array()
    nonid = arr.copy()
    nonid[0] = 0.0
    total = float(nonid.sum())
    conv = _xor_convolve(nonid)
    # conv[A] counts ordered pairs (B, C), B^C = A; B == C only lands on
    # A = I, so halving gives unordered distinct pairs for A != I.
    double_faults = conv / 2.0
    stages = []
    for pauli, prob in channel.sorted_items():
        if pauli.is_identity:
            continue
        q = prob + prob * (total - prob) - double_faults[pauli_index(pauli)]
        if q > 0.0:
            stages.append(SingleOutcomeStage(pauli, q))
    return CompiledChannel(n, stages)


def conjugate_by_phase_gates(
    compiled: CompiledChannel, positions: tuple[int, ...]
) -> CompiledChannel:
    """Conjugate every stage Pauli by S (= sqrt-Z) on the given positions.

    S maps X <-> Y and fixes Z, i.e. the z bit picks up the x bit.  Used to
    fold a gate's compensated local sqrt-Z factors into its noise channel.
    """
    mask = 0
    for pos in positions:
        mask |= 1 << pos
    stages = [
        SingleOutcomeStage(
            PauliString(st.pauli.n, st.pauli.x, st.pauli.z ^ (st.pauli.x & mask)),
            st.prob,
        )
        for st in compiled.stages
    ]
    return CompiledChannel(compiled.n, stages)


def compose_stages(compiled: CompiledChannel) -> PauliChannel:
    """Exact Pauli channel realized by the stage product (for diagnostics)."""
    n = compiled.n
    if n > MAX_COMPOSE_QUBITS:
        raise CompilationError(
            f"exact composition limited to {MAX_COMPOSE_QUBITS} qubits, got {n}"
        )
    dist = np.zeros(4**n)
    dist[0] = 1.0
    idx = np.arange(4**n)
    for stage in compiled.stages:
        a = pauli_index(stage.pauli)
        dist = (1.0 - stage.prob) * dist + stage.prob * dist[idx ^ a]
    return PauliChannel.from_array(n, dist)


def compilation_error(channel: PauliChannel, compiled: CompiledChannel) -> float:
    """Total variation distance between the target and the stage product."""
    target = channel.as_array()
    actual = compose_stages(compiled).as_array()
    return 0.5 * float(np.abs(target - actual).sum())


def write_compiled_file(path, compiled: CompiledChannel, meta: dict) -> None:
    """Stage file: ``# key: value`` header then ordered ``PAULI prob`` lines."""
    with open(path, "w") as fh:
        fh.write(f"# hopsim stages v1\n# n: {compiled.n}\n")
        for key, val in meta.items():
            fh.write(f"# {key}: {val}\n")
        for stage in compiled.stages:
            fh.write(f"{stage.pauli.label} {stage.prob:.17g}\n")


def read_compiled_file(path) -> tuple[CompiledChannel, dict]:
    meta: dict[str, str] = {}
    stages: list[SingleOutcomeStage] = []
    n = None
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if ":" in body:
                    key, val = body.split(":", 1)
                    meta[key.strip()] = val.strip()
                continue
            label, prob = line.split()
            pauli = PauliString.from_label(label)
            if n is None:
                n = pauli.n
            stages.append(SingleOutcomeStage(pauli, float(prob)))
    if n is None:
        raise ValueError(f"empty stage file {path}")
    return CompiledChannel(n, stages), meta
