"""Rotated surface-code layouts and noise-annotated syndrome circuits.

Data qubits sit on the vertices (r, c) of a d x d grid; plaquettes are
indexed by their north-west vertex with r, c in [-1, d-1].  Plaquettes
with r + c even carry Z checks (weight-2 ones survive on the west/east
boundaries), the others carry X checks (surviving on north/south).  The
logical Z runs along data row 0, the logical X down data column 0.

Two schedules are built over the same layout: the depth-6 round with one
two-qubit gate per check per step, and the 9-layer round that measures
each check with a single multi-qubit parity gate, interleaving the four
check groups A, B (Z type) and C, D (X type) with data-twirl layers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .compile_channel import CompiledChannel, SingleOutcomeStage
from .pauli import PauliString

# Per-check data visit order by compass slot; Z and X checks zig-zag in
# mirrored orders so simultaneous scheduling preserves code distance:
# an ancilla fault mid-round spreads onto the check's remaining data, so
# the final pair must lie perpendicular to the logical chains that check
# type detects (vertical for Z checks, horizontal for X checks).
Z_SLOT_ORDER = ("NW", "SW", "NE", "SE")
X_SLOT_ORDER = ("NW", "NE", "SW", "SE")
_SLOT_OFFSET = {"NW": (0, 0), "NE": (0, 1), "SW": (1, 0), "SE": (1, 1)}


class LayoutError(ValueError):
    pass


@dataclass(frozen=True)
class Check:
    """One stabilizer check: ancilla qubit plus its ordered data neighbors.

    ``slots`` holds a qubit id or None per visit position, fixing which of
    the four gate steps a boundary check participates in.
    """

    kind: str
    plaquette: tuple[int, int]
    ancilla: int
    slots: tuple[int | None, int | None, int | None, int | None]
    group: str

    @property
    def data(self) -> tuple[int, ...]:
        return tuple(q for q in self.slots if q is not None)

    @property
    def weight(self) -> int:
        return len(self.data)


@dataclass(frozen=True)
class Layout:
    d: int
    data_coords: tuple[tuple[int, int], ...]
    checks: tuple[Check, ...]
    logical_z_qubits: tuple[int, ...]
    logical_x_qubits: tuple[int, ...]

    @property
    def n_data(self) -> int:
        return self.d * self.d

    @property
    def n_qubits(self) -> int:
        return self.n_data + len(self.checks)

    def checks_of(self, kind: str | None = None, group: str | None = None):
        return [
            ch
            for ch in self.checks
            if (kind is None or ch.kind == kind)
            and (group is None or ch.group == group)
        ]


def build_layout(d: int) -> Layout:
    """Rotated surface-code layout of odd distance d (2d^2 - 1 qubits)."""
    if d < 3 or d % 2 == 0:
        raise LayoutError(f"distance must be odd and >= 3, got {d}")
    coords = [(r, c) for r in range(d) for c in range(d)]
    index = {rc: i for i, rc in enumerate(coords)}

    checks: list[Check] = []
    next_ancilla = d * d
    for r in range(-1, d):
        for c in range(-1, d):
            kind = "Z" if (r + c) % 2 == 0 else "X"
            interior = 0 <= r <= d - 2 and 0 <= c <= d - 2
            if not interior:
                # Weight-2 survivors: Z on west/east columns, X on
                # north/south rows; everything else (corners included) dies.
                if kind == "Z" and not (c in (-1, d - 1) and 0 <= r <= d - 2):
                    continue
                if kind == "X" and not (r in (-1, d - 1) and 0 <= c <= d - 2):
                    continue
            order = Z_SLOT_ORDER if kind == "Z" else X_SLOT_ORDER
            slots = []
            for slot in order:
                dr, dc = _SLOT_OFFSET[slot]
                slots.append(index.get((r + dr, c + dc)))
            if sum(q is not None for q in slots) not in (2, 4):
                raise LayoutError(f"malformed plaquette at {(r, c)}")
            if kind == "Z":
                group = "A" if r % 2 == 0 else "B"
            else:
                group = "C" if r % 2 == 0 else "D"
            checks.append(Check(kind, (r, c), next_ancilla, tuple(slots), group))
            next_ancilla += 1

    n_z = sum(1 for ch in checks if ch.kind == "Z")
    if n_z != (d * d - 1) // 2 or len(checks) - n_z != (d * d - 1) // 2:
        raise LayoutError("check census mismatch")
    for group in "ABCD":
        seen: set[int] = set()
        for ch in checks:
            if ch.group != group:
                continue
            touched = set(ch.data) | {ch.ancilla}
            if seen & touched:
                raise LayoutError(f"group {group} is not qubit-disjoint")
            seen |= touched

    logical_z = tuple(index[(0, c)] for c in range(d))
    logical_x = tuple(index[(r, 0)] for r in range(d))
    return Layout(d, tuple(coords), tuple(checks), logical_z, logical_x)


@dataclass(frozen=True)
class NoiseBudget:
    """Noise rates derived from the gate-channel strength p.

    p1 = p/10 single-qubit depolarizing on idles and twirls, p_pm = p/2
    preparation/measurement flips, p2 the fidelity-matched two-qubit
    depolarizing rate, and the compiled correlated channels for the
    weight-4 and weight-2 parity gates.
    """

    p: float
    p2: float = 0.0
    channel5: CompiledChannel | None = None
    channel3: CompiledChannel | None = None

    def __post_init__(self):
        for val in (self.p, self.p2):
            if not 0.0 <= val <= 1.0:
                raise ValueError("noise rates must lie in [0, 1]")

    @property
    def p1(self) -> float:
        return self.p / 10

    @property
    def p_pm(self) -> float:
        return self.p / 2

    @classmethod
    def zero(cls) -> "NoiseBudget":
        return cls(0.0)

    @classmethod
    def for_strength(cls, p: float, truncate: bool = True) -> "NoiseBudget":
        """Derive the full budget at strength p: extract and compile both
        parity-gate channels (folding in their compensated local sqrt-Z
        factors) and fidelity-match the two-qubit depolarizing rate."""
        from .compile_channel import conjugate_by_phase_gates, corrected_compile
        from .open_system import hop_channel, match_lambda

        if p == 0:
            return cls.zero()
        raw5 = hop_channel(p, n_data=4)
        raw3 = hop_channel(p, n_data=2)
        chan5 = conjugate_by_phase_gates(corrected_compile(raw5), (1, 2, 3, 4))
        chan3 = conjugate_by_phase_gates(corrected_compile(raw3), (1, 2))
        if truncate:
            floor = p**3 / 10
            chan5 = chan5.truncated(floor)
            chan3 = chan3.truncated(floor)
        p2 = match_lambda(p, 5, hop_fidelity=raw5.fidelity)
        return cls(p, p2, chan5, chan3)


@dataclass(frozen=True)
class Instruction:
    """One circuit operation; ``param`` is a rate or a channel name."""

    op: str
    qubits: tuple[int, ...]
    param: float | str | None = None


UNITARY_OPS = {"H", "CZ", "CX", "HOP"}
RESET_OPS = {"RESET_Z", "RESET_X"}
MEASURE_OPS = {"MEASURE_Z", "MEASURE_X"}
NOISE_OPS = {"DEPOL1", "DEPOL2", "CHANNEL"}
ALL_OPS = UNITARY_OPS | RESET_OPS | MEASURE_OPS | NOISE_OPS


class CircuitValidationError(ValueError):
    pass


@dataclass
class CircuitIR:
    """Time-layered instruction list with detectors and observables.

    Instructions within a layer execute in listed order; qubit-disjointness
    is enforced separately per role (unitaries / resets / measurements), so
    a check's reset, parity gate, channel and measurement may share one
    layer while no two gates ever touch the same qubit simultaneously.
    Detector and observable entries hold absolute measurement indices.
    """

    n_qubits: int
    layers: list[list[Instruction]] = field(default_factory=list)
    channels: dict[str, CompiledChannel] = field(default_factory=dict)
    detectors: list[tuple[int, ...]] = field(default_factory=list)
    observables: list[tuple[int, ...]] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def n_measurements(self) -> int:
        return sum(
            1 for layer in self.layers for ins in layer if ins.op in MEASURE_OPS
        )

    @property
    def n_detectors(self) -> int:
        return len(self.detectors)

    def validate(self) -> None:
        for t, layer in enumerate(self.layers):
            used: dict[str, set[int]] = {"u": set(), "r": set(), "m": set()}
            for ins in layer:
                if ins.op not in ALL_OPS:
                    raise CircuitValidationError(f"unknown op {ins.op!r}")
                if any(not 0 <= q < self.n_qubits for q in ins.qubits):
                    raise CircuitValidationError(f"qubit out of range in layer {t}")
                if ins.op == "CHANNEL":
                    chan = self.channels.get(ins.param)
                    if chan is None:
                        raise CircuitValidationError(f"undefined channel {ins.param!r}")
                    if chan.n != len(ins.qubits):
                        raise CircuitValidationError("channel arity mismatch")
                role = (
                    "u" if ins.op in UNITARY_OPS
                    else "r" if ins.op in RESET_OPS
                    else "m" if ins.op in MEASURE_OPS
                    else None
                )
                if role is not None:
                    qs = set(ins.qubits)
                    if len(qs) != len(ins.qubits) or used[role] & qs:
                        raise CircuitValidationError(
                            f"qubit reused within layer {t} ({ins.op})"
                        )
                    used[role] |= qs
        n_meas = self.n_measurements
        for refs in list(self.detectors) + list(self.observables):
            if any(not 0 <= m < n_meas for m in refs):
                raise CircuitValidationError("measurement reference out of range")


class _Builder:
    def __init__(self, n_qubits: int):
        self.circuit = CircuitIR(n_qubits)
        self.n_meas = 0

    def layer(self, instructions: list[Instruction]) -> None:
        self.circuit.layers.append(instructions)
        for ins in instructions:
            if ins.op in MEASURE_OPS:
                self.n_meas += 1

    def measurement_ids(self, layer_instructions: list[Instruction]) -> dict[int, int]:
        """Map qubit -> absolute measurement index for a layer about to be added."""
        ids = {}
        counter = self.n_meas
        for ins in layer_instructions:
            if ins.op in MEASURE_OPS:
                ids[ins.qubits[0]] = counter
                counter += 1
        return ids


def _idle(qubits: list[int], p1: float) -> list[Instruction]:
    if not qubits or p1 <= 0:
        return []
    return [Instruction("DEPOL1", tuple(sorted(qubits)), p1)]


def _standard_round(
    b: _Builder,
    layout: Layout,
    budget: NoiseBudget,
    last_meas: dict[int, int | None],
    first: bool,
) -> None:
    data = list(range(layout.n_data))
    ancillas = [ch.ancilla for ch in layout.checks]
    p1, p2, p_pm = budget.p1, budget.p2, budget.p_pm

    b.layer(
        [Instruction("RESET_X", (a,), p_pm) for a in ancillas] + _idle(data, p1)
    )
    for step in range(4):
        ops: list[Instruction] = []
        noise: list[Instruction] = []
        busy: set[int] = set()
        for ch in layout.checks:
            q = ch.slots[step]
            if q is None:
                continue
            gate = "CZ" if ch.kind == "Z" else "CX"
            ops.append(Instruction(gate, (ch.ancilla, q)))
            if p2 > 0:
                noise.append(Instruction("DEPOL2", (ch.ancilla, q), p2))
            busy |= {ch.ancilla, q}
        idle = [q for q in data + ancillas if q not in busy]
        b.layer(ops + noise + _idle(idle, p1))
    meas = [Instruction("MEASURE_X", (ch.ancilla,), p_pm) for ch in layout.checks]
    ids = b.measurement_ids(meas)
    b.layer(meas + _idle(data, p1))
    for ch in layout.checks:
        m = ids[ch.ancilla]
        prev = last_meas[ch.ancilla]
        b.circuit.detectors.append((m,) if first and prev is None else (prev, m))
        last_meas[ch.ancilla] = m


def _hop_round(
    b: _Builder,
    layout: Layout,
    budget: NoiseBudget,
    last_meas: dict[int, int | None],
    first: bool,
) -> None:
    data = list(range(layout.n_data))
    p1, p_pm = budget.p1, budget.p_pm

    def twirl(with_h: bool) -> None:
        ops = [Instruction("H", tuple(data))] if with_h else []
        b.layer(ops + _idle(data, p1))

    def group_layer(group: str) -> None:
        ops: list[Instruction] = []
        busy: set[int] = set()
        ids_pending = []
        for ch in layout.checks_of(group=group):
            qubits = (ch.ancilla,) + ch.data
            ops.append(Instruction("RESET_X", (ch.ancilla,), p_pm))
            ops.append(Instruction("HOP", qubits))
            name = "hop5" if ch.weight == 4 else "hop3"
            if budget.p > 0 and name in b.circuit.channels:
                ops.append(Instruction("CHANNEL", qubits, name))
            ops.append(Instruction("MEASURE_X", (ch.ancilla,), p_pm))
            busy |= set(ch.data)
            ids_pending.append(ch)
        idle = [q for q in data if q not in busy]
        ids = b.measurement_ids(ops)
        b.layer(ops + _idle(idle, p1))
        for ch in ids_pending:
            m = ids[ch.ancilla]
            prev = last_meas[ch.ancilla]
            b.circuit.detectors.append((m,) if first and prev is None else (prev, m))
            last_meas[ch.ancilla] = m

    twirl(False)
    group_layer("A")
    twirl(False)
    group_layer("B")
    twirl(True)  # rotate data into the X basis for the X-type groups
    group_layer("C")
    twirl(False)
    group_layer("D")
    twirl(True)  # rotate back


def _finalize(b: _Builder, layout: Layout, schedule: str, last_meas) -> None:
    """Noiseless projection round, then logical readout layers."""
    round_fn = _standard_round if schedule == "std" else _hop_round
    round_fn(b, layout, NoiseBudget.zero(), last_meas, first=False)
    meas_z = [Instruction("MEASURE_Z", (q,), 0.0) for q in layout.logical_z_qubits]
    ids_z = b.measurement_ids(meas_z)
    b.layer(meas_z)
    meas_x = [Instruction("MEASURE_X", (q,), 0.0) for q in layout.logical_x_qubits]
    ids_x = b.measurement_ids(meas_x)
    b.layer(meas_x)
    b.circuit.observables.append(tuple(ids_z[q] for q in layout.logical_z_qubits))
    b.circuit.observables.append(tuple(ids_x[q] for q in layout.logical_x_qubits))


def _build(layout: Layout, rounds: int, budget: NoiseBudget, schedule: str) -> CircuitIR:
    if rounds < 1:
        raise ValueError("at least one round required")
    b = _Builder(layout.n_qubits)
    if schedule == "hop":
        if budget.channel5 is not None:
            b.circuit.channels["hop5"] = budget.channel5
        if budget.channel3 is not None:
            b.circuit.channels["hop3"] = budget.channel3
    # Data start in the joint +1 eigenstate of all checks (noiseless
    # encoding assumed), so every reference outcome is deterministic and
    # first-round detectors consist of a single measurement.
    last_meas: dict[int, int | None] = {ch.ancilla: None for ch in layout.checks}
    round_fn = _standard_round if schedule == "std" else _hop_round
    for r in range(rounds):
        round_fn(b, layout, budget, last_meas, first=(r == 0))
    _finalize(b, layout, schedule, last_meas)
    b.circuit.meta.update(
        schedule=schedule, d=layout.d, rounds=rounds, p=budget.p, p2=budget.p2
    )
    b.circuit.validate()
    return b.circuit


def standard_circuit(layout: Layout, rounds: int, budget: NoiseBudget) -> CircuitIR:
    """Depth-6 rounds: ancilla prep / four gate steps / ancilla readout."""
    return _build(layout, rounds, budget, "std")


def hop_circuit(layout: Layout, rounds: int, budget: NoiseBudget) -> CircuitIR:
    """9-layer rounds: twirl-interleaved A, B, C, D parity-gate groups."""
    return _build(layout, rounds, budget, "hop")


# --- text serialization ----------------------------------------------------

def circuit_to_text(circuit: CircuitIR) -> str:
    """Line-oriented format: header comments, CHANDEF blocks, LAYER stanzas,
    then DETECTOR / OBS lines with measurements counted from the end (m-1 =
    last measurement)."""
    lines = ["# hopsim circuit v1"]
    for key, val in circuit.meta.items():
        lines.append(f"# {key}: {val}")
    lines.append(f"QUBITS {circuit.n_qubits}")
    for name, chan in circuit.channels.items():
        lines.append(f"CHANDEF {name} {chan.n}")
        for st in chan.stages:
            lines.append(f"  {st.pauli.label} {st.prob:.17g}")
        lines.append("END")
    for layer in circuit.layers:
        lines.append("LAYER")
        for ins in layer:
            qs = " ".join(str(q) for q in ins.qubits)
            if ins.param is None:
                lines.append(f"  {ins.op} {qs}")
            elif isinstance(ins.param, str):
                lines.append(f"  {ins.op} {ins.param} {qs}")
            else:
                lines.append(f"  {ins.op} {qs} {ins.param:.17g}")
    n_meas = circuit.n_measurements
    for refs in circuit.detectors:
        lines.append("DETECTOR " + " ".join(f"m-{n_meas - m}" for m in refs))
    for i, refs in enumerate(circuit.observables):
        lines.append(f"OBS {i} " + " ".join(f"m-{n_meas - m}" for m in refs))
    return "\n".join(lines) + "\n"


def circuit_from_text(text: str) -> CircuitIR:
    lines = text.splitlines()
    circuit: CircuitIR | None = None
    meta: dict[str, str] = {}
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        i += 1
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if ":" in body:
                key, val = body.split(":", 1)
                meta[key.strip()] = val.strip()
            continue
        tokens = line.split()
        if tokens[0] == "QUBITS":
            circuit = CircuitIR(int(tokens[1]))
            circuit.meta.update(meta)
            continue
        if circuit is None:
            raise ValueError("QUBITS line must precede circuit body")
        if tokens[0] == "CHANDEF":
            name, n = tokens[1], int(tokens[2])
            stages = []
            while i < len(lines) and lines[i].strip() != "END":
                label, prob = lines[i].split()
                stages.append(SingleOutcomeStage(PauliString.from_label(label), float(prob)))
                i += 1
            i += 1  # consume END
            circuit.channels[name] = CompiledChannel(n, stages)
        elif tokens[0] == "LAYER":
            circuit.layers.append([])
        elif tokens[0] == "DETECTOR":
            n_meas = circuit.n_measurements
            circuit.detectors.append(
                tuple(n_meas - int(tok[2:]) for tok in tokens[1:])
            )
        elif tokens[0] == "OBS":
            n_meas = circuit.n_measurements
            circuit.observables.append(
                tuple(n_meas - int(tok[2:]) for tok in tokens[2:])
            )
        else:
            op = tokens[0]
            rest = tokens[1:]
            if op == "CHANNEL":
                param: float | str | None = rest[0]
                qubits = tuple(int(t) for t in rest[1:])
            elif op in UNITARY_OPS:
                param = None
                qubits = tuple(int(t) for t in rest)
            else:
                param = float(rest[-1])
                qubits = tuple(int(t) for t in rest[:-1])
            circuit.layers[-1].append(Instruction(op, qubits, param))
    if circuit is None:
        raise ValueError("empty circuit file")
    circuit.validate()
    return circuit


def save_circuit(path, circuit: CircuitIR) -> None:
    with open(path, "w") as fh:
        fh.write(circuit_to_text(circuit))


def load_circuit(path) -> CircuitIR:
    with open(path) as fh:
        return circuit_from_text(fh.read())
