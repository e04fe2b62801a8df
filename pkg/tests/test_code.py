import pytest

from hopsim.code import (
    CircuitIR,
    CircuitValidationError,
    Instruction,
    LayoutError,
    NoiseBudget,
    build_layout,
    circuit_from_text,
    circuit_to_text,
    hop_circuit,
    load_circuit,
    save_circuit,
    standard_circuit,
)
from hopsim.compile_channel import CompiledChannel, SingleOutcomeStage
from hopsim.pauli import PauliString


@pytest.fixture(scope="module")
def layout3():
    return build_layout(3)


@pytest.fixture(scope="module")
def budget_mid():
    return NoiseBudget.for_strength(0.01)


def test_layout_census():
    for d in (3, 5, 7):
        layout = build_layout(d)
        assert layout.n_data == d * d
        assert layout.n_qubits == 2 * d * d - 1
        z = layout.checks_of("Z")
        x = layout.checks_of("X")
        assert len(z) == len(x) == (d * d - 1) // 2
        weight2 = [ch for ch in layout.checks if ch.weight == 2]
        assert len(weight2) == 2 * (d - 1)


def test_layout_rejects_bad_distance():
    with pytest.raises(LayoutError):
        build_layout(4)
    with pytest.raises(LayoutError):
        build_layout(1)


def test_groups_partition_checks(layout3):
    groups = {g: layout3.checks_of(group=g) for g in "ABCD"}
    assert sum(len(v) for v in groups.values()) == len(layout3.checks)
    assert all(ch.kind == "Z" for g in "AB" for ch in groups[g])
    assert all(ch.kind == "X" for g in "CD" for ch in groups[g])
    # within a group no two checks share any qubit (simultaneous gates)
    for g, checks in groups.items():
        seen = set()
        for ch in checks:
            touched = set(ch.data) | {ch.ancilla}
            assert not (seen & touched)
            seen |= touched


def test_checks_commute(layout3):
    # every Z check commutes with every X check (shared support is even)
    for zc in layout3.checks_of("Z"):
        for xc in layout3.checks_of("X"):
            assert len(set(zc.data) & set(xc.data)) % 2 == 0


def test_logicals_anticommute_with_nothing(layout3):
    # logical operators commute with all checks and intersect each other once
    lz = set(layout3.logical_z_qubits)
    lx = set(layout3.logical_x_qubits)
    assert len(lz & lx) == 1
    for ch in layout3.checks_of("X"):
        assert len(lz & set(ch.data)) % 2 == 0
    for ch in layout3.checks_of("Z"):
        assert len(lx & set(ch.data)) % 2 == 0


def test_noise_budget_rates():
    budget = NoiseBudget(0.02, 0.025)
    assert budget.p1 == pytest.approx(0.002)
    assert budget.p_pm == pytest.approx(0.01)
    assert NoiseBudget.zero().p == 0.0
    with pytest.raises(ValueError):
        NoiseBudget(-0.1)


def test_noise_budget_for_strength(budget_mid):
    assert budget_mid.p2 == pytest.approx(0.013228, abs=2e-4)
    assert budget_mid.channel5 is not None
    assert budget_mid.channel3 is not None
    assert all(s.pauli.n == 5 for s in budget_mid.channel5.stages)
    assert all(s.pauli.n == 3 for s in budget_mid.channel3.stages)
    # truncation keeps the channel small but nontrivial
    assert 10 < len(budget_mid.channel5.stages) < 1024


def test_circuit_shapes(layout3, budget_mid):
    std = standard_circuit(layout3, 3, budget_mid)
    hop = hop_circuit(layout3, 3, budget_mid)
    # std round = prep + 4 gate steps + readout; hop round = 9 layers;
    # one noiseless projection round plus two logical readout layers
    assert len(std.layers) == 6 * 4 + 2
    assert len(hop.layers) == 9 * 4 + 2
    for circ in (std, hop):
        assert circ.n_detectors == 8 * 4
        assert len(circ.observables) == 2
        assert circ.n_measurements == 8 * 4 + 2 * 3


def test_round_count_scales(layout3, budget_mid):
    one = standard_circuit(layout3, 1, budget_mid)
    five = standard_circuit(layout3, 5, budget_mid)
    assert five.n_detectors - one.n_detectors == 8 * 4


def test_first_round_detectors_single(layout3, budget_mid):
    circ = standard_circuit(layout3, 2, budget_mid)
    assert all(len(refs) == 1 for refs in circ.detectors[:8])
    assert all(len(refs) == 2 for refs in circ.detectors[8:])


def test_validation_rejects_reused_qubit():
    circ = CircuitIR(3)
    circ.layers.append(
        [Instruction("CZ", (0, 1)), Instruction("H", (1,))]
    )
    with pytest.raises(CircuitValidationError):
        circ.validate()


def test_validation_rejects_unknown_channel():
    circ = CircuitIR(3)
    circ.layers.append([Instruction("CHANNEL", (0, 1, 2), "nope")])
    with pytest.raises(CircuitValidationError):
        circ.validate()


def test_validation_rejects_arity_mismatch():
    circ = CircuitIR(3)
    circ.channels["c"] = CompiledChannel(
        2, [SingleOutcomeStage(PauliString.from_label("XX"), 0.1)]
    )
    circ.layers.append([Instruction("CHANNEL", (0, 1, 2), "c")])
    with pytest.raises(CircuitValidationError):
        circ.validate()


def test_text_roundtrip(layout3, budget_mid, tmp_path):
    for builder in (standard_circuit, hop_circuit):
        circ = builder(layout3, 2, budget_mid)
        path = tmp_path / "circ.txt"
        save_circuit(path, circ)
        back = load_circuit(path)
        assert back.n_qubits == circ.n_qubits
        assert back.layers == circ.layers
        assert back.detectors == circ.detectors
        assert back.observables == circ.observables
        assert set(back.channels) == set(circ.channels)
        for name in circ.channels:
            assert back.channels[name].stages == circ.channels[name].stages
        # and the text form is stable under a second pass
        assert circuit_to_text(back) == circuit_to_text(circ)


def test_text_parse_errors():
    with pytest.raises(ValueError):
        circuit_from_text("LAYER\n  H 0\n")
    with pytest.raises(ValueError):
        circuit_from_text("")
