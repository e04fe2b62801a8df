"""Flux-tunable transmon lattice model and dispersive ZZ extraction.

A five-qubit star (one check qubit, four data qubits) is coupled through
four asymmetric-SQUID tunable couplers.  Each mode is truncated to three
levels; the lattice Hamiltonian is diagonalized in an excitation-capped
subspace and the pairwise ZZ strengths are read off the dressed spectrum:

    zeta_jk = w(|11>_jk) + w(|00>) - w(|10>_jk) - w(|01>_jk)

with dressed levels labeled by maximal overlap with bare occupation states.
All energies are stored as frequency/2pi in GHz.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize
import scipy.sparse
import yaml


class DegenerateTransmonError(ValueError):
    """Effective Josephson energy vanished or the charge expansion broke down."""


class CalibrationError(ValueError):
    pass


class LabelingError(ValueError):
    """A dressed eigenstate could not be unambiguously assigned to a bare state."""


@dataclass(frozen=True)
class ModeSpec:
    """One transmon mode (qubit or coupler): SQUID junction + charging energies."""

    kind: str                  # "qubit" | "coupler"
    e_j_total: float           # GHz
    e_c: float                 # GHz
    junction_ratio: float      # r = E_J1 / E_J2
    flux: float                # external bias, fraction of one flux quantum

    def __post_init__(self):
        if self.kind not in ("qubit", "coupler"):
            raise ValueError(f"bad mode kind {self.kind!r}")
        if self.e_j_total <= 0 or self.e_c <= 0 or self.junction_ratio <= 0:
            raise ValueError("E_J, E_C and junction ratio must be positive")
        if not 0.0 <= self.flux < 1.0:
            raise ValueError("flux bias must lie in [0, 1)")
        if self.e_j_eff() <= 0:
            raise DegenerateTransmonError(
                "effective Josephson energy is non-positive at this flux bias"
            )

    def e_j_eff(self, flux: float | None = None) -> float:
        phi = self.flux if flux is None else flux
        r = self.junction_ratio
        return (self.e_j_total / (1 + r)) * np.sqrt(
            1 + r * r + 2 * r * np.cos(2 * np.pi * phi)
        )


def flux_frequency(spec: ModeSpec, flux: float | None = None) -> tuple[float, float]:
    """Transmon frequency and anharmonicity (GHz) at the mode's flux bias.

    Second-order expansion in the charge dispersion parameter
    xi = sqrt(2 E_C / E_Jeff); raises if the expansion is invalid.
    """
    e_j = spec.e_j_eff(flux)
    e_c = spec.e_c
    if e_j <= 0:
        raise DegenerateTransmonError("E_Jeff <= 0")
    xi = np.sqrt(2 * e_c / e_j)
    if xi >= 1:
        raise DegenerateTransmonError(f"xi = {xi:.3f} >= 1, expansion invalid")
    omega = np.sqrt(8 * e_j * e_c) - e_c * (1 + xi / 4 + 21 * xi**2 / 128)
    eta = e_c * (1 + 9 * xi / 16 + 81 * xi**2 / 128)
    return float(omega), float(eta)


DEFAULT_QUBIT_RATIO = 5.0


def calibrate_junctions(
    omega_max: float,
    eta_max: float,
    kind: str = "qubit",
    omega_min: float | None = None,
    junction_ratio: float | None = None,
    flux: float = 0.0,
) -> ModeSpec:
    """Invert (E_J_total, E_C[, r]) from sweet-spot frequency endpoints.

    omega_max / eta_max are taken at flux 0; omega_min, when given, at
    flux 0.5 with the junction ratio left free.  Qubits (no omega_min)
    use a fixed default ratio, inert as long as they sit at flux 0.
    """
    if omega_min is not None and omega_min >= omega_max:
        raise CalibrationError("omega_min must be below omega_max")

    def freq_at(e_j, e_c, r, phi):
        spec = ModeSpec(kind, e_j, e_c, r, phi)
        return flux_frequency(spec)

    # Initial guesses from the zeroth-order transmon relations.
    e_c0 = eta_max
    e_j0 = (omega_max + e_c0) ** 2 / (8 * e_c0)

    if omega_min is None:
        r = junction_ratio if junction_ratio is not None else DEFAULT_QUBIT_RATIO

        def resid(v):
            om, et = freq_at(v[0], v[1], r, 0.0)
            return [om - omega_max, et - eta_max]

        sol = scipy.optimize.root(resid, [e_j0, e_c0], tol=1e-12)
        if not sol.success or np.max(np.abs(sol.fun)) > 1e-6:
            raise CalibrationError(f"junction inversion failed: {sol.message}")
        e_j, e_c = sol.x
    else:
        def resid(v):
            e_j, e_c, r = v
            if e_j <= 0 or e_c <= 0 or r <= 0:
                return [1e3, 1e3, 1e3]
            om0, et0 = freq_at(e_j, e_c, r, 0.0)
            try:
                om5, _ = freq_at(e_j, e_c, r, 0.5)
            except DegenerateTransmonError:
                return [1e3, 1e3, 1e3]
            return [om0 - omega_max, et0 - eta_max, om5 - omega_min]

        # Ratio guess from the sqrt(E_Jeff) scaling of the plasma frequency.
        ratio_guess = 2.0
        sol = scipy.optimize.root(resid, [e_j0, e_c0, ratio_guess], tol=1e-12)
        if not sol.success or np.max(np.abs(sol.fun)) > 1e-6:
            raise CalibrationError(f"junction inversion failed: {sol.message}")
        e_j, e_c, junction_ratio = sol.x
        r = junction_ratio

    return ModeSpec(kind, float(e_j), float(e_c), float(r), flux)


@dataclass
class LatticeSpec:
    """Ordered modes (q0..q4, c1..c4) plus the exchange-coupling list (GHz)."""

    modes: list[ModeSpec]
    mode_names: list[str]
    couplings: list[tuple[str, str, float]]  # (mode_a, mode_b, g in GHz)

    def __post_init__(self):
        if len(self.modes) != 9 or len(self.mode_names) != 9:
            raise ValueError("lattice requires 9 modes: q0..q4, c1..c4")
        expected = {f"q{i}" for i in range(5)} | {f"c{i}" for i in range(1, 5)}
        if set(self.mode_names) != expected:
            raise ValueError(f"mode names must be {sorted(expected)}")
        want = set()
        for m in range(1, 5):
            want |= {
                frozenset(("q0", f"q{m}")),
                frozenset(("q0", f"c{m}")),
                frozenset((f"q{m}", f"c{m}")),
            }
        got = {frozenset((a, b)) for a, b, _ in self.couplings}
        if got != want or len(self.couplings) != 12:
            raise ValueError("coupling list must be the 12-entry star pattern "
                             "(g_0m, g_0cm, g_mcm for m in 1..4)")

    def index(self, name: str) -> int:
        return self.mode_names.index(name)


# Reference operating point: qubits at their flux-0 sweet spot, couplers at
# half a flux quantum, star couplings in MHz as designed for a 5 MHz ZZ.
REFERENCE_FREQS = {
    # name: (omega_max GHz, omega_min GHz or None, eta_max GHz)
    "q0": (4.00, None, 0.185),
    "q1": (3.85, None, 0.221),
    "q2": (3.80, None, 0.190),
    "q3": (4.15, None, 0.216),
    "q4": (4.20, None, 0.220),
    "c1": (6.7, 4.58, 0.200),
    "c2": (6.7, 4.75, 0.200),
    "c3": (6.7, 4.90, 0.200),
    "c4": (6.7, 4.90, 0.200),
}
REFERENCE_COUPLINGS_MHZ = {
    ("q0", "q1"): -8.0,
    ("q0", "q2"): -8.0,
    ("q0", "q3"): -8.0,
    ("q0", "q4"): -8.0,
    ("q0", "c1"): 130.0,
    ("q0", "c2"): 132.0,
    ("q0", "c3"): -112.0,
    ("q0", "c4"): -130.0,
    ("q1", "c1"): -149.5,
    ("q2", "c2"): -134.5,
    ("q3", "c3"): 134.5,
    ("q4", "c4"): 143.0,
}


# Coupler flux biases that tune each |zeta_0k| onto the 5 MHz design target
# (solved at excitation cap 4 by calibrate_operating_point; qubits stay at
# flux 0).  At the couplers' half-quantum bias the star over-couples, so the
# operating point backs each coupler off toward its zero-coupling condition.
REFERENCE_OPERATING_FLUXES = {
    "c1": 0.3840749800626622,
    "c2": 0.3443955353017436,
    "c3": 0.4250306759303365,
    "c4": 0.4072948055718835,
}
ZETA_TARGET_MHZ = 5.0


def reference_lattice(trimmed: bool = True) -> LatticeSpec:
    """Lattice at the reference design point (tables embedded above).

    With ``trimmed`` the couplers sit at the stored operating biases that
    realize the 5 MHz check-data ZZ target; otherwise at half a flux quantum
    (maximum coupling).
    """
    lat = lattice_from_tables(REFERENCE_FREQS, REFERENCE_COUPLINGS_MHZ)
    if trimmed:
        lat = with_coupler_fluxes(lat, REFERENCE_OPERATING_FLUXES)
    return lat


def with_coupler_fluxes(lattice: LatticeSpec, fluxes: dict[str, float]) -> LatticeSpec:
    modes = list(lattice.modes)
    for name, flux in fluxes.items():
        i = lattice.index(name)
        s = modes[i]
        modes[i] = ModeSpec(s.kind, s.e_j_total, s.e_c, s.junction_ratio, flux)
    return LatticeSpec(modes, list(lattice.mode_names), list(lattice.couplings))


def calibrate_operating_point(
    lattice: LatticeSpec,
    target_mhz: float = ZETA_TARGET_MHZ,
    cap: int = 4,
    sweeps: int = 3,
) -> dict[str, float]:
    """Per-coupler flux biases bringing each |zeta_0k| to the target.

    Coordinate bisection, one coupler at a time (couplers interact only
    weakly through the shared check qubit), repeated for a few sweeps.
    """
    fluxes = {f"c{m}": lattice.modes[lattice.index(f"c{m}")].flux for m in range(1, 5)}
    pair_of = {f"c{m}": (0, m) for m in range(1, 5)}

    def zeta(trial: dict[str, float], pair: tuple[int, int]) -> float:
        h, basis = build_hamiltonian(with_coupler_fluxes(lattice, trial), cap)
        return zz_couplings(h, basis).zeta_nn_mhz[pair]

    for _ in range(sweeps):
        for cname, pair in pair_of.items():
            def excess(phi: float) -> float:
                trial = dict(fluxes)
                trial[cname] = phi
                try:
                    return abs(zeta(trial, pair)) - target_mhz
                except LabelingError:
                    # hybridization too strong to label: far above target
                    return 1e3

            # Scan down from half a flux quantum for the first bracket.
            hi, f_hi = 0.5, excess(0.5)
            if f_hi <= 0:
                raise CalibrationError(
                    f"{cname}: target {target_mhz} MHz above the maximum coupling"
                )
            sol = None
            for phi in np.arange(0.46, 0.0, -0.04):
                f_lo = excess(phi)
                if f_lo < 0:
                    sol = scipy.optimize.brentq(excess, phi, hi, xtol=2e-6)
                    break
                hi, f_hi = phi, f_lo
            if sol is None:
                raise CalibrationError(f"{cname}: no flux reaches the ZZ target")
            fluxes[cname] = float(sol)
    return fluxes


def lattice_from_tables(
    freqs: dict[str, tuple[float, float | None, float]],
    couplings_mhz: dict[tuple[str, str], float],
) -> LatticeSpec:
    names = [f"q{i}" for i in range(5)] + [f"c{i}" for i in range(1, 5)]
    modes = []
    for name in names:
        omega_max, omega_min, eta_max = freqs[name]
        if omega_min is None:
            spec = calibrate_junctions(omega_max, eta_max, kind="qubit", flux=0.0)
        else:
            spec = calibrate_junctions(
                omega_max, eta_max, kind="coupler", omega_min=omega_min, flux=0.5
            )
        modes.append(spec)
    couplings = [(a, b, g / 1e3) for (a, b), g in couplings_mhz.items()]
    return LatticeSpec(modes, names, couplings)


def load_lattice_yaml(path) -> LatticeSpec:
    """Parameter file: ``modes`` (omega_max/omega_min/eta_max per mode, GHz
    and MHz as in the reference tables) and ``couplings_MHz`` triples."""
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    freqs = {}
    for name, entry in doc["modes"].items():
        freqs[name] = (
            float(entry["omega_max_GHz"]),
            float(entry["omega_min_GHz"]) if "omega_min_GHz" in entry else None,
            float(entry["eta_max_MHz"]) / 1e3,
        )
    couplings = {}
    for a, b, g in doc["couplings_MHz"]:
        couplings[(a, b)] = float(g)
    return lattice_from_tables(freqs, couplings)


def capped_basis(n_modes: int, cap: int, levels: int = 3) -> list[tuple[int, ...]]:
    """Occupation vectors (entries < levels) with total excitation <= cap."""
    basis = []
    for occ in itertools.product(range(levels), repeat=n_modes):
        if sum(occ) <= cap:
            basis.append(occ)
    return basis


def build_hamiltonian(
    lattice: LatticeSpec, excitation_cap: int = 4
) -> tuple[scipy.sparse.csr_matrix, list[tuple[int, ...]]]:
    """Sparse Hermitian lattice Hamiltonian on the excitation-capped basis.

    Diagonal: w*n for n=1, 2w-eta for n=2 per mode.  Off-diagonal: exchange
    g * X_a X_b with the three-level lowering operator |0><1| + sqrt(2)|1><2|.
    """
    if excitation_cap < 2:
        raise ValueError("excitation cap must be >= 2 (two-excitation "
                         "eigenstates are needed for the ZZ formulas)")
    basis = capped_basis(9, excitation_cap)
    index = {occ: i for i, occ in enumerate(basis)}
    dim = len(basis)

    omegas, etas = [], []
    for spec in lattice.modes:
        om, et = flux_frequency(spec)
        omegas.append(om)
        etas.append(et)

    def level_energy(mode: int, n: int) -> float:
        if n == 0:
            return 0.0
        if n == 1:
            return omegas[mode]
        return 2 * omegas[mode] - etas[mode]

    diag = np.array(
        [sum(level_energy(m, n) for m, n in enumerate(occ)) for occ in basis]
    )

    rows, cols, vals = [], [], []
    # Lowering-operator amplitudes <n-1|sigma_-|n>.
    amp = {1: 1.0, 2: np.sqrt(2.0)}
    for name_a, name_b, g in lattice.couplings:
        a, b = lattice.index(name_a), lattice.index(name_b)
        for i, occ in enumerate(basis):
            for da in (-1, +1):
                na = occ[a] + da
                if not 0 <= na <= 2:
                    continue
                amp_a = amp[occ[a]] if da == -1 else amp[na]
                for db in (-1, +1):
                    nb = occ[b] + db
                    if not 0 <= nb <= 2:
                        continue
                    amp_b = amp[occ[b]] if db == -1 else amp[nb]
                    new = list(occ)
                    new[a], new[b] = na, nb
                    j = index.get(tuple(new))
                    if j is None:
                        continue
                    rows.append(j)
                    cols.append(i)
                    vals.append(g * amp_a * amp_b)

    h = scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(dim, dim))
    h = h + scipy.sparse.diags(diag)
    return h.tocsr(), basis


OVERLAP_THRESHOLD = 0.5


@dataclass
class CouplingReport:
    zeta_nn_mhz: dict[tuple[int, int], float] = field(default_factory=dict)
    zeta_nnn_khz: dict[tuple[int, int], float] = field(default_factory=dict)
    eigen_label_fidelity: dict[tuple[int, ...], float] = field(default_factory=dict)

    def min_label_fidelity(self) -> float:
        return min(self.eigen_label_fidelity.values())


def zz_couplings(
    h: scipy.sparse.csr_matrix, basis: list[tuple[int, ...]]
) -> CouplingReport:
    """Dispersive ZZ strengths between all qubit pairs from the dressed spectrum."""
    dense = h.toarray()
    if np.max(np.abs(dense - dense.T.conj())) > 1e-12:
        raise ValueError("Hamiltonian is not Hermitian")
    evals, evecs = np.linalg.eigh(dense)
    index = {occ: i for i, occ in enumerate(basis)}

    def dressed_energy(occ: tuple[int, ...]) -> float:
        i = index[occ]
        overlaps = np.abs(evecs[i, :]) ** 2
        k = int(np.argmax(overlaps))
        fid = float(overlaps[k])
        if fid <= OVERLAP_THRESHOLD:
            raise LabelingError(
                f"bare state {occ} has max dressed overlap {fid:.3f} <= 0.5"
            )
        report.eigen_label_fidelity[occ] = fid
        return float(evals[k])

    report = CouplingReport()
    zero = tuple([0] * 9)
    e0 = dressed_energy(zero)

    def single(j: int) -> tuple[int, ...]:
        occ = [0] * 9
        occ[j] = 1
        return tuple(occ)

    def pair(j: int, k: int) -> tuple[int, ...]:
        occ = [0] * 9
        occ[j] = occ[k] = 1
        return tuple(occ)

    e_single = {j: dressed_energy(single(j)) for j in range(5)}
    for j in range(5):
        for k in range(j + 1, 5):
            e_jk = dressed_energy(pair(j, k))
            zeta_ghz = e_jk + e0 - e_single[j] - e_single[k]
            if j == 0:
                report.zeta_nn_mhz[(j, k)] = zeta_ghz * 1e3
            else:
                report.zeta_nnn_khz[(j, k)] = zeta_ghz * 1e6
    return report
