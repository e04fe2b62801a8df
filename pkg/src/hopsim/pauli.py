"""n-qubit Pauli strings and probabilistic Pauli channels.

Paulis are stored as a pair of bitmasks (x, z): bit k of x/z set means the
string acts with X/Z on qubit k, and Y where both are set.  Products are
taken up to global phase, which is all the channel bookkeeping here needs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

_LETTER = {(0, 0): "I", (1, 0): "X", (1, 1): "Y", (0, 1): "Z"}
_BITS = {v: k for k, v in _LETTER.items()}


@dataclass(frozen=True, order=True)
class PauliString:
    """Pauli operator on ``n`` qubits, phase-free (x, z) bitmask encoding."""

    n: int
    x: int
    z: int

    def __post_init__(self):
        mask = (1 << self.n) - 1
        if self.x & ~mask or self.z & ~mask:
            raise ValueError("bitmask exceeds qubit count")

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls(n, 0, 0)

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        x = z = 0
        for k, ch in enumerate(label):
            try:
                bx, bz = _BITS[ch]
            except KeyError:
                raise ValueError(f"bad Pauli letter {ch!r}") from None
            x |= bx << k
            z |= bz << k
        return cls(len(label), x, z)

    @property
    def label(self) -> str:
        return "".join(
            _LETTER[((self.x >> k) & 1, (self.z >> k) & 1)] for k in range(self.n)
        )

    @property
    def is_identity(self) -> bool:
        return self.x == 0 and self.z == 0

    @property
    def weight(self) -> int:
        return bin(self.x | self.z).count("1")

    def __mul__(self, other: "PauliString") -> "PauliString":
        if self.n != other.n:
            raise ValueError("qubit count mismatch")
        return PauliString(self.n, self.x ^ other.x, self.z ^ other.z)

    def commutes_with(self, other: "PauliString") -> bool:
        return (
            bin(self.x & other.z).count("1") + bin(self.z & other.x).count("1")
        ) % 2 == 0

    def restricted_to(self, qubits: tuple[int, ...]) -> "PauliString":
        """Project onto the listed qubits (new string over len(qubits))."""
        x = z = 0
        for i, q in enumerate(qubits):
            x |= ((self.x >> q) & 1) << i
            z |= ((self.z >> q) & 1) << i
        return PauliString(len(qubits), x, z)

    def matrix(self) -> np.ndarray:
        """Dense 2^n x 2^n Hermitian matrix, Y = iXZ phase convention."""
        n = self.n
        dim = 1 << n
        cols = np.arange(dim)
        rows = cols ^ self.x
        signs = np.array(
            [(-1) ** bin(self.z & j).count("1") for j in range(dim)], dtype=complex
        )
        phase = 1j ** bin(self.x & self.z).count("1")
        mat = np.zeros((dim, dim), dtype=complex)
        mat[rows, cols] = phase * signs
        return mat


def all_paulis(n: int) -> Iterator[PauliString]:
    """All 4^n Pauli strings, identity first within the (x, z) raster order."""
    for x in range(1 << n):
        for z in range(1 << n):
            yield PauliString(n, x, z)


def pauli_index(p: PauliString) -> int:
    """Raster index x * 2^n + z used by the array-based channel transforms."""
    return (p.x << p.n) | p.z


class PauliChannel:
    """Probability distribution over n-qubit Pauli strings.

    The identity weight is the process fidelity of the channel.
    """

    NORM_TOL = 1e-9
    CLAMP_FLOOR = -1e-12

    def __init__(self, n: int, weights: dict[PauliString, float], *, check: bool = True):
        self.n = n
        clean: dict[PauliString, float] = {}
        for pauli, w in weights.items():
            if pauli.n != n:
                raise ValueError("Pauli length mismatch")
            if w < self.CLAMP_FLOOR and check:
                raise ValueError(f"negative weight {w} on {pauli.label}")
            if w != 0.0:
                clean[pauli] = max(w, 0.0)
        total = sum(clean.values())
        if check and abs(total - 1.0) > self.NORM_TOL:
            raise ValueError(f"channel weights sum to {total}, not 1")
        self.weights = clean

    @property
    def fidelity(self) -> float:
        return self.weights.get(PauliString.identity(self.n), 0.0)

    def weight(self, pauli: PauliString) -> float:
        return self.weights.get(pauli, 0.0)

    def as_array(self) -> np.ndarray:
        """Weights as a dense 4^n array indexed by pauli_index."""
        arr = np.zeros(4**self.n)
        for p, w in self.weights.items():
            arr[pauli_index(p)] = w
        return arr

    @classmethod
    def from_array(cls, n: int, arr: np.ndarray, *, check: bool = True) -> "PauliChannel":
        weights = {}
        for idx in np.nonzero(arr)[0]:
            weights[PauliString(n, int(idx) >> n, int(idx) & ((1 << n) - 1))] = float(arr[idx])
        return cls(n, weights, check=check)

    def sorted_items(self) -> list[tuple[PauliString, float]]:
        return sorted(self.weights.items(), key=lambda kv: (-kv[1], kv[0].label))


def write_channel_file(path, channel: PauliChannel, meta: dict) -> None:
    """Channel file: ``# key: value`` header then ``PAULI prob`` lines, descending."""
    with open(path, "w") as fh:
        fh.write(f"# hopsim channel v1\n# n: {channel.n}\n")
        for key, val in meta.items():
            fh.write(f"# {key}: {val}\n")
        for pauli, w in channel.sorted_items():
            fh.write(f"{pauli.label} {w:.17g}\n")


def read_channel_file(path) -> tuple[PauliChannel, dict]:
    meta: dict[str, str] = {}
    weights: dict[PauliString, float] = {}
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
            weights[pauli] = float(prob)
    if n is None:
        raise ValueError(f"empty channel file {path}")
    return PauliChannel(n, weights), meta
