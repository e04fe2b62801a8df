"""Detector error model extraction and minimum-weight matching decoding.

Every elementary fault of a noisy circuit (each depolarizing outcome, each
compiled-channel stage, each prep/measure flip) is propagated noiselessly
through the frame engine, one fault per lane, recording its detector
symptom and observable mask.  Faults are merged, decomposed into one- and
two-detector primitives, and assembled into a weighted matching graph with
edge weight ln((1-p)/p).  Decoding pairs fired detectors (with per-node
boundary copies) by exact blossom matching over precomputed shortest-path
distances, XOR-ing observable masks along the matched paths.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import networkx as nx
import numpy as np
import scipy.sparse
import scipy.sparse.csgraph

from .code import CircuitIR, Instruction
from .framesim import FrameEngine, SampleResult, _InjectedNoise, _TWO_QUBIT_PAULIS, sample

INJECTION_BATCH = 8192
_MATCH_BIG = 1e9


class DecodingError(RuntimeError):
    pass


@dataclass(frozen=True)
class Fault:
    prob: float
    detectors: frozenset[int]
    obs_mask: int


@dataclass
class DetectorErrorModel:
    n_detectors: int
    faults: list[Fault]


def merge_probability(p1: float, p2: float) -> float:
    """Probability that exactly one of two independent faults occurs."""
    return p1 * (1 - p2) + p2 * (1 - p1)


def _fault_sites(circuit: CircuitIR):
    """Yield (site, lanes-worth spec) for every elementary fault.

    Each item is (prob, kind, site, payload): kind 'pauli' with payload
    (x_mask, z_mask) over the instruction's qubits, or 'flip' for a reset
    error / measurement record flip.
    """
    for t, layer in enumerate(circuit.layers):
        for idx, ins in enumerate(layer):
            site = (t, idx)
            p = ins.param if isinstance(ins.param, float) else 0.0
            if ins.op == "DEPOL1":
                if p <= 0:
                    continue
                for i in range(len(ins.qubits)):
                    for xb, zb in ((1, 0), (1, 1), (0, 1)):
                        yield p / 3, "pauli", site, (xb << i, zb << i)
            elif ins.op == "DEPOL2":
                if p <= 0:
                    continue
                for xm, zm in _TWO_QUBIT_PAULIS:
                    yield p / 16, "pauli", site, (xm, zm)
            elif ins.op == "CHANNEL":
                for stage in circuit.channels[ins.param].stages:
                    yield stage.prob, "pauli", site, (stage.pauli.x, stage.pauli.z)
            elif ins.op in ("RESET_X", "RESET_Z", "MEASURE_X", "MEASURE_Z"):
                if p > 0:
                    yield p, "flip", site, None


def extract_dem(circuit: CircuitIR) -> DetectorErrorModel:
    """One-fault-per-lane injection through the frame engine, then merge.

    Faults with both an X and a Z part are split into those two components
    (frame propagation is linear, so symptoms and masks XOR consistently);
    each component carries the fault's full probability.  This keeps the
    matching graph free of edges that couple the two stabilizer sectors,
    which would otherwise create degenerate wrong pairings for Y errors.
    """
    engine = FrameEngine(circuit)
    components: list[tuple[float, str, tuple, tuple | None]] = []
    for p, kind, site, payload in _fault_sites(circuit):
        if kind == "pauli":
            xm, zm = payload
            if xm and zm:
                components.append((p, kind, site, (xm, 0)))
                components.append((p, kind, site, (0, zm)))
            else:
                components.append((p, kind, site, payload))
        else:
            components.append((p, kind, site, payload))
    merged: dict[tuple[frozenset[int], int], float] = {}
    for start in range(0, len(components), INJECTION_BATCH):
        chunk = components[start : start + INJECTION_BATCH]
        paulis: dict = {}
        flips: dict = {}
        for lane, (_p, kind, site, payload) in enumerate(chunk):
            if kind == "pauli":
                lanes, xs, zs = paulis.setdefault(site, ([], [], []))
                lanes.append(lane)
                xs.append(payload[0])
                zs.append(payload[1])
            else:
                flips.setdefault(site, []).append(lane)
        noise = _InjectedNoise(
            paulis={
                s: (np.array(l), np.array(x), np.array(z))
                for s, (l, x, z) in paulis.items()
            },
            flips={s: np.array(l) for s, l in flips.items()},
        )
        dets, obs = engine.run(len(chunk), noise)
        for lane, (p, _k, _s, _pl) in enumerate(chunk):
            symptom = frozenset(np.nonzero(dets[lane])[0].tolist())
            if not symptom:
                continue
            mask = int(sum(1 << k for k in np.nonzero(obs[lane])[0]))
            key = (symptom, mask)
            merged[key] = merge_probability(merged.get(key, 0.0), p)
    faults = [
        Fault(p, symptom, mask) for (symptom, mask), p in merged.items() if p > 0
    ]
    return DetectorErrorModel(len(circuit.detectors), faults)


def decompose(
    fault: Fault, primitives: dict[frozenset[int], int]
) -> list[tuple[frozenset[int], int]] | None:
    """Split a fault's symptom into disjoint primitive symptoms whose masks
    XOR to the fault's mask; None if no exact cover exists."""
    target = fault.detectors
    if len(target) <= 2:
        return [(target, fault.obs_mask)]

    prims = sorted(primitives.items(), key=lambda kv: -len(kv[0]))

    def search(remaining: frozenset[int], mask_needed: int):
        if not remaining:
            return [] if mask_needed == 0 else None
        pivot = min(remaining)
        for sym, mask in prims:
            if pivot in sym and sym <= remaining:
                rest = search(remaining - sym, mask_needed ^ mask)
                if rest is not None:
                    return [(sym, mask)] + rest
        return None

    return search(target, fault.obs_mask)


@dataclass
class MatchingGraph:
    """Weighted detector graph; node ``n_detectors`` is the boundary."""

    n_detectors: int
    edges: dict[tuple[int, int], tuple[float, int]]  # (u,v) -> (prob, mask)
    decomposition_warnings: int = 0
    _dist: np.ndarray | None = field(default=None, repr=False)
    _mask: np.ndarray | None = field(default=None, repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def boundary(self) -> int:
        return self.n_detectors

    def weight(self, prob: float) -> float:
        return float(np.log((1 - prob) / prob))

    def _prepare(self) -> None:
        n = self.n_detectors + 1
        rows, cols, vals = [], [], []
        for (u, v), (p, _mask) in self.edges.items():
            w = self.weight(p)
            if w <= 0:
                raise DecodingError(f"edge ({u},{v}) has probability {p} >= 0.5")
            rows += [u, v]
            cols += [v, u]
            vals += [w, w]
        graph = scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
        dist, pred = scipy.sparse.csgraph.dijkstra(graph, return_predecessors=True)
        if not np.all(np.isfinite(dist[:, self.boundary])):
            bad = np.nonzero(~np.isfinite(dist[:, self.boundary]))[0]
            raise DecodingError(f"detectors {bad.tolist()} cannot reach the boundary")
        mask = np.zeros((n, n), dtype=np.int64)
        for src in range(n):
            order = np.argsort(dist[src])
            for v in order:
                pr = pred[src, v]
                if pr < 0 or v == src:
                    continue
                key = (min(int(pr), int(v)), max(int(pr), int(v)))
                mask[src, v] = mask[src, pr] ^ self.edges[key][1]
        self._dist = dist
        self._mask = mask

    def decode(self, events: np.ndarray) -> int:
        """Predicted observable mask for one detector bit-vector.

        Pairing two detectors is only ever optimal when their path is
        strictly cheaper than routing both to the boundary, so such pairs
        partition the fired set into independent components; blossom
        matching runs per component (sizes 1 and 2 are closed-form).
        """
        fired = np.nonzero(events)[0]
        if self._dist is None:
            self._prepare()
        if fired.size == 0:
            return 0
        dist = self._dist
        b = self.boundary
        d_b = dist[fired, b]
        d_ff = dist[np.ix_(fired, fired)]
        useful = d_ff < (d_b[:, None] + d_b[None, :])
        np.fill_diagonal(useful, False)
        n_comp, labels = scipy.sparse.csgraph.connected_components(
            scipy.sparse.csr_matrix(useful), directed=False
        )
        out = 0
        for c in range(n_comp):
            comp = tuple(int(v) for v in fired[labels == c])
            cached = self._cache.get(comp)
            if cached is None:
                cached = self._decode_component(comp)
                self._cache[comp] = cached
            out ^= cached
        return out

    def _decode_component(self, comp: tuple[int, ...]) -> int:
        dist, mask = self._dist, self._mask
        b = self.boundary
        if len(comp) == 1:
            return int(mask[comp[0], b])
        if len(comp) == 2:
            u, v = comp
            if dist[u, v] < dist[u, b] + dist[v, b]:
                return int(mask[u, v])
            return int(mask[u, b]) ^ int(mask[v, b])
        # Perfect matching over the component with pair weight
        # min(d(u,v), d(u,b) + d(v,b)); boundary routing for both endpoints
        # is itself a valid pairing, so this halves the blossom size exactly.
        # A virtual boundary node restores even parity when needed.
        g = nx.Graph()
        k = len(comp)
        for i in range(k):
            if k % 2:
                g.add_edge(i, "B", weight=_MATCH_BIG - dist[comp[i], b])
            for j in range(i + 1, k):
                w = min(
                    dist[comp[i], comp[j]], dist[comp[i], b] + dist[comp[j], b]
                )
                g.add_edge(i, j, weight=_MATCH_BIG - w)
        matching = nx.max_weight_matching(g, maxcardinality=True)
        out = 0
        for a, bnode in matching:
            if bnode == "B":
                a, bnode = bnode, a
            if a == "B":
                out ^= int(mask[comp[bnode], b])
                continue
            u, v = comp[a], comp[bnode]
            if dist[u, v] <= dist[u, b] + dist[v, b]:
                out ^= int(mask[u, v])
            else:
                out ^= int(mask[u, b]) ^ int(mask[v, b])
        return out


def build_matching_graph(dem: DetectorErrorModel) -> MatchingGraph:
    """Decompose all faults into edges and merge edge probabilities."""
    primitives: dict[frozenset[int], int] = {}
    for f in dem.faults:
        if 1 <= len(f.detectors) <= 2:
            # prefer the more probable mask when symptoms collide
            primitives.setdefault(f.detectors, f.obs_mask)
    warnings = 0
    edge_probs: dict[tuple[tuple[int, int], int], float] = {}

    def add(sym: frozenset[int], mask: int, prob: float):
        ds = sorted(sym)
        uv = (ds[0], ds[1]) if len(ds) == 2 else (ds[0], dem.n_detectors)
        key = (uv, mask)
        edge_probs[key] = merge_probability(edge_probs.get(key, 0.0), prob)

    for f in dem.faults:
        parts = decompose(f, primitives)
        if parts is None:
            warnings += 1
            ds = sorted(f.detectors)
            parts = []
            mask_left = f.obs_mask
            for i in range(0, len(ds) - 1, 2):
                parts.append((frozenset(ds[i : i + 2]), mask_left))
                mask_left = 0
            if len(ds) % 2:
                parts.append((frozenset({ds[-1]}), mask_left))
        for sym, mask in parts:
            add(sym, mask, f.prob)

    best: dict[tuple[int, int], tuple[float, int]] = {}
    for (uv, mask), p in edge_probs.items():
        if uv not in best or p > best[uv][0]:
            best[uv] = (p, mask)
    return MatchingGraph(dem.n_detectors, best, warnings)


def logical_failure_rate(
    circuit: CircuitIR, shots: int, seed: int, graph: MatchingGraph | None = None
) -> tuple[int, int, float]:
    """Sample, decode every shot; failure = any mispredicted observable."""
    if graph is None:
        graph = build_matching_graph(extract_dem(circuit))
    result = sample(circuit, shots, seed)
    failures = count_failures(graph, result)
    return failures, shots, failures / shots


def count_failures(graph: MatchingGraph, result: SampleResult) -> int:
    failures = 0
    for row in range(result.shots):
        predicted = graph.decode(result.detection_events[row])
        actual = int(sum(1 << k for k in np.nonzero(result.observable_flips[row])[0]))
        if predicted != actual:
            failures += 1
    return failures
