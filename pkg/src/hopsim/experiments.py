"""Monte Carlo campaigns, threshold estimation, power-law fits, resources.

A campaign sweeps (distance, physical rate) grid points, sampling each
circuit until either the shot budget or the failure target is reached and
recording binomial-likelihood confidence intervals.  Thresholds come from
pairwise crossings of log-log-interpolated curves; below-threshold points
feed per-distance power-law fits p_L = c(d) * p1^m(d) whose coefficients
are themselves fitted linearly in d and extrapolated for resource counts.
"""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.stats
import yaml

from .code import NoiseBudget, build_layout, hop_circuit, standard_circuit
from .decoder import build_matching_graph, count_failures, extract_dem
from .framesim import sample

DEFAULT_MAX_SHOTS = 10**6
DEFAULT_TARGET_FAILURES = 10**4
STEPS_PER_ROUND = {"hop": 9, "std": 6}
CAMPAIGN_BATCH = 20000


class CampaignError(RuntimeError):
    pass


@dataclass
class CampaignConfig:
    schedule: str
    distances: list[int]
    p1_grid: list[float]
    max_shots: int = DEFAULT_MAX_SHOTS
    target_failures: int = DEFAULT_TARGET_FAILURES
    seed: int = 0
    workers: int = 1
    output_dir: str | None = None

    def __post_init__(self):
        if self.schedule not in STEPS_PER_ROUND:
            raise ValueError(f"schedule must be hop or std, got {self.schedule!r}")
        if any(d % 2 == 0 or d < 3 for d in self.distances):
            raise ValueError("distances must be odd and >= 3")
        if list(self.p1_grid) != sorted(set(self.p1_grid)):
            raise ValueError("p1 grid must be strictly increasing")

    @classmethod
    def from_yaml(cls, path) -> "CampaignConfig":
        with open(path) as fh:
            raw = yaml.safe_load(fh)
        return cls(**raw)


@dataclass
class CampaignRow:
    schedule: str
    d: int
    p1: float
    shots: int
    failures: int
    p_l: float
    ci_low: float
    ci_high: float


def confidence_interval(
    failures: int, shots: int, level: float = 0.999
) -> tuple[float, float]:
    """Binomial relative-likelihood interval around the MLE q = f/s."""
    if shots < 1:
        raise ValueError("shots must be positive")
    q_hat = failures / shots
    cutoff = scipy.stats.chi2.ppf(level, df=1) / 2

    def loglik(q: float) -> float:
        terms = 0.0
        if failures:
            terms += failures * np.log(q)
        if failures < shots:
            terms += (shots - failures) * np.log1p(-q)
        return terms

    peak = loglik(q_hat) if 0 < q_hat < 1 else 0.0

    def deficit(q: float) -> float:
        return peak - loglik(q)

    def bisect(lo: float, hi: float, rising: bool) -> float:
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if (deficit(mid) > cutoff) == rising:
                hi = mid
            else:
                lo = mid
        return 0.5 * (lo + hi)

    low = 0.0 if failures == 0 else bisect(0.0, q_hat, rising=False)
    high = 1.0 if failures == shots else bisect(q_hat, 1.0, rising=True)
    return low, high


def _run_point(args) -> CampaignRow:
    schedule, d, p1, budget, max_shots, target_failures, seed = args
    layout = build_layout(d)
    builder = hop_circuit if schedule == "hop" else standard_circuit
    circuit = builder(layout, d, budget)
    if budget.p == 0:
        low, high = confidence_interval(0, max_shots)
        return CampaignRow(schedule, d, p1, max_shots, 0, 0.0, low, high)
    graph = build_matching_graph(extract_dem(circuit))
    shots = failures = 0
    stream = seed
    while shots < max_shots and failures < target_failures:
        batch = min(CAMPAIGN_BATCH, max_shots - shots)
        result = sample(circuit, batch, stream)
        failures += count_failures(graph, result)
        shots += batch
        stream += 1
    low, high = confidence_interval(failures, shots)
    return CampaignRow(schedule, d, p1, shots, failures, failures / shots, low, high)


def run_campaign(config: CampaignConfig) -> list[CampaignRow]:
    """Grid points are independent work items; rows sorted by (d, p1)."""
    budgets = {
        p1: NoiseBudget.for_strength(10 * p1) if p1 > 0 else NoiseBudget.zero()
        for p1 in config.p1_grid
    }
    jobs = []
    for i, d in enumerate(config.distances):
        for j, p1 in enumerate(config.p1_grid):
            point_seed = config.seed + 100_000 * (i * len(config.p1_grid) + j)
            jobs.append(
                (config.schedule, d, p1, budgets[p1],
                 config.max_shots, config.target_failures, point_seed)
            )
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            rows = list(pool.map(_run_point, jobs))
    else:
        rows = [_run_point(job) for job in jobs]
    rows.sort(key=lambda r: (r.d, r.p1))
    return rows


def estimate_threshold(rows: list[CampaignRow]) -> tuple[float, float]:
    """Mean pairwise crossing of log-log-interpolated adjacent-d curves.

    Returns (threshold, spread).  Points with zero failures are skipped.
    """
    by_d: dict[int, list[CampaignRow]] = {}
    for r in rows:
        if r.failures > 0 and r.p1 > 0:
            by_d.setdefault(r.d, []).append(r)
    dists = sorted(by_d)
    if len(dists) < 2:
        raise CampaignError("need at least two distances with nonzero failures")
    crossings = []
    for d1, d2 in zip(dists, dists[1:]):
        pts1 = sorted(by_d[d1], key=lambda r: r.p1)
        pts2 = sorted(by_d[d2], key=lambda r: r.p1)
        common = sorted(set(r.p1 for r in pts1) & set(r.p1 for r in pts2))
        if len(common) < 2:
            continue
        l1 = {r.p1: np.log(r.p_l) for r in pts1}
        l2 = {r.p1: np.log(r.p_l) for r in pts2}
        diff = [l2[p] - l1[p] for p in common]
        for k in range(len(common) - 1):
            if diff[k] == 0:
                crossings.append(common[k])
            elif diff[k] * diff[k + 1] < 0:
                x1, x2 = np.log(common[k]), np.log(common[k + 1])
                frac = diff[k] / (diff[k] - diff[k + 1])
                crossings.append(float(np.exp(x1 + frac * (x2 - x1))))
    if not crossings:
        raise CampaignError("no threshold crossing found in the sampled grid")
    return float(np.mean(crossings)), float(np.ptp(crossings))


@dataclass
class FitLine:
    d: int
    log_c: float  # log10 of the prefactor
    m: float


@dataclass
class MetaLines:
    """m(d) = m_slope*d + m_icept; log10 c(d) = c_slope*d + c_icept."""

    m_slope: float
    m_icept: float
    c_slope: float
    c_icept: float
    lines: list[FitLine] = field(default_factory=list)

    def log_p_l(self, d: int, p1: float) -> float:
        m = self.m_slope * d + self.m_icept
        log_c = self.c_slope * d + self.c_icept
        return log_c + m * np.log10(p1)


def fit_lines(points: list[tuple[int, float, float]]) -> MetaLines:
    """points: (d, p1, p_L) below-threshold samples; least squares in log10."""
    by_d: dict[int, list[tuple[float, float]]] = {}
    for d, p1, p_l in points:
        if p1 <= 0 or p_l <= 0:
            continue
        by_d.setdefault(d, []).append((np.log10(p1), np.log10(p_l)))
    lines = []
    for d in sorted(by_d):
        pts = by_d[d]
        if len(pts) < 2:
            raise CampaignError(f"need >= 2 points to fit distance {d}")
        xs, ys = zip(*pts)
        m, log_c = np.polyfit(xs, ys, 1)
        lines.append(FitLine(d, float(log_c), float(m)))
    if len(lines) < 2:
        raise CampaignError("need >= 2 distances for meta-line fits")
    ds = [ln.d for ln in lines]
    m_slope, m_icept = np.polyfit(ds, [ln.m for ln in lines], 1)
    c_slope, c_icept = np.polyfit(ds, [ln.log_c for ln in lines], 1)
    return MetaLines(
        float(m_slope), float(m_icept), float(c_slope), float(c_icept), lines
    )


def meta_lines_from_fits(lines: list[FitLine]) -> MetaLines:
    """Meta-lines from already-fitted per-distance coefficients."""
    if len(lines) < 2:
        raise CampaignError("need >= 2 fit lines")
    ds = [ln.d for ln in lines]
    m_slope, m_icept = np.polyfit(ds, [ln.m for ln in lines], 1)
    c_slope, c_icept = np.polyfit(ds, [ln.log_c for ln in lines], 1)
    return MetaLines(
        float(m_slope), float(m_icept), float(c_slope), float(c_icept), list(lines)
    )


@dataclass
class ResourceEstimate:
    p1: float
    schedule: str
    required_d: int | None
    physical_qubits: int | None
    steps_per_round: int
    spacetime_volume: int | None


MAX_RESOURCE_D = 2001


def resources(
    meta: MetaLines, p1: float, schedule: str, target_p_l: float = 1e-10
) -> ResourceEstimate:
    """Smallest odd d whose extrapolated p_L meets the target."""
    steps = STEPS_PER_ROUND[schedule]
    log_target = np.log10(target_p_l)
    for d in range(3, MAX_RESOURCE_D, 2):
        if meta.log_p_l(d, p1) <= log_target:
            qubits = 2 * d * d - 1
            return ResourceEstimate(p1, schedule, d, qubits, steps, qubits * steps * d)
    # p_L must shrink with d for a finite answer
    return ResourceEstimate(p1, schedule, None, None, steps, None)


# --- CSV with metadata header ----------------------------------------------

def write_rows(path, rows: list[CampaignRow], meta: dict) -> None:
    with open(path, "w", newline="") as fh:
        for key, val in meta.items():
            fh.write(f"# {key}: {val}\n")
        writer = csv.writer(fh)
        writer.writerow(
            ["schedule", "d", "p1", "shots", "failures", "p_L", "ci_low", "ci_high"]
        )
        for r in rows:
            writer.writerow(
                [r.schedule, r.d, f"{r.p1:.10g}", r.shots, r.failures,
                 f"{r.p_l:.10g}", f"{r.ci_low:.10g}", f"{r.ci_high:.10g}"]
            )


def read_rows(path) -> tuple[list[CampaignRow], dict]:
    meta: dict[str, str] = {}
    body = io.StringIO()
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].partition(":")
                meta[key.strip()] = val.strip()
            else:
                body.write(line)
    body.seek(0)
    rows = []
    for rec in csv.DictReader(body):
        rows.append(
            CampaignRow(
                rec["schedule"], int(rec["d"]), float(rec["p1"]), int(rec["shots"]),
                int(rec["failures"]), float(rec["p_L"]),
                float(rec["ci_low"]), float(rec["ci_high"]),
            )
        )
    return rows, meta


def ensure_dir(path) -> None:
    if path:
        os.makedirs(path, exist_ok=True)
