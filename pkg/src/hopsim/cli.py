"""Command-line interface for the hopsim toolkit."""

from __future__ import annotations

import csv
import sys
import time

import click
import numpy as np

from . import code, decoder, device, experiments, framesim, open_system
from .compile_channel import (
    compilation_error,
    corrected_compile,
    naive_compile,
    read_compiled_file,
    write_compiled_file,
)
from .pauli import read_channel_file, write_channel_file


@click.group()
def main():
    """Surface-code simulation with hardware-derived correlated noise."""


@main.command()
@click.option("--lattice", type=click.Path(exists=True), default=None,
              help="YAML lattice description (default: built-in reference device).")
@click.option("--cap", type=int, default=4, show_default=True,
              help="Transmon levels kept per mode.")
def couplings(lattice, cap):
    """Print the static ZZ coupling report for a five-mode cell."""
    spec = (device.load_lattice_yaml(lattice) if lattice
            else device.reference_lattice())
    h, basis = device.build_hamiltonian(spec, excitation_cap=cap)
    report = device.zz_couplings(h, basis)
    click.echo(f"excitation cap: {cap}")
    for (j, k), zeta in sorted(report.zeta_nn_mhz.items()):
        click.echo(f"zeta_{j}{k} = {zeta:+.4f} MHz")
    worst = max(abs(v) for v in report.zeta_nnn_khz.values())
    ratio = min(abs(v) for v in report.zeta_nn_mhz.values()) / (worst / 1e3)
    click.echo(f"max |data-data zeta| = {worst:.3f} kHz")
    click.echo(f"check-data / data-data ratio = {ratio:.1f}")
    click.echo(f"min eigenstate label fidelity = {report.min_label_fidelity():.4f}")


@main.command()
@click.option("--p", type=float, required=True, help="Error rate per gate window.")
@click.option("--arity", type=click.Choice(["3", "5"]), default="5",
              show_default=True, help="Qubits touched by the parity gate.")
@click.option("--out", type=click.Path(), required=True)
def channel(p, arity, out):
    """Derive the twirled Pauli channel of a noisy parity gate."""
    n_data = int(arity) - 1
    chan = open_system.hop_channel(p, n_data=n_data)
    write_channel_file(out, chan, {"p": p, "arity": arity,
                                   "fidelity": f"{chan.fidelity:.12g}"})
    click.echo(f"wrote {len(chan.weights)}-outcome channel, "
               f"fidelity {chan.fidelity:.6f}, to {out}")


@main.command()
@click.option("--channel", "channel_path", type=click.Path(exists=True),
              required=True, help="Channel file from the `channel` command.")
@click.option("--out", type=click.Path(), required=True)
@click.option("--naive", is_flag=True, help="Skip the second-order correction.")
@click.option("--floor", type=float, default=0.0, show_default=True,
              help="Total probability of smallest stages to truncate.")
def compile(channel_path, out, naive, floor):
    """Compile a Pauli channel into single-outcome stages."""
    chan, meta = read_channel_file(channel_path)
    compiled = naive_compile(chan) if naive else corrected_compile(chan)
    if floor > 0:
        compiled = compiled.truncated(floor)
    err = compilation_error(chan, compiled)
    meta.update(method="naive" if naive else "corrected",
                floor=floor, tv_error=f"{err:.6g}")
    write_compiled_file(out, compiled, meta)
    click.echo(f"{len(compiled.stages)} stages, TV error {err:.3e}, wrote {out}")


@main.command()
@click.option("--schedule", type=click.Choice(["hop", "std"]), required=True)
@click.option("--d", type=int, required=True, help="Code distance (odd).")
@click.option("--rounds", type=int, default=None,
              help="Noisy measurement rounds (default: d).")
@click.option("--p", type=float, default=0.0, show_default=True,
              help="Physical error rate (two-qubit scale).")
@click.option("--out", type=click.Path(), required=True)
def circuit(schedule, d, rounds, p, out):
    """Build a memory-experiment circuit and write its text form."""
    budget = code.NoiseBudget.for_strength(p) if p > 0 else code.NoiseBudget.zero()
    layout = code.build_layout(d)
    rounds = d if rounds is None else rounds
    builder = code.hop_circuit if schedule == "hop" else code.standard_circuit
    circ = builder(layout, rounds, budget)
    code.save_circuit(out, circ)
    click.echo(f"{len(circ.layers)} layers, {len(circ.detectors)} detectors, "
               f"{circ.n_measurements} measurements, wrote {out}")


@main.command()
@click.option("--circuit", "circuit_path", type=click.Path(exists=True),
              required=True)
@click.option("--shots", type=int, required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def sample(circuit_path, shots, seed, out):
    """Sample detector and observable bits from a circuit."""
    circ = code.load_circuit(circuit_path)
    t0 = time.perf_counter()
    result = framesim.sample(circ, shots, seed)
    dt = time.perf_counter() - t0
    framesim.write_samples(out, result)
    click.echo(f"{shots} shots in {dt:.2f}s "
               f"({shots / dt:.0f}/s), wrote {out}")


@main.command()
@click.option("--circuit", "circuit_path", type=click.Path(exists=True),
              required=True)
@click.option("--shots", type=int, required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), default=None,
              help="Optional CSV destination for the summary row.")
def decode(circuit_path, shots, seed, out):
    """Sample a circuit and decode it with minimum-weight matching."""
    circ = code.load_circuit(circuit_path)
    graph = decoder.build_matching_graph(decoder.extract_dem(circ))
    failures, total, p_l = decoder.logical_failure_rate(circ, shots, seed, graph)
    click.echo(f"failures {failures}/{total}, p_L = {p_l:.6g}, "
               f"decomposition warnings {graph.decomposition_warnings}")
    if out:
        with open(out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["shots", "failures", "p_L", "decomposition_warnings"])
            writer.writerow([total, failures, f"{p_l:.10g}",
                             graph.decomposition_warnings])
        click.echo(f"wrote {out}")


@main.command()
@click.option("--config", type=click.Path(exists=True), required=True,
              help="Campaign YAML (schedule, distances, p1_grid, ...).")
@click.option("--out", type=click.Path(), required=True)
def threshold(config, out):
    """Run a campaign over (d, p1) and estimate the threshold crossing."""
    cfg = experiments.CampaignConfig.from_yaml(config)
    rows = experiments.run_campaign(cfg)
    experiments.write_rows(out, rows, {
        "schedule": cfg.schedule, "seed": cfg.seed,
        "max_shots": cfg.max_shots, "target_failures": cfg.target_failures,
    })
    click.echo(f"wrote {len(rows)} rows to {out}")
    try:
        p_th, spread = experiments.estimate_threshold(rows)
        click.echo(f"threshold p1 = {p_th:.4g} (crossing spread {spread:.2g})")
    except experiments.CampaignError as exc:
        click.echo(f"threshold undetermined: {exc}", err=True)
        sys.exit(1)


@main.command()
@click.option("--in", "in_path", type=click.Path(exists=True), required=True,
              help="Campaign CSV from the `threshold` command.")
@click.option("--p-max", type=float, default=None,
              help="Only fit points with p1 <= this (below-threshold cut).")
def fit(in_path, p_max):
    """Fit per-distance power laws and their linear-in-d meta-lines."""
    rows, _meta = experiments.read_rows(in_path)
    pts = [(r.d, r.p1, r.p_l) for r in rows
           if r.failures > 0 and (p_max is None or r.p1 <= p_max)]
    meta = experiments.fit_lines(pts)
    for line in meta.lines:
        click.echo(f"d={line.d}: log10 p_L = {line.m:.4f} log10 p1 "
                   f"+ {line.log_c:.4f}")
    click.echo(f"m(d)      = {meta.m_slope:.4f} d + {meta.m_icept:+.4f}")
    click.echo(f"log10c(d) = {meta.c_slope:.4f} d + {meta.c_icept:+.4f}")


@main.command()
@click.option("--in", "in_path", type=click.Path(exists=True), required=True,
              help="Campaign CSV from the `threshold` command.")
@click.option("--p1", type=float, required=True, help="Physical rate to plan for.")
@click.option("--target", type=float, default=1e-10, show_default=True,
              help="Logical error rate to reach.")
@click.option("--p-max", type=float, default=None,
              help="Only fit points with p1 <= this (below-threshold cut).")
def resources(in_path, p1, target, p_max):
    """Extrapolate the code distance and footprint needed for a target p_L."""
    rows, meta_hdr = experiments.read_rows(in_path)
    schedule = meta_hdr.get("schedule") or rows[0].schedule
    pts = [(r.d, r.p1, r.p_l) for r in rows
           if r.failures > 0 and (p_max is None or r.p1 <= p_max)]
    meta = experiments.fit_lines(pts)
    est = experiments.resources(meta, p1, schedule, target)
    if est.required_d is None:
        click.echo(f"no finite distance reaches p_L <= {target:g} at p1={p1:g} "
                   "(operating above threshold)", err=True)
        sys.exit(1)
    click.echo(f"schedule {schedule}: d = {est.required_d}, "
               f"{est.physical_qubits} qubits, "
               f"{est.steps_per_round} steps/round, "
               f"spacetime volume {est.spacetime_volume}")


if __name__ == "__main__":
    main()
