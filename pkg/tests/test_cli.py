import numpy as np
from click.testing import CliRunner

from hopsim.cli import main
from hopsim.experiments import CampaignRow, write_rows


def run(*args):
    return CliRunner().invoke(main, list(args), catch_exceptions=False)


def test_couplings_smoke():
    res = run("couplings", "--cap", "2")
    assert res.exit_code == 0
    assert "zeta_01" in res.output
    assert "ratio" in res.output


def test_channel_and_compile(tmp_path):
    chan_path = tmp_path / "chan.txt"
    res = run("channel", "--p", "0.02", "--arity", "3", "--out", str(chan_path))
    assert res.exit_code == 0
    assert chan_path.exists()

    out = tmp_path / "stages.txt"
    res = run("compile", "--channel", str(chan_path), "--out", str(out),
              "--floor", "1e-7")
    assert res.exit_code == 0
    assert "TV error" in res.output

    res_naive = run("compile", "--channel", str(chan_path),
                    "--out", str(tmp_path / "naive.txt"), "--naive")
    assert res_naive.exit_code == 0


def test_circuit_sample_decode(tmp_path):
    circ_path = tmp_path / "circ.txt"
    res = run("circuit", "--schedule", "std", "--d", "3", "--p", "0.01",
              "--out", str(circ_path))
    assert res.exit_code == 0
    assert "32 detectors" in res.output

    samples = tmp_path / "s.bin"
    res = run("sample", "--circuit", str(circ_path), "--shots", "500",
              "--seed", "4", "--out", str(samples))
    assert res.exit_code == 0
    assert samples.exists()

    dec_csv = tmp_path / "dec.csv"
    res = run("decode", "--circuit", str(circ_path), "--shots", "500",
              "--seed", "4", "--out", str(dec_csv))
    assert res.exit_code == 0
    assert "p_L" in res.output
    assert dec_csv.read_text().startswith("shots,failures,p_L")


def test_circuit_hop_schedule(tmp_path):
    circ_path = tmp_path / "hop.txt"
    res = run("circuit", "--schedule", "hop", "--d", "3", "--rounds", "2",
              "--p", "0.01", "--out", str(circ_path))
    assert res.exit_code == 0


def test_threshold_fit_resources(tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(
        "schedule: std\ndistances: [3, 5]\np1_grid: [8.0e-4, 2.0e-3]\n"
        "max_shots: 3000\ntarget_failures: 40\nseed: 2\n"
    )
    rows_path = tmp_path / "rows.csv"
    res = run("threshold", "--config", str(cfg), "--out", str(rows_path))
    # a crossing may or may not appear on this tiny grid, but the rows must
    assert rows_path.exists()
    assert ("threshold p1" in res.output) or res.exit_code == 1

    # deterministic synthetic curves for the analysis commands
    synth = tmp_path / "synth.csv"
    rows = []
    for d, m, c in ((3, 0.9, 1.5), (5, 1.9, 3.0), (7, 2.9, 4.5)):
        for p1 in (3e-4, 6e-4, 1.2e-3):
            p_l = 10.0**c * p1**m
            rows.append(CampaignRow("std", d, p1, 100000,
                                    max(1, round(p_l * 100000)), p_l,
                                    p_l / 2, p_l * 2))
    write_rows(synth, rows, {"schedule": "std"})

    res = run("fit", "--in", str(synth))
    assert res.exit_code == 0
    assert "m(d)" in res.output

    res = run("resources", "--in", str(synth), "--p1", "1e-4")
    assert res.exit_code == 0
    assert "spacetime volume" in res.output

    # far above threshold the extrapolation correctly reports failure
    res = run("resources", "--in", str(synth), "--p1", "0.3")
    assert res.exit_code == 1
