"""End-to-end checks of the command-line tool (binary path via DGCIM_BIN)."""

import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

BIN = os.environ.get("DGCIM_BIN", "build/tools/dgcim")


def run_cli(*args, **kwargs):
    return subprocess.run([BIN, *args], capture_output=True, text=True, **kwargs)


def write(path: Path, text: str) -> Path:
    path.write_text(text)
    return path


TOY = """
job.n_tokens = 8
job.d_model = 8
job.d_k = 4
job.n_heads = 2
job.n_layers = 1
job.seed = 42
job.mode = cim-trilinear
"""


CSV_HEADER = (
    "stage,reads,writes_cells,cycles,array_reads,energy_array_read_fj,energy_bg_fj,"
    "energy_dac_fj,energy_write_fj,energy_sfu_fj,energy_buffer_fj,energy_total_fj,latency_ns"
)


def test_run_trilinear_reports_zero_writes(tmp_path):
    cfg = write(tmp_path / "toy.cfg", TOY)
    out = tmp_path / "out"
    r = run_cli("run", "--config", str(cfg), "--out", str(out))
    assert r.returncode == 0, r.stderr
    report = json.loads((out / "report.json").read_text())
    assert report["mode"] == "cim-trilinear"
    assert report["totals"]["writes_cells"] == 0
    # documented stable schema: stage table columns and the JSON sections
    csv_lines = (out / "report.csv").read_text().splitlines()
    assert csv_lines[0] == CSV_HEADER
    assert csv_lines[-1].startswith("TOTAL,")
    for section in ("config_hash", "device", "stages", "totals", "hierarchy"):
        assert section in report, section
    for stage in ("scaled_query", "score", "softmax", "value_agg", "output_proj"):
        assert stage in report["stages"], stage
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 42
    assert manifest["timestamp"].endswith("Z")


def test_run_bilinear_bert_write_count(tmp_path):
    # BERT-base shape at sequence length 128; cost/write accounting only needs
    # one layer and one head simulated -- the closed form is checked in full
    # inside the acceptance suite, here we check a scaled-down slice end to end
    cfg = write(
        tmp_path / "bil.cfg",
        """
job.n_tokens = 128
job.d_model = 64
job.d_k = 64
job.n_heads = 1
job.n_layers = 1
job.seed = 7
job.mode = cim-bilinear
output.oracle_check = off
""",
    )
    out = tmp_path / "out"
    r = run_cli("run", "--config", str(cfg), "--out", str(out))
    assert r.returncode == 0, r.stderr
    report = json.loads((out / "report.json").read_text())
    # 2 operands * N * d_k * ceil(8/2) * 2 signed = 2*128*64*4*2
    assert report["totals"]["writes_cells"] == 2 * 128 * 64 * 4 * 2


def test_malformed_config_names_the_key(tmp_path):
    cfg = write(tmp_path / "bad.cfg", "job.n_tokenz = 8\n")
    r = run_cli("run", "--config", str(cfg))
    assert r.returncode == 2
    assert "job.n_tokenz" in r.stderr


def test_reproducible_outputs(tmp_path):
    cfg = write(tmp_path / "toy.cfg", TOY)
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cli("run", "--config", str(cfg), "--out", str(a)).returncode == 0
    assert run_cli("run", "--config", str(cfg), "--out", str(b)).returncode == 0
    for name in ("report.json", "report.csv", "manifest.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_debug_currents_dump(tmp_path):
    cfg = write(tmp_path / "toy.cfg", TOY)
    out = tmp_path / "out"
    r = run_cli("run", "--config", str(cfg), "--out", str(out), "--debug-currents")
    assert r.returncode == 0, r.stderr
    dump = (out / "currents.txt").read_text()
    assert len(dump.splitlines()) > 0


def test_sweep_ratios(tmp_path):
    cfg = write(
        tmp_path / "sweep.cfg",
        """
job.n_tokens = 8
job.d_model = 8
job.d_k = 4
job.n_heads = 2
job.n_layers = 1
job.seed = 11
sweep.seq = 8, 16
""",
    )
    out = tmp_path / "out"
    r = run_cli("sweep", "--config", str(cfg), "--out", str(out))
    assert r.returncode == 0, r.stderr
    lines = (out / "sweep.csv").read_text().strip().splitlines()
    header = lines[0].split(",")
    rows = [dict(zip(header, line.split(","))) for line in lines[1:]]
    assert len(rows) == 2
    # doubling the sequence doubles bilinear write cells exactly
    w8 = int(rows[0]["bilinear_writes_cells"])
    w16 = int(rows[1]["bilinear_writes_cells"])
    assert w16 == 2 * w8
    # and quadruples the trilinear score-stage reads exactly
    r8 = int(rows[0]["trilinear_score_reads"])
    r16 = int(rows[1]["trilinear_score_reads"])
    assert r16 == 4 * r8
    assert int(rows[0]["trilinear_writes_cells"]) == 0


def test_single_point_sweep_matches_run(tmp_path):
    body = """
job.n_tokens = 8
job.d_model = 8
job.d_k = 4
job.n_heads = 2
job.n_layers = 1
job.seed = 5
output.oracle_check = off
"""
    sweep_cfg = write(tmp_path / "one.cfg", body + "sweep.seq = 8\n")
    out_sweep = tmp_path / "sweep"
    assert run_cli("sweep", "--config", str(sweep_cfg), "--out", str(out_sweep)).returncode == 0
    lines = (out_sweep / "sweep.csv").read_text().strip().splitlines()
    row = dict(zip(lines[0].split(","), lines[1].split(",")))

    run_cfg = write(tmp_path / "run.cfg", body + "job.mode = cim-trilinear\n")
    out_run = tmp_path / "run"
    assert run_cli("run", "--config", str(run_cfg), "--out", str(out_run)).returncode == 0
    report = json.loads((out_run / "report.json").read_text())
    assert float(row["trilinear_energy_fj"]) == pytest.approx(
        report["totals"]["energy"]["total_fj"], rel=1e-9
    )
    assert int(row["trilinear_writes_cells"]) == report["totals"]["writes_cells"]


def test_sweep_without_axes_is_rejected(tmp_path):
    cfg = write(tmp_path / "nosweep.cfg", TOY)
    r = run_cli("sweep", "--config", str(cfg), "--out", str(tmp_path / "out"))
    assert r.returncode == 2


def test_fit_roundtrip_and_underdetermined(tmp_path):
    # synthesize noiseless data from the fitted constants
    alpha, m, g0 = 0.137, 1.54, 50.0
    lines = ["# v_bg g_ds"]
    for i in range(9):
        v = -1.0 + 0.25 * i
        g = (1 + alpha * v) * g0 + m * (1 + alpha * v) * v
        lines.append(f"{v} {g}")
    data = write(tmp_path / "gv.txt", "\n".join(lines) + "\n")
    out_file = tmp_path / "fit.cfg"
    r = run_cli("fit", str(data), "--g0", "50", "--out", str(out_file))
    assert r.returncode == 0, r.stderr
    text = out_file.read_text()
    fitted = {}
    for line in text.splitlines():
        if line.startswith("device."):
            k, v = line.split("=")
            fitted[k.strip()] = float(v)
    assert abs(fitted["device.alpha"] - alpha) < 1e-6
    assert abs(fitted["device.m_coeff"] - m) < 1e-6

    two = write(tmp_path / "two.txt", "0.0 50.0\n1.0 58.0\n")
    r2 = run_cli("fit", str(two), "--g0", "50")
    assert r2.returncode == 2


def test_missing_weights_file_is_a_simulation_error(tmp_path):
    cfg = write(tmp_path / "toy.cfg", TOY + "job.weights_path = /nonexistent/weights\n")
    r = run_cli("run", "--config", str(cfg), "--out", str(tmp_path / "out"))
    assert r.returncode == 3
    assert "simulation error" in r.stderr


def test_ideal_fidelity_matches_reference(tmp_path):
    cfg = write(tmp_path / "ideal.cfg", TOY + "job.ideal_fidelity = true\n")
    out = tmp_path / "out"
    r = run_cli("run", "--config", str(cfg), "--out", str(out))
    assert r.returncode == 0, r.stderr
    report = json.loads((out / "report.json").read_text())
    assert report["error_vs_reference"]["max_rel_error"] <= 1e-6


def test_verify_clean_pass():
    r = run_cli("verify")
    assert r.returncode == 0, r.stdout
    assert "ALL CRITERIA PASSED" in r.stdout
    assert r.stdout.count("PASS") >= 10


def test_verify_fault_injection():
    # a deliberately perturbed analog sensitivity must fail the
    # fused-equivalence criterion
    r = run_cli("verify", "--perturb-eta", "0.02")
    assert r.returncode == 1
    assert "FAIL" in r.stdout
    assert "fused-dataflow equivalence" in r.stdout


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
