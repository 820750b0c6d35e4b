import subprocess
import sys

import pytest

from smmusim.cli import EXIT_BAD_CONFIG, EXIT_FAULTS, EXIT_OK, main
from smmusim.report import parse_probe, parse_results, parse_trace


def test_probe_with_depth_override(tmp_path, capsys):
    assert main(["probe", "--depth", "8", "--out", str(tmp_path)]) == EXIT_OK
    assert "inferred micro-TLB depth: 8" in capsys.readouterr().out
    rows = parse_probe((tmp_path / "probe.csv").read_text())
    assert all(r.tlb_alloc_read + r.tlb_alloc_write == 0 for r in rows if r.n_pages < 8)
    assert all(r.tlb_alloc_read > 0 for r in rows if r.n_pages >= 8)


def test_probe_without_knee_reports_bound(tmp_path, capsys):
    assert main(["probe", "--n-max", "5", "--out", str(tmp_path)]) == EXIT_OK
    assert "inferred micro-TLB depth: >= 5" in capsys.readouterr().out


def test_bad_config_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("bogus_key: 1\n")
    assert main(["latency", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_BAD_CONFIG
    assert "bogus_key" in capsys.readouterr().err
    assert main(["probe", "--depth", "0", "--out", str(tmp_path)]) == EXIT_BAD_CONFIG


def test_latency_subset_writes_rows(tmp_path, capsys):
    cfg = tmp_path / "small.yaml"
    cfg.write_text("iterations: 200\nsmmu_enabled: [true]\nscenarios: [solo, interf_tbu]\n")
    assert main(["latency", "--config", str(cfg), "--freq", "300", "--out", str(tmp_path)]) == EXIT_OK
    rows = parse_results((tmp_path / "latency.csv").read_text())
    assert [(r.scenario, r.fpga_freq_mhz) for r in rows] == [("solo", 300), ("interf_tbu", 300)]
    assert "(base)" in capsys.readouterr().out


def test_throughput_subset(tmp_path):
    cfg = tmp_path / "tp.yaml"
    cfg.write_text("smmu_enabled: [true]\nscenarios: [solo]\nduration_us: 20\n")
    code = main(["throughput", "--config", str(cfg), "--freq", "100", "--payload", "16,4096", "--out", str(tmp_path)])
    assert code == EXIT_OK
    rows = parse_results((tmp_path / "throughput.csv").read_text())
    assert [r.payload_bytes for r in rows] == [16, 4096]
    assert rows[0].throughput_kb_s < rows[1].throughput_kb_s
    assert rows[0].avg_ns is None


def test_trace_solo_rows(tmp_path):
    assert main(["trace", "--iterations", "100", "--out", str(tmp_path)]) == EXIT_OK
    rows = parse_trace((tmp_path / "trace.csv").read_text())
    assert [r.read_path for r in rows[:63]] == ["PtwWalk"] * 63
    assert {r.read_path for r in rows[63:]} == {"MicroHit"}


def test_faults_give_nonzero_exit(tmp_path, monkeypatch):
    # leave every page unmapped so each translation faults
    import smmusim.experiments as ex

    monkeypatch.setattr(ex, "map_workloads", lambda smmu, configs: None)
    assert main(["trace", "--iterations", "5", "--out", str(tmp_path)]) == EXIT_FAULTS


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "smmusim.cli", "probe", "--depth", "3", "--out", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "inferred micro-TLB depth: 3" in proc.stdout


def test_unknown_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["plot"])
    assert exc.value.code == 2
