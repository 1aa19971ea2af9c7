"""Tests for the command-line interface: exit codes, config-file layering,
output formats, and reproducibility of emitted files."""

import json
import subprocess
import sys

import pytest

from gmpdetect.cli import main
from gmpdetect.harness import CSV_HEADER

_SMALL = ["--users", "8", "--antennas", "32", "--trials", "1", "--seed", "0"]


# ---------------------------------------------------------------------------
# Exit codes
# ---------------------------------------------------------------------------


def test_help_exits_zero():
    with pytest.raises(SystemExit) as excinfo:
        main(["--help"])
    assert excinfo.value.code == 0


@pytest.mark.parametrize(
    "argv",
    [
        [],  # missing subcommand
        ["bogus"],  # unknown subcommand
        ["sweep", "--users", "abc"],  # argparse type error
        ["sweep", "--users", "0"],  # invalid dimension
        ["sweep", "--detectors", "zf"],  # unknown detector
        ["sweep", "--trials", "0"],
        ["sweep", "--config", "/nonexistent/config.json"],
        ["sweep", "--w-mode", "manual:nope"],
        ["mset", "--detectors", "mmse"],  # trace needs message passing
        ["mset", "--snr-db", "0,10"],  # trace needs a single SNR
        ["complexity", "--detectors", "mmse"],
        ["table", "--beta", "1.5"],
        ["analyze", "--snr-db", "0,10"],
    ],
)
def test_configuration_errors_exit_one(argv, capsys):
    assert main(argv) == 1
    assert "config error" in capsys.readouterr().err


def test_runtime_failure_exits_two(tmp_path, capsys):
    # a square system has no mean-convergence margin: numerical/runtime error
    code = main(
        ["analyze", "--users", "50", "--antennas", "50", "--out", str(tmp_path / "r.json")]
    )
    assert code == 2
    assert "runtime error" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# Sweep output
# ---------------------------------------------------------------------------


def test_sweep_csv_to_stdout(capsys):
    code = main(
        ["sweep", *_SMALL, "--snr-db", "10", "--detectors", "mmse", "--no-wall-time"]
    )
    assert code == 0
    out = capsys.readouterr().out
    lines = out.splitlines()
    assert lines[0] == CSV_HEADER
    assert lines[1].startswith("mmse,10.0,0,")
    assert "# aggregate" in lines


def test_sweep_json_format(tmp_path):
    path = tmp_path / "records.json"
    code = main(
        [
            "sweep",
            *_SMALL,
            "--detectors",
            "mmse,gmpid",
            "--format",
            "json",
            "--out",
            str(path),
            "--no-wall-time",
        ]
    )
    assert code == 0
    records = json.loads(path.read_text())
    assert len(records) == 2
    assert {r["detector"] for r in records} == {"mmse", "gmpid"}
    assert set(records[0]) == set(CSV_HEADER.split(","))


def test_sweep_byte_reproducible_without_wall_time(tmp_path):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for path in paths:
        argv = [
            "sweep",
            *_SMALL,
            "--trials",
            "2",
            "--detectors",
            "mmse,gmpid",
            "--out",
            str(path),
            "--no-wall-time",
        ]
        assert main(argv) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


# ---------------------------------------------------------------------------
# Config file layering
# ---------------------------------------------------------------------------


def test_config_file_supplies_values_and_flags_override(tmp_path):
    cfg = {
        "users": 6,
        "antennas": 24,
        "trials": 3,
        "detectors": "mmse",
        "snr_db": "0",
        "no_wall_time": True,
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    out_path = tmp_path / "out.csv"
    code = main(
        ["sweep", "--config", str(cfg_path), "--trials", "1", "--out", str(out_path)]
    )
    assert code == 0
    lines = out_path.read_text().splitlines()
    # --trials 1 overrides the file's 3: header + 1 record + aggregate block
    assert lines[0] == CSV_HEADER
    assert lines[1].startswith("mmse,0.0,0,")
    assert lines[2] == "# aggregate"
    assert len(lines) == 5


def test_config_file_with_unknown_key_exits_one(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"bogus_key": 1}))
    assert main(["sweep", "--config", str(cfg_path)]) == 1
    assert "bogus_key" in capsys.readouterr().err


def test_config_file_must_be_json_object(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text("[1, 2, 3]")
    assert main(["sweep", "--config", str(cfg_path)]) == 1


# ---------------------------------------------------------------------------
# Other subcommands end-to-end
# ---------------------------------------------------------------------------


def test_mset_trace_rows(tmp_path):
    path = tmp_path / "trace.csv"
    code = main(
        [
            "mset",
            "--users",
            "10",
            "--antennas",
            "60",
            "--trials",
            "1",
            "--max-iter",
            "5",
            "--out",
            str(path),
        ]
    )
    assert code == 0
    lines = path.read_text().splitlines()
    assert lines[0] == "iteration,mean_variance,mse"
    assert len(lines) == 6
    assert lines[1].split(",")[0] == "1"


def test_table_verdicts(tmp_path):
    path = tmp_path / "table.csv"
    code = main(
        [
            "table",
            "--beta",
            "0.05",
            "--users",
            "10",
            "--snr-db",
            "40",
            "--trials",
            "1",
            "--max-iter",
            "2000",
            "--out",
            str(path),
        ]
    )
    assert code == 0
    lines = path.read_text().splitlines()
    header = "beta,n_users,n_antennas,detector,fraction_converged,verdict"
    assert lines[0] == header
    assert len(lines) == 5  # four detectors at one load factor
    for line in lines[1:]:
        fields = line.split(",")
        assert fields[0] == "0.05"
        assert fields[2] == "200"
        assert fields[5] == "C"


def test_complexity_rows(tmp_path):
    path = tmp_path / "cx.csv"
    code = main(
        [
            "complexity",
            "--users",
            "20",
            "--antennas",
            "140",
            "--snr-db",
            "10",
            "--trials",
            "1",
            "--detectors",
            "gmpid",
            "--max-iter",
            "300",
            "--out",
            str(path),
        ]
    )
    assert code == 0
    lines = path.read_text().splitlines()
    assert lines[0] == (
        "detector,trial,reach_iteration,flops_to_target,total_flops,"
        "final_mse,mmse_mse,mmse_flops"
    )
    assert len(lines) == 2
    assert lines[1].startswith("gmpid,0,")


def test_analyze_report_keys(tmp_path):
    path = tmp_path / "report.json"
    code = main(
        [
            "analyze",
            "--users",
            "100",
            "--antennas",
            "600",
            "--snr-db",
            "20",
            "--seed",
            "3",
            "--out",
            str(path),
        ]
    )
    assert code == 0
    report = json.loads(path.read_text())
    assert report["beta"] == pytest.approx(1.0 / 6.0)
    assert set(report) >= {
        "variance_fixed_point",
        "mmse_mse_prediction",
        "gmpid",
        "sagmpid",
    }
    assert report["gmpid"]["predicted_converges"] is True
    assert 0 < report["variance_fixed_point"]["sigma_hat_sq"] < 1
    assert report["mmse_mse_prediction"]["regime"] == "underloaded"


def test_module_invocation_smoke(tmp_path):
    out = tmp_path / "smoke.csv"
    proc = subprocess.run(
        [
            sys.executable,
            "-m",
            "gmpdetect.cli",
            "sweep",
            *_SMALL,
            "--detectors",
            "mmse",
            "--out",
            str(out),
            "--no-wall-time",
        ],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert out.read_text().startswith(CSV_HEADER)
