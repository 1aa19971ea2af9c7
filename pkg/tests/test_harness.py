"""Tests for the Monte-Carlo experiment harness: seeded sweeps, record
emission, variance traces, verdict tables, and complexity accounting."""

import numpy as np
import pytest

from gmpdetect import SystemDims, WMode, build_instance, variance_fixed_point
from gmpdetect.harness import (
    CSV_HEADER,
    DETECTORS,
    ConfigError,
    ExperimentConfig,
    TrialRecord,
    aggregate_records,
    emit_csv,
    emit_json,
    records_from_json,
    render_csv,
    resolve_relaxation,
    run_complexity,
    run_convergence_table,
    run_detector,
    run_experiment,
    run_mset_trace,
)


def _config(**overrides):
    base = dict(
        dims=SystemDims(10, 40),
        snr_grid_db=[10.0],
        trials=1,
        master_seed=0,
        detectors=("mmse",),
        max_iter=100,
        record_wall_time=False,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


# ---------------------------------------------------------------------------
# Sweep runner
# ---------------------------------------------------------------------------


def test_single_trial_produces_one_record_and_one_aggregate():
    records = run_experiment(_config())
    assert len(records) == 1
    aggregates = aggregate_records(records)
    assert len(aggregates) == 1
    assert aggregates[0].trials == 1
    assert aggregates[0].mean_mse == records[0].mse


def test_full_registry_sweep_counts_pairing_and_order():
    cfg = _config(
        dims=SystemDims(30, 90),
        snr_grid_db=[0.0, 10.0],
        trials=2,
        detectors=tuple(sorted(DETECTORS)),
        max_iter=300,
    )
    records = run_experiment(cfg)
    assert len(records) == 8 * 2 * 2
    # paired trials: every detector at one (snr, trial) consumed the same seed
    seeds = {}
    for r in records:
        seeds.setdefault((r.snr_db, r.trial), set()).add(r.seed)
    assert all(len(s) == 1 for s in seeds.values())
    assert [(r.detector, r.snr_db, r.trial) for r in records] == sorted(
        (r.detector, r.snr_db, r.trial) for r in records
    )
    assert all(r.wall_time_ns == 0 for r in records)


def test_rerun_with_identical_config_is_byte_identical():
    cfg = _config(dims=SystemDims(8, 32), trials=3, detectors=("mmse", "gmpid"))
    first = render_csv(run_experiment(cfg))
    second = render_csv(run_experiment(cfg))
    assert first == second


def test_wall_time_recorded_when_enabled():
    records = run_experiment(_config(record_wall_time=True))
    assert all(r.wall_time_ns > 0 for r in records)


def test_exact_detectors_agree_on_shared_realizations():
    cfg = _config(
        dims=SystemDims(20, 80),
        trials=3,
        detectors=("mmse", "if", "gmp", "mf"),
    )
    records = run_experiment(cfg)
    by = {(r.detector, r.trial): r.mse for r in records}
    for trial in range(3):
        assert by[("if", trial)] == pytest.approx(by[("mmse", trial)], rel=1e-9)
        assert by[("gmp", trial)] == pytest.approx(by[("mmse", trial)], rel=1e-9)
        assert by[("mf", trial)] > by[("mmse", trial)]


def test_iterative_detector_tracks_exact_mmse_in_mean():
    cfg = ExperimentConfig(
        dims=SystemDims(100, 600),
        snr_grid_db=[-10.0, 0.0],
        trials=50,
        master_seed=7,
        detectors=("mmse", "mf", "gmpid"),
        max_iter=100,
        record_wall_time=False,
    )
    means = {
        (a.detector, a.snr_db): a.mean_mse
        for a in aggregate_records(run_experiment(cfg))
    }
    for snr in (-10.0, 0.0):
        assert abs(means[("gmpid", snr)] / means[("mmse", snr)] - 1.0) < 0.10
        assert means[("mf", snr)] > 2.0 * means[("mmse", snr)]


# ---------------------------------------------------------------------------
# Config validation and w-mode parsing
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "overrides",
    [
        {"trials": 0},
        {"snr_grid_db": []},
        {"detectors": ("zf",)},
        {"detectors": ()},
        {"max_iter": 0},
        {"eps": 0.0},
        {"prior_var": 0.0},
        {"output_format": "xml"},
        {"w_mode": "bogus"},
        {"w_mode": "manual:abc"},
        {"w_mode": "manual:-1"},
    ],
)
def test_invalid_configurations_rejected(overrides):
    with pytest.raises(ConfigError):
        _config(**overrides).validate()


def test_resolve_relaxation_modes():
    inst = build_instance(10, 40, snr_db=10.0, channel_seed=0)
    assert resolve_relaxation(inst, "auto") is None
    manual = resolve_relaxation(inst, "manual:0.5")
    assert manual.mode is WMode.MANUAL and manual.w == pytest.approx(0.5)
    beta_choice = resolve_relaxation(inst, "beta")
    assert beta_choice.w == pytest.approx(1.0 / 1.25)
    assert resolve_relaxation(inst, "eigen").mode is WMode.EXACT_EIGEN
    assert resolve_relaxation(inst, "bound").mode is WMode.GERSHGORIN_BOUND


def test_run_detector_rejects_unknown_name():
    inst = build_instance(4, 8, snr_db=10.0, channel_seed=0)
    with pytest.raises(ConfigError):
        run_detector("zf", inst, np.zeros(8))


# ---------------------------------------------------------------------------
# Record emission
# ---------------------------------------------------------------------------


def test_empty_record_list_renders_header_only():
    assert render_csv([]) == CSV_HEADER + "\n"


def test_csv_shape_with_three_records():
    cfg = _config(trials=3)
    records = run_experiment(cfg)
    lines = render_csv(records).splitlines()
    assert lines[0] == CSV_HEADER
    assert len(records) == 3
    assert lines[4] == "# aggregate"
    assert lines[5] == "detector,snr_db,mean_mse,trials"
    assert len(lines) == 7  # header + 3 records + marker + agg header + 1 agg


def test_csv_emitted_to_file(tmp_path):
    records = run_experiment(_config())
    path = tmp_path / "out.csv"
    emit_csv(records, str(path))
    text = path.read_text()
    assert text.startswith(CSV_HEADER)
    assert "# aggregate" in text


def test_json_round_trip_reproduces_records_exactly(tmp_path):
    cfg = _config(trials=2, detectors=("mmse", "gmpid"), record_wall_time=True)
    records = run_experiment(cfg)
    path = tmp_path / "records.json"
    emit_json(records, str(path))
    parsed = records_from_json(str(path))
    assert parsed == records
    assert all(isinstance(r, TrialRecord) for r in parsed)


# ---------------------------------------------------------------------------
# Variance trace
# ---------------------------------------------------------------------------


def test_mset_single_iteration_yields_single_row():
    cfg = _config(detectors=("gmpid",), max_iter=1)
    rows = run_mset_trace(cfg)
    assert len(rows) == 1
    assert rows[0].iteration == 1


def test_mset_variance_monotone_and_reaches_closed_form_limit():
    cfg = ExperimentConfig(
        dims=SystemDims(100, 600),
        snr_grid_db=[20.0],
        trials=3,
        master_seed=3,
        detectors=("gmpid",),
        max_iter=30,
    )
    rows = run_mset_trace(cfg)
    assert len(rows) == 30
    variances = [r.mean_variance for r in rows]
    assert all(a >= b - 1e-12 for a, b in zip(variances, variances[1:]))
    limit = variance_fixed_point(build_instance(100, 600, snr_db=20.0)).sigma_hat_sq
    assert abs(variances[-1] / limit - 1.0) < 0.05
    assert all(np.isfinite(r.mse) and r.mse > 0 for r in rows)


def test_mset_relaxed_variance_trace_equals_plain_trace():
    base = dict(
        dims=SystemDims(100, 600),
        snr_grid_db=[20.0],
        trials=3,
        master_seed=3,
        max_iter=30,
    )
    plain = run_mset_trace(ExperimentConfig(detectors=("gmpid",), **base))
    relaxed = run_mset_trace(ExperimentConfig(detectors=("sagmpid",), **base))
    dev = max(
        abs(a.mean_variance - b.mean_variance) for a, b in zip(plain, relaxed)
    )
    assert dev <= 1e-12


def test_mset_requires_one_iterative_message_passing_detector():
    with pytest.raises(ConfigError):
        run_mset_trace(_config(detectors=("gmpid", "sagmpid")))
    with pytest.raises(ConfigError):
        run_mset_trace(_config(detectors=("mmse",)))
    with pytest.raises(ConfigError):
        run_mset_trace(_config(detectors=("gmpid",), snr_grid_db=[0.0, 10.0]))


# ---------------------------------------------------------------------------
# Convergence verdict table
# ---------------------------------------------------------------------------


def test_table_low_load_all_converge():
    rows = run_convergence_table([0.05], 20, 40.0, 2, max_iter=2000, master_seed=5)
    assert len(rows) == 1
    row = rows[0]
    assert row.n_antennas == 400
    assert set(row.verdict) == {"jacobi", "gmpid", "richardson", "sagmpid"}
    assert all(v == "C" for v in row.verdict.values())
    assert all(f == 1.0 for f in row.fraction.values())


def test_table_rejects_invalid_loads_and_detectors():
    with pytest.raises(ConfigError):
        run_convergence_table([1.0], 20, 40.0, 1)
    with pytest.raises(ConfigError):
        run_convergence_table([0.0], 20, 40.0, 1)
    with pytest.raises(ConfigError):
        run_convergence_table([0.5], 20, 40.0, 1, detectors=("zf",))


# ---------------------------------------------------------------------------
# Complexity accounting
# ---------------------------------------------------------------------------


def test_complexity_records_reach_target_with_consistent_costs():
    records = run_complexity(50, 350, 10.0, 2)
    assert len(records) == 4 * 2
    for r in records:
        assert r.detector in {"gmpid", "sagmpid", "jacobi", "richardson"}
        assert r.mmse_flops > 0 and r.mmse_mse > 0
        assert r.reach_iteration is not None  # easy setting: everyone reaches
        assert r.reach_iteration >= 1
        assert 0 < r.flops_to_target <= r.total_flops
        assert np.isfinite(r.final_mse)
    # the reference cost is the same for every detector within a trial
    for trial in (0, 1):
        refs = {r.mmse_flops for r in records if r.trial == trial}
        assert len(refs) == 1


def test_complexity_rejects_non_iterative_detector():
    with pytest.raises(ConfigError):
        run_complexity(10, 40, 10.0, 1, detectors=("mmse",))
