"""Seeded Monte-Carlo experiment harness.

Runs registered detectors over seeded (channel, symbols, noise)
realizations and emits deterministic CSV/JSON data files: MSE-vs-SNR
sweeps, per-iteration variance/MSE traces, convergence verdict tables, and
flops-to-target complexity comparisons.

Seeding contract: every (experiment index, trial) pair derives a
(channel_seed, realization_seed) pair from the master seed via
``model.derive_trial_seeds``; all detectors within one trial consume the
identical realization, so detector comparisons are paired. Records are
sorted by (detector, snr, trial) before emission, so any parallel
execution order would produce identical bytes.
"""
from __future__ import annotations

import json
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .classic import iterate, jacobi_for_mmse, richardson_for_mmse
from .gmpid import gmpid_detect
from .model import (
    SystemDims,
    build_instance,
    derive_trial_seeds,
    mse,
    realize,
)
from .reference import (
    gmp_block_detect,
    inverse_filter_detect,
    matched_filter_detect,
    mmse_detect,
)
from .results import Termination
from .sagmpid import WMode, choose_w, sagmpid_detect

DETECTORS = frozenset(
    {"mf", "if", "gmp", "mmse", "jacobi", "richardson", "gmpid", "sagmpid"}
)

CSV_HEADER = "detector,snr_db,trial,seed,mse,iterations,flops,terminated,wall_time_ns"


class ConfigError(ValueError):
    """Invalid experiment configuration (maps to CLI exit code 1)."""


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one experiment byte-for-byte."""

    dims: SystemDims
    snr_grid_db: list[float]
    trials: int = 1
    master_seed: int = 0
    detectors: tuple[str, ...] = ("mmse",)
    max_iter: int = 200
    eps: float | None = None
    prior_var: float = 1.0
    w_mode: str = "auto"
    output_path: str | None = None
    output_format: str = "csv"
    trace_mset: bool = False
    record_wall_time: bool = True

    def validate(self) -> None:
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.snr_grid_db:
            raise ConfigError("snr grid must be non-empty")
        if not self.detectors:
            raise ConfigError("at least one detector is required")
        unknown = [d for d in self.detectors if d not in DETECTORS]
        if unknown:
            raise ConfigError(
                f"unknown detectors {unknown}; known: {sorted(DETECTORS)}"
            )
        if self.max_iter < 1:
            raise ConfigError("max_iter must be >= 1")
        if self.eps is not None and not self.eps > 0:
            raise ConfigError("eps must be positive when given")
        if self.prior_var <= 0:
            raise ConfigError("prior_var must be positive")
        if self.output_format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        _parse_w_mode(self.w_mode)  # raises ConfigError on bad syntax


def _parse_w_mode(text: str) -> tuple[str, float | None]:
    """Split a w-mode string into (mode, manual value)."""
    if text in ("auto", "beta", "eigen", "bound"):
        return text, None
    if text.startswith("manual:"):
        try:
            value = float(text.split(":", 1)[1])
        except ValueError as exc:
            raise ConfigError(f"bad manual w value in {text!r}") from exc
        if not value > 0:
            raise ConfigError("manual w must be positive")
        return "manual", value
    raise ConfigError(
        f"unknown w-mode {text!r}; expected auto|beta|eigen|bound|manual:<v>"
    )


def resolve_relaxation(inst, w_mode: str):
    """Turn a w-mode string into a RelaxationChoice (None means auto)."""
    mode, value = _parse_w_mode(w_mode)
    if mode == "auto":
        return None
    if mode == "manual":
        return choose_w(inst, mode=WMode.MANUAL, manual_w=value)
    return choose_w(inst, mode=WMode(mode))


@dataclass(frozen=True)
class TrialRecord:
    """One detector run on one realization."""

    detector: str
    snr_db: float
    trial: int
    seed: int
    mse: float
    iterations: int
    flops: int
    terminated: str
    wall_time_ns: int


@dataclass(frozen=True)
class AggregateRecord:
    """Mean MSE of one detector at one SNR point."""

    detector: str
    snr_db: float
    mean_mse: float
    trials: int


@dataclass
class DetectorRun:
    """Uniform detector output consumed by the runners."""

    estimate: np.ndarray
    iterations: int
    flops: int
    terminated: Termination
    trace: object | None = None
    setup_flops: int = 0  # one-time cost outside the per-iteration trace


def _normal_equation_setup_flops(K: int, M: int) -> int:
    # Build A = H^T H / s + diag(p) and b = H^T y / s.
    return 2 * M * K * K + K * K + K + 2 * M * K + K


def _eigendecomposition_flops(K: int) -> int:
    # Symmetric eigenvalues-only estimate: ~(8/3) K^3 total operations.
    return (8 * K * K * K) // 3


def run_detector(
    name: str,
    inst,
    y: np.ndarray,
    *,
    max_iter: int = 200,
    eps: float | None = None,
    w_mode: str = "auto",
    truth: np.ndarray | None = None,
) -> DetectorRun:
    """Run one registered detector on one realization."""
    K, M = inst.dims.n_users, inst.dims.n_antennas
    if name == "mmse":
        r = mmse_detect(inst, y)
        return DetectorRun(r.estimate, r.iterations, r.flops, r.terminated)
    if name == "mf":
        r = matched_filter_detect(inst, y)
        return DetectorRun(r.estimate, r.iterations, r.flops, r.terminated)
    if name == "if":
        r = inverse_filter_detect(inst, y)
        return DetectorRun(r.estimate, r.iterations, r.flops, r.terminated)
    if name == "gmp":
        r = gmp_block_detect(inst, y)
        return DetectorRun(r.estimate, r.iterations, r.flops, r.terminated)
    if name == "gmpid":
        out = gmpid_detect(inst, y, eps=eps, max_iter=max_iter, truth=truth)
        r = out.result
        return DetectorRun(r.estimate, r.iterations, r.flops, r.terminated, r.trace)
    if name == "sagmpid":
        relax = resolve_relaxation(inst, w_mode)
        out = sagmpid_detect(
            inst, y, relax, eps=eps, max_iter=max_iter, truth=truth
        )
        r = out.result
        return DetectorRun(r.estimate, r.iterations, r.flops, r.terminated, r.trace)
    if name == "jacobi":
        it = jacobi_for_mmse(inst, y)
        setup = _normal_equation_setup_flops(K, M) + K * K + K
        o = iterate(it, eps=eps, max_iter=max_iter, oracle=truth)
        return DetectorRun(
            o.x, o.iterations, setup + o.flops, o.terminated, o.trace, setup
        )
    if name == "richardson":
        it, _ = richardson_for_mmse(inst, y)
        setup = (
            _normal_equation_setup_flops(K, M)
            + _eigendecomposition_flops(K)
            + K * K
            + K
        )
        o = iterate(it, eps=eps, max_iter=max_iter, oracle=truth)
        return DetectorRun(
            o.x, o.iterations, setup + o.flops, o.terminated, o.trace, setup
        )
    raise ConfigError(f"unknown detector {name!r}")


def run_experiment(config: ExperimentConfig) -> list[TrialRecord]:
    """MSE-vs-SNR sweep: every detector on the same realization per trial.

    Returns one TrialRecord per (detector, snr, trial), sorted by that key.
    Aggregate rows are derived at emission time via
    :func:`aggregate_records`.
    """
    config.validate()
    K, M = config.dims.n_users, config.dims.n_antennas
    records: list[TrialRecord] = []
    for snr_index, snr_db in enumerate(config.snr_grid_db):
        for trial in range(config.trials):
            channel_seed, realization_seed = derive_trial_seeds(
                config.master_seed, snr_index, trial
            )
            inst = build_instance(
                K,
                M,
                snr_db=float(snr_db),
                prior_var=config.prior_var,
                channel_seed=channel_seed,
            )
            real = realize(inst, realization_seed)
            for name in config.detectors:
                start = time.perf_counter_ns()
                run = run_detector(
                    name,
                    inst,
                    real.received,
                    max_iter=config.max_iter,
                    eps=config.eps,
                    w_mode=config.w_mode,
                )
                elapsed = time.perf_counter_ns() - start
                records.append(
                    TrialRecord(
                        detector=name,
                        snr_db=float(snr_db),
                        trial=trial,
                        seed=int(channel_seed),
                        mse=float(mse(run.estimate, real.symbols)),
                        iterations=run.iterations,
                        flops=run.flops,
                        terminated=run.terminated.value,
                        wall_time_ns=elapsed if config.record_wall_time else 0,
                    )
                )
    records.sort(key=lambda r: (r.detector, r.snr_db, r.trial))
    return records


def aggregate_records(records: list[TrialRecord]) -> list[AggregateRecord]:
    """Mean MSE per (detector, snr), sorted."""
    sums: dict[tuple[str, float], list[float]] = {}
    for r in records:
        sums.setdefault((r.detector, r.snr_db), []).append(r.mse)
    return [
        AggregateRecord(
            detector=det,
            snr_db=snr,
            mean_mse=float(np.mean(vals)),
            trials=len(vals),
        )
        for (det, snr), vals in sorted(sums.items())
    ]


@dataclass(frozen=True)
class MsetRow:
    """One averaged trace row: iteration, mean message variance, MSE."""

    iteration: int
    mean_variance: float
    mse: float


def run_mset_trace(config: ExperimentConfig) -> list[MsetRow]:
    """Per-iteration variance/MSE trace, averaged over trials.

    Requires exactly one detector, gmpid or sagmpid, and a single SNR
    point. Every trial runs the full iteration budget (the step-change stop
    is disabled) so traces align; rows average only iterations present in
    all trials.
    """
    config.validate()
    if len(config.detectors) != 1 or config.detectors[0] not in ("gmpid", "sagmpid"):
        raise ConfigError("mset trace requires exactly one of: gmpid, sagmpid")
    if len(config.snr_grid_db) != 1:
        raise ConfigError("mset trace requires a single SNR point")
    name = config.detectors[0]
    K, M = config.dims.n_users, config.dims.n_antennas
    var_traces: list[list[float]] = []
    mse_traces: list[list[float]] = []
    for trial in range(config.trials):
        channel_seed, realization_seed = derive_trial_seeds(
            config.master_seed, 0, trial
        )
        inst = build_instance(
            K,
            M,
            snr_db=float(config.snr_grid_db[0]),
            prior_var=config.prior_var,
            channel_seed=channel_seed,
        )
        real = realize(inst, realization_seed)
        if name == "gmpid":
            out = gmpid_detect(
                inst, real.received, eps=0.0, max_iter=config.max_iter,
                truth=real.symbols,
            )
        else:
            relax = resolve_relaxation(inst, config.w_mode)
            out = sagmpid_detect(
                inst, real.received, relax, eps=0.0, max_iter=config.max_iter,
                truth=real.symbols,
            )
        tr = out.result.trace
        var_traces.append(list(tr.mean_variance))
        mse_traces.append(list(tr.mse_to_truth))
    n = min(len(v) for v in var_traces)
    return [
        MsetRow(
            iteration=t + 1,
            mean_variance=float(np.mean([v[t] for v in var_traces])),
            mse=float(np.mean([m[t] for m in mse_traces])),
        )
        for t in range(n)
    ]


@dataclass(frozen=True)
class TableRow:
    """Convergence verdicts for all detectors at one load factor."""

    beta: float
    n_users: int
    n_antennas: int
    fraction: dict[str, float] = field(default_factory=dict)
    verdict: dict[str, str] = field(default_factory=dict)


def run_convergence_table(
    beta_list: list[float],
    n_users: int,
    snr_db: float,
    trials: int,
    *,
    detectors: tuple[str, ...] = ("jacobi", "gmpid", "richardson", "sagmpid"),
    max_iter: int = 8000,
    eps: float | None = None,
    master_seed: int = 0,
    w_mode: str = "auto",
    prior_var: float = 1.0,
    target_rel: float = 1e-4,
    pass_fraction: float = 0.95,
) -> list[TableRow]:
    """Converged/Diverged verdict table across load factors.

    A trial counts as converged when the detector's final estimate is
    within ``target_rel`` relative 2-norm error of the exact MMSE solution
    on the same realization (within the iteration budget); the verdict is
    C when at least ``pass_fraction`` of trials converge, else D.
    """
    for beta in beta_list:
        if not 0.0 < beta < 1.0:
            raise ConfigError("table loads must satisfy 0 < beta < 1")
    unknown = [d for d in detectors if d not in DETECTORS]
    if unknown:
        raise ConfigError(f"unknown detectors {unknown}")
    rows: list[TableRow] = []
    for row_index, beta in enumerate(beta_list):
        M = int(round(n_users / beta))
        successes = {d: 0 for d in detectors}
        for trial in range(trials):
            channel_seed, realization_seed = derive_trial_seeds(
                master_seed, row_index, trial
            )
            inst = build_instance(
                n_users,
                M,
                snr_db=snr_db,
                prior_var=prior_var,
                channel_seed=channel_seed,
            )
            real = realize(inst, realization_seed)
            x_ref = mmse_detect(inst, real.received).estimate
            denom = float(np.linalg.norm(x_ref))
            for name in detectors:
                run = run_detector(
                    name,
                    inst,
                    real.received,
                    max_iter=max_iter,
                    eps=eps,
                    w_mode=w_mode,
                )
                rel = float(np.linalg.norm(run.estimate - x_ref)) / denom
                if np.isfinite(rel) and rel < target_rel:
                    successes[name] += 1
        fraction = {d: successes[d] / trials for d in detectors}
        verdict = {
            d: "C" if fraction[d] >= pass_fraction else "D" for d in detectors
        }
        rows.append(
            TableRow(
                beta=float(beta),
                n_users=n_users,
                n_antennas=M,
                fraction=fraction,
                verdict=verdict,
            )
        )
    return rows


@dataclass(frozen=True)
class ComplexityRecord:
    """Flops needed to reach the MMSE-relative MSE target in one trial."""

    detector: str
    trial: int
    reach_iteration: int | None
    flops_to_target: int | None
    total_flops: int
    final_mse: float
    mmse_mse: float
    mmse_flops: int


def run_complexity(
    n_users: int,
    n_antennas: int,
    snr_db: float,
    trials: int,
    *,
    detectors: tuple[str, ...] = ("gmpid", "sagmpid", "jacobi", "richardson"),
    max_iter: int = 500,
    eps: float | None = None,
    master_seed: int = 0,
    w_mode: str = "beta",
    prior_var: float = 1.0,
    rel_target: float = 0.1,
) -> list[ComplexityRecord]:
    """Cumulative flops until the per-trial MSE is within ``rel_target``
    (relatively) of the exact MMSE detector's MSE on the same realization.

    The default w selection is the closed-form load-based rule so that
    relaxation-parameter search cost stays out of the comparison; the
    MMSE reference cost is its one-shot flop count.
    """
    unknown = [d for d in detectors if d not in DETECTORS or d == "mmse"]
    if unknown:
        raise ConfigError(f"complexity detectors must be iterative: {unknown}")
    out: list[ComplexityRecord] = []
    for trial in range(trials):
        channel_seed, realization_seed = derive_trial_seeds(master_seed, 0, trial)
        inst = build_instance(
            n_users,
            n_antennas,
            snr_db=snr_db,
            prior_var=prior_var,
            channel_seed=channel_seed,
        )
        real = realize(inst, realization_seed)
        ref = mmse_detect(inst, real.received)
        mmse_err = float(mse(ref.estimate, real.symbols))
        for name in detectors:
            run = run_detector(
                name,
                inst,
                real.received,
                max_iter=max_iter,
                eps=eps,
                w_mode=w_mode,
                truth=real.symbols,
            )
            reach = None
            flops_to_target = None
            if run.trace is not None:
                K = n_users
                series: list[float] = []
                if run.trace.mse_to_truth:
                    series = list(run.trace.mse_to_truth)
                elif run.trace.oracle_gap:
                    series = [g * g / K for g in run.trace.oracle_gap]
                for idx, m in enumerate(series):
                    if abs(m / mmse_err - 1.0) < rel_target:
                        reach = idx + 1
                        flops_to_target = (
                            run.setup_flops + run.trace.cum_flops[idx]
                        )
                        break
            out.append(
                ComplexityRecord(
                    detector=name,
                    trial=trial,
                    reach_iteration=reach,
                    flops_to_target=flops_to_target,
                    total_flops=run.flops,
                    final_mse=float(mse(run.estimate, real.symbols)),
                    mmse_mse=mmse_err,
                    mmse_flops=ref.flops,
                )
            )
    return out


def write_text(path: str, text: str) -> None:
    """Write text to a file, or to stdout when path is '-'."""
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def render_csv(
    records: list[TrialRecord],
    aggregates: list[AggregateRecord] | None = None,
) -> str:
    """Render trial records as CSV with a trailing '# aggregate' section.

    An empty record list renders as the header line only (no aggregate
    section).
    """
    lines = [CSV_HEADER]
    for r in records:
        lines.append(
            f"{r.detector},{r.snr_db},{r.trial},{r.seed},{r.mse},"
            f"{r.iterations},{r.flops},{r.terminated},{r.wall_time_ns}"
        )
    if records:
        if aggregates is None:
            aggregates = aggregate_records(records)
        lines.append("# aggregate")
        lines.append("detector,snr_db,mean_mse,trials")
        for a in aggregates:
            lines.append(f"{a.detector},{a.snr_db},{a.mean_mse},{a.trials}")
    return "\n".join(lines) + "\n"


def emit_csv(
    records: list[TrialRecord],
    path: str,
    aggregates: list[AggregateRecord] | None = None,
) -> None:
    """Write trial records as CSV (see :func:`render_csv`)."""
    write_text(path, render_csv(records, aggregates))


def emit_json(records: list[TrialRecord], path: str) -> None:
    """Write trial records as a JSON array of flat objects."""
    write_text(path, json.dumps([asdict(r) for r in records], indent=1) + "\n")


def records_from_json(path: str) -> list[TrialRecord]:
    """Parse a file written by :func:`emit_json` back into records."""
    with open(path, "r", encoding="utf-8") as fh:
        return [TrialRecord(**obj) for obj in json.load(fh)]
