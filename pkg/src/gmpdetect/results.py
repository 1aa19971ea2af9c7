"""Shared result containers: termination reasons, detection results, traces."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class Termination(Enum):
    """Why a detector stopped."""

    CONVERGED = "Converged"          # step change fell below tolerance
    MAX_ITERATIONS = "MaxIterations"  # iteration budget exhausted
    DIVERGED = "Diverged"            # estimate blew up or went non-finite
    EXACT = "Exact"                  # one-shot (non-iterative) solution


@dataclass
class IterationTrace:
    """Per-iteration progress of an iterative detector.

    Column lists all share one length; ``iteration`` counts from 1. Optional
    columns stay None unless the run was asked to record them.
    """

    iteration: list[int] = field(default_factory=list)
    step_change: list[float] = field(default_factory=list)   # ||x(t)-x(t-1)||_inf
    cum_flops: list[int] = field(default_factory=list)
    oracle_gap: list[float] | None = None        # ||x(t) - x*||_2 vs a supplied oracle
    mean_variance: list[float] | None = None     # message-passing only: avg posterior variance
    mse_to_truth: list[float] | None = None      # mean((x(t) - truth)^2) when truth supplied

    def append(
        self,
        t: int,
        step_change: float,
        cum_flops: int,
        oracle_gap: float | None = None,
        mean_variance: float | None = None,
        mse_to_truth: float | None = None,
    ) -> None:
        self.iteration.append(t)
        self.step_change.append(float(step_change))
        self.cum_flops.append(int(cum_flops))
        if oracle_gap is not None:
            if self.oracle_gap is None:
                self.oracle_gap = []
            self.oracle_gap.append(float(oracle_gap))
        if mean_variance is not None:
            if self.mean_variance is None:
                self.mean_variance = []
            self.mean_variance.append(float(mean_variance))
        if mse_to_truth is not None:
            if self.mse_to_truth is None:
                self.mse_to_truth = []
            self.mse_to_truth.append(float(mse_to_truth))

    def __len__(self) -> int:
        return len(self.iteration)


@dataclass
class DetectionResult:
    """Output of one detector run on one realized problem."""

    estimate: np.ndarray        # length-K posterior mean estimate of the sources
    posterior_var: np.ndarray   # length-K per-user posterior variance
    iterations: int             # 0 for one-shot detectors
    flops: int                  # floating-point operations actually spent
    terminated: Termination
    trace: IterationTrace | None = None  # filled by iterative detectors
