"""Closed-form predictions and convergence diagnostics.

Three layers:

- random-matrix MSE prediction for the exact MMSE detector (a finite-size
  F-function expression plus its three-branch large-system limit),
- spectral diagnostics for the mean iterations: measured spectral radius,
  a row-sum dominance check, and the large-system radius asymptotes
  ``beta + 2*sqrt(beta)`` (plain) and ``2*sqrt(beta)/(1+beta)`` (relaxed),
- the load threshold ``(sqrt(2)-1)^2`` below which the plain detector's
  asymptotic radius is below 1.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from .gmpid import variance_fixed_point
from .model import SystemInstance
from .sagmpid import (
    RelaxationChoice,
    WMode,
    _converged_edge_state,
    choose_w,
    relaxation_iteration_matrix,
    relaxation_system_matrix,
)

# Load factor below which beta + 2*sqrt(beta) < 1: the plain detector's
# mean iteration contracts asymptotically.
THRESHOLD_BETA = float((np.sqrt(2.0) - 1.0) ** 2)

DENSE_EIG_LIMIT = 2000


@dataclass(frozen=True)
class ConvergenceReport:
    """Convergence diagnostics for one mean-update iteration matrix.

    ``diag_dominant`` is the row-sum sufficient condition (max absolute row
    sum of the iteration matrix below 1, i.e. the underlying system matrix
    is strictly diagonally dominant). ``predicted_converges`` is that
    condition OR a measured spectral radius below 1, except where a
    stronger admissibility characterization exists (relaxed reports).
    ``beta``/``asymptotic_radius`` are NaN when not applicable.
    """

    diag_dominant: bool
    spectral_radius: float
    asymptotic_radius: float
    predicted_converges: bool
    beta: float
    threshold_beta: float = THRESHOLD_BETA
    gamma: float | None = None            # closed-form variance ratio used
    gamma_measured: float | None = None   # converged-recursion ratio, on request

    def to_dict(self) -> dict:
        return asdict(self)


class RmtMse(NamedTuple):
    """Finite-size F-expression MSE and its large-system branch value."""

    exact: float
    asymptote: float
    regime: str


def spectral_radius(
    B: np.ndarray,
    dense_limit: int = DENSE_EIG_LIMIT,
    tol: float = 1e-6,
    max_iter: int = 10000,
) -> float:
    """Largest eigenvalue magnitude of a square matrix.

    Full eigendecomposition up to ``dense_limit``; above that, a power
    iteration on the matrix (converges to the dominant magnitude for the
    diagonalizable real-spectrum matrices used here).
    """
    n = B.shape[0]
    if B.shape != (n, n):
        raise ValueError("spectral_radius requires a square matrix")
    if n <= dense_limit:
        return float(np.max(np.abs(np.linalg.eigvals(B))))
    rng = np.random.default_rng(0)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    prev = 0.0
    est = 0.0
    for _ in range(max_iter):
        Bv = B @ v
        est = float(np.linalg.norm(Bv))
        if est == 0.0:
            return 0.0
        v = Bv / est
        if abs(est - prev) < tol * max(est, 1.0):
            break
        prev = est
    return est


def convergence_check(
    B: np.ndarray,
    *,
    beta: float = float("nan"),
    asymptotic_radius: float = float("nan"),
    dense_limit: int = DENSE_EIG_LIMIT,
) -> ConvergenceReport:
    """Diagnose an affine iteration's matrix: dominance, radius, verdict.

    ``diag_dominant`` is the max absolute row sum of B being below 1 (the
    row-sum form of strict diagonal dominance of the system matrix I - B);
    the verdict is that condition OR measured spectral radius < 1.
    """
    dominant = bool(float(np.max(np.abs(B).sum(axis=1))) < 1.0)
    rho = spectral_radius(B, dense_limit=dense_limit)
    return ConvergenceReport(
        diag_dominant=dominant,
        spectral_radius=rho,
        asymptotic_radius=float(asymptotic_radius),
        predicted_converges=dominant or rho < 1.0,
        beta=float(beta),
    )


def rmt_mmse_mse(
    n_users: int, n_antennas: int, sigma_x_sq: float, sigma_n_sq: float
) -> RmtMse:
    """Random-matrix prediction of the exact MMSE detector's per-user MSE.

    ``exact`` evaluates the finite-size expression
    ``sigma_x^2 * (1 - F(snr*M, beta) / (4*snr*K))`` with
    ``F(x, z) = (sqrt(x*(1+sqrt(z))^2 + 1) - sqrt(x*(1-sqrt(z))^2 + 1))^2``
    and ``snr = sigma_x^2/sigma_n^2``. ``asymptote`` is the large-system
    branch for the load regime: ``sigma_n^2/(M-K)`` underloaded,
    ``sqrt(sigma_x^2*sigma_n^2/K)`` at K=M, ``(1-M/K)*sigma_x^2``
    overloaded.
    """
    if min(n_users, n_antennas) < 1 or sigma_x_sq <= 0 or sigma_n_sq <= 0:
        raise ValueError("rmt_mmse_mse requires positive sizes and variances")
    K, M = n_users, n_antennas
    beta = K / M
    snr = sigma_x_sq / sigma_n_sq
    x = snr * M
    root_b = np.sqrt(beta)
    F = (
        np.sqrt(x * (1.0 + root_b) ** 2 + 1.0)
        - np.sqrt(x * (1.0 - root_b) ** 2 + 1.0)
    ) ** 2
    exact = sigma_x_sq * (1.0 - F / (4.0 * snr * K))
    if K < M:
        asymptote = sigma_n_sq / (M - K)
        regime = "underloaded"
    elif K == M:
        asymptote = float(np.sqrt(sigma_x_sq * sigma_n_sq / K))
        regime = "critical"
    else:
        asymptote = (1.0 - M / K) * sigma_x_sq
        regime = "overloaded"
    return RmtMse(exact=float(exact), asymptote=float(asymptote), regime=regime)


def _measured_gamma(inst: SystemInstance) -> float:
    """Variance ratio from actually running the variance recursion."""
    vv, _ = _converged_edge_state(inst)
    mean_var = float(np.mean(vv))
    return mean_var / (inst.dims.n_users * mean_var + inst.noise_var)


def gmpid_mean_convergence_report(
    inst: SystemInstance, *, measured_gamma: bool = False
) -> ConvergenceReport:
    """Convergence diagnostics for the plain detector's mean iteration.

    Builds ``B = gamma * (H^T H - D)`` with the closed-form gamma, measures
    its radius and dominance, and reports the large-system radius
    ``beta + 2*sqrt(beta)``. ``measured_gamma=True`` additionally runs the
    variance recursion and reports the empirically converged ratio so the
    closed-form-vs-measured gap is visible.
    """
    beta = inst.dims.beta
    if not beta < 1:
        raise ValueError("mean-convergence report requires load beta < 1")
    fp = variance_fixed_point(inst)
    H = inst.channel
    B = fp.gamma * (H.T @ H)
    np.fill_diagonal(B, 0.0)  # exact hollow form
    base = convergence_check(
        B, beta=beta, asymptotic_radius=beta + 2.0 * np.sqrt(beta)
    )
    return ConvergenceReport(
        diag_dominant=base.diag_dominant,
        spectral_radius=base.spectral_radius,
        asymptotic_radius=base.asymptotic_radius,
        predicted_converges=base.predicted_converges,
        beta=base.beta,
        gamma=fp.gamma,
        gamma_measured=_measured_gamma(inst) if measured_gamma else None,
    )


def sagmpid_convergence_report(
    inst: SystemInstance, relax: RelaxationChoice | None = None
) -> ConvergenceReport:
    """Convergence diagnostics for the relaxed detector's mean iteration.

    Measures the radius of ``I - w A`` and reports the large-system radius
    ``2*sqrt(beta)/(1+beta)``. The verdict uses the admissibility
    characterization ``0 < w < 2/lambda_max(A)``, which for this symmetric
    positive-definite system matrix is equivalent to radius < 1.
    """
    beta = inst.dims.beta
    if not beta < 1:
        raise ValueError("mean-convergence report requires load beta < 1")
    if relax is None:
        relax = choose_w(inst)
    fp = variance_fixed_point(inst)
    A = relaxation_system_matrix(inst, fp.gamma)
    if relax.mode is WMode.EXACT_EIGEN and relax.lambda_max is not None:
        lam_max = relax.lambda_max
    elif A.shape[0] <= DENSE_EIG_LIMIT:
        lam_max = float(np.linalg.eigvalsh(A)[-1])
    else:
        lam_max = spectral_radius(A)  # symmetric, dominant eigenvalue positive
    B = relaxation_iteration_matrix(inst, relax.w, fp.gamma)
    base = convergence_check(
        B, beta=beta, asymptotic_radius=2.0 * np.sqrt(beta) / (1.0 + beta)
    )
    return ConvergenceReport(
        diag_dominant=base.diag_dominant,
        spectral_radius=base.spectral_radius,
        asymptotic_radius=base.asymptotic_radius,
        predicted_converges=bool(0.0 < relax.w < 2.0 / lam_max),
        beta=base.beta,
        gamma=fp.gamma,
    )
