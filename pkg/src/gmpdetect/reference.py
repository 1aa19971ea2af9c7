"""One-shot reference detectors: exact MMSE, matched filter, decorrelator,
and the block-message formulation that is algebraically equivalent to MMSE.

All four return a :class:`~gmpdetect.results.DetectionResult` with
``iterations=0`` and ``terminated=Termination.EXACT``. Flop counts follow the
actual dense-linear-algebra route taken, counting one multiply or add as one
flop (a multiply-accumulate is two).
"""
from __future__ import annotations

import numpy as np

from .model import SystemInstance
from .results import DetectionResult, Termination


def _chol_inverse_factor(W: np.ndarray) -> tuple[np.ndarray, int]:
    """Cholesky-factor W = L L^T and return L^{-1} plus the flop cost.

    Solves and inverse diagonals are then O(K^2) products with the inverted
    triangular factor; W itself is never inverted directly. Raises
    ``numpy.linalg.LinAlgError`` if W is not positive definite.
    """
    K = W.shape[0]
    L = np.linalg.cholesky(W)
    Linv = np.linalg.inv(L)  # triangular factor inversion
    flops = K**3 // 3 + K**3
    return Linv, flops


def mmse_detect(inst: SystemInstance, y: np.ndarray) -> DetectionResult:
    """Exact linear MMSE estimate with per-user posterior variances.

    Solves the user-side normal equations when K <= M and switches to the
    antenna-side (matrix-inversion-lemma) form when M < K, so the cubic cost
    always scales with min(K, M).
    """
    H = inst.channel
    M, K = H.shape
    s = inst.noise_var
    if not s > 0:
        raise ValueError("mmse_detect requires positive noise variance")
    vx = inst.prior.variances
    if not np.all(np.isfinite(vx)):
        raise ValueError("mmse_detect requires finite prior variances")

    if K <= M:
        W = H.T @ H / s + np.diag(inst.prior.precisions)
        flops = 2 * M * K * K + K * K + K
        Linv, f = _chol_inverse_factor(W)
        flops += f
        b = H.T @ y / s
        flops += 2 * M * K + K
        x_hat = Linv.T @ (Linv @ b)
        flops += 4 * K * K
        post_var = (Linv * Linv).sum(axis=0)
        flops += 2 * K * K
    else:
        Hv = H * vx[None, :]
        S = Hv @ H.T
        S[np.diag_indices_from(S)] += s
        flops = K * M + 2 * K * M * M + M
        Lsinv, f = _chol_inverse_factor(S)
        flops += f
        z = Lsinv.T @ (Lsinv @ y)
        flops += 4 * M * M
        x_hat = vx * (H.T @ z)
        flops += 2 * K * M + K
        T = Lsinv @ H
        quad = (T * T).sum(axis=0)
        post_var = vx - vx * vx * quad
        flops += 2 * M * M * K + 2 * M * K + 3 * K

    return DetectionResult(
        estimate=x_hat,
        posterior_var=post_var,
        iterations=0,
        flops=flops,
        terminated=Termination.EXACT,
    )


def matched_filter_detect(inst: SystemInstance, y: np.ndarray) -> DetectionResult:
    """Per-user correlator x_hat_k = h_k^T y / ||h_k||^2.

    The reported per-user variance accounts for residual multi-user
    interference plus noise after the correlator:
    sum_{i != k} sigma_x_i^2 (h_k^T h_i)^2 / ||h_k||^4 + sigma_n^2/||h_k||^2.
    This normalization (unit gain on the desired user) is a documented
    choice; other conventions rescale the same statistic.
    """
    H = inst.channel
    M, K = H.shape
    s = inst.noise_var
    vx = inst.prior.variances

    G = H.T @ H
    d = np.diag(G)
    x_hat = (H.T @ y) / d
    interference = (G * G) @ vx - d * d * vx
    post_var = interference / (d * d) + s / d
    flops = 2 * M * K * K + 2 * M * K + K + 2 * K * K + 6 * K

    return DetectionResult(
        estimate=x_hat,
        posterior_var=post_var,
        iterations=0,
        flops=flops,
        terminated=Termination.EXACT,
    )


def inverse_filter_detect(inst: SystemInstance, y: np.ndarray) -> DetectionResult:
    """Decorrelator (zero-forcing) front end followed by prior combining.

    First computes the unbiased estimate x_tilde = (H^T H)^{-1} H^T y, then
    combines it with the Gaussian prior in precision form. The combining
    step makes the output identical (up to rounding) to the MMSE estimate
    for positive noise; with an infinite-variance (flat) prior the output is
    the plain decorrelator. Requires K <= M and a full-column-rank channel.
    """
    H = inst.channel
    M, K = H.shape
    if K > M:
        raise ValueError("inverse_filter_detect requires K <= M")
    s = inst.noise_var

    G = H.T @ H
    flops = 2 * M * K * K
    Lginv, f = _chol_inverse_factor(G)  # raises if H is column-rank deficient
    flops += f
    z0 = H.T @ y
    x_tilde = Lginv.T @ (Lginv @ z0)
    flops += 2 * M * K + 4 * K * K

    if s == 0.0:
        # Noiseless: the decorrelator recovers the sources exactly and the
        # posterior collapses; no prior information can move the estimate.
        return DetectionResult(
            estimate=x_tilde,
            posterior_var=np.zeros(K),
            iterations=0,
            flops=flops,
            terminated=Termination.EXACT,
        )

    # Precision-form combine of the decorrelator output (covariance
    # s * G^{-1}) with the prior; flat-prior users contribute precision 0.
    W = G / s + np.diag(inst.prior.precisions)
    flops += K * K + K
    Lwinv, f = _chol_inverse_factor(W)
    flops += f
    t = (G @ x_tilde) / s
    x_hat = Lwinv.T @ (Lwinv @ t)
    post_var = (Lwinv * Lwinv).sum(axis=0)
    flops += 2 * K * K + K + 4 * K * K + 2 * K * K

    return DetectionResult(
        estimate=x_hat,
        posterior_var=post_var,
        iterations=0,
        flops=flops,
        terminated=Termination.EXACT,
    )


def gmp_block_detect(inst: SystemInstance, y: np.ndarray) -> DetectionResult:
    """Block message combination over the whole observation vector at once.

    Treats the M observations as a single Gaussian message with materialized
    M x M weight (1/sigma_n^2) I, pushes it through the channel, and combines
    with the prior. Algebraically identical to MMSE; kept as an independent,
    deliberately naive code path (dense M x M products, plain inversion) for
    cross-validation and honest block-processing cost accounting.
    """
    H = inst.channel
    M, K = H.shape
    s = inst.noise_var
    if not s > 0:
        raise ValueError("gmp_block_detect requires positive noise variance")

    W_in = np.eye(M) / s
    T1 = W_in @ H
    W_msg = H.T @ T1
    pre = H.T @ (W_in @ y)
    flops = M + 2 * M * M * K + 2 * M * K * K + 2 * M * M + 2 * M * K

    W_post = W_msg + np.diag(inst.prior.precisions)
    V = np.linalg.inv(W_post)
    x_hat = V @ pre
    flops += K + 2 * K**3 + 2 * K * K

    return DetectionResult(
        estimate=x_hat,
        posterior_var=np.diag(V).copy(),
        iterations=0,
        flops=flops,
        terminated=Termination.EXACT,
    )
