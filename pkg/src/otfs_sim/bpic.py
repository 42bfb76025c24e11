"""Bayesian parallel interference cancellation over a real linear model.

One iteration is BSO -> BSE -> DSC:

  BSO   mu_q    = xhat_q + h_q^T (y - H xhat) / ||h_q||^2
        Sig_q   = (sum_{j!=q} (h_q^T h_j)^2 v_j + ||h_q||^2 sigma2) / ||h_q||^4
  BSE   posterior over the per-axis alphabet with a Gaussian likelihood
        N(mu_q, Sig_q); xhat_q / v_q are its mean and variance
  DSC   residual statistic e_q = (h_q^T (y - H xhat_bse) / ||h_q||^2)^2,
        weight rho_q = e_prev / (e + e_prev), then convex-combine the BSE
        output with the previous iterate (estimates and variances alike).

v starts at zero; e_prev is seeded from the initial estimates so the first
DSC weight is well defined. Initialization is pluggable: MMSE or an
untrained-network output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DegenerateModelError",
    "BpicWork",
    "mmse_init",
    "bso",
    "bse",
    "dsc_residual",
    "dsc_combine",
    "bpic_detect",
]

SIGMA_FLOOR = 1e-12  # clamp for BSE variances before exponentials


class DegenerateModelError(ValueError):
    """The model has a zero column; matched-filter PIC is undefined."""


@dataclass
class BpicWork:
    """Per-model precomputation shared across iterations."""

    h: np.ndarray
    y: np.ndarray
    sigma2: float
    col_norms2: np.ndarray
    gram: np.ndarray
    gram_sq_offdiag: np.ndarray

    @classmethod
    def from_model(cls, model) -> "BpicWork":
        h = model.h
        col_norms2 = model.column_norms_sq()
        if np.any(col_norms2 == 0.0):
            raise DegenerateModelError("channel matrix has a zero column")
        gram = h.T @ h
        gram_sq = gram * gram
        np.fill_diagonal(gram_sq, 0.0)
        return cls(
            h=h,
            y=model.y,
            sigma2=model.sigma2,
            col_norms2=col_norms2,
            gram=gram,
            gram_sq_offdiag=gram_sq,
        )


def mmse_init(model) -> np.ndarray:
    """Regularized LS estimate (H^T H + sigma2 I)^{-1} H^T y via a linear solve."""
    h = model.h
    gram = h.T @ h
    a = gram + model.sigma2 * np.eye(h.shape[1])
    try:
        return np.linalg.solve(a, h.T @ model.y)
    except np.linalg.LinAlgError as exc:
        raise DegenerateModelError("singular normal equations (sigma2=0, rank-deficient H)") from exc


def bso(work: BpicWork, x_hat: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Matched-filter PIC soft estimates and their variances."""
    resid = work.y - work.h @ x_hat
    mu = x_hat + (work.h.T @ resid) / work.col_norms2
    sig = (work.gram_sq_offdiag @ v + work.col_norms2 * work.sigma2) / work.col_norms2**2
    return mu, sig


def bse(mu: np.ndarray, sig: np.ndarray, alphabet: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-symbol posterior mean/variance over the alphabet under a Gaussian
    likelihood; uniform prior. Variances are floored at SIGMA_FLOOR and the
    exponentials use max-subtraction."""
    sig = np.maximum(sig, SIGMA_FLOOR)
    d = mu[:, None] - alphabet[None, :]
    logp = -(d * d) / (2.0 * sig[:, None])
    logp -= logp.max(axis=1, keepdims=True)
    p = np.exp(logp)
    p /= p.sum(axis=1, keepdims=True)
    x_hat = p @ alphabet
    v = np.sum(p * (alphabet[None, :] - x_hat[:, None]) ** 2, axis=1)
    return x_hat, v


def dsc_residual(work: BpicWork, x_hat: np.ndarray) -> np.ndarray:
    """e_q = (h_q^T (y - H x_hat) / ||h_q||^2)^2."""
    resid = work.y - work.h @ x_hat
    return ((work.h.T @ resid) / work.col_norms2) ** 2


def dsc_combine(
    eps_prev: np.ndarray,
    eps_cur: np.ndarray,
    x_prev: np.ndarray,
    x_cur: np.ndarray,
    v_prev: np.ndarray,
    v_cur: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Residual-weighted combination. rho = e_prev/(e_cur + e_prev); when both
    residuals are zero either weight gives the same answer, use 1/2."""
    denom = eps_cur + eps_prev
    safe = np.where(denom > 0.0, denom, 1.0)
    rho = np.where(denom > 0.0, eps_prev / safe, 0.5)
    x_new = (1.0 - rho) * x_prev + rho * x_cur
    v_new = (1.0 - rho) * v_prev + rho * v_cur
    return rho, x_new, v_new


def bpic_detect(model, x_init: np.ndarray, n_iters: int = 10, trace: list | None = None) -> np.ndarray:
    """Run n_iters BSO->BSE->DSC iterations from x_init; returns the final
    estimates. Deterministic. Pass a list as trace to collect per-iteration
    diagnostics (dicts with t, residual norm, mean variance)."""
    if n_iters < 1:
        raise ValueError("n_iters must be >= 1")
    work = BpicWork.from_model(model)
    alphabet = model.constellation_1d
    x_hat = np.asarray(x_init, dtype=np.float64).copy()
    v = np.zeros_like(x_hat)
    eps_prev = dsc_residual(work, x_hat)
    for t in range(1, n_iters + 1):
        mu, sig = bso(work, x_hat, v)
        x_bse, v_bse = bse(mu, sig, alphabet)
        eps_cur = dsc_residual(work, x_bse)
        _, x_hat, v = dsc_combine(eps_prev, eps_cur, x_hat, x_bse, v, v_bse)
        eps_prev = eps_cur
        if trace is not None:
            trace.append(
                {
                    "t": t,
                    "residual_norm": float(np.linalg.norm(work.y - work.h @ x_hat)),
                    "mean_v": float(np.mean(v)),
                }
            )
    return x_hat
