"""Linear readout fitted by ridge regression."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg


class SingularSystemError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class FitReport:
    lam: float
    train_rmse: float
    condition_hint: float


def fit_ridge(R, Y, lam: float = 1e-6):
    """Solve ``W_out = Y R^T (R R^T + lam I)^-1`` by Cholesky factorization.

    ``R`` is ``d_r x T`` and ``Y`` is ``d_y x T`` (a 1-D ``Y`` is treated as a
    single row). Returns ``(W_out, FitReport)``.
    """
    R = np.asarray(R, dtype=float)
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if R.ndim != 2:
        raise ValueError(f"state matrix must be 2-D, got shape {R.shape}")
    if R.shape[1] != Y.shape[1]:
        raise ValueError(f"column count mismatch: states {R.shape[1]}, targets {Y.shape[1]}")
    if lam < 0:
        raise ValueError("lam must be >= 0")
    d_r, T = R.shape
    if T < d_r:
        warnings.warn(f"fewer samples ({T}) than reservoir units ({d_r})", RuntimeWarning)

    A = R @ R.T
    A[np.diag_indices_from(A)] += lam
    try:
        factor = scipy.linalg.cho_factor(A, lower=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        hint = " (use lam > 0)" if lam == 0 else ""
        raise SingularSystemError(f"normal matrix is not positive definite{hint}") from exc
    W_out = scipy.linalg.cho_solve(factor, R @ Y.T).T

    eig = np.linalg.eigvalsh(A)
    cond = float(eig[-1] / eig[0]) if eig[0] > 0 else float("inf")
    _, train = rmse(Y, W_out @ R)
    return W_out, FitReport(float(lam), train, cond)


def predict(W_out, R) -> np.ndarray:
    W_out = np.atleast_2d(np.asarray(W_out, dtype=float))
    R = np.asarray(R, dtype=float)
    if W_out.shape[1] != R.shape[0]:
        raise ValueError(f"readout expects {W_out.shape[1]} states, got {R.shape[0]}")
    return W_out @ R


def rmse(Y, Y_hat):
    """Per-row RMSE over time and their mean."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    Y_hat = np.atleast_2d(np.asarray(Y_hat, dtype=float))
    if Y.shape != Y_hat.shape:
        raise ValueError(f"shape mismatch: {Y.shape} vs {Y_hat.shape}")
    if Y.size == 0:
        raise ValueError("empty input")
    per = np.sqrt(np.mean((Y - Y_hat) ** 2, axis=1))
    return per, float(np.mean(per))


def ridge_objective(W_out, R, Y, lam) -> float:
    resid = np.atleast_2d(Y) - W_out @ R
    return float(np.sum(resid**2) + lam * np.sum(W_out**2))


def ridge_gradient(W_out, R, Y, lam) -> np.ndarray:
    return -2.0 * (np.atleast_2d(Y) - W_out @ R) @ R.T + 2.0 * lam * W_out


def save_readout(W_out, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        for row in np.atleast_2d(W_out):
            out.writerow([format(v, ".17g") for v in row])


def load_readout(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)
