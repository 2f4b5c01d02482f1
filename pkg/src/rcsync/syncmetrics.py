"""Generalized-synchronization diagnostics.

* MFNN index: for a query sample ``n``, compare the neighbor found in drive
  space with the one found in response space. Near 1 when the response is a
  smooth function of the drive, large otherwise.
* Replica test: two copies of the same reservoir, same input, different
  starting states; the copies must merge.
* Noise bound: first-order bound on the synchronization error caused by a
  perturbation of norm ``eta``, through the readout's smallest singular value.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .reservoir import Reservoir, drive

DEGENERATE_DISTANCE = 1e-12
MIN_RETAINED = 10
DEFAULT_THEILER = 10


@dataclass
class MfnnResult:
    per_sample: np.ndarray
    indices: np.ndarray
    aggregate: float
    mean: float
    n_evaluated: int
    theiler_window: int

    @property
    def inverse_aggregate(self) -> float:
        return 1.0 / self.aggregate

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["n", "mfnn"])
            for n, v in zip(self.indices, self.per_sample):
                out.writerow([int(n), format(v, ".17g")])


@dataclass
class ReplicaReport:
    divergence: np.ndarray
    converged: bool
    convergence_time: int | None
    threshold: float

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["t", "divergence"])
            for t, v in enumerate(self.divergence):
                out.writerow([t, format(v, ".17g")])


def _dist(points: np.ndarray, n: int, idx) -> np.ndarray:
    # every distance in this module goes through here so the fast path and
    # the exhaustive oracle produce bit-identical values
    diff = points[idx] - points[n]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def _check_window(T: int, theiler_window: int) -> None:
    if theiler_window < 0:
        raise ValueError("theiler_window must be >= 0")
    if T < theiler_window + 2:
        raise ValueError(
            f"no admissible neighbor: {T} samples with Theiler window {theiler_window}"
        )


def nearest_neighbor_index(points, n: int, theiler_window: int = DEFAULT_THEILER) -> int:
    """Exhaustive nearest neighbor of ``points[n]`` among ``|m - n| > theiler_window``.

    Ties go to the smallest index.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    T = points.shape[0]
    _check_window(T, theiler_window)
    admissible = np.abs(np.arange(T) - n) > theiler_window
    if not admissible.any():
        raise ValueError(f"no admissible neighbor for sample {n}")
    d = _dist(points, n, slice(None))
    d[~admissible] = np.inf
    return int(np.argmin(d))


def nearest_neighbors(points, queries, theiler_window: int = DEFAULT_THEILER,
                      block: int = 512) -> np.ndarray:
    """Nearest admissible neighbor for every index in ``queries``.

    Squared distances are screened in blocks through a Gram product; every
    screened candidate is then re-measured exactly, so the answer matches
    :func:`nearest_neighbor_index` including tie-breaking.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    T = points.shape[0]
    _check_window(T, theiler_window)
    queries = np.asarray(queries, dtype=int)
    sq = np.einsum("ij,ij->i", points, points)
    sq_max = float(sq.max())
    cols = np.arange(T)
    out = np.empty(queries.size, dtype=int)
    for start in range(0, queries.size, block):
        q = queries[start:start + block]
        d2 = sq[q, None] + sq[None, :] - 2.0 * (points[q] @ points.T)
        excluded = np.abs(q[:, None] - cols[None, :]) <= theiler_window
        d2[excluded] = np.inf
        tol = 1e-9 * (sq[q] + sq_max) + 1e-300
        mins = d2.min(axis=1)
        for k, n in enumerate(q):
            cand = np.flatnonzero(d2[k] <= mins[k] + tol[k])
            if cand.size == 1:
                out[start + k] = cand[0]
            else:
                out[start + k] = cand[np.argmin(_dist(points, n, cand))]
    return out


def _finish(X, R, queries, nnd, nnr, theiler_window) -> MfnnResult:
    dx_nnd = _dist(X, queries, nnd)
    dr_nnd = _dist(R, queries, nnd)
    dx_nnr = _dist(X, queries, nnr)
    dr_nnr = _dist(R, queries, nnr)
    keep = np.minimum.reduce([dx_nnd, dr_nnd, dx_nnr, dr_nnr]) >= DEGENERATE_DISTANCE
    # one division keeps ratios of identical distances exactly 1
    ratio = (dr_nnd[keep] * dx_nnr[keep]) / (dx_nnd[keep] * dr_nnr[keep])
    if ratio.size < MIN_RETAINED:
        raise ValueError(f"only {ratio.size} MFNN samples retained (need {MIN_RETAINED})")
    return MfnnResult(
        per_sample=ratio,
        indices=queries[keep],
        aggregate=float(np.median(ratio)),
        mean=float(np.mean(ratio)),
        n_evaluated=int(ratio.size),
        theiler_window=theiler_window,
    )


def _prepare(X, R):
    X = np.asarray(X, dtype=float)
    R = np.asarray(R, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if R.ndim == 1:
        R = R[:, None]
    if X.shape[0] != R.shape[0]:
        raise ValueError(f"drive has {X.shape[0]} samples, response has {R.shape[0]}")
    return X, R


def mfnn(X, R, theiler_window: int = DEFAULT_THEILER, subsample: int = 1) -> MfnnResult:
    """MFNN index between drive states ``X`` (``T x d_s``) and response ``R`` (``T x d_r``).

    Rows must be time-aligned. Samples where any of the four distances is
    below 1e-12 are skipped; the aggregate is the median.
    """
    X, R = _prepare(X, R)
    if subsample < 1:
        raise ValueError("subsample must be >= 1")
    queries = np.arange(0, X.shape[0], subsample)
    nnd = nearest_neighbors(X, queries, theiler_window)
    nnr = nearest_neighbors(R, queries, theiler_window)
    return _finish(X, R, queries, nnd, nnr, theiler_window)


def mfnn_bruteforce_oracle(X, R, theiler_window: int = DEFAULT_THEILER, subsample: int = 1) -> MfnnResult:
    """Same contract as :func:`mfnn`, one exhaustive scan per query. Test use only."""
    X, R = _prepare(X, R)
    queries = np.arange(0, X.shape[0], subsample)
    nnd = np.array([nearest_neighbor_index(X, n, theiler_window) for n in queries], dtype=int)
    nnr = np.array([nearest_neighbor_index(R, n, theiler_window) for n in queries], dtype=int)
    return _finish(X, R, queries, nnd, nnr, theiler_window)


def replica_test(res: Reservoir, u, r0_a, r0_b, threshold: float = 1e-6) -> ReplicaReport:
    """Drive two copies of ``res`` with the same input from ``r0_a`` and ``r0_b``.

    Converged when the state distance drops below ``threshold`` and stays
    there until the end of the series.
    """
    if not threshold > 0:
        raise ValueError("threshold must be > 0")
    states = drive(res, u, np.column_stack([r0_a, r0_b]))
    divergence = np.linalg.norm(states[0] - states[1], axis=0)
    above = np.flatnonzero(divergence >= threshold)
    if above.size == 0:
        t_conv = 0
    elif above[-1] + 1 < divergence.size:
        t_conv = int(above[-1] + 1)
    else:
        t_conv = None
    return ReplicaReport(divergence, t_conv is not None, t_conv, threshold)


def noise_error_bound(W_out, eta_norm: float) -> float:
    """``eta_norm / sigma_min(W_out)`` over the non-null singular values.

    Singular values below ``1e-12 * sigma_max`` count as null.
    """
    if eta_norm < 0:
        raise ValueError("eta_norm must be >= 0")
    s = np.linalg.svd(np.atleast_2d(np.asarray(W_out, dtype=float)), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        raise ValueError("readout has no non-null singular values")
    nonnull = s[s > 1e-12 * s[0]]
    return float(eta_norm / nonnull.min())
