"""Echo state reservoir: sparse random connectivity driven through tanh.

The update is ``r(t + tau) = tanh(W r(t) + w u(t + tau) + b)``. State
matrices are ``d_r x T`` arrays whose column ``t`` is the state right after
consuming ``u[t]``.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from . import rng as _rng

MAX_BUILD_ATTEMPTS = 10


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class ReservoirSpec:
    d_r: int = 300
    spectral_radius: float = 1.0
    input_scaling: float = 0.1
    bias: float = 1.0
    avg_degree: int = 6
    seed: int = 0

    def __post_init__(self):
        if self.d_r < 1:
            raise ValueError("d_r must be a positive integer")
        if not self.spectral_radius > 0:
            raise ValueError("spectral_radius must be > 0")
        if not self.input_scaling >= 0:
            raise ValueError("input_scaling must be >= 0")
        if self.avg_degree < 1 or self.avg_degree > self.d_r:
            raise ValueError("avg_degree must lie in [1, d_r]")


@dataclass(frozen=True)
class Reservoir:
    W: sp.csr_matrix
    w: np.ndarray
    b_vec: np.ndarray
    spec: ReservoirSpec | None = None

    @property
    def d_r(self) -> int:
        return self.w.shape[0]

    def with_input_weights(self, w) -> "Reservoir":
        return Reservoir(self.W, np.asarray(w, dtype=float), self.b_vec, self.spec)

    def save(self, directory) -> None:
        """Write ``W.csv`` (row,col,value triplets), ``w.csv`` and ``b.csv``."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        coo = self.W.tocoo()
        order = np.lexsort((coo.col, coo.row))
        with open(d / "W.csv", "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["row", "col", "value"])
            for k in order:
                out.writerow([int(coo.row[k]), int(coo.col[k]), format(coo.data[k], ".17g")])
        for name, vec in (("w", self.w), ("b", self.b_vec)):
            with open(d / f"{name}.csv", "w", newline="") as fh:
                out = csv.writer(fh, lineterminator="\n")
                out.writerow([name])
                for v in vec:
                    out.writerow([format(v, ".17g")])

    @classmethod
    def load(cls, directory) -> "Reservoir":
        d = Path(directory)
        w = np.loadtxt(d / "w.csv", skiprows=1, ndmin=1)
        b = np.loadtxt(d / "b.csv", skiprows=1, ndmin=1)
        trip = np.loadtxt(d / "W.csv", delimiter=",", skiprows=1, ndmin=2)
        n = w.shape[0]
        if trip.size:
            W = sp.csr_matrix((trip[:, 2], (trip[:, 0].astype(int), trip[:, 1].astype(int))), shape=(n, n))
        else:
            W = sp.csr_matrix((n, n))
        return cls(W, w, b)


def spectral_radius(W, rng: np.random.Generator | None = None, tol: float = 1e-10,
                    max_iter: int = 100_000, block: int = 24) -> float:
    """Largest eigenvalue modulus of a square matrix by block power iteration.

    A block of ``block`` vectors is repeatedly multiplied by ``W`` and
    re-orthonormalized; the estimate is the largest-modulus eigenvalue of the
    projected ``block x block`` matrix. A block (rather than one vector) keeps
    complex-conjugate pairs and clusters of near-equal moduli from stalling
    the iteration. Converged when successive estimates agree to ``tol``
    relative. A matrix whose sparsity graph has no directed cycle is
    nilpotent and gives exactly 0.0.
    """
    n, m = W.shape
    if n != m:
        raise ValueError(f"matrix must be square, got {W.shape}")
    if _is_acyclic(W):
        return 0.0
    if rng is None:
        rng = np.random.default_rng(0)
    p = min(block, n)
    X, _ = np.linalg.qr(rng.uniform(-1.0, 1.0, (n, p)))
    prev = None
    for _ in range(max_iter):
        Y = W @ X
        est = float(np.max(np.abs(np.linalg.eigvals(X.T @ Y))))
        if prev is not None and abs(est - prev) <= tol * est:
            return est
        if est == 0.0 and not np.any(Y):
            return 0.0
        prev = est
        X, _ = np.linalg.qr(Y)
    raise ConvergenceError(f"spectral radius did not converge in {max_iter} iterations")


def _is_acyclic(W) -> bool:
    A = sp.csr_matrix(W)
    A.eliminate_zeros()
    if A.diagonal().any():
        return False
    n_comp, _ = connected_components(A, directed=True, connection="strong")
    return n_comp == A.shape[0]


def erdos_renyi(d_r: int, avg_degree: int, rng: np.random.Generator) -> sp.csr_matrix:
    """Directed Erdos-Renyi matrix, self-loops allowed, weights uniform on (-1, 1)."""
    p = avg_degree / d_r
    mask = rng.random((d_r, d_r)) < p
    rows, cols = np.nonzero(mask)
    vals = rng.uniform(-1.0, 1.0, rows.size)
    return sp.csr_matrix((vals, (rows, cols)), shape=(d_r, d_r))


def build_reservoir(spec: ReservoirSpec) -> Reservoir:
    """Sample connectivity, input weights and bias for ``spec``.

    ``W`` is rescaled to spectral radius ``spec.spectral_radius``. A draw
    with zero spectral radius is resampled with the next seed.
    """
    for attempt in range(MAX_BUILD_ATTEMPTS):
        seed = spec.seed + attempt
        W = erdos_renyi(spec.d_r, spec.avg_degree, _rng.stream(seed, "connectivity"))
        radius = spectral_radius(W, rng=_rng.stream(seed, "connectivity", 1))
        if radius > 0.0:
            break
    else:
        raise ConvergenceError(
            f"connectivity had zero spectral radius in {MAX_BUILD_ATTEMPTS} attempts"
        )
    W = (W * (spec.spectral_radius / radius)).tocsr()
    w = _rng.stream(seed, "input").uniform(-spec.input_scaling, spec.input_scaling, spec.d_r)
    b_vec = np.full(spec.d_r, float(spec.bias))
    return Reservoir(W, w, b_vec, spec)


def _validate_input(res: Reservoir, u, r0):
    u = np.asarray(u, dtype=float)
    if u.ndim != 1:
        raise ValueError(f"input series must be 1-D, got shape {u.shape}")
    r0 = np.asarray(r0, dtype=float)
    if r0.shape[0] != res.d_r:
        raise ValueError(f"initial state has {r0.shape[0]} rows, reservoir has {res.d_r}")
    if not np.all(np.isfinite(u)) or not np.all(np.isfinite(r0)):
        raise ValueError("input series and initial state must be finite")
    return u, r0


def drive(res: Reservoir, u, r0=None) -> np.ndarray:
    """Run the reservoir over ``u`` from ``r0``; returns the ``d_r x T`` states.

    ``r0`` may also be ``d_r x k`` to drive ``k`` copies at once; the result is
    then ``k x d_r x T``.
    """
    if r0 is None:
        r0 = np.zeros(res.d_r)
    u, r = _validate_input(res, u, r0)
    W, w, b = res.W, res.w, res.b_vec
    T = u.shape[0]
    batch = r.ndim == 2
    out = np.empty((r.shape[1], res.d_r, T)) if batch else np.empty((res.d_r, T))
    if batch:
        b = b[:, None]
        for t in range(T):
            r = np.tanh(W @ r + (w * u[t])[:, None] + b)
            out[:, :, t] = r.T
    else:
        for t in range(T):
            r = np.tanh(W @ r + w * u[t] + b)
            out[:, t] = r
    return out


def listen(res: Reservoir, u, r0=None, washout_fraction: float = 0.1):
    """Drive over ``u`` and drop the leading ``floor(washout_fraction * T)`` columns.

    Returns ``(states, range(offset, T))``.
    """
    if not 0.0 <= washout_fraction < 1.0:
        raise ValueError("washout_fraction must be in [0, 1)")
    states = drive(res, u, r0)
    T = states.shape[-1]
    offset = int(np.floor(washout_fraction * T))
    if offset >= T:
        raise ValueError("washout leaves no retained states")
    if T < 1:
        raise ValueError("empty input series")
    return states[..., offset:], range(offset, T)


def check_state_bounds(states) -> None:
    if np.any(np.abs(states) >= 1.0):
        warnings.warn("reservoir states reached the saturation bound |r| = 1", RuntimeWarning)
