"""Chaotic source systems and their RK4 integration.

Lorenz and Roessler flows, plus a pair of identical systems with linear
coupling. Trajectories are sampled on a uniform grid with spacing ``tau``;
each sample interval is covered by ``substeps`` classical RK4 steps.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

LORENZ_PARAMS = {"sigma": 10.0, "rho": 28.0, "beta": 8.0 / 3.0}
ROESSLER_PARAMS = {"a": 0.1, "b": 0.1, "c": 14.0}

DIVERGENCE_LIMIT = 1e6
WASHOUT_STEP = 0.005


class DivergenceError(RuntimeError):
    """Integration produced a non-finite or runaway state."""

    def __init__(self, step: int, state):
        self.step = step
        self.state = np.asarray(state, dtype=float)
        super().__init__(f"source diverged at sample {step}: state={self.state.tolist()}")


@dataclass(frozen=True)
class SourceSpec:
    """Autonomous source system.

    ``kind`` is one of ``"lorenz"``, ``"roessler"`` or ``"coupled"``. For the
    coupled pair, ``base`` names the subsystem and ``c_a``/``c_b`` are the
    per-component coupling constants; ``tau``/``substeps`` define the flow map
    each subsystem applies per discrete step.
    """

    kind: str = "lorenz"
    params: dict = field(default_factory=lambda: dict(LORENZ_PARAMS))
    base: str | None = None
    c_a: tuple = ()
    c_b: tuple = ()
    tau: float = 0.05
    substeps: int = 10

    def __post_init__(self):
        if self.kind not in ("lorenz", "roessler", "coupled"):
            raise ValueError(f"unknown source kind {self.kind!r}")
        for k, v in self.params.items():
            if not math.isfinite(v):
                raise ValueError(f"source parameter {k} must be finite, got {v}")
        if self.kind == "coupled":
            if self.base not in ("lorenz", "roessler"):
                raise ValueError(f"coupled base must be lorenz or roessler, got {self.base!r}")
            d = 3
            if len(self.c_a) != d or len(self.c_b) != d:
                raise ValueError(
                    f"coupling vectors must have length {d}, got {len(self.c_a)} and {len(self.c_b)}"
                )

    @property
    def dim(self) -> int:
        return 6 if self.kind == "coupled" else 3


def lorenz(sigma=10.0, rho=28.0, beta=8.0 / 3.0) -> SourceSpec:
    return SourceSpec("lorenz", {"sigma": sigma, "rho": rho, "beta": beta})


def roessler(a=0.1, b=0.1, c=14.0) -> SourceSpec:
    return SourceSpec("roessler", {"a": a, "b": b, "c": c})


def coupled(base: SourceSpec, c_a, c_b, tau=0.05, substeps=10) -> SourceSpec:
    """Two identical copies of ``base`` joined by linear coupling."""
    return SourceSpec(
        "coupled",
        dict(base.params),
        base=base.kind,
        c_a=tuple(float(c) for c in c_a),
        c_b=tuple(float(c) for c in c_b),
        tau=tau,
        substeps=substeps,
    )


def lorenz_derivative(state, params=LORENZ_PARAMS) -> np.ndarray:
    x, y, z = state
    return np.array(
        [
            params["sigma"] * (y - x),
            (params["rho"] - z) * x - y,
            x * y - params["beta"] * z,
        ]
    )


def rossler_derivative(state, params=ROESSLER_PARAMS) -> np.ndarray:
    x, y, z = state
    return np.array([-y - z, x + params["a"] * y, params["b"] + z * (x - params["c"])])


_DERIVATIVES = {"lorenz": lorenz_derivative, "roessler": rossler_derivative}


# Scalar right-hand sides for the fast integration path. Same formulas as
# above, unpacked into floats to avoid per-step array allocation.
def _lorenz_rhs(params):
    s, r, b = params["sigma"], params["rho"], params["beta"]

    def f(x, y, z):
        return s * (y - x), (r - z) * x - y, x * y - b * z

    return f


def _roessler_rhs(params):
    a, b, c = params["a"], params["b"], params["c"]

    def f(x, y, z):
        return -y - z, x + a * y, b + z * (x - c)

    return f


_SCALAR_RHS = {"lorenz": _lorenz_rhs, "roessler": _roessler_rhs}


def rk4_step(f: Callable[[np.ndarray], np.ndarray], s: np.ndarray, h: float) -> np.ndarray:
    """One classical Runge-Kutta step of size ``h`` for ``ds/dt = f(s)``."""
    k1 = f(s)
    k2 = f(s + 0.5 * h * k1)
    k3 = f(s + 0.5 * h * k2)
    k4 = f(s + h * k3)
    return s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def flow_map(spec: SourceSpec, s: np.ndarray, tau: float, substeps: int) -> np.ndarray:
    """Advance a 3-dimensional base system by ``tau`` with RK4."""
    deriv = _DERIVATIVES[spec.kind if spec.kind != "coupled" else spec.base]
    f = lambda v: deriv(v, spec.params)  # noqa: E731
    h = tau / substeps
    s = np.asarray(s, dtype=float)
    for _ in range(substeps):
        s = rk4_step(f, s, h)
    return s


def coupled_identical_step(xa, xb, spec: SourceSpec):
    """One discrete step of the coupled pair.

    ``xa' = F(xa) + c_a * (xa - xb)`` and ``xb' = F(xb) + c_b * (xb - xa)``,
    where ``F`` is the base flow over ``spec.tau``.
    """
    xa = np.asarray(xa, dtype=float)
    xb = np.asarray(xb, dtype=float)
    c_a = np.asarray(spec.c_a, dtype=float)
    c_b = np.asarray(spec.c_b, dtype=float)
    if xa.shape != xb.shape or xa.shape != c_a.shape:
        raise ValueError(
            f"dimension mismatch: xa {xa.shape}, xb {xb.shape}, couplings {c_a.shape}"
        )
    diff = xa - xb
    fa = flow_map(spec, xa, spec.tau, spec.substeps)
    fb = flow_map(spec, xb, spec.tau, spec.substeps)
    return fa + c_a * diff, fb - c_b * diff


@dataclass
class Trajectory:
    """Uniformly sampled states; row ``i`` is the state at ``t0 + i * tau``."""

    t0: float
    tau: float
    states: np.ndarray

    def __post_init__(self):
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        if self.tau <= 0:
            raise ValueError("tau must be positive")

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.tau * np.arange(len(self))

    def to_csv(self, path) -> None:
        d = self.states.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t"] + [f"x{i}" for i in range(d)])
            for t, row in zip(self.times, self.states):
                w.writerow([format(t, ".17g")] + [format(v, ".17g") for v in row])

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        t = data[:, 0]
        tau = float(t[1] - t[0]) if len(t) > 1 else 1.0
        return cls(float(t[0]), tau, data[:, 1:])


def _check(step: int, state) -> None:
    for v in state:
        if not (abs(v) <= DIVERGENCE_LIMIT):
            raise DivergenceError(step, state)


def _integrate_scalar(spec, s0, tau, n_steps, substeps):
    f = _SCALAR_RHS[spec.kind](spec.params)
    h = tau / substeps
    hh = 0.5 * h
    h6 = h / 6.0
    x, y, z = (float(v) for v in s0)
    out = np.empty((n_steps + 1, 3))
    out[0] = (x, y, z)
    for i in range(1, n_steps + 1):
        for _ in range(substeps):
            a1, b1, c1 = f(x, y, z)
            a2, b2, c2 = f(x + hh * a1, y + hh * b1, z + hh * c1)
            a3, b3, c3 = f(x + hh * a2, y + hh * b2, z + hh * c2)
            a4, b4, c4 = f(x + h * a3, y + h * b3, z + h * c3)
            x += h6 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
            y += h6 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
            z += h6 * (c1 + 2.0 * c2 + 2.0 * c3 + c4)
        if not (abs(x) <= DIVERGENCE_LIMIT and abs(y) <= DIVERGENCE_LIMIT and abs(z) <= DIVERGENCE_LIMIT):
            raise DivergenceError(i, (x, y, z))
        out[i] = (x, y, z)
    return out


def integrate(spec: SourceSpec, s0, tau: float, n_steps: int, substeps: int = 10, t0: float = 0.0) -> Trajectory:
    """Integrate ``spec`` from ``s0`` and return ``n_steps + 1`` samples.

    For the coupled pair the state is ``[xa, xb]`` and each sample applies
    :func:`coupled_identical_step` with the pair's own ``tau``/``substeps``;
    ``tau`` then only labels the time axis.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    if n_steps < 1 or substeps < 1:
        raise ValueError("n_steps and substeps must be >= 1")
    s0 = np.asarray(s0, dtype=float)
    if s0.shape != (spec.dim,):
        raise ValueError(f"initial state must have shape ({spec.dim},), got {s0.shape}")
    _check(0, s0)

    if spec.kind == "coupled":
        out = np.empty((n_steps + 1, 6))
        out[0] = s0
        xa, xb = s0[:3], s0[3:]
        for i in range(1, n_steps + 1):
            xa, xb = coupled_identical_step(xa, xb, spec)
            out[i, :3] = xa
            out[i, 3:] = xb
            _check(i, out[i])
        return Trajectory(t0, tau, out)

    return Trajectory(t0, tau, _integrate_scalar(spec, s0, tau, n_steps, substeps))


def integrate_generic(f, s0, tau: float, n_steps: int, substeps: int = 1) -> np.ndarray:
    """RK4 for an arbitrary vector field ``f(s) -> ds/dt``; returns all samples."""
    h = tau / substeps
    s = np.asarray(s0, dtype=float)
    out = np.empty((n_steps + 1,) + s.shape)
    out[0] = s
    for i in range(1, n_steps + 1):
        for _ in range(substeps):
            s = rk4_step(f, s, h)
        if not np.all(np.abs(s) <= DIVERGENCE_LIMIT):
            raise DivergenceError(i, s)
        out[i] = s
    return out


def random_initial_state(rng: np.random.Generator, dim: int = 3, scale: float = 10.0) -> np.ndarray:
    return rng.uniform(-scale, scale, size=dim)


def washout_source(spec: SourceSpec, s0, t_washout: float, step: float = WASHOUT_STEP) -> np.ndarray:
    """Integrate for ``t_washout`` time units and return the terminal state."""
    if t_washout < 0:
        raise ValueError("t_washout must be non-negative")
    s0 = np.asarray(s0, dtype=float)
    n = int(round(t_washout / step))
    if n == 0:
        return s0.copy()
    if spec.kind == "coupled":
        n_maps = max(1, int(round(t_washout / spec.tau)))
        return integrate(spec, s0, spec.tau, n_maps).states[-1]
    return integrate(spec, s0, step, n, substeps=1).states[-1]


def measure(trajectory, selector: int | Sequence[int] | None = 0) -> np.ndarray:
    """Select measured coordinates from a trajectory.

    An ``int`` gives a 1-D series, a sequence gives a ``T x k`` array and
    ``None`` returns the full state.
    """
    states = trajectory.states if isinstance(trajectory, Trajectory) else np.atleast_2d(trajectory)
    d = states.shape[1]
    if selector is None:
        return states.copy()
    idx = [selector] if np.isscalar(selector) else list(selector)
    for i in idx:
        if isinstance(i, bool) or not (0 <= i < d):
            raise IndexError(f"selector index {i} out of range for dimension {d}")
    if np.isscalar(selector):
        return states[:, selector].copy()
    return states[:, idx].copy()
