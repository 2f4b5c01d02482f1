"""Observer and forecasting experiments and their sweeps.

One run: wash out the source from a random start, integrate over the
training and test windows, feed the first coordinate to a fresh reservoir,
fit the readout on the retained training states, keep driving through the
test window, then score the prediction and measure synchronization (MFNN on
the test window, replica test on the training input).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import rng as _rng
from .dynamics import (
    SourceSpec,
    integrate,
    lorenz,
    measure,
    random_initial_state,
    roessler,
    washout_source,
)
from .readout import fit_ridge, predict, rmse
from .reservoir import ReservoirSpec, build_reservoir, drive, listen
from .syncmetrics import MfnnResult, ReplicaReport, mfnn, noise_error_bound, replica_test

SWEEP_PARAMS = ("spectral_radius", "input_scaling")
DEFAULT_SR_GRID = (0.05, 0.1, 0.2, 0.4, 0.7, 1.0, 1.4, 2.0, 3.0)
DEFAULT_OMEGA_GRID = (0.01, 0.03, 0.1, 0.3, 1.0, 3.0)


@dataclass(frozen=True)
class ExperimentConfig:
    source: SourceSpec = field(default_factory=lorenz)
    task: str = "observer"
    horizon_steps: int = 5
    reservoir: ReservoirSpec = field(default_factory=ReservoirSpec)
    tau: float = 0.05
    substeps: int = 10
    t_train: tuple = (-100.0, 0.0)
    t_test: tuple = (0.0, 80.0)
    washout_fraction: float = 0.1
    lam: float = 1e-6
    repetitions: int = 10
    root_seed: int = 0
    source_washout: float = 100.0
    theiler_window: int = 10
    mfnn_subsample: int = 1
    replica_threshold: float = 1e-6

    def __post_init__(self):
        if self.task not in ("observer", "forecast"):
            raise ValueError(f"task must be observer or forecast, got {self.task!r}")
        if self.source.kind == "coupled":
            raise ValueError("experiments need a lorenz or roessler source")
        if not self.tau > 0:
            raise ValueError("tau must be > 0")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")
        if self.horizon_steps < 0:
            raise ValueError("horizon_steps must be >= 0")
        if not (self.t_train[0] < self.t_train[1] <= self.t_test[0] < self.t_test[1]):
            raise ValueError("need t_train start < end <= t_test start < end")
        if not 0.0 <= self.washout_fraction < 1.0:
            raise ValueError("washout_fraction must be in [0, 1)")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.source_washout < 0:
            raise ValueError("source_washout must be >= 0")
        if self.theiler_window < 0 or self.mfnn_subsample < 1:
            raise ValueError("theiler_window must be >= 0 and mfnn_subsample >= 1")
        if not self.replica_threshold > 0:
            raise ValueError("replica_threshold must be > 0")

    def _samples(self, a: float, b: float) -> int:
        return int(round((b - a) / self.tau))

    @property
    def n_train(self) -> int:
        return self._samples(*self.t_train)

    @property
    def test_offset(self) -> int:
        return self._samples(self.t_train[0], self.t_test[0])

    @property
    def n_test(self) -> int:
        return self._samples(*self.t_test)

    @property
    def n_total(self) -> int:
        return self.test_offset + self.n_test


def lorenz_config(**kw) -> ExperimentConfig:
    return ExperimentConfig(**kw)


def roessler_config(**kw) -> ExperimentConfig:
    """Roessler preset: slower dynamics, so coarser sampling and longer windows."""
    base = dict(source=roessler(), tau=0.5, substeps=100, t_train=(-200.0, 0.0), t_test=(0.0, 160.0))
    base.update(kw)
    return ExperimentConfig(**base)


def with_param(cfg: ExperimentConfig, param: str, value: float) -> ExperimentConfig:
    if param not in SWEEP_PARAMS:
        raise ValueError(f"unknown sweep parameter {param!r}; choose from {SWEEP_PARAMS}")
    return replace(cfg, reservoir=replace(cfg.reservoir, **{param: float(value)}))


@dataclass
class MetricRecord:
    task: str
    source: str
    param: str = ""
    value: float = math.nan
    value_index: int = 0
    repetition: int = 0
    run_seed: int = 0
    spectral_radius: float = math.nan
    input_scaling: float = math.nan
    reservoir_dim: int = 0
    bias: float = math.nan
    lam: float = math.nan
    test_rmse: float = math.nan
    test_rmse_coords: tuple = ()
    train_rmse: float = math.nan
    mfnn_aggregate: float = math.nan
    mfnn_mean: float = math.nan
    inverse_mfnn: float = math.nan
    replica_converged: bool = False
    replica_convergence_time: int | None = None
    status: str = "ok"
    error: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"


RECORD_COLUMNS = [f.name for f in fields(MetricRecord)]


@dataclass
class Simulation:
    """Everything the tasks share: source, input, reservoir and its states."""

    cfg: ExperimentConfig
    run_seed: int
    source_start: np.ndarray
    states: np.ndarray  # n_total x 3 source samples
    u: np.ndarray
    reservoir: object
    train_states: np.ndarray  # d_r x (n_train - washout), retained columns only
    test_states: np.ndarray  # d_r x n_test
    washout: int

    @property
    def source_test(self) -> np.ndarray:
        o = self.cfg.test_offset
        return self.states[o:o + self.cfg.n_test]


@dataclass
class RunOutcome:
    record: MetricRecord
    mfnn: MfnnResult
    replica: ReplicaReport
    W_out: np.ndarray
    simulation: Simulation


def source_start(cfg: ExperimentConfig, run_seed: int, fresh_index: int | None = None) -> np.ndarray:
    """On-attractor initial state: uniform start in [-10, 10]^3, then washout."""
    if fresh_index is None:
        gen = _rng.stream(run_seed, "source")
    else:
        gen = _rng.stream(run_seed, "fresh", fresh_index)
    return washout_source(cfg.source, random_initial_state(gen, cfg.source.dim), cfg.source_washout)


def reservoir_spec(cfg: ExperimentConfig, run_seed: int) -> ReservoirSpec:
    return replace(cfg.reservoir, seed=_rng.derive_seed(run_seed, _rng.STREAMS["reservoir"]))


def _listen_and_continue(cfg, res, u):
    """Listen over the training window, then keep driving into the test window.

    Returns the retained training states, their column range and the test states.
    """
    n_train, offset = cfg.n_train, cfg.test_offset
    train_states, kept = listen(res, u[:n_train], None, cfg.washout_fraction)
    rest = drive(res, u[n_train:], train_states[:, -1])
    return train_states, kept, rest[:, offset - n_train:]


def simulate(cfg: ExperimentConfig, run_seed: int, start=None) -> Simulation:
    s0 = source_start(cfg, run_seed) if start is None else np.asarray(start, dtype=float)
    traj = integrate(cfg.source, s0, cfg.tau, cfg.n_total - 1, cfg.substeps, t0=cfg.t_train[0])
    u = measure(traj, 0)
    res = build_reservoir(reservoir_spec(cfg, run_seed))
    train_states, kept, test_states = _listen_and_continue(cfg, res, u)
    return Simulation(cfg, run_seed, s0, traj.states, u, res, train_states, test_states, kept.start)


def task_targets(cfg: ExperimentConfig, sim: Simulation):
    """``(R_train, Y_train, R_test, Y_test)`` for the configured task."""
    n_train, offset, n_test = cfg.n_train, cfg.test_offset, cfg.n_test
    w = sim.washout
    if cfg.task == "observer":
        Y_all = sim.states[:, 1:].T
        return (
            sim.train_states,
            Y_all[:, w:n_train],
            sim.test_states,
            Y_all[:, offset:offset + n_test],
        )
    h = cfg.horizon_steps
    if h >= n_train - w or h >= n_test:
        raise ValueError(f"forecast horizon {h} exceeds the series length")
    u = sim.u
    u_test = u[offset:offset + n_test]
    # y(t) = u(t + h): the last h samples of each phase have no target
    return (
        sim.train_states[:, :n_train - w - h],
        u[w + h:n_train][None, :],
        sim.test_states[:, :n_test - h],
        u_test[h:][None, :],
    )


def run_task(cfg: ExperimentConfig, run_seed: int | None = None, **labels) -> RunOutcome:
    """Full pipeline for one seeded run; ``labels`` fill the sweep columns of the record."""
    seed = cfg.root_seed if run_seed is None else run_seed
    sim = simulate(cfg, seed)
    R_tr, Y_tr, R_te, Y_te = task_targets(cfg, sim)
    W_out, report = fit_ridge(R_tr, Y_tr, cfg.lam)
    per, scalar = rmse(Y_te, predict(W_out, R_te))

    sync = mfnn(sim.source_test, sim.test_states.T, cfg.theiler_window, cfg.mfnn_subsample)
    r0_b = _rng.stream(seed, "r0").uniform(-1.0, 1.0, sim.reservoir.d_r)
    replica = replica_test(
        sim.reservoir, sim.u[:cfg.n_train], np.zeros(sim.reservoir.d_r), r0_b, cfg.replica_threshold
    )
    spec = sim.reservoir.spec
    record = MetricRecord(
        task=cfg.task,
        source=cfg.source.kind,
        run_seed=seed,
        spectral_radius=spec.spectral_radius,
        input_scaling=spec.input_scaling,
        reservoir_dim=spec.d_r,
        bias=spec.bias,
        lam=cfg.lam,
        test_rmse=scalar,
        test_rmse_coords=tuple(float(v) for v in per),
        train_rmse=report.train_rmse,
        mfnn_aggregate=sync.aggregate,
        mfnn_mean=sync.mean,
        inverse_mfnn=sync.inverse_aggregate,
        replica_converged=replica.converged,
        replica_convergence_time=replica.convergence_time,
        **labels,
    )
    return RunOutcome(record, sync, replica, W_out, sim)


def run_observer(cfg: ExperimentConfig, run_seed: int | None = None) -> MetricRecord:
    return run_task(replace(cfg, task="observer"), run_seed).record


def run_forecast(cfg: ExperimentConfig, run_seed: int | None = None) -> MetricRecord:
    return run_task(replace(cfg, task="forecast"), run_seed).record


def sweep_seed(root_seed: int, value_index: int, repetition: int) -> int:
    return _rng.derive_seed(root_seed, value_index, repetition)


def _sweep_job(args) -> MetricRecord:
    cfg, param, value, vi, rep = args
    seed = sweep_seed(cfg.root_seed, vi, rep)
    labels = dict(param=param, value=float(value), value_index=vi, repetition=rep)
    try:
        return run_task(with_param(cfg, param, value), seed, **labels).record
    except Exception as exc:  # a failed run is a data point, not a crash
        return MetricRecord(
            task=cfg.task,
            source=cfg.source.kind,
            run_seed=seed,
            status="failed",
            error=f"{type(exc).__name__}: {exc}",
            **labels,
        )


def sweep(cfg: ExperimentConfig, param: str, values, threads: int | None = 1) -> list[MetricRecord]:
    """One record per (value, repetition), ordered by value then repetition.

    Run seeds are ``derive_seed(root_seed, value_index, repetition)``.
    ``threads > 1`` spreads runs over worker processes; results do not depend
    on it.
    """
    values = list(values)
    if not values:
        raise ValueError("values must be non-empty")
    if param not in SWEEP_PARAMS:
        raise ValueError(f"unknown sweep parameter {param!r}; choose from {SWEEP_PARAMS}")
    for v in values:
        if not v > 0:
            raise ValueError(f"sweep values must be positive, got {v}")
    jobs = [(cfg, param, v, vi, rep) for vi, v in enumerate(values) for rep in range(cfg.repetitions)]
    threads = threads or os.cpu_count() or 1
    if threads <= 1:
        return [_sweep_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_sweep_job, jobs))


SUMMARY_COLUMNS = [
    "task", "param", "value", "n_ok", "n_failed",
    "rmse_mean", "rmse_median", "rmse_min", "rmse_max", "inverse_rmse_median",
    "inverse_mfnn_mean", "inverse_mfnn_median", "inverse_mfnn_min", "inverse_mfnn_max",
    "mfnn_median",
]


def aggregate(records) -> list[dict]:
    """Per (task, param, value) statistics over the successful repetitions."""
    groups: dict = {}
    for r in records:
        groups.setdefault((r.task, r.param, r.value if r.param else None), []).append(r)
    rows = []
    for (task, param, value), group in groups.items():
        ok = [r for r in group if r.ok]
        row = dict(task=task, param=param, value=math.nan if value is None else value,
                   n_ok=len(ok), n_failed=len(group) - len(ok))
        err = np.array([r.test_rmse for r in ok])
        inv = np.array([r.inverse_mfnn for r in ok])
        stats = {
            "rmse": err,
            "inverse_mfnn": inv,
        }
        for name, arr in stats.items():
            if arr.size:
                row[f"{name}_mean"] = float(np.mean(arr))
                row[f"{name}_median"] = float(np.median(arr))
                row[f"{name}_min"] = float(np.min(arr))
                row[f"{name}_max"] = float(np.max(arr))
            else:
                for s in ("mean", "median", "min", "max"):
                    row[f"{name}_{s}"] = math.nan
        row["inverse_rmse_median"] = float(np.median(1.0 / err)) if err.size else math.nan
        row["mfnn_median"] = float(np.median([r.mfnn_aggregate for r in ok])) if ok else math.nan
        rows.append({k: row[k] for k in SUMMARY_COLUMNS})
    return rows


@dataclass
class ErgodicityReport:
    original_rmse: float
    fresh_rmse: list
    ratios: list
    bounds: tuple = (0.5, 2.0)

    @property
    def passed(self) -> bool:
        lo, hi = self.bounds
        return all(lo <= r <= hi for r in self.ratios)


def evaluate_readout(cfg: ExperimentConfig, reservoir, W_out, start) -> float:
    """Test RMSE of a fixed readout on the trajectory starting at ``start``.

    The reservoir starts from zero, listens over the training window (no
    fitting) and is scored over the test window.
    """
    traj = integrate(cfg.source, start, cfg.tau, cfg.n_total - 1, cfg.substeps, t0=cfg.t_train[0])
    u = measure(traj, 0)
    train_states, kept, test_states = _listen_and_continue(cfg, reservoir, u)
    sim = Simulation(cfg, 0, np.asarray(start), traj.states, u, reservoir, train_states, test_states,
                     kept.start)
    _, _, R_te, Y_te = task_targets(cfg, sim)
    return rmse(Y_te, predict(W_out, R_te))[1]


def ergodicity_check(cfg: ExperimentConfig, n_fresh: int = 5, run_seed: int | None = None,
                     fresh_starts=None, bounds=(0.5, 2.0)) -> ErgodicityReport:
    """Train on one trajectory, score the same readout on fresh ones.

    Fresh starts default to new random on-attractor states drawn from the
    ``fresh`` substream of the run seed.
    """
    if n_fresh < 1:
        raise ValueError("n_fresh must be >= 1")
    seed = cfg.root_seed if run_seed is None else run_seed
    outcome = run_task(cfg, seed)
    sim = outcome.simulation
    original = evaluate_readout(cfg, sim.reservoir, outcome.W_out, sim.source_start)
    if fresh_starts is None:
        fresh_starts = [source_start(cfg, seed, i) for i in range(n_fresh)]
    fresh = [evaluate_readout(cfg, sim.reservoir, outcome.W_out, s) for s in fresh_starts]
    return ErgodicityReport(original, fresh, [f / original for f in fresh], tuple(bounds))


def record_row(record: MetricRecord) -> dict:
    return asdict(record)


@dataclass
class NoiseReport:
    eta_norm: float
    bound: float
    errors: list

    @property
    def fraction_within(self) -> float:
        return float(np.mean([e <= self.bound for e in self.errors]))


def noise_check(cfg: ExperimentConfig, n_draws: int = 20, noise_fraction: float = 0.01,
                run_seed: int | None = None, noise_rms: float | None = None) -> NoiseReport:
    """Compare noise-induced synchronization error with :func:`noise_error_bound`.

    The observer readout is fitted on clean data. Each draw adds i.i.d.
    Gaussian noise, rescaled to RMS ``noise_fraction * std(u)``, to the whole
    input series. The error of a draw is the RMS over the test window of
    ``|W_out (r_noisy(t) - r_clean(t))|``, the shift of the recovered source
    state caused by the noise. The bound uses the noise RMS as ``eta``;
    ``noise_rms`` sets it directly instead of through ``noise_fraction``.
    """
    seed = cfg.root_seed if run_seed is None else run_seed
    cfg = replace(cfg, task="observer")
    outcome = run_task(cfg, seed)
    sim = outcome.simulation
    eta = noise_fraction * float(np.std(sim.u)) if noise_rms is None else float(noise_rms)
    bound = noise_error_bound(outcome.W_out, eta)
    gen = _rng.stream(seed, "noise")
    errors = []
    for _ in range(n_draws):
        eps = gen.standard_normal(sim.u.size)
        eps *= eta / np.sqrt(np.mean(eps**2))
        _, _, noisy = _listen_and_continue(cfg, sim.reservoir, sim.u + eps)
        dev = predict(outcome.W_out, noisy - sim.test_states)
        errors.append(float(np.sqrt(np.mean(np.sum(dev**2, axis=0)))))
    return NoiseReport(eta, bound, errors)
