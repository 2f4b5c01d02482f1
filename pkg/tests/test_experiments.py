import math
from dataclasses import replace

import numpy as np
import pytest

from rcsync import experiments as EX
from rcsync.experiments import (
    MetricRecord,
    aggregate,
    ergodicity_check,
    lorenz_config,
    roessler_config,
    run_forecast,
    run_observer,
    run_task,
    simulate,
    sweep,
    sweep_seed,
    task_targets,
)
from rcsync.reservoir import drive


def test_default_config_values():
    cfg = lorenz_config()
    assert (cfg.tau, cfg.t_train, cfg.t_test, cfg.washout_fraction) == (0.05, (-100.0, 0.0), (0.0, 80.0), 0.1)
    assert (cfg.lam, cfg.repetitions, cfg.horizon_steps) == (1e-6, 10, 5)
    assert (cfg.n_train, cfg.n_test, cfg.test_offset) == (2000, 1600, 2000)
    r = roessler_config()
    assert (r.tau, r.t_train, r.t_test, r.source.kind) == (0.5, (-200.0, 0.0), (0.0, 160.0), "roessler")


def test_config_validation():
    with pytest.raises(ValueError):
        lorenz_config(task="predict")
    with pytest.raises(ValueError):
        lorenz_config(t_train=(0.0, -1.0))
    with pytest.raises(ValueError):
        lorenz_config(washout_fraction=1.0)


@pytest.fixture(scope="module")
def observer():
    return run_task(lorenz_config(), 0)


def test_observer_defaults(observer):
    rec = observer.record
    assert rec.ok and rec.replica_converged
    assert math.isfinite(rec.test_rmse) and rec.test_rmse < 1.0
    assert len(rec.test_rmse_coords) == 2
    assert observer.W_out.shape == (2, 300)
    assert rec.mfnn_aggregate > 0 and rec.inverse_mfnn == 1.0 / rec.mfnn_aggregate


def test_weak_radius_is_worse_on_both_metrics(observer):
    weak = run_observer(lorenz_config(reservoir=replace(lorenz_config().reservoir, spectral_radius=0.05)), 0)
    assert weak.test_rmse > 5 * observer.record.test_rmse
    assert weak.inverse_mfnn < observer.record.inverse_mfnn


def test_forecast_zero_horizon_is_identity():
    rec = run_forecast(lorenz_config(horizon_steps=0), 0)
    assert rec.test_rmse < 1e-3


def test_forecast_target_alignment(observer):
    cfg = lorenz_config(task="forecast", horizon_steps=5)
    sim = observer.simulation
    R_tr, Y_tr, R_te, Y_te = task_targets(cfg, sim)
    w, o = sim.washout, cfg.test_offset
    assert R_tr.shape[1] == Y_tr.shape[1] == cfg.n_train - w - 5
    assert R_te.shape[1] == Y_te.shape[1] == cfg.n_test - 5
    for t in (0, 17, Y_te.shape[1] - 1):
        assert Y_te[0, t] == sim.u[o + t + 5]
        assert Y_tr[0, t] == sim.u[w + t + 5]
    with pytest.raises(ValueError, match="horizon"):
        task_targets(replace(cfg, horizon_steps=cfg.n_test), sim)


def test_forecast_shares_states_and_mfnn(observer):
    fc = run_task(lorenz_config(task="forecast"), 0)
    assert np.array_equal(fc.simulation.test_states, observer.simulation.test_states)
    assert np.array_equal(fc.mfnn.per_sample, observer.mfnn.per_sample)
    assert fc.record.mfnn_aggregate == observer.record.mfnn_aggregate
    assert math.isfinite(fc.record.test_rmse)


def test_phase_isolation(observer):
    # one uninterrupted drive over the whole input gives the same test states
    sim = observer.simulation
    cfg = sim.cfg
    full = drive(sim.reservoir, sim.u)
    assert np.array_equal(full[:, cfg.test_offset:cfg.test_offset + cfg.n_test], sim.test_states)
    assert np.array_equal(full[:, sim.washout:cfg.n_train], sim.train_states)


def test_simulation_is_deterministic(observer):
    again = simulate(lorenz_config(), 0)
    assert np.array_equal(again.states, observer.simulation.states)
    assert np.array_equal(again.test_states, observer.simulation.test_states)


def test_sweep_single_value_ten_repetitions():
    recs = sweep(lorenz_config(), "spectral_radius", [1.0])
    assert len(recs) == 10
    assert len({r.run_seed for r in recs}) == 10
    assert {(r.spectral_radius, r.input_scaling, r.reservoir_dim, r.bias, r.lam) for r in recs} == {
        (1.0, 0.1, 300, 1.0, 1e-6)
    }
    assert [r.repetition for r in recs] == list(range(10))


def test_sweep_is_deterministic_and_thread_independent():
    cfg = lorenz_config(repetitions=2)
    a = sweep(cfg, "input_scaling", [0.1, 1.0])
    b = sweep(cfg, "input_scaling", [0.1, 1.0])
    c = sweep(cfg, "input_scaling", [0.1, 1.0], threads=2)
    assert a == b == c
    assert [r.input_scaling for r in a] == [0.1, 0.1, 1.0, 1.0]


def test_seed_splitting_is_collision_free():
    seeds = {sweep_seed(0, vi, rep) for vi in range(50) for rep in range(50)}
    assert len(seeds) == 2500
    assert sweep_seed(0, 1, 2) != sweep_seed(1, 1, 2)


def test_sweep_validation():
    cfg = lorenz_config(repetitions=1)
    with pytest.raises(ValueError):
        sweep(cfg, "spectral_radius", [])
    with pytest.raises(ValueError):
        sweep(cfg, "spectral_radius", [1.0, -1.0])
    with pytest.raises(ValueError):
        sweep(cfg, "lambda", [1.0])


def test_failed_run_is_recorded(monkeypatch):
    real = EX.run_task

    def flaky(cfg, run_seed=None, **labels):
        if labels["repetition"] == 1:
            raise FloatingPointError("boom")
        return real(cfg, run_seed, **labels)

    monkeypatch.setattr(EX, "run_task", flaky)
    recs = sweep(lorenz_config(repetitions=3), "spectral_radius", [1.0])
    assert [r.status for r in recs] == ["ok", "failed", "ok"]
    assert "FloatingPointError: boom" in recs[1].error
    assert math.isnan(recs[1].test_rmse)
    row = aggregate(recs)[0]
    assert (row["n_ok"], row["n_failed"]) == (2, 1)
    assert row["rmse_mean"] == pytest.approx((recs[0].test_rmse + recs[2].test_rmse) / 2)


def _rec(rmse, inv, value=1.0, status="ok"):
    return MetricRecord(task="observer", source="lorenz", param="spectral_radius", value=value,
                        test_rmse=rmse, mfnn_aggregate=1 / inv, inverse_mfnn=inv, status=status)


def test_aggregate_identical_records():
    row = aggregate([_rec(0.2, 0.5)] * 10)[0]
    for k in ("rmse_mean", "rmse_median", "rmse_min", "rmse_max"):
        assert row[k] == 0.2
    assert row["inverse_mfnn_mean"] == row["inverse_mfnn_median"] == 0.5
    assert row["n_ok"] == 10 and row["n_failed"] == 0


def test_aggregate_hand_computed():
    rows = aggregate([_rec(1.0, 0.1), _rec(2.0, 0.4), _rec(6.0, 0.4), _rec(9.0, 9.0, value=2.0)])
    assert [r["value"] for r in rows] == [1.0, 2.0]
    r = rows[0]
    assert r["rmse_mean"] == 3.0 and r["rmse_median"] == 2.0
    assert r["rmse_min"] == 1.0 and r["rmse_max"] == 6.0
    assert r["inverse_mfnn_mean"] == pytest.approx(0.3) and r["inverse_mfnn_median"] == 0.4
    assert r["inverse_rmse_median"] == 0.5


def test_aggregate_all_failed():
    row = aggregate([_rec(math.nan, math.nan, status="failed")])[0]
    assert row["n_ok"] == 0 and math.isnan(row["rmse_median"])


def test_ergodicity_same_start_gives_unit_ratio(observer):
    cfg = lorenz_config()
    rep = ergodicity_check(cfg, run_seed=0, fresh_starts=[observer.simulation.source_start])
    assert rep.ratios == [1.0]
    assert rep.passed
    with pytest.raises(ValueError):
        ergodicity_check(cfg, n_fresh=0)


def test_ergodicity_at_large_radius():
    # past the synchronization boundary the readout is poor on every trajectory
    # alike, so the ratio check alone does not flag it; absolute error does
    cfg = lorenz_config(reservoir=replace(lorenz_config().reservoir, spectral_radius=3.0))
    rep = ergodicity_check(cfg, n_fresh=3, run_seed=0)
    assert rep.original_rmse > 1.0
    assert all(e > 1.0 for e in rep.fresh_rmse)


def test_noise_check_reports_draws():
    rep = EX.noise_check(lorenz_config(), n_draws=3, run_seed=0)
    assert len(rep.errors) == 3 and all(e > 0 for e in rep.errors)
    assert rep.bound > 0 and 0.0 <= rep.fraction_within <= 1.0
