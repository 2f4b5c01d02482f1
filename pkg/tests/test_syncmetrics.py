import numpy as np
import pytest
from scipy.stats import ortho_group

from rcsync.experiments import lorenz_config, run_task
from rcsync.reservoir import ReservoirSpec, build_reservoir, drive
from rcsync.syncmetrics import (
    mfnn,
    mfnn_bruteforce_oracle,
    nearest_neighbor_index,
    nearest_neighbors,
    noise_error_bound,
    replica_test,
)

LINE = np.arange(10.0)[:, None]


def test_nn_tie_goes_low():
    assert nearest_neighbor_index(LINE, 5, theiler_window=0) == 4


def test_nn_theiler_window():
    assert nearest_neighbor_index(LINE, 5, theiler_window=3) == 1


def test_nn_no_admissible_neighbor():
    with pytest.raises(ValueError, match="no admissible"):
        nearest_neighbor_index(LINE, 5, theiler_window=9)


def test_nn_matches_exhaustive_scan(rng):
    pts = rng.normal(size=(50, 3))
    for n in range(50):
        best, best_d = None, np.inf
        for m in range(50):
            if abs(m - n) <= 2:
                continue
            d = np.sqrt(sum((pts[m, k] - pts[n, k]) ** 2 for k in range(3)))
            if d < best_d:
                best, best_d = m, d
        assert nearest_neighbor_index(pts, n, 2) == best


def test_fast_search_equals_exhaustive(rng):
    pts = rng.normal(size=(300, 4))
    q = np.arange(300)
    fast = nearest_neighbors(pts, q, 5, block=64)
    assert fast.tolist() == [nearest_neighbor_index(pts, n, 5) for n in q]


def test_fast_search_breaks_ties_low():
    pts = np.repeat(np.arange(20.0), 2)[:, None]  # every value twice
    q = np.arange(40)
    assert nearest_neighbors(pts, q, 0).tolist() == [nearest_neighbor_index(pts, n, 0) for n in q]
    assert nearest_neighbors(LINE, [5], 0).tolist() == [4]


def test_mfnn_identity_is_exactly_one(lorenz_traj):
    X = lorenz_traj.states[:600]
    res = mfnn(X, X)
    assert np.all(res.per_sample == 1.0)
    assert res.aggregate == 1.0 and res.inverse_aggregate == 1.0


def test_mfnn_linear_map_bounded_by_condition_number(lorenz_traj, rng):
    X = lorenz_traj.states[:800]
    A = np.array([[2.0, 0.3, 0.0], [0.1, 1.0, -0.4], [0.0, 0.2, 0.7]])
    cond = np.linalg.cond(A)
    res = mfnn(X, X @ A.T)
    assert np.all(res.per_sample >= 1.0 - 1e-12)
    assert np.all(res.per_sample <= cond * (1 + 1e-12))
    assert 1.0 <= res.aggregate <= cond


def test_mfnn_noise_response_is_large(lorenz_traj, rng):
    X = lorenz_traj.states[:800]
    res = mfnn(X, rng.normal(size=(800, 50)))
    assert res.aggregate > 10.0


def test_mfnn_matches_oracle(rng):
    X = rng.normal(size=(200, 3)).cumsum(axis=0)
    R = np.tanh(X @ rng.normal(size=(3, 8))) + 0.01 * rng.normal(size=(200, 8))
    fast, slow = mfnn(X, R), mfnn_bruteforce_oracle(X, R)
    assert np.array_equal(fast.indices, slow.indices)
    np.testing.assert_allclose(fast.per_sample, slow.per_sample, rtol=1e-12, atol=0)
    assert abs(fast.aggregate - slow.aggregate) <= 1e-12 * slow.aggregate


def test_oracle_identity_all_ones(rng):
    X = rng.normal(size=(120, 2))
    assert np.all(mfnn_bruteforce_oracle(X, X).per_sample == 1.0)


def test_mfnn_isometry_invariance(lorenz_traj, rng):
    X = lorenz_traj.states[:500]
    R = np.tanh(X @ rng.normal(size=(3, 6)) / 10.0)
    Q = ortho_group.rvs(6, random_state=7)
    moved = R @ Q.T + rng.normal(size=6)
    a, b = mfnn(X, R), mfnn(X, moved)
    assert np.array_equal(a.indices, b.indices)
    np.testing.assert_allclose(a.per_sample, b.per_sample, rtol=1e-10)


def test_too_few_retained_samples():
    X = np.zeros((40, 2))
    with pytest.raises(ValueError, match="retained"):
        mfnn(X, X)


def test_degenerate_samples_skipped():
    X = np.arange(60.0)[:, None]
    X[45] = X[30]  # exact duplicate, zero nearest-neighbor distance
    res = mfnn(X, X, theiler_window=0)
    assert 30 not in res.indices and 45 not in res.indices
    assert res.n_evaluated == 58


def test_mfnn_shape_and_option_errors():
    with pytest.raises(ValueError):
        mfnn(np.zeros((30, 2)), np.zeros((29, 2)))
    with pytest.raises(ValueError):
        mfnn(np.zeros((30, 2)), np.zeros((30, 2)), subsample=0)


def test_mfnn_csv(tmp_path, rng):
    X = rng.normal(size=(60, 2))
    res = mfnn(X, X, subsample=2)
    res.to_csv(tmp_path / "m.csv")
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[0] == "n,mfnn" and lines[1] == "0,1" and len(lines) == 31


@pytest.fixture(scope="module")
def synced_run():
    return run_task(lorenz_config(), 0)


def test_shuffled_response_inflates_mfnn(synced_run):
    sim = synced_run.simulation
    X, R = sim.source_test, sim.test_states.T
    aligned = mfnn(X, R).aggregate
    shuffled = mfnn(X, np.random.default_rng(3).permutation(R)).aggregate
    assert shuffled >= 10 * aligned


def _replica_input(lorenz_traj):
    return lorenz_traj.states[:2000, 0]


def test_replica_identical_starts(lorenz_traj):
    res = build_reservoir(ReservoirSpec(seed=1))
    r0 = np.full(300, 0.3)
    rep = replica_test(res, _replica_input(lorenz_traj)[:200], r0, r0)
    assert not rep.divergence.any()
    assert rep.converged and rep.convergence_time == 0


def test_replica_symmetry(lorenz_traj, rng):
    res = build_reservoir(ReservoirSpec(seed=2, spectral_radius=3.0))
    a, b = rng.uniform(-1, 1, 300), rng.uniform(-1, 1, 300)
    u = _replica_input(lorenz_traj)[:400]
    assert np.array_equal(replica_test(res, u, a, b).divergence, replica_test(res, u, b, a).divergence)


def test_replica_converges_at_defaults_within_washout(lorenz_traj, rng):
    res = build_reservoir(ReservoirSpec(seed=4))
    rep = replica_test(res, _replica_input(lorenz_traj), np.zeros(300), rng.uniform(-1, 1, 300))
    assert rep.converged and rep.convergence_time <= 200
    assert np.all(rep.divergence >= 0)


def test_replica_fails_at_large_radius(lorenz_traj, rng):
    res = build_reservoir(ReservoirSpec(seed=4, spectral_radius=3.0))
    rep = replica_test(res, _replica_input(lorenz_traj), np.zeros(300), rng.uniform(-1, 1, 300))
    assert not rep.converged and rep.convergence_time is None
    assert rep.divergence[-500:].min() > 1e-2


def test_replica_must_stay_converged():
    # a scalar "reservoir" whose two copies meet at t=2 and part again at t=3
    import scipy.sparse as sp
    from rcsync.reservoir import Reservoir

    res = Reservoir(sp.csr_matrix(np.zeros((1, 1))), np.array([1.0]), np.array([0.0]))
    rep = replica_test(res, [0.0, 0.0], [0.5], [-0.5], 1e-6)
    assert rep.converged and rep.convergence_time == 0
    with pytest.raises(ValueError):
        replica_test(res, [0.0], [0.0], [0.0], 0.0)


def test_replica_csv(tmp_path, lorenz_traj):
    res = build_reservoir(ReservoirSpec(seed=1))
    replica_test(res, _replica_input(lorenz_traj)[:5], np.zeros(300), np.ones(300) * 0.1).to_csv(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "t,divergence" and len(lines) == 6


def test_noise_bound_examples():
    assert noise_error_bound(np.eye(3), 0.25) == 0.25
    assert noise_error_bound(np.diag([2.0, 0.5]), 0.1) == pytest.approx(0.2, rel=1e-15)
    # null direction ignored
    assert noise_error_bound(np.diag([4.0, 1e-20]), 1.0) == pytest.approx(0.25)
    assert noise_error_bound(np.array([[3.0, 0.0, 0.0]]), 0.3) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        noise_error_bound(np.zeros((2, 2)), 1.0)
    with pytest.raises(ValueError):
        noise_error_bound(np.eye(2), -1.0)


def test_noise_bound_covers_fitted_observer(synced_run):
    # the sync error caused by input noise of RMS 0.01, propagated to the readout
    sim, W_out = synced_run.simulation, synced_run.W_out
    bound = noise_error_bound(W_out, 0.01)
    eps = np.random.default_rng(11).standard_normal(sim.u.size)
    eps *= 0.01 / np.sqrt(np.mean(eps**2))
    clean = drive(sim.reservoir, sim.u)
    noisy = drive(sim.reservoir, sim.u + eps)
    err = np.sqrt(np.mean(np.sum((W_out @ (noisy - clean)) ** 2, axis=0)))
    assert err <= bound
