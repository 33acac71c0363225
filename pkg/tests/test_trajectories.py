import warnings

import numpy as np
import pytest

from oqrw import bundled
from oqrw.errors import NumericalIntegrityError, StructuralError
from oqrw.trajectories import (
    Classification,
    RngStream,
    TrajectoryState,
    classify_by_drift,
    ensemble_stats,
    monte_carlo,
    run_trajectory,
    simulate_ensemble,
    step,
    zscores,
)

RHO0 = np.diag([1, 0]).astype(complex)


def test_first_jump_probabilities():
    model = bundled.bc_walk()
    rng = RngStream(3, 0).generator()
    counts = np.zeros(2)
    for _ in range(6000):
        _, j = step(TrajectoryState(RHO0, np.zeros(1, dtype=np.int64)), model, rng)
        counts[j] += 1
    freq = counts / counts.sum()
    # A_1 = C moves right with probability 2/3
    assert abs(freq[0] - 2 / 3) < 4 * np.sqrt(2 / 9 / 6000)


def test_step_updates_state_and_site():
    model = bundled.bc_walk()
    state = TrajectoryState(RHO0, np.zeros(1, dtype=np.int64))
    new, j = step(state, model, RngStream(1, 0).generator())
    A = model.kraus[j]
    expected = A @ RHO0 @ A.conj().T
    expected /= np.trace(expected)
    assert np.abs(new.rho - expected).max() < 1e-14
    assert new.site.tolist() == model.steps[j].tolist()
    assert new.step == 1


def test_pure_state_stays_pure():
    model = bundled.oqrw_2d()
    psi = np.array([0.6, 0.8j])
    rho = np.outer(psi, psi.conj())
    state, _, _ = run_trajectory(model, rho, [0, 0], 200, RngStream(5, 0).generator())
    ev = np.linalg.eigvalsh(state.rho)
    assert ev[0] < 1e-10


def test_single_step_run_matches_step():
    model = bundled.bc_walk()
    s1, rec, _ = run_trajectory(model, RHO0, [0], 1, RngStream(9, 4).generator())
    s2, j = step(TrajectoryState(RHO0, np.zeros(1, dtype=np.int64)), model, RngStream(9, 4).generator())
    assert np.array_equal(s1.rho, s2.rho)
    assert np.array_equal(s1.site, s2.site)
    assert rec.jumps.tolist() == [j]


def test_trivial_trajectory_moves_right():
    for seed in range(5):
        state, rec, _ = run_trajectory(bundled.trivial_walk(), RHO0, [0], 100, RngStream(seed, 0).generator())
        assert state.site.tolist() == [100]
        assert rec.counts.tolist() == [100, 0]


def test_increments_are_unit():
    model = bundled.oqrw_2d()
    _, rec, _ = run_trajectory(model, np.eye(2) / 2, [0, 0], 300, RngStream(2, 0).generator())
    path = np.cumsum(model.steps[rec.jumps], axis=0)
    assert np.all(np.abs(np.diff(np.vstack([[0, 0], path]), axis=0)).sum(axis=1) == 1)


def test_seed_determinism():
    model = bundled.bc_walk()
    a = simulate_ensemble(model, RHO0, [0], 50, 30, base_seed=11)
    b = simulate_ensemble(model, RHO0, [0], 50, 30, base_seed=11)
    c = simulate_ensemble(model, RHO0, [0], 50, 30, base_seed=12)
    assert np.array_equal(a.final_sites, b.final_sites)
    assert np.array_equal(a.final_states, b.final_states)
    assert not np.array_equal(a.final_sites, c.final_sites)


def test_chunking_and_workers_do_not_change_results():
    model = bundled.bc_walk()
    ref = simulate_ensemble(model, RHO0, [0], 40, 25, base_seed=3, chunk_size=1000)
    small = simulate_ensemble(model, RHO0, [0], 40, 25, base_seed=3, chunk_size=7)
    pooled = simulate_ensemble(model, RHO0, [0], 40, 25, base_seed=3, chunk_size=7, workers=3)
    for other in (small, pooled):
        assert np.array_equal(ref.final_sites, other.final_sites)
        assert np.array_equal(ref.final_states, other.final_states)
        assert np.array_equal(ref.cesaro, other.cesaro)


def test_streams_are_distinct():
    a = RngStream(1, 0).generator().random(4)
    b = RngStream(1, 1).generator().random(4)
    assert not np.array_equal(a, b)


def test_two_trajectory_covariance_reproducible():
    model = bundled.bc_walk()
    s1 = monte_carlo(model, RHO0, [0], 100, 2, base_seed=4)
    s2 = monte_carlo(model, RHO0, [0], 100, 2, base_seed=4)
    assert np.array_equal(s1.covariance, s2.covariance)


def test_monte_carlo_needs_two():
    with pytest.raises(StructuralError):
        monte_carlo(bundled.bc_walk(), RHO0, [0], 10, 1)


def test_trivial_ensemble_statistics():
    model = bundled.trivial_walk()
    stats = monte_carlo(model, RHO0, [0], 50, 20, m=[1.0])
    assert np.abs(stats.covariance).max() == 0
    assert stats.drift_mean.tolist() == [1.0]
    z = zscores(stats, [1.0], [[0.0]])
    assert z["drift"] == [0.0] and z["covariance"] == [[0.0]]


def test_bc_ensemble_moderate():
    model = bundled.bc_walk()
    stats = monte_carlo(model, np.eye(2) / 2, [0], 400, 4000, base_seed=8, m=[0.0])
    assert abs(stats.mean[0]) < 4 * stats.standard_errors[0]
    assert abs(stats.covariance[0, 0] - 8 / 9) < 4 * stats.covariance_standard_errors[0, 0]


def test_raw_statistic_without_drift():
    ens = simulate_ensemble(bundled.trivial_walk(), RHO0, [2], 10, 5)
    stats = ensemble_stats(ens)
    assert not stats.standardized
    assert stats.mean.tolist() == [1.0]


def test_cesaro_average_approaches_invariant_state():
    _, _, ces = run_trajectory(bundled.bc_walk(), RHO0, [0], 5000, RngStream(0, 0).generator())
    assert np.abs(np.linalg.eigvalsh(ces - np.eye(2) / 2)).sum() < 0.1


def test_probability_sum_guard():
    from oqrw.trajectories import _effects, _jump_probabilities

    kraus = np.array(bundled.bc_walk().kraus)
    rhos = RHO0[None]
    p = _jump_probabilities(_effects(kraus), rhos)
    assert abs(p.sum() - 1) < 1e-15
    with pytest.raises(NumericalIntegrityError):
        _jump_probabilities(_effects(1.01 * kraus), rhos)


def test_tiny_negative_probabilities_clamped():
    from oqrw.trajectories import _jump_probabilities

    effects = np.stack([np.eye(2), -1e-13 * np.eye(2)]).astype(complex)
    p = _jump_probabilities(effects, (np.eye(2) / 2)[None])
    assert p.min() == 0


def test_classify_single_candidate():
    counts = np.array([[3, 1], [0, 4]])
    cls = classify_by_drift(counts, [[0.5, 0.5]])
    assert cls.labels.tolist() == [0, 0]
    assert isinstance(cls, Classification)


def test_classify_trivial_trajectories():
    ens = simulate_ensemble(bundled.trivial_walk(), RHO0, [0], 30, 10)
    cls = classify_by_drift(ens.records(), [[1, 0], [0, 1]])
    assert cls.labels.tolist() == [0] * 10
    assert cls.fractions.tolist() == [1.0, 0.0]


def test_classify_ambiguity_warning():
    counts = np.array([[5, 5], [6, 4], [4, 6]])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        cls = classify_by_drift(counts, [[0.5, 0.5], [0.51, 0.49]])
    assert cls.ambiguous
    assert caught


def test_classify_shape_mismatch():
    with pytest.raises(StructuralError):
        classify_by_drift(np.array([[1, 1]]), [[1, 0, 0]])
