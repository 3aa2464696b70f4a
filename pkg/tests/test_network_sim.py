import numpy as np
import pytest

from errors import LayoutError, NotUnitaryError
from network_sim import (
    estimate_FG_trajectories,
    evolve_closed_form,
    evolve_pure,
    kraus_matrix,
    output_norm_samples,
    pure_input_fidelity_mc,
    run_trajectories,
    sample_outcome,
    simulate_trajectory,
    trajectory_rng,
)
from tensor_core import haar_unitary, random_pure_state
from tradeoff import MCEstimate, avg_pure_input_fidelity, y_from_x


@pytest.mark.parametrize("d", [2, 3])
def test_network_matches_closed_form(rng, d):
    for _ in range(200):
        x = rng.random()
        y = y_from_x(x, d)
        psi = random_pure_state(d, rng)
        u, uhat = haar_unitary(d, rng), haar_unitary(d, rng)
        network = evolve_pure(psi, u, uhat, x, y)
        assert np.linalg.norm(network - evolve_closed_form(psi, u, uhat, x, y)) <= 1e-10


def test_evolution_at_the_extremes(rng):
    d = 3
    psi = random_pure_state(d, rng)
    u, uhat = haar_unitary(d, rng), haar_unitary(d, rng)
    assert np.allclose(evolve_pure(psi, u, uhat, 0.0, 1.0), u @ psi, atol=1e-12)
    estimated = np.trace(uhat.conj().T @ u) * (uhat @ psi)
    assert np.allclose(evolve_pure(psi, u, uhat, 1.0, 0.0), estimated, atol=1e-12)
    x = 0.3
    y = y_from_x(x, d)
    assert np.allclose(evolve_pure(psi, u, u, x, y), (y + x * d) * (u @ psi), atol=1e-12)


def test_outcome_weight_depends_on_the_trace_phase(rng, midpoint):
    x, y = midpoint
    gaps = []
    for _ in range(20):
        psi = random_pure_state(2, rng)
        u, uhat = haar_unitary(2, rng), haar_unitary(2, rng)
        t = np.trace(uhat.conj().T @ u)
        overlap = np.vdot(u @ psi, uhat @ psi)
        weight = np.linalg.norm(evolve_pure(psi, u, uhat, x, y)) ** 2
        expected = y * y + x * x * abs(t) ** 2 + 2 * x * y * np.real(t * overlap)
        conjugated = y * y + x * x * abs(t) ** 2 + 2 * x * y * np.real(t.conj() * overlap)
        assert weight == pytest.approx(expected, abs=1e-10)
        gaps.append(abs(weight - conjugated))
    assert max(gaps) > 1e-3


def test_network_operator_matches_evolution(rng, midpoint):
    psi = random_pure_state(2, rng)
    u, uhat = haar_unitary(2, rng), haar_unitary(2, rng)
    m = kraus_matrix(u, uhat, *midpoint)
    assert np.allclose(m @ psi, evolve_closed_form(psi, u, uhat, *midpoint), atol=1e-12)


def test_evolve_pure_rejects_bad_inputs(rng, midpoint):
    psi = random_pure_state(2, rng)
    with pytest.raises(NotUnitaryError):
        evolve_pure(psi, np.array([[1, 1], [0, 1]]), np.eye(2), *midpoint)
    with pytest.raises(LayoutError):
        evolve_pure(psi, np.eye(3), np.eye(3), *midpoint)


def test_identity_instrument_accepts_every_proposal(rng):
    psi = random_pure_state(2, rng)
    u = haar_unitary(2, rng)
    for _ in range(20):
        sample = sample_outcome(psi, u, 0.0, 1.0, rng)
        assert sample.proposals == 1
        assert sample.density == pytest.approx(1.0)
        assert sample.acceptance_rate == 1.0


def test_sampled_densities_respect_the_envelope(rng, midpoint):
    for _ in range(200):
        psi = random_pure_state(2, rng)
        u = haar_unitary(2, rng)
        sample = sample_outcome(psi, u, *midpoint, rng)
        assert 0 <= sample.density <= sample.envelope * (1 + 1e-12)
        assert sample.envelope == pytest.approx((midpoint[1] + 2 * midpoint[0]) ** 2)


def test_identity_trajectories_keep_the_state():
    for trajectory in run_trajectories(0.0, 1.0, 2, 20, seed=5):
        assert trajectory.conditional_fidelity == pytest.approx(1.0, abs=1e-12)
        assert np.linalg.norm(trajectory.pre_measurement) == pytest.approx(1.0)


def test_estimator_trajectories_reach_the_maximal_gain():
    trajectories = run_trajectories(1.0, 0.0, 2, 2000, seed=8)
    estimate = MCEstimate.from_samples([t.gain for t in trajectories])
    assert abs(estimate.value - 0.5) <= 4 * estimate.stderr
    for t in trajectories[:20]:
        assert t.density == pytest.approx(abs(np.trace(t.uhat.conj().T @ t.u)) ** 2, abs=1e-12)


def test_trajectories_depend_only_on_seed_and_index(midpoint):
    first = run_trajectories(*midpoint, 2, 6, seed=3)
    threaded = run_trajectories(*midpoint, 2, 6, seed=3, threads=3)
    longer = run_trajectories(*midpoint, 2, 9, seed=3)
    for a, b, c in zip(first, threaded, longer):
        assert np.array_equal(a.uhat, b.uhat) and np.array_equal(a.uhat, c.uhat)
        assert a.index == b.index == c.index
    single = simulate_trajectory(*midpoint, 2, trajectory_rng(3, 4), seed=3, index=4)
    assert np.array_equal(single.uhat, first[4].uhat)


@pytest.mark.parametrize(
    "x, y, target",
    [(0.0, 1.0, (1.0, 0.25)), (1.0, 0.0, (0.5, 0.5)), (1 / np.sqrt(3), 1 / np.sqrt(3), (5 / 6, 5 / 12))],
)
def test_trajectory_estimates_d2(rng, x, y, target):
    estimate = estimate_FG_trajectories(x, y, 2, 100_000, rng)
    assert estimate.F.agrees_with(target[0], sigma=4)
    assert estimate.G.agrees_with(target[1], sigma=4)


def test_pure_input_fidelity(rng, midpoint):
    estimate = pure_input_fidelity_mc(*midpoint, 2, 100_000, rng)
    target = avg_pure_input_fidelity(5 / 6, 2)
    assert target == pytest.approx(8 / 9)
    assert estimate.deviation(target) <= max(5e-3, 4 * estimate.stderr)


def test_output_probability_is_normalized(rng, midpoint):
    psi = random_pure_state(2, rng)
    u = haar_unitary(2, rng)
    estimate = MCEstimate.from_samples(output_norm_samples(psi, u, *midpoint, 100_000, rng))
    assert abs(estimate.value - 1.0) <= 4 * estimate.stderr
