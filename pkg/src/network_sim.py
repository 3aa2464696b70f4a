"""Trajectory-level simulation of the optimal estimation network.

One trajectory: a pure input ψ enters the first isometry V¹, the unknown
unitary U acts on wire 1 -> 2, a continuous Bell measurement on
(2, 1') yields the estimate Û, and Û is applied to the ancilla 0'. The
unnormalized output for outcome Û is

    y U|ψ> + x Tr[Û†U] Û|ψ>

and its squared norm is the outcome density with respect to the Haar
measure dÛ.
"""
import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from comb_algebra import check_unitary
from errors import EnvelopeError, LayoutError, PipelineMismatchError
from parallel import run_indexed
from realization import kraus_of_outcome, v1
from tensor_core import haar_unitary, random_pure_state
from tradeoff import MCEstimate, gain_fidelity_g, normalized_xy

logger = logging.getLogger(__name__)

AGREEMENT_TOL = 1e-10
ENVELOPE_SLACK = 1e-12
PROPOSAL_BATCH = 64
BLOCK = 4096


@lru_cache(maxsize=64)
def _first_stage(x, y, d):
    return v1(x, y, d).V


def _dims(psi, u, uhat=None):
    psi = np.asarray(psi, dtype=complex)
    d = psi.shape[0]
    u = np.asarray(u, dtype=complex)
    if u.shape != (d, d) or (uhat is not None and np.shape(uhat) != (d, d)):
        raise LayoutError(f"input of dimension {d} does not fit the unitaries")
    return psi, u, d


def evolve_closed_form(psi, u, uhat, x, y):
    psi, u, _ = _dims(psi, u, uhat)
    uhat = np.asarray(uhat, dtype=complex)
    return y * (u @ psi) + x * np.trace(uhat.conj().T @ u) * (uhat @ psi)


def pre_measurement_state(psi, u, x, y):
    """(U ⊗ I_{1'0'}) V¹ |ψ>, on wires (2, 1', 0')."""
    psi, u, d = _dims(psi, u)
    x, y = normalized_xy(x, y, d)
    return np.kron(u, np.eye(d * d)) @ (_first_stage(x, y, d) @ psi)


def evolve_pipeline(psi, u, uhat, x, y):
    d = len(psi)
    x, y = normalized_xy(x, y, d)
    return kraus_of_outcome(uhat, x, y, d) @ pre_measurement_state(psi, u, x, y)


def evolve_pure(psi, u, uhat, x, y):
    """Unnormalized output for outcome Û, cross-checked between network and formula"""
    psi, u, d = _dims(psi, u, uhat)
    check_unitary(u)
    check_unitary(uhat)
    network = evolve_pipeline(psi, u, uhat, x, y)
    formula = evolve_closed_form(psi, u, uhat, *normalized_xy(x, y, d))
    gap = float(np.linalg.norm(network - formula))
    if gap > AGREEMENT_TOL * max(1.0, float(np.linalg.norm(formula))):
        raise PipelineMismatchError(f"network and closed form disagree by {gap:.3e}")
    return network


def kraus_matrix(u, uhat, x, y):
    """Overall d×d operator K_Û (U ⊗ I) V¹ of the network for one (U, Û)."""
    u = np.asarray(u, dtype=complex)
    d = u.shape[0]
    x, y = normalized_xy(x, y, d)
    return kraus_of_outcome(uhat, x, y, d) @ np.kron(u, np.eye(d * d)) @ _first_stage(x, y, d)


def _kraus_batch(u, uhat, x, y):
    """Batched network operators m for stacks of (U, Û), built from V¹ and K_Û."""
    d = u.shape[-1]
    stage = _first_stage(x, y, d).reshape(d, d, d, d)
    pre = np.einsum("nba,acek->nbcek", u, stage)
    return np.sqrt(d) * np.einsum("nbc,nme,nbcek->nmk", uhat.conj(), uhat, pre)


@dataclass(frozen=True)
class Trajectory:
    d: int
    x: float
    y: float
    seed: int | None
    index: int | None
    psi: np.ndarray
    u: np.ndarray
    uhat: np.ndarray
    pre_measurement: np.ndarray
    output: np.ndarray
    density: float
    gain: float
    conditional_fidelity: float
    proposals: int = 1


@dataclass(frozen=True)
class OutcomeSample:
    uhat: np.ndarray
    density: float
    proposals: int
    envelope: float

    @property
    def acceptance_rate(self):
        return 1.0 / self.proposals


def sample_outcome(psi, u, x, y, rng, max_proposals=1_000_000):
    """Draw Û with density ‖evolve_pure(ψ, U, Û)‖² by rejection from Haar proposals.

    The envelope (y + x d)² bounds the density since |Tr[Û†U]| <= d.
    """
    psi, u, d = _dims(psi, u)
    x, y = normalized_xy(x, y, d)
    envelope = (y + x * d) ** 2
    proposals = 0
    while proposals < max_proposals:
        uhat = haar_unitary(d, rng, PROPOSAL_BATCH)
        traces = np.einsum("nij,ij->n", uhat.conj(), u)
        outputs = y * (u @ psi) + x * traces[:, None] * (uhat @ psi)
        densities = np.sum(np.abs(outputs) ** 2, axis=1)
        if densities.max() > envelope * (1 + ENVELOPE_SLACK):
            raise EnvelopeError(
                f"density {densities.max():.15g} exceeds envelope {envelope:.15g}"
            )
        accept = rng.random(PROPOSAL_BATCH) * envelope < densities
        if accept.any():
            first = int(np.argmax(accept))
            proposals += first + 1
            return OutcomeSample(uhat[first], float(densities[first]), proposals, envelope)
        proposals += PROPOSAL_BATCH
    raise EnvelopeError(f"no proposal accepted after {proposals} draws")


def simulate_trajectory(x, y, d, rng, seed=None, index=None):
    psi = random_pure_state(d, rng)
    u = haar_unitary(d, rng)
    x, y = normalized_xy(x, y, d)
    outcome = sample_outcome(psi, u, x, y, rng)
    output = evolve_pure(psi, u, outcome.uhat, x, y)
    norm = float(np.vdot(output, output).real)
    fidelity = abs(np.vdot(u @ psi, output)) ** 2 / norm if norm > 0 else 0.0
    return Trajectory(
        d=d, x=x, y=y, seed=seed, index=index,
        psi=psi, u=u, uhat=outcome.uhat,
        pre_measurement=pre_measurement_state(psi, u, x, y),
        output=output,
        density=norm,
        gain=float(gain_fidelity_g(outcome.uhat, u)),
        conditional_fidelity=float(fidelity),
        proposals=outcome.proposals,
    )


def trajectory_rng(seed, index):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def run_trajectories(x, y, d, count, seed, threads=1):
    """`count` trajectories; trajectory i depends only on (seed, i)."""
    def task(index):
        return simulate_trajectory(x, y, d, trajectory_rng(seed, index), seed=seed, index=index)

    trajectories = run_indexed(task, count, threads)
    rate = count / sum(t.proposals for t in trajectories) if trajectories else 0.0
    logger.info("%d trajectories, acceptance rate %.4f", count, rate)
    return trajectories


def _blocks(n):
    for start in range(0, n, BLOCK):
        yield min(BLOCK, n - start)


def trajectory_samples(x, y, d, n, rng):
    """Per-sample (fidelity, gain) pairs over Haar U and Haar-proposed Û, shape (n, 2)."""
    x, y = normalized_xy(x, y, d)
    parts = []
    for size in _blocks(n):
        u = haar_unitary(d, rng, size)
        uhat = haar_unitary(d, rng, size)
        m = _kraus_batch(u, uhat, x, y)
        fidelity = np.abs(np.einsum("nij,nij->n", u.conj(), m)) ** 2 / d ** 2
        density = np.sum(np.abs(m) ** 2, axis=(1, 2)) / d
        parts.append(np.column_stack([fidelity, density * gain_fidelity_g(uhat, u)]))
    return np.concatenate(parts)


@dataclass(frozen=True)
class TrajectoryEstimate:
    F: MCEstimate
    G: MCEstimate

    @classmethod
    def from_samples(cls, samples):
        return cls(MCEstimate.from_samples(samples[:, 0]), MCEstimate.from_samples(samples[:, 1]))


def estimate_FG_trajectories(x, y, d, n, rng):
    estimate = TrajectoryEstimate.from_samples(trajectory_samples(x, y, d, n, rng))
    logger.info(
        "trajectory estimates d=%d: F=%.6f ± %.2e, G=%.6f ± %.2e",
        d, estimate.F.value, estimate.F.stderr, estimate.G.value, estimate.G.stderr,
    )
    return estimate


def pure_input_fidelity_samples(x, y, d, n, rng):
    """|<Uψ| m |ψ>|² over Haar ψ, U and Haar-proposed Û; averages to F′."""
    x, y = normalized_xy(x, y, d)
    parts = []
    for size in _blocks(n):
        psi = random_pure_state(d, rng, size)
        u = haar_unitary(d, rng, size)
        uhat = haar_unitary(d, rng, size)
        out = np.einsum("nij,nj->ni", _kraus_batch(u, uhat, x, y), psi)
        ideal = np.einsum("nij,nj->ni", u, psi)
        parts.append(np.abs(np.einsum("ni,ni->n", ideal.conj(), out)) ** 2)
    return np.concatenate(parts)


def pure_input_fidelity_mc(x, y, d, n, rng):
    return MCEstimate.from_samples(pure_input_fidelity_samples(x, y, d, n, rng))


def output_norm_samples(psi, u, x, y, n, rng):
    """‖output‖² for Haar Û at fixed (ψ, U); averages to 1."""
    psi, u, d = _dims(psi, u)
    x, y = normalized_xy(x, y, d)
    uhat = haar_unitary(d, rng, n)
    m = _kraus_batch(np.broadcast_to(u, (n, d, d)), uhat, x, y)
    return np.sum(np.abs(m @ psi) ** 2, axis=1)
