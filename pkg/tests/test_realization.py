import numpy as np
import pytest

from comb_algebra import Comb, choi_of_unitary
from errors import ChainMismatchError, CombNormalizationError, DominanceError
from realization import (
    ancilla_povm,
    kraus_of_outcome,
    optimal_network,
    r1_operators,
    random_deterministic_comb,
    realize,
    recompose,
    recompose_outcome,
    v1,
    v2,
)
from tensor_core import LabeledOperator, haar_unitary, ket_identity, max_entangled_projector
from tradeoff import comb_layout, curve_points, instrument_from_xy, ket_b, r_total


def distance(comb, target):
    return float(np.linalg.norm(comb.matrix - target.op.aligned(comb.op).matrix))


def test_identity_channel_realizes_as_one_stage():
    comb = Comb.from_operator(choi_of_unitary(np.eye(2)).op, 1)
    stages = realize(comb)
    assert len(stages) == 1
    assert stages[0].isometry_residual() <= 1e-10
    assert distance(recompose(stages), comb) <= 1e-10


def test_single_unitary_stage_recomposes_to_its_choi(rng):
    u = haar_unitary(3, rng)
    comb = Comb.from_operator(choi_of_unitary(u).op, 1)
    stages = realize(comb)
    assert stages[0].ancilla_dim_out == 1
    vec = u.reshape(-1)
    assert np.abs(recompose(stages).matrix - np.outer(vec, vec.conj())).max() <= 1e-10


def test_forward_generated_combs_round_trip(rng):
    for _ in range(20):
        comb, _ = random_deterministic_comb(2, 2, rng)
        stages = realize(comb)
        assert len(stages) == 2
        assert max(stage.isometry_residual() for stage in stages) <= 1e-10
        assert distance(recompose(stages), comb) <= 1e-8


def test_forward_generated_three_tooth_comb(rng):
    comb, _ = random_deterministic_comb(2, 3, rng)
    stages = realize(comb)
    assert [stage.out_labels[0] for stage in stages] == ["1", "3", "5"]
    assert distance(recompose(stages), comb) <= 1e-8


def test_realize_rejects_non_combs():
    op = LabeledOperator(np.eye(16) / 2, comb_layout(2))
    with pytest.raises(CombNormalizationError):
        realize(op, teeth=2)


def test_swapped_stages_do_not_chain(rng):
    _, stages = random_deterministic_comb(2, 2, rng)
    with pytest.raises(ChainMismatchError):
        recompose(stages[::-1])
    with pytest.raises(ChainMismatchError):
        recompose([])


def test_midpoint_total_comb(midpoint):
    total = r_total(*midpoint, 2)
    stages = realize(total)
    assert [stage.ancilla_dim_out for stage in stages] == [4, 10]
    assert all(stage.isometry_residual() <= 1e-10 for stage in stages)
    assert distance(recompose(stages), total) <= 1e-8


def test_total_comb_round_trip_along_the_curve():
    for point in curve_points(2, 5):
        total = r_total(point.x, point.y, 2)
        stages = realize(total)
        assert all(stage.isometry_residual() <= 1e-10 for stage in stages)
        assert distance(recompose(stages), total) <= 1e-8


def test_r1_closed_forms_at_the_midpoint(midpoint):
    r1, root, inverse_root = r1_operators(*midpoint, 2)
    assert np.linalg.eigvalsh(r1.matrix) == pytest.approx([1 / 6, 1 / 6, 1 / 6, 3 / 2], abs=1e-12)
    assert np.abs(root.matrix @ root.matrix - r1.matrix.conj()).max() <= 1e-12
    sandwich = inverse_root.matrix @ r1.matrix.conj() @ inverse_root.matrix
    assert np.abs(sandwich - np.eye(4)).max() <= 1e-10


def test_r1_at_the_identity_endpoint():
    d = 3
    r1, _, inverse_root = r1_operators(0.0, 1.0, d)
    projector = max_entangled_projector(d)
    assert np.abs(r1.matrix - d * projector).max() <= 1e-12
    sandwich = inverse_root.matrix @ r1.matrix.conj() @ inverse_root.matrix
    assert np.abs(sandwich - projector).max() <= 1e-10


def test_first_stage_at_the_endpoints(rng):
    d = 3
    psi = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    psi /= np.linalg.norm(psi)
    ket = ket_identity(d)
    assert np.allclose(v1(0.0, 1.0, d).V @ psi, np.kron(psi, ket) / np.sqrt(d))
    assert np.allclose(v1(1.0, 0.0, d).V @ psi, np.kron(ket, psi) / np.sqrt(d))


@pytest.mark.parametrize("d", [2, 3])
def test_closed_form_stages_are_isometries(d):
    for point in curve_points(d, 5):
        assert v1(point.x, point.y, d).isometry_residual() <= 1e-12
        assert v2(point.x, point.y, d).isometry_residual() <= 1e-10


def test_first_stage_matches_the_generic_construction(midpoint):
    d = 2
    closed = v1(*midpoint, d)
    generic = realize(r_total(*midpoint, d))[0]
    embed = np.kron(np.eye(d), generic.ancilla_basis)
    generic_range = embed @ generic.range_projector() @ embed.conj().T
    assert np.abs(generic_range - closed.range_projector()).max() <= 1e-10


def test_closed_form_network_recomposes(midpoint):
    network = optimal_network(*midpoint, 2)
    assert distance(recompose(network), r_total(*midpoint, 2)) <= 1e-8


def test_identity_endpoint_network():
    d = 2
    network = optimal_network(0.0, 1.0, d)
    expected = np.outer(ket_b(d), ket_b(d))
    assert np.abs(recompose(network).matrix - expected).max() <= 1e-10


def test_single_outcome_povm_is_the_support_projector(midpoint):
    total = r_total(*midpoint, 2)
    povm = ancilla_povm(lambda _: total.op, total)
    rank = povm.basis.shape[1]
    assert rank == 10
    assert np.abs(povm(None) - np.eye(rank)).max() <= 1e-10


def test_povm_elements_are_positive(rng, midpoint):
    instrument = instrument_from_xy(*midpoint, 2)
    povm = ancilla_povm(instrument.r_uhat, r_total(*midpoint, 2))
    for uhat in haar_unitary(2, rng, 100):
        assert np.linalg.eigvalsh(povm(uhat)).min() >= -1e-10


def test_povm_vectors_generate_the_elements(rng, midpoint):
    instrument = instrument_from_xy(*midpoint, 2)
    povm = ancilla_povm(instrument.r_uhat, r_total(*midpoint, 2))
    uhat = haar_unitary(2, rng)
    eta = povm.vectors(instrument.chi_uhat(uhat)[None, :])[0]
    assert np.abs(np.outer(eta, eta.conj()) - povm(uhat)).max() <= 1e-10


def test_povm_rejects_undominated_members(midpoint):
    total = r_total(*midpoint, 2)
    povm = ancilla_povm(lambda _: total.op * 2.0, total)
    with pytest.raises(DominanceError):
        povm(None)


def test_outcomes_are_recovered_from_the_ancilla(rng, midpoint):
    instrument = instrument_from_xy(*midpoint, 2)
    total = r_total(*midpoint, 2)
    stages = realize(total)
    povm = ancilla_povm(instrument.r_uhat, total, ancilla_basis=stages[-1].ancilla_basis)
    for uhat in haar_unitary(2, rng, 5):
        recovered = recompose_outcome(stages, povm(uhat))
        expected = instrument.r_uhat(uhat)
        assert np.linalg.norm(recovered.matrix - expected.aligned(recovered).matrix) <= 1e-8


@pytest.mark.parametrize("d", [2, 3])
def test_kraus_routes_agree(rng, d):
    point = curve_points(d, 3)[1]
    for uhat in haar_unitary(d, rng, 50):
        closed = kraus_of_outcome(uhat, point.x, point.y, d, route="closed")
        pipeline = kraus_of_outcome(uhat, point.x, point.y, d, route="pipeline")
        assert np.linalg.norm(closed - pipeline) <= 1e-8


def test_closed_kraus_teleports_the_last_ancilla_to_the_output(rng):
    d = 3
    uhat = haar_unitary(d, rng)
    kraus = kraus_of_outcome(uhat, 0.5, 0.5, d)
    assert kraus.shape == (d, d ** 3)
    for a in range(d):
        for b in range(d):
            for c in range(d):
                column = kraus[:, (a * d + b) * d + c]
                expected = np.sqrt(d) * uhat[a, b].conj() * uhat[:, c]
                assert np.abs(column - expected).max() <= 1e-14


def test_kraus_is_independent_of_the_trade_off_point(rng):
    d = 2
    uhat = haar_unitary(d, rng)
    first, second = curve_points(d, 5)[1], curve_points(d, 5)[3]
    a = kraus_of_outcome(uhat, first.x, first.y, d, route="pipeline")
    b = kraus_of_outcome(uhat, second.x, second.y, d, route="pipeline")
    assert np.linalg.norm(a - b) <= 1e-8


def test_kraus_operators_are_trace_preserving_on_average(rng):
    d, n = 2, 100_000
    uhat = haar_unitary(d, rng, n)
    kraus = np.sqrt(d) * np.einsum("nbc,nae->nabce", uhat.conj(), uhat).reshape(n, d, d ** 3)
    assert np.abs(kraus[0] - kraus_of_outcome(uhat[0], 0.5, 0.5, d)).max() <= 1e-14
    mean = np.einsum("nij,nik->jk", kraus.conj(), kraus) / n
    # ‖K†K‖² = Tr[(KK†)²]
    small = np.einsum("nij,nkj->nik", kraus, kraus.conj())
    spread = np.mean(np.sum(np.abs(small) ** 2, axis=(1, 2))) - np.linalg.norm(mean) ** 2
    stderr = np.sqrt(spread / n)
    assert np.linalg.norm(mean - np.eye(d ** 3)) <= max(5e-3, 4 * stderr)


def test_unknown_kraus_route():
    with pytest.raises(ValueError):
        kraus_of_outcome(np.eye(2), 0.5, 0.5, 2, route="teleport")
