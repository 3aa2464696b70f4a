"""Isometric realizations of deterministic combs and their instruments.

A deterministic N-comb is realized as a chain of isometries V^[k] taking
(wire 2k-2, ancilla A_{k-1}) to (wire 2k-1, ancilla A_k). The ancilla A_k is
the support of R^(k)* inside a primed copy of wires 2k-1..0; its basis is
the set of eigenvectors of R^(k)* above the rank tolerance. Probabilistic
members R_i of an instrument are then recovered by a POVM on the last
ancilla.

Primed factor order everywhere: ((2k-1)', (2k-2)', ..., 0'), i.e. the same
descending order as the comb wires.
"""
import logging
from dataclasses import dataclass, field
from math import prod

import numpy as np

from comb_algebra import (
    CHECK_TOL,
    Comb,
    check_deterministic_comb,
    check_dominated,
    comb_labels,
    schur_blocks,
)
from errors import ChainMismatchError, CombNormalizationError, DominanceError, LayoutError
from tensor_core import (
    RANK_TOL,
    LabeledOperator,
    SpaceLayout,
    haar_unitary,
    ket_identity,
    max_entangled_projector,
    permute_factors,
    psd_power,
    support_basis,
    teleportation_op,
)
from tradeoff import chi_vectors, normalized_xy, r_total_matrix

logger = logging.getLogger(__name__)

ISOMETRY_TOL = 1e-10
SINGULAR_TOL = 1e-8


def ancilla_label(k):
    return f"A{k}"


def primed_labels(k):
    return tuple(f"{w}'" for w in range(2 * k - 1, -1, -1))


@dataclass(frozen=True)
class IsometryStage:
    level: int
    V: np.ndarray
    in_layout: SpaceLayout
    out_layout: SpaceLayout
    ancilla_basis: np.ndarray | None = None
    ancilla_primed: tuple = ()
    domain_projector: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        v = np.asarray(self.V, dtype=complex)
        shape = (self.out_layout.total_dim, self.in_layout.total_dim)
        if v.shape != shape:
            raise LayoutError(f"stage {self.level}: matrix {v.shape} does not match layouts {shape}")
        object.__setattr__(self, "V", v)

    @property
    def in_labels(self):
        return self.in_layout.labels

    @property
    def out_labels(self):
        return self.out_layout.labels

    @property
    def system_dim_in(self):
        return self.in_layout.dims[0]

    @property
    def system_dim_out(self):
        return self.out_layout.dims[0]

    @property
    def ancilla_dim_in(self):
        return self.in_layout.dims[1]

    @property
    def ancilla_dim_out(self):
        return self.out_layout.dims[1]

    def isometry_residual(self):
        """‖V†V - Π‖ with Π the identity, or the declared domain projector."""
        gram = self.V.conj().T @ self.V
        target = np.eye(gram.shape[0]) if self.domain_projector is None else self.domain_projector
        return float(np.linalg.norm(gram - target))

    def range_projector(self):
        return self.V @ self.V.conj().T


def _stage_layouts(level, d_in, r_in, d_out, r_out):
    in_layout = SpaceLayout.of((str(2 * level - 2), d_in), (ancilla_label(level - 1), r_in))
    out_layout = SpaceLayout.of((str(2 * level - 1), d_out), (ancilla_label(level), r_out))
    return in_layout, out_layout


def _ladder_of(comb, teeth, tol):
    if isinstance(comb, Comb):
        return comb.ladder, comb.teeth
    report = check_deterministic_comb(comb, teeth, tol)
    if not report.passed:
        raise CombNormalizationError(
            f"cannot realize: comb check failed at level {report.failed_level} "
            f"(residual {report.residual:.3e})",
            level=report.failed_level,
            residual=report.residual,
        )
    return report.ladder, teeth


def realize(comb, teeth=None, tol=RANK_TOL):
    """Isometric stages V^[1..N] of a deterministic comb.

    V^[k] = (I ⊗ B_k†)(I_{2k-1} ⊗ (R^(k)*)^{1/2} (I ⊗ R^(k-1)*)^{-1/2})
            (|I>>_{2k-1,(2k-1)'} ⊗ T_{(2k-2)'←2k-2}) (I ⊗ B_{k-1})
    """
    ladder, teeth = _ladder_of(comb, teeth, CHECK_TOL)
    stages = []
    previous_basis = np.ones((1, 1), dtype=complex)
    for k in range(1, teeth + 1):
        current, previous = ladder[k], ladder[k - 1]
        d_out = current.layout.dim(str(2 * k - 1))
        d_in = current.layout.dim(str(2 * k - 2))
        d_prev = previous.dim

        root = psd_power(current.matrix.conj(), 0.5, tol)
        inverse_root = np.kron(np.eye(d_out * d_in), psd_power(previous.matrix.conj(), -0.5, tol))
        teleport = teleportation_op(str(2 * k - 2), f"{2 * k - 2}'", d_in).matrix
        embed = np.kron(ket_identity(d_out)[:, None], np.kron(teleport, np.eye(d_prev)))
        full = np.kron(np.eye(d_out), root @ inverse_root) @ embed

        basis = support_basis(current.matrix.conj(), tol)
        v = np.kron(np.eye(d_out), basis.conj().T) @ full @ np.kron(np.eye(d_in), previous_basis)
        in_layout, out_layout = _stage_layouts(k, d_in, previous_basis.shape[1], d_out, basis.shape[1])
        stage = IsometryStage(k, v, in_layout, out_layout, basis, primed_labels(k))

        residual = stage.isometry_residual()
        logger.debug("stage %d: ancilla rank %d, isometry residual %.3e", k, basis.shape[1], residual)
        if residual > SINGULAR_TOL:
            raise CombNormalizationError(
                f"stage {k} is numerically singular (isometry residual {residual:.3e})",
                level=k,
                residual=residual,
            )
        stages.append(stage)
        previous_basis = basis
    return stages


def _check_chain(stages):
    if not stages:
        raise ChainMismatchError("no stages to compose")
    previous_label, previous_dim = ancilla_label(0), 1
    for position, stage in enumerate(stages, start=1):
        system_in, ancilla_in = stage.in_labels
        system_out, _ = stage.out_labels
        if (system_in, system_out) != (str(2 * position - 2), str(2 * position - 1)):
            raise ChainMismatchError(
                f"stage at position {position} maps wire {system_in} to {system_out}, "
                f"expected {2 * position - 2} to {2 * position - 1}"
            )
        if ancilla_in != previous_label or stage.ancilla_dim_in != previous_dim:
            raise ChainMismatchError(
                f"stage at position {position} expects ancilla {ancilla_in} of dimension "
                f"{stage.ancilla_dim_in}, previous stage provides {previous_label} of "
                f"dimension {previous_dim}"
            )
        previous_label, previous_dim = stage.out_labels[1], stage.ancilla_dim_out


def _network_operator(stages):
    """Overall map W: wires (2N-2, ..., 0) -> (A_N, 2N-1, ..., 1), reshaped as M[A_N, outs ⊗ ins]."""
    _check_chain(stages)
    w = np.ones((1, 1), dtype=complex)
    out_factors, in_factors = [], []
    for stage in stages:
        d_in, d_out, r_out = stage.system_dim_in, stage.system_dim_out, stage.ancilla_dim_out
        outs = prod(dim for _, dim in out_factors)
        ins = prod(dim for _, dim in in_factors)
        w = np.kron(stage.V, np.eye(outs)) @ np.kron(np.eye(d_in), w)
        w = w.reshape(d_out, r_out, outs, d_in * ins).transpose(1, 0, 2, 3)
        w = w.reshape(r_out * d_out * outs, d_in * ins)
        out_factors.insert(0, (stage.out_labels[0], d_out))
        in_factors.insert(0, (stage.in_labels[0], d_in))
    layout = SpaceLayout(tuple(out_factors + in_factors))
    m = w.reshape(stages[-1].ancilla_dim_out, layout.total_dim)
    return m, layout


def recompose(stages):
    """Choi operator of the chained stages with the final ancilla discarded"""
    m, layout = _network_operator(stages)
    op = LabeledOperator(m.T @ m.conj(), layout)
    return Comb.from_operator(permute_factors(op, comb_labels(len(stages))), len(stages))


def recompose_outcome(stages, element):
    """Choi operator of the chained stages followed by POVM element `element` on A_N"""
    m, layout = _network_operator(stages)
    element = np.asarray(element, dtype=complex)
    op = LabeledOperator(m.T @ element.T @ m.conj(), layout)
    return permute_factors(op, comb_labels(len(stages)))


def random_deterministic_comb(d, teeth, rng, ancilla_dim=None):
    """Forward-generated comb: random isometries chained through ancillas of fixed size"""
    ancilla_dim = ancilla_dim or d
    stages = []
    r_in = 1
    for k in range(1, teeth + 1):
        unitary = haar_unitary(d * ancilla_dim, rng)
        v = unitary[:, : d * r_in]
        in_layout, out_layout = _stage_layouts(k, d, r_in, d, ancilla_dim)
        stages.append(IsometryStage(k, v, in_layout, out_layout))
        r_in = ancilla_dim
    return recompose(stages), stages


@dataclass(frozen=True)
class AncillaPOVM:
    """Outcome -> POVM element on the last ancilla.

    P_Û = B† (R*)^{-1/2} R_Û* (R*)^{-1/2} B, with B the ancilla basis.
    """

    family: object
    total: LabeledOperator
    basis: np.ndarray
    inverse_root: np.ndarray
    check: bool = True

    def __call__(self, outcome):
        member = self.total.aligned(self.family(outcome))
        if self.check and not check_dominated(member, self.total):
            raise DominanceError("family member for outcome is not dominated by the total comb")
        return self.from_matrix(member.matrix)

    def from_matrix(self, member):
        sandwich = self.inverse_root @ member.conj() @ self.inverse_root
        return self.basis.conj().T @ sandwich @ self.basis

    def vectors(self, chis):
        """Rank-one elements |η><η| given family vectors |χ>: η = B† (R*)^{-1/2} |χ*>."""
        return np.einsum("pq,nq->np", self.basis.conj().T @ self.inverse_root, np.asarray(chis).conj())


def ancilla_povm(family, total, ancilla_basis=None, check=True, tol=RANK_TOL):
    total_op = total.op if isinstance(total, Comb) else total
    conj_total = total_op.matrix.conj()
    basis = support_basis(conj_total, tol) if ancilla_basis is None else np.asarray(ancilla_basis)
    return AncillaPOVM(family, total_op, basis, psd_power(conj_total, -0.5, tol), check)


def r1_operators(x, y, d):
    """R^(1) on wires (1, 0) with (R^(1)*)^{1/2} and (R^(1)*)^{-1/2} in closed form"""
    x, y = normalized_xy(x, y, d)
    layout = SpaceLayout.of(("1", d), ("0", d))
    projector = max_entangled_projector(d)
    eye = np.eye(d * d)
    r1 = (x + d * y) ** 2 / d * projector + x * x / d * (eye - projector)
    root = (y * d * projector + x * eye) / np.sqrt(d)
    if x * x > RANK_TOL * (x + d * y) ** 2:
        inverse_root = np.sqrt(d) * (-y * d / (x * (x + y * d)) * projector + eye / x)
    else:
        inverse_root = psd_power(r1, -0.5)
    return (
        LabeledOperator(r1, layout),
        LabeledOperator(root, layout),
        LabeledOperator(inverse_root, layout),
    )


def v1(x, y, d):
    """First stage: V¹|ψ> = (y/√d)|ψ>_1|I>>_{1'0'} + (x/√d)|I>>_{11'}|ψ>_{0'}"""
    x, y = normalized_xy(x, y, d)
    eye = np.eye(d)
    kept = np.einsum("ae,bc->abce", eye, eye)
    moved = np.einsum("ab,ce->abce", eye, eye)
    v = ((y * kept + x * moved) / np.sqrt(d)).reshape(d ** 3, d)
    in_layout, out_layout = _stage_layouts(1, d, 1, d, d * d)
    return IsometryStage(1, v, in_layout, out_layout, np.eye(d * d), primed_labels(1))


def v2(x, y, d):
    """Second stage, from (2, 1', 0') to (3, 3', 2', 1', 0').

    V² = (I_3 ⊗ R*^{1/2} (I_{3'2'} ⊗ R^(1)*^{-1/2})) (|I>>_{33'} ⊗ T_{2'←2} ⊗ I_{1'0'})
    """
    x, y = normalized_xy(x, y, d)
    _, r1_root, r1_inverse_root = r1_operators(x, y, d)
    blocks = schur_blocks(d)
    root = (x + y * d) * blocks["PP"] + x / np.sqrt(d * d - 1) * blocks["QQ"]
    middle = root @ np.kron(np.eye(d * d), r1_inverse_root.matrix.conj())
    teleport = teleportation_op("2", "2'", d).matrix
    embed = np.kron(ket_identity(d)[:, None], np.kron(teleport, np.eye(d * d)))
    v = np.kron(np.eye(d), middle) @ embed
    support = r1_root.matrix.conj() @ r1_inverse_root.matrix.conj()
    domain = np.kron(np.eye(d), support)
    in_layout, out_layout = _stage_layouts(2, d, d * d, d, d ** 4)
    return IsometryStage(2, v, in_layout, out_layout, np.eye(d ** 4), primed_labels(2), domain)


def optimal_network(x, y, d):
    return [v1(x, y, d), v2(x, y, d)]


def kraus_of_outcome(uhat, x, y, d, route="closed"):
    """Kraus operator K_Û from (2, 1', 0') to wire 3.

    route="closed": √d (<<Û|_{2,1'} ⊗ Û_3 T_{3←0'}), independent of (x, y).
    route="pipeline": (I_3 ⊗ <η_Û|) V² with η_Û = (R*)^{-1/2} |χ_Û*>.
    """
    uhat = np.asarray(uhat, dtype=complex)
    if route == "closed":
        teleport = teleportation_op("0'", "3", d).matrix
        return np.sqrt(d) * np.kron(uhat.reshape(1, -1).conj(), uhat @ teleport)
    if route != "pipeline":
        raise ValueError(f"unknown route {route!r}")
    x, y = normalized_xy(x, y, d)
    inverse_root = psd_power(r_total_matrix(x, y, d).conj(), -0.5)
    eta = inverse_root @ chi_vectors(x, y, uhat).conj()
    stage = v2(x, y, d).V.reshape(d, d ** 4, d ** 3)
    return np.einsum("p,mpj->mj", eta.conj(), stage)
