"""Choi operators, the link product and comb normalization checks.

Comb wires are labeled by their position: "0" is the first input and
"2N-1" the last output. Even wires are inputs, odd wires are outputs, and
the canonical layout lists them in descending order.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from errors import CombNormalizationError, LayoutError, NotUnitaryError
from tensor_core import (
    LabeledOperator,
    SpaceLayout,
    haar_unitary,
    herm_eig,
    local_operator,
    partial_trace,
    permute_factors,
    vectorize,
)

logger = logging.getLogger(__name__)

CHECK_TOL = 1e-10


def comb_labels(teeth):
    return tuple(str(k) for k in range(2 * teeth - 1, -1, -1))


def min_eigenvalue(op):
    values, _ = herm_eig(op)
    return float(values[0])


def is_psd(op, tol=CHECK_TOL):
    matrix = op.matrix if isinstance(op, LabeledOperator) else op
    scale = max(1.0, float(np.abs(matrix).max(initial=0.0)))
    return min_eigenvalue(op) >= -tol * scale


def check_unitary(u, tol=CHECK_TOL):
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise NotUnitaryError(f"expected a square matrix, got shape {u.shape}")
    error = np.abs(u.conj().T @ u - np.eye(u.shape[0])).max()
    if error > tol:
        raise NotUnitaryError(f"matrix is not unitary (deviation {error:.3e})")
    return u


@dataclass(frozen=True)
class ChoiOperator:
    op: LabeledOperator
    out_label: str
    in_label: str
    is_channel: bool = field(init=False)

    def __post_init__(self):
        self.op.layout.require((self.out_label, self.in_label))
        reduced = partial_trace(self.op, {self.out_label})
        residual = np.abs(reduced.matrix - np.eye(reduced.dim)).max()
        object.__setattr__(self, "is_channel", bool(residual <= CHECK_TOL))

    @property
    def d_in(self):
        return self.op.layout.dim(self.in_label)

    @property
    def d_out(self):
        return self.op.layout.dim(self.out_label)


def choi_of_unitary(u, out_label="1", in_label="0"):
    u = check_unitary(u)
    d = u.shape[0]
    v = vectorize(u)
    layout = SpaceLayout.of((out_label, d), (in_label, d))
    return ChoiOperator(LabeledOperator(np.outer(v, v.conj()), layout), out_label, in_label)


def choi_of_kraus(kraus_ops, out_label="1", in_label="0"):
    """Choi operator sum_i |K_i>><<K_i| of a CP map from its Kraus list"""
    kraus_ops = [np.asarray(k, dtype=complex) for k in kraus_ops]
    d_out, d_in = kraus_ops[0].shape
    matrix = np.zeros((d_out * d_in, d_out * d_in), dtype=complex)
    for k in kraus_ops:
        if k.shape != (d_out, d_in):
            raise LayoutError(f"Kraus operators differ in shape: {k.shape} vs {(d_out, d_in)}")
        v = k.reshape(-1)
        matrix += np.outer(v, v.conj())
    layout = SpaceLayout.of((out_label, d_out), (in_label, d_in))
    return ChoiOperator(LabeledOperator(matrix, layout), out_label, in_label)


def link(a, b, connected):
    """Link product A * B over the `connected` labels.

    Computes Tr_J[(A ⊗ I_L)(I_K ⊗ B^{T_J})]. The result lists A's free
    factors first, then B's.
    """
    connected = set(connected)
    a.layout.require(connected)
    b.layout.require(connected)
    for label in connected:
        if a.layout.dim(label) != b.layout.dim(label):
            raise LayoutError(
                f"wire {label!r} has dimension {a.layout.dim(label)} in A "
                f"and {b.layout.dim(label)} in B"
            )
    overlap = (set(a.labels) & set(b.labels)) - connected
    if overlap:
        raise LayoutError(f"labels {sorted(overlap)} appear in both operators but are not linked")

    n_a, n_b = len(a.layout), len(b.layout)
    a_rows = list(range(n_a))
    a_cols = list(range(n_a, 2 * n_a))
    next_index = 2 * n_a
    b_rows, b_cols = [], []
    for label in b.labels:
        if label in connected:
            i = a.layout.index(label)
            b_rows.append(a_rows[i])
            b_cols.append(a_cols[i])
        else:
            b_rows.append(next_index)
            b_cols.append(next_index + 1)
            next_index += 2

    a_free = [i for i, label in enumerate(a.labels) if label not in connected]
    b_free = [i for i, label in enumerate(b.labels) if label not in connected]
    out = (
        [a_rows[i] for i in a_free]
        + [b_rows[i] for i in b_free]
        + [a_cols[i] for i in a_free]
        + [b_cols[i] for i in b_free]
    )
    result = np.einsum(a.tensor(), a_rows + a_cols, b.tensor(), b_rows + b_cols, out, optimize=True)
    layout = a.layout.without(connected) + b.layout.without(connected)
    side = layout.total_dim
    return LabeledOperator(np.asarray(result).reshape(side, side), layout)


def apply_channel(choi, rho):
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (choi.d_in, choi.d_in):
        raise LayoutError(f"state of shape {rho.shape} does not fit input dimension {choi.d_in}")
    if abs(np.trace(rho) - 1) > CHECK_TOL or not is_psd(rho):
        raise ValueError("input must be a unit-trace positive operator")
    state = LabeledOperator(rho, SpaceLayout.of((choi.in_label, choi.d_in)))
    return link(choi.op, state, {choi.in_label}).matrix


@dataclass(frozen=True)
class CombCheckReport:
    passed: bool
    teeth: int
    ladder: tuple = ()
    failed_level: int | None = None
    residual: float = 0.0
    alpha: float | None = None
    psd: bool = True


def _canonical(op, teeth):
    labels = comb_labels(teeth)
    if set(op.labels) != set(labels):
        raise LayoutError(f"comb with {teeth} teeth needs wires {labels}, got {op.labels}")
    return permute_factors(op, labels)


def check_deterministic_comb(op, teeth, tol=CHECK_TOL):
    """Verify Tr_{2k-1} R^(k) = I_{2k-2} ⊗ R^(k-1) for k = N..1.

    Returns a report; a failing level is reported, never raised. The ladder
    holds R^(0) = 1, R^(1), ..., R^(N) in canonical order.
    """
    op = _canonical(op, teeth)
    psd = is_psd(op, tol)
    ladder = [op]
    current = op
    worst = 0.0
    for k in range(teeth, 0, -1):
        out_label, in_label = str(2 * k - 1), str(2 * k - 2)
        traced = partial_trace(current, {out_label})
        d_in = current.layout.dim(in_label)
        previous = partial_trace(traced, {in_label}) * (1.0 / d_in)
        expected = np.kron(np.eye(d_in), previous.matrix)
        residual = float(np.linalg.norm(traced.matrix - expected))
        worst = max(worst, residual)
        logger.debug("comb ladder level %d residual %.3e", k, residual)
        if residual > tol:
            return CombCheckReport(
                passed=False, teeth=teeth, failed_level=k, residual=residual, psd=psd
            )
        ladder.append(previous)
        current = previous
    final = abs(ladder[-1].matrix[0, 0] - 1.0)
    if final > tol:
        return CombCheckReport(passed=False, teeth=teeth, failed_level=0, residual=final, psd=psd)
    ladder.reverse()
    alpha = None
    if teeth >= 1:
        first = ladder[1]
        alpha = float(first.trace().real / first.layout.dim("0"))
    return CombCheckReport(
        passed=psd, teeth=teeth, ladder=tuple(ladder), residual=worst, alpha=alpha, psd=psd
    )


@dataclass(frozen=True)
class Comb:
    op: LabeledOperator
    teeth: int
    ladder: tuple = ()

    @classmethod
    def from_operator(cls, op, teeth, tol=CHECK_TOL):
        report = check_deterministic_comb(op, teeth, tol)
        if not report.passed:
            level = "positivity" if not report.psd else f"level {report.failed_level}"
            raise CombNormalizationError(
                f"operator is not a deterministic {teeth}-comb ({level}, residual {report.residual:.3e})",
                level=report.failed_level,
                residual=report.residual,
            )
        return cls(report.ladder[-1], teeth, report.ladder)

    @property
    def layout(self):
        return self.op.layout

    @property
    def matrix(self):
        return self.op.matrix

    def input_labels(self):
        return tuple(label for label in self.op.labels if int(label) % 2 == 0)

    def output_labels(self):
        return tuple(label for label in self.op.labels if int(label) % 2 == 1)

    def reduced(self, k):
        return self.ladder[k]


def _operator_of(comb_or_op):
    return comb_or_op.op if isinstance(comb_or_op, Comb) else comb_or_op


def check_dominated(s, r, tol=CHECK_TOL):
    """True iff R - S is positive within tol (S is a probabilistic comb under R)"""
    s, r = _operator_of(s), _operator_of(r)
    s = r.aligned(s)
    gap = r.matrix - s.matrix
    scale = max(1.0, float(np.abs(r.matrix).max()))
    return min_eigenvalue(gap) >= -tol * scale


def outcome_density(r_uhat, u, rho):
    """Tr[R_Û (I_3 ⊗ |U*>><<U*|_21 ⊗ ρ*_0)], the density of Û w.r.t. dÛ"""
    op = permute_factors(_operator_of(r_uhat), comb_labels(2))
    u = np.asarray(u, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    d3, d2, d1, d0 = op.layout.dims
    if u.shape != (d2, d1) or rho.shape != (d0, d0):
        raise LayoutError(
            f"unitary {u.shape} or state {rho.shape} does not fit comb dims {op.layout.dims}"
        )
    v = vectorize(u.conj())
    observable = np.kron(np.kron(np.eye(d3), np.outer(v, v.conj())), rho.conj())
    return float(np.real(np.trace(op.matrix @ observable)))


def twirl_samples(family, d, n_samples, rng, uhat=None, average_outcomes=False):
    """Per-sample conjugated family members (V3 ⊗ V2* ⊗ W1 ⊗ W0*) R_{V†ÛW} (...)†.

    With average_outcomes the outcome Û is itself drawn from the Haar
    measure, which estimates the normalization comb of the twirled family.
    """
    layout = permute_factors(family(np.eye(d, dtype=complex)), comb_labels(2)).layout
    if uhat is None:
        uhat = np.eye(d, dtype=complex)
    vs = haar_unitary(d, rng, n_samples)
    ws = haar_unitary(d, rng, n_samples)
    outcomes = haar_unitary(d, rng, n_samples) if average_outcomes else None
    samples = np.empty((n_samples, layout.total_dim, layout.total_dim), dtype=complex)
    for i in range(n_samples):
        target = outcomes[i] if average_outcomes else uhat
        member = permute_factors(family(vs[i].conj().T @ target @ ws[i]), layout.labels)
        conj = local_operator(
            layout, {"3": vs[i], "2": vs[i].conj(), "1": ws[i], "0": ws[i].conj()}
        )
        samples[i] = conj @ member.matrix @ conj.conj().T
    return layout, samples


def twirl_comb(family, d, n_samples, rng, uhat=None, average_outcomes=False):
    """Monte Carlo group average of a family R_Û over independent V and W"""
    layout, samples = twirl_samples(family, d, n_samples, rng, uhat, average_outcomes)
    return LabeledOperator(samples.mean(axis=0), layout)


def schur_blocks(d):
    """The four projectors P⊗P, P⊗Q, Q⊗P, Q⊗Q on wires (3,2) ⊗ (1,0)."""
    v = vectorize(np.eye(d))
    p = np.outer(v, v.conj()) / d
    q = np.eye(d * d) - p
    return {
        "PP": np.kron(p, p),
        "PQ": np.kron(p, q),
        "QP": np.kron(q, p),
        "QQ": np.kron(q, q),
    }


def commutant_residual(op):
    """Frobenius distance of an operator on (3,2,1,0) from span of the Schur blocks"""
    op = permute_factors(op, comb_labels(2))
    blocks = schur_blocks(op.layout.dim("3"))
    projection = np.zeros_like(op.matrix)
    for block in blocks.values():
        coefficient = np.trace(block @ op.matrix) / np.trace(block).real
        projection += coefficient * block
    return float(np.linalg.norm(op.matrix - projection))
