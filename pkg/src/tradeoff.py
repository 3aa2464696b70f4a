"""Optimal information/disturbance trade-off for estimating a unitary.

The optimal covariant instrument is generated by the rank-one seed
Ξ = |χ><χ| with

    |χ> = x |I>>_30 |I>>_21 + y |I>>_32 |I>>_10,    x² + y² + 2xy/d = 1,

on wires (3, 2, 1, 0). Everything here is parametrized by (x, y) or by one
of the equivalent coordinates I (information), D (disturbance) or the
weight p of the combined figure of merit.
"""
import logging
from dataclasses import asdict, dataclass

import numpy as np
from scipy import linalg

from comb_algebra import Comb, comb_labels, schur_blocks
from errors import ConstraintError, DegenerateEigenError
from tensor_core import (
    LabeledOperator,
    SpaceLayout,
    haar_unitary,
    herm_eig,
    max_entangled_projector,
    partial_trace,
    permute_factors,
    tensor,
)

logger = logging.getLogger(__name__)

CONSTRAINT_TOL = 1e-9
CONSTRAINT_REJECT = 1e-6
RANGE_TOL = 1e-9
SPAN_OVERLAP_TOL = 1e-10
BLOCK = 4096


def comb_layout(d):
    return SpaceLayout(tuple((label, d) for label in comb_labels(2)))


def ket_a(d):
    """|I>>_30 |I>>_21 as a vector on (3, 2, 1, 0)."""
    eye = np.eye(d)
    return np.einsum("ae,bc->abce", eye, eye).reshape(-1).astype(complex)


def ket_b(d):
    """|I>>_32 |I>>_10 as a vector on (3, 2, 1, 0)."""
    eye = np.eye(d)
    return np.einsum("ab,ce->abce", eye, eye).reshape(-1).astype(complex)


def chi_vectors(x, y, uhat):
    """|χ_Û> = x |Û>>_30 |Û*>>_21 + y |I>>_32 |I>>_10, batched over leading axes of Û."""
    uhat = np.asarray(uhat, dtype=complex)
    d = uhat.shape[-1]
    rotated = np.einsum("...ae,...bc->...abce", uhat, uhat.conj())
    rotated = rotated.reshape(uhat.shape[:-2] + (d ** 4,))
    return x * rotated + y * ket_b(d)


def constraint_residual(x, y, d):
    return x * x + y * y + 2 * x * y / d - 1.0


def y_from_x(x, d):
    if not -RANGE_TOL <= x <= 1 + RANGE_TOL:
        raise ConstraintError(f"x must lie in [0, 1], got {x}")
    x = min(max(x, 0.0), 1.0)
    return -x / d + np.sqrt(max(x * x / d ** 2 - x * x + 1.0, 0.0))


def _check_dimension(d):
    if not 2 <= d <= 6:
        raise ConstraintError(f"dimension must lie in [2, 6], got {d}")


def analytic_FG(x, y, d):
    fidelity = 1.0 - (d * d - 2) * x * x / (d * d)
    gain = (2.0 - y * y) / (d * d)
    return fidelity, gain


def info_disturbance(F, G, d):
    if not 2.0 / d ** 2 - RANGE_TOL <= F <= 1 + RANGE_TOL:
        raise ConstraintError(f"fidelity must lie in [2/d², 1] for d={d}, got {F}")
    if not 1.0 / d ** 2 - RANGE_TOL <= G <= 2.0 / d ** 2 + RANGE_TOL:
        raise ConstraintError(f"gain must lie in [1/d², 2/d²] for d={d}, got {G}")
    information = (G - 1.0 / d ** 2) / (1.0 / d ** 2)
    disturbance = (1.0 - F) / (1.0 - 2.0 / d ** 2)
    return information, disturbance


def curve_D_of_I(I, d, upper=False):
    """Root of d²(D - I)² = 4D(1 - I); the lower root is the optimal frontier"""
    if not -RANGE_TOL <= I <= 1 + RANGE_TOL:
        raise ConstraintError(f"information must lie in [0, 1], got {I}")
    I = min(max(I, 0.0), 1.0)
    b = 2 * d * d * I + 4 - 4 * I
    discriminant = max(b * b - 4 * d ** 4 * I * I, 0.0)
    root = np.sqrt(discriminant)
    return (b + root) / (2 * d * d) if upper else (b - root) / (2 * d * d)


def curve_residual(I, D, d):
    return d * d * (D - I) ** 2 - 4 * D * (1 - I)


def avg_pure_input_fidelity(F, d):
    return d * F / (d + 1) + 1.0 / (d + 1)


def gain_fidelity_g(uhat, u):
    """g = |Tr[Û U†]|² / d², batched over leading axes"""
    uhat = np.asarray(uhat)
    u = np.asarray(u)
    d = u.shape[-1]
    overlap = np.einsum("...ij,...ij->...", uhat, u.conj())
    return np.abs(overlap) ** 2 / d ** 2


@dataclass(frozen=True)
class TradeoffPoint:
    d: int
    x: float
    y: float
    F: float
    G: float
    I: float
    D: float
    p: float | None = None
    span_overlap: float | None = None

    @classmethod
    def from_xy(cls, x, y, d, p=None, span_overlap=None):
        F, G = analytic_FG(x, y, d)
        I, D = info_disturbance(F, G, d)
        return cls(d, float(x), float(y), F, G, I, D, p, span_overlap)

    def curve_residual(self):
        return curve_residual(self.I, self.D, self.d)

    def constraint_residual(self):
        return constraint_residual(self.x, self.y, self.d)

    def to_dict(self):
        return asdict(self)


def point_from_x(x, d):
    _check_dimension(d)
    return TradeoffPoint.from_xy(x, y_from_x(x, d), d)


def point_from_info(I, d, upper=False):
    """Point at information I; the upper branch needs a seed with y <= 0."""
    _check_dimension(d)
    D = curve_D_of_I(I, d, upper=upper)
    x = np.sqrt(D)
    y = np.sqrt(max(1.0 - I, 0.0))
    return TradeoffPoint.from_xy(x, -y if upper else y, d)


def point_from_p(p, d, method="full"):
    return optimal_seed_for_p(p, d, method=method)


def curve_points(d, n, upper=False):
    if n < 2:
        raise ConstraintError(f"a curve needs at least 2 points, got {n}")
    _check_dimension(d)
    return [point_from_info(I, d, upper=upper) for I in np.linspace(0.0, 1.0, n)]


@dataclass(frozen=True)
class CovariantInstrument:
    d: int
    x: float
    y: float
    xi: LabeledOperator

    @property
    def chi(self):
        return chi_vectors(self.x, self.y, np.eye(self.d))

    def chi_uhat(self, uhat):
        return chi_vectors(self.x, self.y, uhat)

    def r_uhat(self, uhat):
        v = self.chi_uhat(uhat)
        return LabeledOperator(np.outer(v, v.conj()), self.xi.layout)

    def point(self):
        return TradeoffPoint.from_xy(self.x, self.y, self.d)


def normalized_xy(x, y, d):
    """Validate (x, y) against the constraint, rescaling small deviations"""
    if x < -RANGE_TOL or y < -RANGE_TOL:
        raise ConstraintError(f"x and y must be nonnegative, got ({x}, {y})")
    x, y = max(x, 0.0), max(y, 0.0)
    residual = constraint_residual(x, y, d)
    if abs(residual) > CONSTRAINT_REJECT:
        raise ConstraintError(
            f"(x, y) = ({x}, {y}) violates x² + y² + 2xy/d = 1 by {residual:.3e}"
        )
    if abs(residual) > CONSTRAINT_TOL:
        scale = 1.0 / np.sqrt(1.0 + residual)
        logger.debug("rescaling (x, y) by %.12f onto the constraint", scale)
        x, y = x * scale, y * scale
    return float(x), float(y)


def instrument_from_xy(x, y, d):
    _check_dimension(d)
    x, y = normalized_xy(x, y, d)
    chi = chi_vectors(x, y, np.eye(d))
    return CovariantInstrument(d, x, y, LabeledOperator(np.outer(chi, chi.conj()), comb_layout(d)))


def r_total_matrix(x, y, d):
    blocks = schur_blocks(d)
    return (x + y * d) ** 2 * blocks["PP"] + x * x / (d * d - 1) * blocks["QQ"]


def r_total(x, y, d):
    """Normalization comb ∫dÛ R_Û of the covariant instrument, in closed form"""
    _check_dimension(d)
    x, y = normalized_xy(x, y, d)
    return Comb.from_operator(LabeledOperator(r_total_matrix(x, y, d), comb_layout(d)), teeth=2)


@dataclass(frozen=True)
class FigureOfMeritOperators:
    lambda_f: LabeledOperator
    lambda_g: LabeledOperator
    p: np.ndarray

    def combined(self, weight):
        return self.lambda_g * weight + self.lambda_f * (1.0 - weight)


def lambda_ops(d):
    """Closed forms of the fidelity and gain operators on (3, 2, 1, 0)"""
    _check_dimension(d)
    projector = max_entangled_projector(d)
    eye2 = np.eye(d * d)
    eye4 = np.eye(d ** 4)
    norm = 1.0 / (d * d * (d * d - 1))
    lambda_f = norm * (
        eye4
        + d * d * np.kron(projector, projector)
        - np.kron(projector, eye2)
        - np.kron(eye2, projector)
    )
    middle = np.kron(np.kron(np.eye(d), projector), np.eye(d))
    lambda_g = norm * ((1.0 - 2.0 / d ** 2) * eye4 + middle)
    layout = comb_layout(d)
    return FigureOfMeritOperators(
        LabeledOperator(lambda_f, layout), LabeledOperator(lambda_g, layout), projector
    )


def lambda_g_from_lambda_f(lambda_f, d):
    """d⁻¹ I_3 ⊗ Tr_30[(|I>><<I|_30 ⊗ I_21) Λ_F] ⊗ I_0"""
    regrouped = permute_factors(lambda_f, ("3", "0", "2", "1"))
    weight = np.kron(d * max_entangled_projector(d), np.eye(d * d))
    weighted = LabeledOperator(weight @ regrouped.matrix, regrouped.layout)
    middle = partial_trace(weighted, {"3", "0"})
    outer3 = LabeledOperator(np.eye(d), SpaceLayout.of(("3", d)))
    outer0 = LabeledOperator(np.eye(d), SpaceLayout.of(("0", d)))
    return tensor(outer3, middle, outer0) * (1.0 / d)


@dataclass(frozen=True)
class MCEstimate:
    value: float
    stderr: float
    n: int

    @classmethod
    def from_samples(cls, samples):
        samples = np.asarray(samples, dtype=float)
        n = samples.size
        stderr = float(samples.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        return cls(float(samples.mean()), stderr, n)

    def deviation(self, target):
        return abs(self.value - target)

    def agrees_with(self, target, sigma=3.0, abs_tol=5e-3):
        return self.deviation(target) <= max(sigma * self.stderr, abs_tol)

    def to_dict(self):
        return {"value": self.value, "stderr": self.stderr, "n": self.n}


@dataclass(frozen=True)
class OperatorEstimate:
    mean: LabeledOperator
    stderr: float
    n: int

    def distance(self, other):
        return float(np.linalg.norm(self.mean.matrix - self.mean.aligned(other).matrix))


def _blocks(n):
    start = 0
    while start < n:
        stop = min(start + BLOCK, n)
        yield stop - start
        start = stop


def _sandwich_vectors(u):
    """|U>>_30 |U*>>_21 on (3, 2, 1, 0), batched."""
    d = u.shape[-1]
    return np.einsum("nae,nbc->nabce", u, u.conj()).reshape(len(u), d ** 4)


def fidelity_samples(x, y, d, n, rng):
    """Per-sample d⁻² <<U|<<U*| R |U>>|U*>> over Haar U"""
    r = r_total_matrix(*normalized_xy(x, y, d), d)
    parts = []
    for size in _blocks(n):
        v = _sandwich_vectors(haar_unitary(d, rng, size))
        parts.append(np.real(np.einsum("ni,ni->n", v.conj(), v @ r.T)) / d ** 2)
    return np.concatenate(parts)


def _output_kraus(chi, u):
    """m_ae = sum_bc U_bc χ_abce: the d×d operator left after probing wires 2, 1 with U."""
    d = u.shape[-1]
    chi = chi.reshape(chi.shape[:-1] + (d, d, d, d))
    return np.einsum("nbc,nabce->nae", u, chi)


def gain_samples(x, y, d, n, rng):
    """Importance-weighted gain: density(Û | U, I/d) · g(Û, U) over independent Haar U, Û"""
    x, y = normalized_xy(x, y, d)
    parts = []
    for size in _blocks(n):
        u = haar_unitary(d, rng, size)
        uhat = haar_unitary(d, rng, size)
        m = _output_kraus(chi_vectors(x, y, uhat), u)
        density = np.sum(np.abs(m) ** 2, axis=(1, 2)) / d
        parts.append(density * gain_fidelity_g(uhat, u))
    return np.concatenate(parts)


def mc_F(x, y, d, n, rng):
    estimate = MCEstimate.from_samples(fidelity_samples(x, y, d, n, rng))
    logger.info("MC fidelity d=%d x=%.6f: %.6f ± %.2e", d, x, estimate.value, estimate.stderr)
    return estimate


def mc_G(x, y, d, n, rng, rho=None):
    if rho is not None and not np.allclose(rho, np.eye(d) / d, atol=1e-12):
        raise ConstraintError("the gain estimator is defined for the maximally mixed input only")
    estimate = MCEstimate.from_samples(gain_samples(x, y, d, n, rng))
    logger.info("MC gain d=%d y=%.6f: %.6f ± %.2e", d, y, estimate.value, estimate.stderr)
    return estimate


def _operator_estimate(total, total_sq_norm, n, layout):
    mean = total / n
    spread = max(total_sq_norm / n - np.linalg.norm(mean) ** 2, 0.0)
    return OperatorEstimate(LabeledOperator(mean, layout), float(np.sqrt(spread / n)), n)


def twirl_lambda_f_mc(d, n, rng):
    """Λ_F = d⁻² ∫dU |U>><<U|_30 ⊗ |U*>><<U*|_21 by Monte Carlo"""
    total = np.zeros((d ** 4, d ** 4), dtype=complex)
    total_sq_norm = 0.0
    for size in _blocks(n):
        v = _sandwich_vectors(haar_unitary(d, rng, size)) / d
        total += v.T @ v.conj()
        total_sq_norm += float(np.sum(np.sum(np.abs(v) ** 2, axis=1) ** 2))
    return _operator_estimate(total, total_sq_norm, n, comb_layout(d))


def twirl_lambda_g_mc(d, n, rng):
    """Λ_G = d⁻³ I_3 ⊗ ∫dW |Tr W|² |W*>><<W*|_21 ⊗ I_0 by Monte Carlo"""
    middle = np.zeros((d * d, d * d), dtype=complex)
    total_sq_norm = 0.0
    for size in _blocks(n):
        w = haar_unitary(d, rng, size)
        weights = np.abs(np.einsum("nii->n", w)) ** 2
        v = w.conj().reshape(size, d * d)
        middle += (v * weights[:, None]).T @ v.conj()
        total_sq_norm += float(np.sum(weights ** 2)) / d ** 2
    total = np.kron(np.kron(np.eye(d), middle), np.eye(d)) / d ** 3
    return _operator_estimate(total, total_sq_norm, n, comb_layout(d))


def r_total_mc(x, y, d, n, rng):
    """∫dÛ |χ_Û><χ_Û| by Monte Carlo"""
    x, y = normalized_xy(x, y, d)
    total = np.zeros((d ** 4, d ** 4), dtype=complex)
    total_sq_norm = 0.0
    for size in _blocks(n):
        chi = chi_vectors(x, y, haar_unitary(d, rng, size))
        total += chi.T @ chi.conj()
        total_sq_norm += float(np.sum(np.sum(np.abs(chi) ** 2, axis=1) ** 2))
    return _operator_estimate(total, total_sq_norm, n, comb_layout(d))


def _span_basis(d):
    return np.column_stack([ket_a(d), ket_b(d)])


def _top_in_span_full(weighted, basis):
    """Top eigenvector of the full operator, located inside span(basis).

    When the top eigenvalue is degenerate, the unique vector of the top
    eigenspace lying in the span is selected.
    """
    values, vectors = herm_eig(weighted)
    top = values[-1]
    tied = values >= top - 1e-9 * max(abs(top), 1e-300)
    eigenspace = vectors[:, tied]
    gram = basis.conj().T @ basis
    captured = basis.conj().T @ eigenspace @ eigenspace.conj().T @ basis
    overlaps, coefficients = linalg.eigh((captured + captured.conj().T) / 2, gram)
    inside = overlaps >= 1.0 - SPAN_OVERLAP_TOL
    logger.debug(
        "top eigenvalue %.12g with multiplicity %d; span overlaps %s",
        top, int(tied.sum()), np.array2string(overlaps, precision=12),
    )
    if not inside.any():
        raise DegenerateEigenError(
            f"top eigenvector leaves the seed span (squared overlap {overlaps[-1]:.3e})"
        )
    if inside.sum() > 1:
        raise DegenerateEigenError("top eigenvalue is degenerate inside the seed span")
    return coefficients[:, -1], float(min(overlaps[-1], 1.0))


def _top_in_span_reduced(weighted, basis):
    reduced = basis.conj().T @ weighted @ basis
    gram = basis.conj().T @ basis
    values, coefficients = linalg.eigh((reduced + reduced.conj().T) / 2, gram)
    if values[-1] - values[-2] <= 1e-12 * max(abs(values[-1]), 1e-300):
        raise DegenerateEigenError("reduced eigenproblem has a degenerate top eigenvalue")
    return coefficients[:, -1], None


def optimal_seed_for_p(p, d, method="full"):
    """Optimal seed for the figure of merit p·G + (1 - p)·F.

    method="full" diagonalizes the operator on all d⁴ dimensions and checks
    that the maximizer lies in span{|a>, |b>}; method="reduced" solves the
    2×2 generalized eigenproblem in that non-orthogonal basis.
    """
    if not 0.0 <= p <= 1.0:
        raise ConstraintError(f"weight p must lie in [0, 1], got {p}")
    ops = lambda_ops(d)
    weighted = ops.combined(p).matrix
    basis = _span_basis(d)
    if method == "full":
        coefficients, overlap = _top_in_span_full(weighted, basis)
    elif method == "reduced":
        coefficients, overlap = _top_in_span_reduced(weighted, basis)
    else:
        raise ValueError(f"unknown method {method!r}")

    pivot = coefficients[np.argmax(np.abs(coefficients))]
    real = (coefficients * np.abs(pivot) / pivot).real
    if real.min() < -1e-8 * np.abs(real).max():
        raise DegenerateEigenError(f"optimal seed has coefficients of opposite sign: {real}")
    x, y = np.clip(real, 0.0, None)
    scale = np.sqrt(x * x + y * y + 2 * x * y / d)
    x, y = x / scale, y / scale
    logger.debug("p=%.4f d=%d -> x=%.12f y=%.12f", p, d, x, y)
    return TradeoffPoint.from_xy(x, y, d, p=p, span_overlap=overlap)
