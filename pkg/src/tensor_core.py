"""Dense complex operators on labeled tensor factors.

Every operator carries a SpaceLayout: an ordered list of (label, dim)
factors. Matrices are stored row-major with the first factor as the most
significant index, which is also the convention used by vectorize():
|A>> = sum_nm A_nm |n>|m>.
"""
import logging
from dataclasses import dataclass
from math import prod

import numpy as np
from scipy import linalg

from errors import LayoutError, NotHermitianError, NotPSDError

logger = logging.getLogger(__name__)

MAX_LOCAL_DIM = 6
MAX_SPACE_DIM = MAX_LOCAL_DIM ** 4
HERMITIAN_TOL = 1e-10
RANK_TOL = 1e-10


@dataclass(frozen=True)
class SpaceLayout:
    factors: tuple

    def __post_init__(self):
        factors = tuple((str(label), int(dim)) for label, dim in self.factors)
        labels = [label for label, _ in factors]
        if len(set(labels)) != len(labels):
            raise LayoutError(f"duplicate labels in layout {labels}")
        if any(dim < 1 for _, dim in factors):
            raise LayoutError(f"factor dimensions must be positive: {factors}")
        object.__setattr__(self, "factors", factors)

    @classmethod
    def of(cls, *pairs):
        return cls(tuple(pairs))

    @property
    def labels(self):
        return tuple(label for label, _ in self.factors)

    @property
    def dims(self):
        return tuple(dim for _, dim in self.factors)

    @property
    def total_dim(self):
        return prod(self.dims)

    def dim(self, label):
        return self.dims[self.index(label)]

    def index(self, label):
        try:
            return self.labels.index(label)
        except ValueError:
            raise LayoutError(f"unknown label {label!r}; layout has {self.labels}") from None

    def require(self, labels):
        for label in labels:
            self.index(label)

    def without(self, labels):
        drop = set(labels)
        return SpaceLayout(tuple(f for f in self.factors if f[0] not in drop))

    def reordered(self, order):
        return SpaceLayout(tuple((label, self.dim(label)) for label in order))

    def __add__(self, other):
        return SpaceLayout(self.factors + other.factors)

    def __len__(self):
        return len(self.factors)


@dataclass(frozen=True)
class LabeledOperator:
    matrix: np.ndarray
    layout: SpaceLayout

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=complex)
        n = self.layout.total_dim
        if matrix.shape != (n, n):
            raise LayoutError(
                f"matrix shape {matrix.shape} does not match layout dimension {n}"
            )
        if n > MAX_SPACE_DIM:
            raise LayoutError(f"space dimension {n} exceeds the supported {MAX_SPACE_DIM}")
        object.__setattr__(self, "matrix", matrix)

    @property
    def labels(self):
        return self.layout.labels

    @property
    def dim(self):
        return self.layout.total_dim

    def tensor(self):
        """View as a rank-2n array (row factors, then column factors)."""
        dims = self.layout.dims
        return self.matrix.reshape(dims + dims)

    def trace(self):
        return complex(np.trace(self.matrix))

    def dagger(self):
        return LabeledOperator(self.matrix.conj().T, self.layout)

    def conj(self):
        return LabeledOperator(self.matrix.conj(), self.layout)

    def aligned(self, other):
        """Return `other` with factors permuted into this operator's order."""
        if set(other.labels) != set(self.labels):
            raise LayoutError(f"layouts differ: {self.labels} vs {other.labels}")
        other = permute_factors(other, self.labels)
        if other.layout != self.layout:
            raise LayoutError(f"factor dimensions differ: {self.layout} vs {other.layout}")
        return other

    def __add__(self, other):
        return LabeledOperator(self.matrix + self.aligned(other).matrix, self.layout)

    def __sub__(self, other):
        return LabeledOperator(self.matrix - self.aligned(other).matrix, self.layout)

    def __mul__(self, scalar):
        return LabeledOperator(self.matrix * scalar, self.layout)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return LabeledOperator(self.matrix @ self.aligned(other).matrix, self.layout)


@dataclass(frozen=True)
class LabeledMap:
    """Rectangular operator from one labeled space to another."""

    matrix: np.ndarray
    out_layout: SpaceLayout
    in_layout: SpaceLayout

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=complex)
        shape = (self.out_layout.total_dim, self.in_layout.total_dim)
        if matrix.shape != shape:
            raise LayoutError(f"matrix shape {matrix.shape} does not match {shape}")
        object.__setattr__(self, "matrix", matrix)

    def __matmul__(self, other):
        if isinstance(other, LabeledMap):
            if other.out_layout != self.in_layout:
                raise LayoutError(
                    f"cannot compose: {self.in_layout.labels} <- {other.out_layout.labels}"
                )
            return LabeledMap(self.matrix @ other.matrix, self.out_layout, other.in_layout)
        return self.matrix @ np.asarray(other)

    def dagger(self):
        return LabeledMap(self.matrix.conj().T, self.in_layout, self.out_layout)


def identity(layout):
    return LabeledOperator(np.eye(layout.total_dim, dtype=complex), layout)


def tensor(*ops):
    """Kronecker product; factor order follows argument order."""
    if not ops:
        return LabeledOperator(np.ones((1, 1), dtype=complex), SpaceLayout(()))
    matrix = ops[0].matrix
    layout = ops[0].layout
    for op in ops[1:]:
        matrix = np.kron(matrix, op.matrix)
        layout = layout + op.layout
    return LabeledOperator(matrix, layout)


def vectorize(a):
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise LayoutError(f"vectorize expects a square matrix, got shape {a.shape}")
    return a.reshape(-1).astype(complex)


def devectorize(v, d=None):
    v = np.asarray(v)
    if d is None:
        d = int(round(np.sqrt(v.size)))
    if d * d != v.size:
        raise LayoutError(f"vector of length {v.size} is not a d*d vectorization")
    return v.reshape(d, d).astype(complex)


def ket_identity(d):
    """|I>> on two d-dimensional factors."""
    return vectorize(np.eye(d))


def max_entangled_projector(d):
    """P = |I>><<I| / d."""
    v = ket_identity(d)
    return np.outer(v, v.conj()) / d


def partial_trace(op, labels):
    labels = set(labels)
    op.layout.require(labels)
    dims = op.layout.dims
    n = len(dims)
    row = list(range(n))
    col = list(range(n, 2 * n))
    keep = []
    for i, label in enumerate(op.labels):
        if label in labels:
            col[i] = row[i]
        else:
            keep.append(i)
    out = [row[i] for i in keep] + [col[i] for i in keep]
    reduced = np.einsum(op.tensor(), row + col, out)
    layout = op.layout.without(labels)
    side = layout.total_dim
    return LabeledOperator(np.asarray(reduced).reshape(side, side), layout)


def partial_transpose(op, labels):
    labels = set(labels)
    op.layout.require(labels)
    n = len(op.layout)
    axes = list(range(2 * n))
    for i, label in enumerate(op.labels):
        if label in labels:
            axes[i], axes[n + i] = n + i, i
    side = op.dim
    return LabeledOperator(op.tensor().transpose(axes).reshape(side, side), op.layout)


def permute_factors(op, new_order):
    new_order = tuple(str(label) for label in new_order)
    if sorted(new_order) != sorted(op.labels):
        raise LayoutError(f"{new_order} is not a permutation of {op.labels}")
    if new_order == op.labels:
        return op
    n = len(op.layout)
    perm = [op.layout.index(label) for label in new_order]
    axes = perm + [n + p for p in perm]
    side = op.dim
    matrix = op.tensor().transpose(axes).reshape(side, side)
    return LabeledOperator(matrix, op.layout.reordered(new_order))


def local_operator(layout, locals_by_label):
    """Kronecker product over `layout` with the given per-factor matrices."""
    matrix = np.ones((1, 1), dtype=complex)
    for label, dim in layout.factors:
        block = locals_by_label.get(label)
        matrix = np.kron(matrix, np.eye(dim) if block is None else block)
    return matrix


def haar_unitary(d, rng, size=None):
    """Haar-distributed unitaries from QR of a Ginibre matrix.

    The phases of diag(R) are moved into Q; without that correction the
    distribution is not Haar.
    """
    shape = (d, d) if size is None else (size, d, d)
    z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    phases = diag / np.abs(diag)
    return q * phases[..., None, :]


def random_pure_state(d, rng, size=None):
    return haar_unitary(d, rng, size)[..., :, 0]


def _matrix_of(op):
    return op.matrix if isinstance(op, LabeledOperator) else np.asarray(op, dtype=complex)


def herm_eig(op, tol=HERMITIAN_TOL):
    """Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian operator"""
    a = _matrix_of(op)
    scale = max(1.0, np.abs(a).max(initial=0.0))
    error = np.abs(a - a.conj().T).max(initial=0.0)
    if error > tol * scale:
        raise NotHermitianError(f"operator is not Hermitian (deviation {error:.3e})")
    return linalg.eigh((a + a.conj().T) / 2)


def support_basis(op, tol=RANK_TOL):
    """Orthonormal columns spanning the support of a PSD operator."""
    values, vectors = herm_eig(op)
    top = max(values.max(initial=0.0), 0.0)
    return vectors[:, values > tol * top] if top > 0 else vectors[:, :0]


def psd_power(op, exponent, tol=RANK_TOL):
    """A^exponent restricted to the support of A.

    Eigenvalues with |λ| <= tol·λ_max count as zero and stay zero for any
    exponent, so exponent -1/2 gives the support-restricted inverse root.
    """
    values, vectors = herm_eig(op)
    top = max(np.abs(values).max(initial=0.0), 0.0)
    cutoff = tol * top
    if values.min(initial=0.0) < -cutoff:
        raise NotPSDError(
            f"operator has a negative eigenvalue {values.min():.3e} (cutoff {cutoff:.3e})"
        )
    powered = np.zeros_like(values)
    positive = values > cutoff
    powered[positive] = values[positive] ** exponent
    matrix = (vectors * powered) @ vectors.conj().T
    if isinstance(op, LabeledOperator):
        return LabeledOperator(matrix, op.layout)
    return matrix


def teleportation_op(from_label, to_label, d, d_to=None):
    """T = sum_k |k>_to <k|_from, relabeling one d-dimensional factor."""
    if d_to is not None and d_to != d:
        raise LayoutError(f"cannot teleport a {d}-dimensional factor onto {d_to} dimensions")
    return LabeledMap(
        np.eye(d, dtype=complex),
        SpaceLayout.of((to_label, d)),
        SpaceLayout.of((from_label, d)),
    )
