"""Labeled tensor-product spaces and dense operators on them.

Composite basis indices follow a row-major convention: the first factor is
the most significant digit, so for factors (d_1, ..., d_n) the basis state
(i_1, ..., i_n) sits at index sum_k i_k * prod_{j>k} d_j. This is the same
ordering numpy.kron produces.
"""

import os
from dataclasses import dataclass
from typing import Dict, Iterable, Sequence, Tuple

import numpy as np

DEFAULT_DIM_LIMIT = 4096
DIM_LIMIT_ENV = "REDSTATES_DIM_LIMIT"

# Frobenius-norm tolerance used for every equality check.
TOLERANCE = 1e-10


class SpaceError(Exception):
    """Malformed space, unknown label or mismatched operands."""
    pass


class DimensionLimitError(SpaceError):
    """Total dimension exceeds the configured cap."""
    pass


def dimension_limit() -> int:
    """Return the total-dimension cap, honouring REDSTATES_DIM_LIMIT."""
    raw = os.environ.get(DIM_LIMIT_ENV)
    if raw is None or raw.strip() == "":
        return DEFAULT_DIM_LIMIT
    try:
        limit = int(raw)
    except ValueError:
        raise SpaceError(f"{DIM_LIMIT_ENV} must be an integer, got {raw!r}")
    if limit < 1:
        raise SpaceError(f"{DIM_LIMIT_ENV} must be positive, got {limit}")
    return limit


@dataclass(frozen=True)
class SpaceSpec:
    """Ordered list of (label, dim) tensor factors."""
    factors: Tuple[Tuple[str, int], ...]

    def __post_init__(self):
        factors = tuple((str(label), int(dim)) for label, dim in self.factors)
        object.__setattr__(self, 'factors', factors)
        if not factors:
            raise SpaceError("space needs at least one factor")
        seen = set()
        for label, dim in factors:
            if label in seen:
                raise SpaceError(f"duplicate factor label '{label}'")
            seen.add(label)
            if dim < 1:
                raise SpaceError(f"factor '{label}' has dimension {dim} < 1")
        limit = dimension_limit()
        if self.dim > limit:
            raise DimensionLimitError(
                f"total dimension {self.dim} of {self} exceeds limit {limit}"
            )

    @classmethod
    def of(cls, *factors: Tuple[str, int]) -> 'SpaceSpec':
        return cls(tuple(factors))

    @classmethod
    def single(cls, label: str, dim: int) -> 'SpaceSpec':
        return cls(((label, dim),))

    @property
    def labels(self) -> Tuple[str, ...]:
        return tuple(label for label, _ in self.factors)

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(dim for _, dim in self.factors)

    @property
    def dim(self) -> int:
        """Total dimension (product of factor dimensions)."""
        total = 1
        for _, d in self.factors:
            total *= d
        return total

    def has(self, label: str) -> bool:
        return label in self.labels

    def position(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise SpaceError(f"unknown factor label '{label}' in {self}")

    def dim_of(self, label: str) -> int:
        return self.dims[self.position(label)]

    def concat(self, other: 'SpaceSpec') -> 'SpaceSpec':
        """Factors of self followed by factors of other."""
        clash = set(self.labels) & set(other.labels)
        if clash:
            raise SpaceError(f"label collision: {sorted(clash)}")
        return SpaceSpec(self.factors + other.factors)

    def subspace(self, labels: Iterable[str]) -> 'SpaceSpec':
        """The named factors, kept in this space's order."""
        wanted = set(labels)
        for label in wanted:
            self.position(label)
        return SpaceSpec(tuple(f for f in self.factors if f[0] in wanted))

    def complement(self, labels: Iterable[str]) -> Tuple[str, ...]:
        """Labels of this space not in `labels`, in order."""
        excluded = set(labels)
        for label in excluded:
            self.position(label)
        return tuple(label for label in self.labels if label not in excluded)

    def __str__(self) -> str:
        return " ⊗ ".join(f"{label}({dim})" for label, dim in self.factors)


@dataclass(frozen=True, eq=False)
class LinOp:
    """Dense complex square matrix bound to a SpaceSpec."""
    space: SpaceSpec
    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=np.complex128)
        d = self.space.dim
        if matrix.shape != (d, d):
            raise SpaceError(
                f"matrix shape {matrix.shape} does not match {self.space} (dim {d})"
            )
        matrix.setflags(write=False)
        object.__setattr__(self, 'matrix', matrix)

    @classmethod
    def identity(cls, space: SpaceSpec) -> 'LinOp':
        return cls(space, np.eye(space.dim, dtype=np.complex128))

    @classmethod
    def zeros(cls, space: SpaceSpec) -> 'LinOp':
        return cls(space, np.zeros((space.dim, space.dim), dtype=np.complex128))

    @property
    def dim(self) -> int:
        return self.space.dim

    def dag(self) -> 'LinOp':
        return LinOp(self.space, self.matrix.conj().T)

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def is_hermitian(self, tol: float = TOLERANCE) -> bool:
        return float(np.linalg.norm(self.matrix - self.matrix.conj().T)) < tol

    def is_zero(self) -> bool:
        return not np.any(self.matrix)

    def relabel(self, label: str) -> 'LinOp':
        """Same matrix on a single factor renamed to `label`."""
        if len(self.space.factors) != 1:
            raise SpaceError(f"cannot relabel multi-factor operator on {self.space}")
        return LinOp(SpaceSpec.single(label, self.dim), self.matrix)

    def _check_same(self, other: 'LinOp') -> None:
        if self.space != other.space:
            raise SpaceError(f"space mismatch: {self.space} vs {other.space}")

    def __add__(self, other: 'LinOp') -> 'LinOp':
        self._check_same(other)
        return LinOp(self.space, self.matrix + other.matrix)

    def __sub__(self, other: 'LinOp') -> 'LinOp':
        self._check_same(other)
        return LinOp(self.space, self.matrix - other.matrix)

    def __neg__(self) -> 'LinOp':
        return LinOp(self.space, -self.matrix)

    def __mul__(self, scalar: complex) -> 'LinOp':
        return LinOp(self.space, self.matrix * scalar)

    __rmul__ = __mul__

    def __matmul__(self, other: 'LinOp') -> 'LinOp':
        self._check_same(other)
        return LinOp(self.space, self.matrix @ other.matrix)

    def __repr__(self) -> str:
        return f"LinOp({self.space})"


_PAULI: Dict[str, np.ndarray] = {
    'i': np.eye(2, dtype=np.complex128),
    'x': np.array([[0, 1], [1, 0]], dtype=np.complex128),
    'y': np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    'z': np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


def pauli(name: str, label: str = "q") -> LinOp:
    """Pauli matrix 'x', 'y', 'z' (or 'i') on a qubit factor."""
    try:
        matrix = _PAULI[name.lower()]
    except KeyError:
        raise SpaceError(f"unknown Pauli matrix '{name}'")
    return LinOp(SpaceSpec.single(label, 2), matrix)


def tensor_product(a: LinOp, b: LinOp) -> LinOp:
    """Kronecker product on the concatenated space."""
    space = a.space.concat(b.space)
    return LinOp(space, np.kron(a.matrix, b.matrix))


def tensor_all(ops: Sequence[LinOp]) -> LinOp:
    """Left fold of tensor_product."""
    if not ops:
        raise SpaceError("tensor_all needs at least one operator")
    result = ops[0]
    for op in ops[1:]:
        result = tensor_product(result, op)
    return result


def reorder(op: LinOp, target: SpaceSpec) -> LinOp:
    """Express `op` in the factor ordering of `target`.

    Both spaces must hold the same (label, dim) factors.
    """
    if sorted(op.space.factors) != sorted(target.factors):
        raise SpaceError(f"cannot reorder {op.space} into {target}")
    if op.space.labels == target.labels:
        return LinOp(target, op.matrix)
    dims = list(op.space.dims)
    n = len(dims)
    perm = [op.space.position(label) for label in target.labels]
    tensor = op.matrix.reshape(dims + dims)
    tensor = tensor.transpose(perm + [n + p for p in perm])
    return LinOp(target, tensor.reshape(target.dim, target.dim))


def embed_subsystem(op: LinOp, target: SpaceSpec) -> LinOp:
    """Embed an operator on a subset of target's factors (identity elsewhere)."""
    for label, dim in op.space.factors:
        if target.dim_of(label) != dim:
            raise SpaceError(
                f"factor '{label}' has dimension {dim}, target has {target.dim_of(label)}"
            )
    rest = target.complement(op.space.labels)
    if not rest:
        return reorder(op, target)
    rest_space = target.subspace(rest)
    full = tensor_product(op, LinOp.identity(rest_space))
    return reorder(full, target)


def embed(o1: LinOp, target: SpaceSpec, at: str) -> LinOp:
    """Act as o1 on factor `at` and as the identity on every other factor."""
    if len(o1.space.factors) != 1:
        raise SpaceError(f"embed expects a single-factor operator, got {o1.space}")
    dim = target.dim_of(at)
    if dim != o1.dim:
        raise SpaceError(
            f"dimension mismatch: operator has {o1.dim}, factor '{at}' has {dim}"
        )
    return embed_subsystem(o1.relabel(at), target)


def commutator(a: LinOp, b: LinOp) -> LinOp:
    """AB - BA."""
    a._check_same(b)
    return LinOp(a.space, a.matrix @ b.matrix - b.matrix @ a.matrix)


def frobenius_distance(a: LinOp, b: LinOp) -> float:
    a._check_same(b)
    return float(np.linalg.norm(a.matrix - b.matrix))


def projector(space: SpaceSpec, vector: np.ndarray) -> LinOp:
    """|v><v| for a vector in `space` (not normalized here)."""
    v = np.asarray(vector, dtype=np.complex128).reshape(-1)
    if v.shape[0] != space.dim:
        raise SpaceError(f"vector of length {v.shape[0]} does not fit {space}")
    return LinOp(space, np.outer(v, v.conj()))


def basis_projector(space: SpaceSpec, index: int) -> LinOp:
    """|index><index| in the computational basis of `space`."""
    if not 0 <= index < space.dim:
        raise SpaceError(f"basis index {index} out of range for {space}")
    matrix = np.zeros((space.dim, space.dim), dtype=np.complex128)
    matrix[index, index] = 1.0
    return LinOp(space, matrix)


def composite_index(space: SpaceSpec, digits: Sequence[int]) -> int:
    """Row-major composite index of per-factor basis digits."""
    if len(digits) != len(space.factors):
        raise SpaceError(f"expected {len(space.factors)} digits, got {len(digits)}")
    index = 0
    for digit, dim in zip(digits, space.dims):
        if not 0 <= digit < dim:
            raise SpaceError(f"digit {digit} out of range for dimension {dim}")
        index = index * dim + digit
    return index
