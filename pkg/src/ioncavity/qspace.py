"""Dense complex operator algebra on small composite Hilbert spaces.

Everything in this package lives on a tensor product of a few small
subsystems (one four-level atom, two truncated bosonic modes).  Operators
are stored as dense complex matrices tagged with the subsystem layout;
at the supported sizes (total dimension <= 256) dense algebra is simpler
and plenty fast, so there is deliberately no sparse or symbolic path.

Subsystem order is fixed globally as (atom, mode H, mode V); every
builder in the package uses this order so layouts never have to be
re-derived.  Operators are immutable after construction and safe to
share across parallel workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import ModelError

# Largest composite dimension the dense representation is meant for.
MAX_TOTAL_DIM = 256


@dataclass(frozen=True)
class SpaceLayout:
    """Ordered subsystem dimensions of a composite Hilbert space."""

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        if not dims:
            raise ModelError("layout needs at least one subsystem")
        if any(d < 1 for d in dims):
            raise ModelError(f"subsystem dimensions must be >= 1, got {dims}")
        if math.prod(dims) > MAX_TOTAL_DIM:
            raise ModelError(
                f"total dimension {math.prod(dims)} exceeds supported "
                f"truncation range ({MAX_TOTAL_DIM})"
            )

    @property
    def total_dim(self) -> int:
        return math.prod(self.dims)

    def __len__(self) -> int:
        return len(self.dims)


@dataclass(frozen=True)
class Operator:
    """A dense complex matrix acting on a composite space.

    The matrix is copied on construction and frozen (non-writeable), so
    instances can be shared freely.  Arithmetic returns new operators and
    requires matching layouts.
    """

    layout: SpaceLayout
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex, copy=True)
        d = self.layout.total_dim
        if m.ndim != 2 or m.shape != (d, d):
            raise ModelError(
                f"matrix shape {m.shape} does not match layout dimension {d}"
            )
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    # -- basic algebra ---------------------------------------------------
    def dag(self) -> "Operator":
        """Hermitian adjoint."""
        return Operator(self.layout, self.matrix.conj().T)

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T)) <= tol)

    def require_hermitian(self, tol: float = 1e-12, what: str = "operator") -> None:
        dev = float(np.max(np.abs(self.matrix - self.matrix.conj().T)))
        if dev > tol:
            raise ModelError(f"{what} is not Hermitian (max |M - M^dag| = {dev:.3e})")

    def _check_layout(self, other: "Operator") -> None:
        if self.layout != other.layout:
            raise ModelError(
                f"layout mismatch: {self.layout.dims} vs {other.layout.dims}"
            )

    def __add__(self, other: "Operator") -> "Operator":
        self._check_layout(other)
        return Operator(self.layout, self.matrix + other.matrix)

    def __sub__(self, other: "Operator") -> "Operator":
        self._check_layout(other)
        return Operator(self.layout, self.matrix - other.matrix)

    def __neg__(self) -> "Operator":
        return Operator(self.layout, -self.matrix)

    def __mul__(self, scalar: complex) -> "Operator":
        return Operator(self.layout, self.matrix * scalar)

    __rmul__ = __mul__

    def __matmul__(self, other: "Operator") -> "Operator":
        self._check_layout(other)
        return Operator(self.layout, self.matrix @ other.matrix)


def identity(layout: SpaceLayout) -> Operator:
    return Operator(layout, np.eye(layout.total_dim, dtype=complex))


def annihilation(n_max: int) -> Operator:
    """Truncated bosonic annihilation operator on a single mode.

    The mode keeps Fock states |0> .. |n_max|, so the matrix is
    (n_max+1) x (n_max+1) with <n-1|a|n> = sqrt(n).
    """
    n_max = int(n_max)
    if n_max < 1:
        raise ModelError(f"invalid truncation: n_max must be >= 1, got {n_max}")
    dim = n_max + 1
    a = np.zeros((dim, dim), dtype=complex)
    for n in range(1, dim):
        a[n - 1, n] = np.sqrt(n)
    return Operator(SpaceLayout((dim,)), a)


def embed(op: Operator, slot: int, layout: SpaceLayout) -> Operator:
    """Tensor a single-subsystem operator with identities on all other slots."""
    if not 0 <= slot < len(layout):
        raise ModelError(f"slot {slot} outside layout with {len(layout)} subsystems")
    if op.layout.total_dim != layout.dims[slot]:
        raise ModelError(
            f"operator dimension {op.layout.total_dim} does not match "
            f"layout slot {slot} (dimension {layout.dims[slot]})"
        )
    out = np.array([[1.0 + 0.0j]])
    for i, d in enumerate(layout.dims):
        out = np.kron(out, op.matrix if i == slot else np.eye(d, dtype=complex))
    return Operator(layout, out)


def expectation(rho: Operator, obs: Operator) -> complex:
    """tr(rho . obs) for a density matrix rho (trace must be 1 to 1e-9)."""
    rho._check_layout(obs)
    tr = rho.trace()
    if abs(tr - 1.0) > 1e-9:
        raise ModelError(f"density matrix not normalized: trace = {tr}")
    return complex(np.einsum("ij,ji->", rho.matrix, obs.matrix))


def tensor_many(ops: Iterable[np.ndarray]) -> np.ndarray:
    """Plain Kronecker product of a sequence of matrices (helper for tests)."""
    out = np.array([[1.0 + 0.0j]])
    for m in ops:
        out = np.kron(out, m)
    return out
