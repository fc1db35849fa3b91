"""Operators on truncated bosonic Fock spaces and two-level (spin) spaces.

Everything is a dense complex matrix tagged with the layout of the composite
space it acts on.  Dimensions in scope stay small (a few hundred), so dense
algebra is both simpler and fast enough; no sparse formats are used.
Subsystem ordering is fixed by the layout declaration order and all callers
address subsystems by index.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import reduce

import numpy as np
from scipy.linalg import expm as _scipy_expm

HERMITICITY_TOL = 1e-12


class DimensionError(ValueError):
    """Requested subsystem dimension is not representable."""


class LayoutMismatchError(ValueError):
    """Operator and layout (or two operators) live on different spaces."""


class TruncationWarning(UserWarning):
    """Result is expected to be visibly distorted by the Fock cutoff."""


@dataclass(frozen=True)
class Subsystem:
    kind: str  # "oscillator" or "tls"
    dim: int

    def __post_init__(self):
        if self.kind not in ("oscillator", "tls"):
            raise ValueError(f"unknown subsystem kind {self.kind!r}")
        if self.kind == "oscillator" and self.dim < 2:
            raise DimensionError(f"oscillator dimension must be >= 2, got {self.dim}")
        if self.kind == "tls" and self.dim != 2:
            raise DimensionError(f"tls dimension must be 2, got {self.dim}")


def oscillator(dim: int) -> Subsystem:
    return Subsystem("oscillator", dim)


def tls() -> Subsystem:
    return Subsystem("tls", 2)


@dataclass(frozen=True)
class SpaceLayout:
    """Ordered factorization of a composite Hilbert space."""

    subsystems: tuple[Subsystem, ...]

    def __post_init__(self):
        object.__setattr__(self, "subsystems", tuple(self.subsystems))
        if not self.subsystems:
            raise ValueError("layout needs at least one subsystem")

    @classmethod
    def for_system(cls, n_oscillators: int, n_tls: int, n_max: int) -> "SpaceLayout":
        """Layout [osc(n_max+1)] * N followed by [tls] * M."""
        return cls(
            tuple(oscillator(n_max + 1) for _ in range(n_oscillators))
            + tuple(tls() for _ in range(n_tls))
        )

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(s.dim for s in self.subsystems)

    @property
    def total_dim(self) -> int:
        out = 1
        for s in self.subsystems:
            out *= s.dim
        return out

    @property
    def oscillator_slots(self) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.subsystems) if s.kind == "oscillator")

    @property
    def tls_slots(self) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.subsystems) if s.kind == "tls")

    def basis_index(self, occupations: tuple[int, ...]) -> int:
        """Flat index of the product basis state with the given per-subsystem labels."""
        if len(occupations) != len(self.subsystems):
            raise LayoutMismatchError("one label per subsystem required")
        idx = 0
        for n, sub in zip(occupations, self.subsystems):
            if not 0 <= n < sub.dim:
                raise ValueError(f"label {n} out of range for dim {sub.dim}")
            idx = idx * sub.dim + n
        return idx


def _freeze(matrix: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(matrix, dtype=np.complex128)
    if out is matrix:
        out = out.copy()
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class QOperator:
    """Dense operator on a composite truncated space.

    Immutable after construction; the matrix buffer is read-only and safe to
    share across threads.
    """

    layout: SpaceLayout
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix)
        d = self.layout.total_dim
        if m.shape != (d, d):
            raise LayoutMismatchError(
                f"matrix shape {m.shape} does not match layout dimension {d}"
            )
        object.__setattr__(self, "matrix", _freeze(m))

    @property
    def dim(self) -> int:
        return self.layout.total_dim

    def dag(self) -> "QOperator":
        return QOperator(self.layout, self.matrix.conj().T)

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def is_hermitian(self, tol: float = HERMITICITY_TOL) -> bool:
        return self.hermiticity_error() < tol

    def _require_same_layout(self, other: "QOperator"):
        if self.layout != other.layout:
            raise LayoutMismatchError("operators live on different layouts")

    def __matmul__(self, other: "QOperator") -> "QOperator":
        self._require_same_layout(other)
        return QOperator(self.layout, self.matrix @ other.matrix)

    def __add__(self, other: "QOperator") -> "QOperator":
        self._require_same_layout(other)
        return QOperator(self.layout, self.matrix + other.matrix)

    def __sub__(self, other: "QOperator") -> "QOperator":
        self._require_same_layout(other)
        return QOperator(self.layout, self.matrix - other.matrix)

    def __mul__(self, scalar) -> "QOperator":
        return QOperator(self.layout, self.matrix * complex(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "QOperator":
        return QOperator(self.layout, -self.matrix)


def identity(layout: SpaceLayout) -> QOperator:
    return QOperator(layout, np.eye(layout.total_dim, dtype=np.complex128))


def annihilation(dim: int) -> QOperator:
    """Ladder operator a on a single truncated mode: A[n-1, n] = sqrt(n)."""
    if dim < 2:
        raise DimensionError(f"annihilation needs dim >= 2, got {dim}")
    m = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(np.complex128)
    return QOperator(SpaceLayout((oscillator(dim),)), m)


def creation(dim: int) -> QOperator:
    return annihilation(dim).dag()


def number(dim: int) -> QOperator:
    a = annihilation(dim)
    return QOperator(a.layout, a.matrix.conj().T @ a.matrix)


_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
    "plus": np.array([[0, 1], [0, 0]], dtype=np.complex128),
    "minus": np.array([[0, 0], [1, 0]], dtype=np.complex128),
}


def pauli(which: str) -> QOperator:
    """Pauli / spin-ladder matrix in the {|+>, |->} basis, sigma_z |-> = -|->."""
    try:
        m = _PAULI[which]
    except KeyError:
        raise ValueError(f"unknown Pauli label {which!r}") from None
    return QOperator(SpaceLayout((tls(),)), m)


def embed(op: QOperator, layout: SpaceLayout, slot: int) -> QOperator:
    """Lift a single-subsystem operator into a composite layout at `slot`."""
    if not 0 <= slot < len(layout.subsystems):
        raise LayoutMismatchError(f"slot {slot} out of range for layout")
    if len(op.layout.subsystems) != 1:
        raise LayoutMismatchError("embed expects a single-subsystem operator")
    if op.layout.subsystems[0].dim != layout.subsystems[slot].dim:
        raise LayoutMismatchError(
            f"operator dim {op.layout.subsystems[0].dim} does not match "
            f"slot dim {layout.subsystems[slot].dim}"
        )
    factors = [np.eye(s.dim, dtype=np.complex128) for s in layout.subsystems]
    factors[slot] = op.matrix
    return QOperator(layout, reduce(np.kron, factors))


def matrix_exponential(generator: np.ndarray) -> np.ndarray:
    """Dense matrix exponential (Pade scaling-and-squaring via SciPy)."""
    return _scipy_expm(np.asarray(generator, dtype=np.complex128))


def displacement(dim: int, alpha: complex) -> QOperator:
    """exp(alpha a^dagger - alpha* a); unitary up to truncation error.

    Emits a TruncationWarning when |alpha|^2 + 4|alpha| > dim - 1, i.e. when
    the displaced vacuum has visible weight near the cutoff.
    """
    if dim < 2:
        raise DimensionError(f"displacement needs dim >= 2, got {dim}")
    alpha = complex(alpha)
    if abs(alpha) ** 2 + 4 * abs(alpha) > dim - 1:
        warnings.warn(
            f"displacement alpha={alpha} is not well inside the truncation "
            f"(dim={dim}); expect visible cutoff distortion",
            TruncationWarning,
            stacklevel=2,
        )
    a = annihilation(dim)
    gen = alpha * a.matrix.conj().T - np.conj(alpha) * a.matrix
    return QOperator(a.layout, matrix_exponential(gen))
