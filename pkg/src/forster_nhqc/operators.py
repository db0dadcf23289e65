"""Dense complex operator algebra for the two-atom Hilbert space.

Operators and states are thin immutable wrappers around numpy arrays that
carry the label of the basis they are written in.  Both implement
``__array__`` so they can be handed straight to numpy routines.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DEFAULT_TOL = 1e-10


class DimensionError(ValueError):
    """Operands have incompatible dimensions or basis labels."""


class NotHermitianError(ValueError):
    """A generator expected to be Hermitian is not, within tolerance."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class QuantumOperator:
    """Square complex matrix over a labelled basis."""

    entries: np.ndarray
    basis_label: str = "bare"

    def __post_init__(self):
        a = _frozen(self.entries)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError(f"operator must be square, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("operator entries must be finite")
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.entries
        return self.entries.astype(dtype)

    def dag(self) -> "QuantumOperator":
        return QuantumOperator(self.entries.conj().T, self.basis_label)

    def _check(self, other: "QuantumOperator"):
        if self.dim != other.dim or self.basis_label != other.basis_label:
            raise DimensionError(
                f"incompatible operands: ({self.dim}, {self.basis_label!r}) vs "
                f"({other.dim}, {other.basis_label!r})"
            )

    def __matmul__(self, other):
        if isinstance(other, QuantumOperator):
            self._check(other)
            return QuantumOperator(self.entries @ other.entries, self.basis_label)
        if isinstance(other, QuantumState):
            if other.dim != self.dim or other.basis_label != self.basis_label:
                raise DimensionError("state and operator are incompatible")
            return QuantumState(self.entries @ other.amplitudes, self.basis_label)
        return NotImplemented

    def __add__(self, other: "QuantumOperator") -> "QuantumOperator":
        self._check(other)
        return QuantumOperator(self.entries + other.entries, self.basis_label)

    def __sub__(self, other: "QuantumOperator") -> "QuantumOperator":
        self._check(other)
        return QuantumOperator(self.entries - other.entries, self.basis_label)

    def __mul__(self, scalar) -> "QuantumOperator":
        return QuantumOperator(self.entries * scalar, self.basis_label)

    __rmul__ = __mul__

    def __neg__(self) -> "QuantumOperator":
        return QuantumOperator(-self.entries, self.basis_label)


@dataclass(frozen=True, eq=False)
class QuantumState:
    """Pure state vector over a labelled basis."""

    amplitudes: np.ndarray
    basis_label: str = "bare"
    dim: int = field(init=False)

    def __post_init__(self):
        a = _frozen(self.amplitudes).reshape(-1)
        if not np.all(np.isfinite(a)):
            raise ValueError("state amplitudes must be finite")
        object.__setattr__(self, "amplitudes", a)
        object.__setattr__(self, "dim", a.size)

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.amplitudes
        return self.amplitudes.astype(dtype)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "QuantumState":
        return QuantumState(self.amplitudes / self.norm, self.basis_label)

    def overlap(self, other: "QuantumState") -> complex:
        """Return ``<self|other>``."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def projector(self) -> QuantumOperator:
        return QuantumOperator(np.outer(self.amplitudes, self.amplitudes.conj()),
                               self.basis_label)


def _as_operator(a) -> QuantumOperator:
    return a if isinstance(a, QuantumOperator) else QuantumOperator(np.asarray(a))


def tensor(a, b) -> QuantumOperator:
    """Kronecker product ``a ⊗ b``; index of the result is ``dim_b * i_a + i_b``."""
    a, b = _as_operator(a), _as_operator(b)
    label = f"{a.basis_label}(x){b.basis_label}"
    return QuantumOperator(np.kron(a.entries, b.entries), label)


def tensor_state(a, b) -> QuantumState:
    a = a if isinstance(a, QuantumState) else QuantumState(np.asarray(a))
    b = b if isinstance(b, QuantumState) else QuantumState(np.asarray(b))
    return QuantumState(np.kron(a.amplitudes, b.amplitudes),
                        f"{a.basis_label}(x){b.basis_label}")


def commutator(a, b) -> QuantumOperator:
    a, b = _as_operator(a), _as_operator(b)
    a._check(b)
    return QuantumOperator(a.entries @ b.entries - b.entries @ a.entries, a.basis_label)


def hermiticity_defect(a) -> float:
    m = np.asarray(a)
    return float(np.max(np.abs(m - m.conj().T), initial=0.0))


def is_hermitian(a, tol: float = DEFAULT_TOL) -> bool:
    return hermiticity_defect(a) <= tol


def is_unitary(a, tol: float = DEFAULT_TOL) -> bool:
    m = np.asarray(a)
    return bool(np.max(np.abs(m @ m.conj().T - np.eye(m.shape[0]))) <= tol)


def trace(a) -> complex:
    return complex(np.trace(np.asarray(a)))


def frobenius_distance(a, b) -> float:
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)))


def expm_skew(a, s: float, tol: float = DEFAULT_TOL) -> QuantumOperator:
    """Return ``exp(-i s A)`` for Hermitian ``A``.

    Uses the eigendecomposition of ``A``; the result is unitary to machine
    precision regardless of ``s``.

    Raises
    ------
    NotHermitianError
        If ``max|A - A†|`` exceeds `tol`.
    """
    op = _as_operator(a)
    defect = hermiticity_defect(op)
    if defect > tol:
        raise NotHermitianError(f"generator is not Hermitian (defect {defect:.3e})")
    m = 0.5 * (op.entries + op.entries.conj().T)
    w, v = np.linalg.eigh(m)
    return QuantumOperator((v * np.exp(-1j * s * w)) @ v.conj().T, op.basis_label)


def pauli(which: str) -> QuantumOperator:
    mats = {
        "x": [[0, 1], [1, 0]],
        "y": [[0, -1j], [1j, 0]],
        "z": [[1, 0], [0, -1]],
        "i": [[1, 0], [0, 1]],
    }
    return QuantumOperator(np.array(mats[which], dtype=complex), "qubit")


def dump_operator(op, path) -> None:
    """Write one ``row col re im`` line per entry, row-major."""
    m = np.asarray(op)
    lines = [
        f"{i} {j} {m[i, j].real:.17g} {m[i, j].imag:.17g}"
        for i in range(m.shape[0])
        for j in range(m.shape[1])
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def load_operator(path, basis_label: str = "bare") -> QuantumOperator:
    rows = np.loadtxt(path, ndmin=2)
    n = int(rows[:, 0].max()) + 1
    m = np.zeros((n, n), dtype=complex)
    m[rows[:, 0].astype(int), rows[:, 1].astype(int)] = rows[:, 2] + 1j * rows[:, 3]
    return QuantumOperator(m, basis_label)
