"""Weighing-design codes: cyclic S-matrices, Sylvester Hadamard matrices and
the physical 2n-1 cell mask that realises a cyclic S-matrix by translation.

Entries are stored as small signed integers so 0/1 and +-1 designs share
one container.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class CodeKind(str, enum.Enum):
    SMATRIX = "smatrix"
    HADAMARD = "hadamard"
    IDENTITY = "identity"
    CUSTOM = "custom"


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    return all(n % d for d in range(3, math.isqrt(n) + 1, 2))


def s_order_problem(n: int) -> str | None:
    """Return why ``n`` cannot be an S-matrix order, or None if it can."""
    if not _is_prime(n):
        return f"{n} is not prime"
    if n % 4 != 3:
        return f"{n} ≡ {n % 4} (mod 4), need 3 (mod 4)"
    return None


def is_valid_s_order(n: int) -> bool:
    """True iff ``n`` is a prime of the form 4m+3."""
    return s_order_problem(n) is None


def quadratic_residue_sequence(n: int) -> np.ndarray:
    """Generating row of the order-``n`` cyclic S-matrix.

    ``s[0] = 1`` and ``s[j] = 1`` exactly when ``j`` is a nonzero quadratic
    residue mod ``n``, giving weight (n+1)/2.
    """
    problem = s_order_problem(n)
    if problem is not None:
        raise ValueError(f"invalid S-matrix order: {problem}")
    seq = np.zeros(n, dtype=np.int8)
    seq[0] = 1
    # k and n-k square to the same residue
    for k in range(1, (n - 1) // 2 + 1):
        seq[k * k % n] = 1
    return seq


@dataclass(frozen=True, eq=False)
class CodeMatrix:
    """An n x n weighing matrix tagged with the design family it belongs to."""

    entries: np.ndarray
    kind: CodeKind

    def __post_init__(self):
        a = np.array(self.entries, dtype=np.int8, copy=True)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError(f"weighing matrix must be square and non-empty, got shape {a.shape}")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "kind", CodeKind(self.kind))

    @property
    def order(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    def __eq__(self, other):
        if not isinstance(other, CodeMatrix):
            return NotImplemented
        return self.kind == other.kind and np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash((self.kind, self.entries.tobytes()))

    def as_float(self) -> np.ndarray:
        return self.entries.astype(float)

    @classmethod
    def from_entries(cls, entries) -> "CodeMatrix":
        """Wrap an integer matrix, recognising the design family it belongs to."""
        a = np.asarray(entries)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"weighing matrix must be square, got shape {a.shape}")
        if not np.all(a == np.round(a)) or np.abs(a).max(initial=0) > 127:
            raise ValueError("weighing matrix entries must be small integers")
        a = a.astype(np.int64)
        n = a.shape[0]
        if np.array_equal(a, np.eye(n, dtype=np.int64)):
            return cls(a, CodeKind.IDENTITY)
        if np.isin(a, (-1, 1)).all() and np.array_equal(a.T @ a, n * np.eye(n, dtype=np.int64)):
            return cls(a, CodeKind.HADAMARD)
        if np.isin(a, (0, 1)).all() and _is_cyclic_s(a):
            return cls(a, CodeKind.SMATRIX)
        return cls(a, CodeKind.CUSTOM)


def _is_cyclic_s(a: np.ndarray) -> bool:
    n = a.shape[0]
    if (n + 1) % 4:
        return False
    i, j = np.indices((n, n))
    if not np.array_equal(a, a[0][(i + j) % n]):
        return False
    ones = np.ones((n, n), dtype=np.int64)
    return np.array_equal(a @ a.T, (n + 1) // 4 * (np.eye(n, dtype=np.int64) + ones))


def build_cyclic_s_matrix(base) -> CodeMatrix:
    """Circulant S-matrix whose row ``i`` is ``base`` rotated left by ``i``."""
    base = np.asarray(base, dtype=np.int64)
    if base.ndim != 1 or not np.isin(base, (0, 1)).all():
        raise ValueError("base must be a 1-D 0/1 sequence")
    n = base.size
    if n == 1:
        if base[0] != 1:
            raise ValueError("order-1 base must be [1]")
        return CodeMatrix(np.ones((1, 1)), CodeKind.IDENTITY)
    if 2 * int(base.sum()) != n + 1:
        raise ValueError(f"base weight is {int(base.sum())}, an order-{n} S-matrix needs {(n + 1) / 2:g}")
    i, j = np.indices((n, n))
    s = base[(i + j) % n]
    if not _is_cyclic_s(s):
        raise ValueError("base is not a cyclic difference set: S S^T != (n+1)/4 (I+J)")
    return CodeMatrix(s, CodeKind.SMATRIX)


def build_sylvester_hadamard(k: int) -> CodeMatrix:
    if k < 1 or k & (k - 1):
        raise ValueError(f"Sylvester construction needs a power of two, got {k}")
    h = np.ones((1, 1), dtype=np.int64)
    while h.shape[0] < k:
        h = np.block([[h, h], [h, -h]])
    return CodeMatrix(h, CodeKind.HADAMARD)


def build_code(kind: CodeKind | str, n: int) -> CodeMatrix:
    """Construct the canonical matrix of a family at order ``n``."""
    kind = CodeKind(kind)
    if kind is CodeKind.IDENTITY or (kind is CodeKind.SMATRIX and n == 1):
        return CodeMatrix(np.eye(n), CodeKind.IDENTITY)
    if kind is CodeKind.SMATRIX:
        return build_cyclic_s_matrix(quadratic_residue_sequence(n))
    if kind is CodeKind.HADAMARD:
        return build_sylvester_hadamard(n)
    raise ValueError("custom matrices have no canonical construction")


def s_matrix_inverse(s: CodeMatrix) -> np.ndarray:
    """Closed-form inverse (2/(n+1)) (2 S^T - J) of an S-matrix."""
    if s.kind is not CodeKind.SMATRIX:
        raise ValueError(f"analytic inverse needs an S-matrix, got {s.kind.value}")
    n = s.order
    return (2.0 / (n + 1)) * (2.0 * s.entries.T.astype(float) - 1.0)


@dataclass(frozen=True)
class MaskPattern:
    """Linear coded aperture of 2n-1 cells; cell ``k`` is open iff ``base[k mod n]``.

    Lengths are in millimetres.
    """

    base: tuple[int, ...]
    pitch: float
    aperture_diameter: float
    cells: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        base = tuple(int(b) for b in self.base)
        if not base or any(b not in (0, 1) for b in base):
            raise ValueError("mask base must be a non-empty 0/1 sequence")
        if not self.aperture_diameter > 0:
            raise ValueError("aperture diameter must be positive")
        if self.aperture_diameter > self.pitch:
            raise ValueError(
                f"aperture diameter {self.aperture_diameter} mm exceeds pitch {self.pitch} mm"
            )
        n = len(base)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "cells", tuple(base[k % n] for k in range(2 * n - 1)))

    @property
    def n(self) -> int:
        return len(self.base)

    @property
    def array_span(self) -> float:
        """Length covered by the n virtual elements (mm)."""
        return self.n * self.pitch

    @property
    def length(self) -> float:
        return len(self.cells) * self.pitch

    def window(self, shift: int) -> np.ndarray:
        """Cells seen by the n element positions when the mask is advanced ``shift`` cells."""
        if not 0 <= shift < self.n:
            raise ValueError(f"shift must be in [0, {self.n}), got {shift}")
        return np.array(self.cells[shift:shift + self.n], dtype=np.int8)

    def windows(self) -> np.ndarray:
        return np.stack([self.window(s) for s in range(self.n)])


def mask_pattern_from_code(base, pitch: float, aperture_diameter: float) -> MaskPattern:
    base = np.asarray(base)
    build_cyclic_s_matrix(base)  # validates
    return MaskPattern(tuple(int(b) for b in base), float(pitch), float(aperture_diameter))
