"""Exact Lie algebra arithmetic: structure tensors, subspaces, filtrations."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import combinations
from typing import Iterable, Mapping, Sequence

from . import linalg
from .linalg import Vector


@dataclass(frozen=True, eq=False)
class StructureTensor:
    """Structure constants c_{ij}^k with [e_i, e_j] = sum_k c_{ij}^k e_k.

    Only entries with i < j are stored; the opposite order is synthesized.
    Jacobi is not enforced here, use ``validate``.
    """

    dim: int
    coeffs: Mapping[tuple[int, int, int], Fraction]
    basis_names: tuple[str, ...] = ()

    def __post_init__(self):
        if self.dim < 0:
            raise ValueError("dimension must be non-negative")
        clean: dict[tuple[int, int, int], Fraction] = {}
        for (i, j, k), c in self.coeffs.items():
            c = linalg.to_fraction(c)
            if not all(0 <= t < self.dim for t in (i, j, k)):
                raise ValueError(f"index out of range in coefficient {(i, j, k)}")
            if i == j:
                if c != 0:
                    raise ValueError(f"[e{i + 1}, e{i + 1}] must vanish")
                continue
            if i > j:
                i, j, c = j, i, -c
            clean[(i, j, k)] = clean.get((i, j, k), Fraction(0)) + c
        clean = {key: c for key, c in sorted(clean.items()) if c != 0}
        object.__setattr__(self, "coeffs", clean)
        names = tuple(self.basis_names) or tuple(f"e{i + 1}" for i in range(self.dim))
        if len(names) != self.dim:
            raise ValueError("basis_names must have length dim")
        object.__setattr__(self, "basis_names", names)

    def __eq__(self, other):
        if not isinstance(other, StructureTensor):
            return NotImplemented
        return self.dim == other.dim and self.coeffs == other.coeffs

    def __hash__(self):
        return hash((self.dim, tuple(self.coeffs.items())))

    def __repr__(self):
        terms = ", ".join(f"[{i},{j}]_{k}={c}" for (i, j, k), c in self.coeffs.items())
        return f"StructureTensor(dim={self.dim}, {terms or 'abelian'})"

    @classmethod
    def from_brackets(cls, dim: int, brackets: Mapping[tuple[int, int], Sequence], basis_names=()) -> StructureTensor:
        """Build from {(i, j): image vector} with 0-based indices."""
        coeffs = {}
        for (i, j), image in brackets.items():
            for k, c in enumerate(image):
                if c:
                    coeffs[(i, j, k)] = linalg.to_fraction(c)
        return cls(dim, coeffs, tuple(basis_names))

    @classmethod
    def abelian(cls, dim: int, basis_names=()) -> StructureTensor:
        return cls(dim, {}, tuple(basis_names))

    @cached_property
    def _pairs(self) -> dict[tuple[int, int], list[tuple[int, Fraction]]]:
        table: dict[tuple[int, int], list[tuple[int, Fraction]]] = {}
        for (i, j, k), c in self.coeffs.items():
            table.setdefault((i, j), []).append((k, c))
        return table

    def basis_bracket(self, i: int, j: int) -> Vector:
        out = [Fraction(0)] * self.dim
        if i == j:
            return tuple(out)
        sign = 1
        if i > j:
            i, j, sign = j, i, -1
        for k, c in self._pairs.get((i, j), ()):
            out[k] += sign * c
        return tuple(out)

    def is_abelian(self) -> bool:
        return not self.coeffs


def bracket(T: StructureTensor, x: Sequence, y: Sequence) -> Vector:
    if len(x) != T.dim or len(y) != T.dim:
        raise ValueError(f"expected vectors of length {T.dim}")
    out = [Fraction(0)] * T.dim
    for (i, j), entries in T._pairs.items():
        w = x[i] * y[j] - x[j] * y[i]
        if w:
            for k, c in entries:
                out[k] += w * c
    return tuple(linalg.to_fraction(v) for v in out)


def iterated_bracket(T: StructureTensor, vectors: Sequence[Sequence]) -> Vector:
    """Left-iterated bracket [v1, [v2, ..., [v_{k-1}, v_k]]]."""
    acc = linalg.vec(vectors[-1])
    for v in reversed(vectors[:-1]):
        acc = bracket(T, v, acc)
    return acc


# ---------------------------------------------------------------- subspaces


@dataclass(frozen=True)
class Subspace:
    """A subspace of Q^n stored as its reduced row echelon basis."""

    ambient_dim: int
    basis: tuple[Vector, ...]

    def __post_init__(self):
        rows, _ = linalg.rref(self.basis, self.ambient_dim) if self.basis else ([], [])
        object.__setattr__(self, "basis", tuple(tuple(r) for r in rows))

    @classmethod
    def span(cls, vectors: Iterable[Sequence], ambient_dim: int) -> Subspace:
        rows = [linalg.vec(v) for v in vectors]
        for r in rows:
            if len(r) != ambient_dim:
                raise ValueError(f"vector of length {len(r)} in ambient dimension {ambient_dim}")
        return cls(ambient_dim, tuple(rows))

    @classmethod
    def zero(cls, n: int) -> Subspace:
        return cls(n, ())

    @classmethod
    def full(cls, n: int) -> Subspace:
        return cls(n, tuple(linalg.unit(n, i) for i in range(n)))

    @classmethod
    def coordinate(cls, n: int, indices: Iterable[int]) -> Subspace:
        return cls(n, tuple(linalg.unit(n, i) for i in indices))

    @property
    def dim(self) -> int:
        return len(self.basis)

    def is_zero(self) -> bool:
        return not self.basis

    def is_full(self) -> bool:
        return self.dim == self.ambient_dim

    @cached_property
    def pivots(self) -> tuple[int, ...]:
        return tuple(next(i for i, a in enumerate(r) if a != 0) for r in self.basis)

    def contains_vector(self, x: Sequence) -> bool:
        x = list(linalg.vec(x))
        for row, p in zip(self.basis, self.pivots):
            if x[p] != 0:
                f = x[p]
                x = [a - f * b for a, b in zip(x, row)]
        return linalg.is_zero(x)

    def __contains__(self, x) -> bool:
        return self.contains_vector(x)

    def __le__(self, other: Subspace) -> bool:
        return contains(other, self)

    def __add__(self, other: Subspace) -> Subspace:
        return subspace_sum(self, other)


def _check_dims(A: Subspace, B: Subspace):
    if A.ambient_dim != B.ambient_dim:
        raise ValueError(f"ambient dimensions differ: {A.ambient_dim} vs {B.ambient_dim}")


def subspace_sum(A: Subspace, B: Subspace) -> Subspace:
    _check_dims(A, B)
    return Subspace(A.ambient_dim, A.basis + B.basis)


def contains(A: Subspace, B: Subspace) -> bool:
    """True iff B is a subspace of A."""
    _check_dims(A, B)
    return all(A.contains_vector(b) for b in B.basis)


def annihilator(A: Subspace) -> Subspace:
    """Vectors v with <a, v> = 0 for every a in A (standard pairing)."""
    n = A.ambient_dim
    pivots = set(A.pivots)
    free = [c for c in range(n) if c not in pivots]
    null = []
    for f in free:
        v = [Fraction(0)] * n
        v[f] = Fraction(1)
        for row, p in zip(A.basis, A.pivots):
            v[p] = -row[f]
        null.append(v)
    return Subspace.span(null, n)


def intersection(A: Subspace, B: Subspace) -> Subspace:
    _check_dims(A, B)
    return annihilator(subspace_sum(annihilator(A), annihilator(B)))


def _basis_in_order(B: Subspace, order: Sequence[int]) -> list[Vector]:
    """Echelon basis of B computed with columns visited in ``order``."""
    permuted = [[row[c] for c in order] for row in B.basis]
    rows, _ = linalg.rref(permuted, len(order)) if permuted else ([], [])
    inverse_order = {c: i for i, c in enumerate(order)}
    return [tuple(r[inverse_order[c]] for c in range(B.ambient_dim)) for r in rows]


def complement_within(A: Subspace, B: Subspace, pivot_order: Sequence[int] | None = None) -> Subspace:
    """A subspace C with A + C = B and A ∩ C = 0.

    Greedy: coordinate directions of B in preference order first, then the
    echelon basis of B computed in the same order.
    """
    _check_dims(A, B)
    if not contains(B, A):
        raise ValueError("complement_within requires A ⊆ B")
    n = A.ambient_dim
    order = list(range(n)) if pivot_order is None else list(pivot_order)
    if sorted(order) != list(range(n)):
        raise ValueError("pivot_order must be a permutation of the basis indices")
    candidates = [linalg.unit(n, i) for i in order if B.contains_vector(linalg.unit(n, i))]
    candidates += _basis_in_order(B, order)
    chosen: list[Vector] = []
    current = A
    for v in candidates:
        if current.dim == B.dim:
            break
        if not current.contains_vector(v):
            chosen.append(v)
            current = Subspace(n, current.basis + (v,))
    return Subspace.span(chosen, n)


def subspace_lattice(op: str, A: Subspace, B: Subspace, pivot_order=None):
    if op == "sum":
        return subspace_sum(A, B)
    if op == "intersection":
        return intersection(A, B)
    if op == "contains":
        return contains(A, B)
    if op == "complement_within":
        return complement_within(A, B, pivot_order)
    raise ValueError(f"unknown lattice operation {op!r}")


def is_direct_sum(parts: Sequence[Subspace], whole: Subspace | None = None) -> bool:
    if not parts:
        return whole is None or whole.is_zero()
    n = parts[0].ambient_dim
    rows = [r for p in parts for r in p.basis]
    total = Subspace(n, tuple(rows))
    if total.dim != len(rows):
        return False
    return whole is None or total == whole


def subspace_bracket(T: StructureTensor, A: Subspace, B: Subspace) -> Subspace:
    _check_dims(A, B)
    if A.ambient_dim != T.dim:
        raise ValueError("subspace dimension does not match the algebra")
    return Subspace.span([bracket(T, a, b) for a in A.basis for b in B.basis], T.dim)


# ------------------------------------------------------------- filtrations


@dataclass(frozen=True)
class AlgebraReport:
    jacobi_ok: bool
    nilpotency_step: int | None  # None means not nilpotent
    lcs: tuple[Subspace, ...]
    jacobi_failures: tuple[tuple[int, int, int], ...] = field(default=())

    @property
    def nilpotent(self) -> bool:
        return self.nilpotency_step is not None


def jacobi_failures(T: StructureTensor) -> list[tuple[int, int, int]]:
    n = T.dim
    bad = []
    for a, b, c in combinations(range(n), 3):
        ea, eb, ec = (linalg.unit(n, t) for t in (a, b, c))
        total = linalg.add(
            linalg.add(bracket(T, ea, bracket(T, eb, ec)), bracket(T, eb, bracket(T, ec, ea))),
            bracket(T, ec, bracket(T, ea, eb)),
        )
        if not linalg.is_zero(total):
            bad.append((a, b, c))
    return bad


def lower_central_series(T: StructureTensor) -> tuple[list[Subspace], bool]:
    """(series, nilpotent): series starts at g and ends at 0 or at the stable term."""
    g = Subspace.full(T.dim)
    series = [g]
    while not series[-1].is_zero():
        nxt = subspace_bracket(T, g, series[-1])
        if nxt == series[-1]:
            return series, False
        series.append(nxt)
    return series, True


def validate(T: StructureTensor) -> AlgebraReport:
    bad = jacobi_failures(T)
    series, nilpotent = lower_central_series(T)
    step = len(series) - 1 if nilpotent else None
    return AlgebraReport(not bad, step, tuple(series), tuple(bad))


def nilpotency_step(T: StructureTensor) -> int | None:
    series, nilpotent = lower_central_series(T)
    return len(series) - 1 if nilpotent else None


@dataclass(frozen=True)
class DeltaFiltration:
    powers: tuple[Subspace, ...]  # Δ^1, Δ^2, ...
    cumulative: tuple[Subspace, ...]  # Δ^[1], Δ^[2], ...
    bracket_generating: bool

    @property
    def step(self) -> int:
        """Least k with Δ^[k] equal to the final (stable) term."""
        return len(self.cumulative)

    def pairs(self) -> list[tuple[Subspace, Subspace]]:
        return list(zip(self.powers, self.cumulative))


def delta_filtration(T: StructureTensor, delta: Subspace) -> DeltaFiltration:
    powers = [delta]
    cumulative = [delta]
    while True:
        nxt = subspace_bracket(T, delta, powers[-1])
        total = subspace_sum(cumulative[-1], nxt)
        if total == cumulative[-1]:
            break
        powers.append(nxt)
        cumulative.append(total)
    return DeltaFiltration(tuple(powers), tuple(cumulative), cumulative[-1].is_full())
