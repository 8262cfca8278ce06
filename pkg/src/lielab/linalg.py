"""Exact linear algebra over the rationals.

Matrices are lists of rows, entries are ``Fraction``.  Everything here is
small and dense; the algebras we care about have dimension well under 20.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence

Vector = tuple[Fraction, ...]


def to_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(value)
    return Fraction(value)


def vec(values: Iterable) -> Vector:
    return tuple(to_fraction(v) for v in values)


def zeros(n: int) -> Vector:
    return (Fraction(0),) * n


def unit(n: int, i: int) -> Vector:
    return tuple(Fraction(1) if k == i else Fraction(0) for k in range(n))


def add(x: Sequence[Fraction], y: Sequence[Fraction]) -> Vector:
    return tuple(a + b for a, b in zip(x, y))


def sub(x: Sequence[Fraction], y: Sequence[Fraction]) -> Vector:
    return tuple(a - b for a, b in zip(x, y))


def scale(c, x: Sequence[Fraction]) -> Vector:
    return tuple(c * a for a in x)


def is_zero(x: Sequence[Fraction]) -> bool:
    return all(a == 0 for a in x)


def rref(rows: Iterable[Sequence], ncols: int | None = None) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form; returns (nonzero rows, pivot columns)."""
    m = [[to_fraction(a) for a in r] for r in rows]
    if not m:
        return [], []
    ncols = len(m[0]) if ncols is None else ncols
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        pivot = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if pivot is None:
            continue
        m[r], m[pivot] = m[pivot], m[r]
        inv = 1 / m[r][c]
        m[r] = [a * inv for a in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m[:r], pivots


def rank(rows: Iterable[Sequence]) -> int:
    return len(rref(rows)[0])


def inverse(matrix: Sequence[Sequence]) -> list[list[Fraction]]:
    n = len(matrix)
    aug = [list(vec(row)) + list(unit(n, i)) for i, row in enumerate(matrix)]
    reduced, pivots = rref(aug, ncols=n)
    if pivots != list(range(n)):
        raise ValueError("matrix is singular")
    return [row[n:] for row in reduced]


def matvec(matrix: Sequence[Sequence[Fraction]], x: Sequence[Fraction]) -> Vector:
    return tuple(sum((a * b for a, b in zip(row, x)), Fraction(0)) for row in matrix)


def vecmat(x: Sequence[Fraction], matrix: Sequence[Sequence[Fraction]]) -> Vector:
    """Row vector times matrix: sum_i x_i * matrix[i]."""
    ncols = len(matrix[0]) if matrix else 0
    out = [Fraction(0)] * ncols
    for xi, row in zip(x, matrix):
        if xi != 0:
            for j, a in enumerate(row):
                if a != 0:
                    out[j] += xi * a
    return tuple(out)


def solve_in_span(rows: Sequence[Sequence[Fraction]], x: Sequence[Fraction]) -> Vector | None:
    """Coefficients c with sum_i c_i rows[i] = x, or None if x is not in the span.

    The rows must be linearly independent.
    """
    k = len(rows)
    if k == 0:
        return () if is_zero(x) else None
    n = len(x)
    # columns are the rows; solve the n x k system
    aug = [[rows[i][r] for i in range(k)] + [to_fraction(x[r])] for r in range(n)]
    reduced, pivots = rref(aug, ncols=k + 1)
    if k in pivots:
        return None
    coeffs = [Fraction(0)] * k
    for row, p in zip(reduced, pivots):
        coeffs[p] = row[k]
    return tuple(coeffs)
