"""Independent reference computations, written without the package's own
linear algebra or BCH code, to freeze derived values."""

from __future__ import annotations

from fractions import Fraction
from itertools import product

import sympy


def span_rank(vectors, n) -> int:
    rows = [list(map(sympy.Rational, v)) for v in vectors if any(v)]
    return sympy.Matrix(rows).rank() if rows else 0


def span_rref(vectors, n):
    rows = [list(map(sympy.Rational, v)) for v in vectors if any(v)]
    if not rows:
        return ()
    M, pivots = sympy.Matrix(rows).rref()
    return tuple(tuple(Fraction(int(a.p), int(a.q)) for a in M.row(i)) for i in range(len(pivots)))


def bracket_table(dim, brackets):
    """Dense [e_i, e_j] table from {(i, j): vector}."""
    table = [[[Fraction(0)] * dim for _ in range(dim)] for _ in range(dim)]
    for (i, j), v in brackets.items():
        table[i][j] = [Fraction(c) for c in v]
        table[j][i] = [-Fraction(c) for c in v]
    return table


def brute_bracket(table, x, y):
    n = len(x)
    out = [Fraction(0)] * n
    for i in range(n):
        if not x[i]:
            continue
        for j in range(n):
            if y[j]:
                for k in range(n):
                    out[k] += x[i] * y[j] * table[i][j][k]
    return out


def brute_lcs_dims(table):
    """Dimensions of g, [g,g], [g,[g,g]], ... by spanning all basis brackets."""
    n = len(table)
    current = [[Fraction(int(i == k)) for k in range(n)] for i in range(n)]
    dims = [n]
    while True:
        images = [brute_bracket(table, [Fraction(int(i == k)) for k in range(n)], v) for i in range(n) for v in current]
        basis = span_rref(images, n)
        dims.append(len(basis))
        if len(basis) == 0 or len(basis) == dims[-2]:
            return dims
        current = [list(v) for v in basis]


# --------------------------------------------- free associative algebra


def _mul(u, v, top):
    out = {}
    for wu, cu in u.items():
        for wv, cv in v.items():
            if len(wu) + len(wv) <= top:
                out[wu + wv] = out.get(wu + wv, Fraction(0)) + cu * cv
    return {w: c for w, c in out.items() if c}


def _exp(x, top):
    out = {(): Fraction(1)}
    term = {(): Fraction(1)}
    for k in range(1, top + 1):
        term = {w: c / k for w, c in _mul(term, x, top).items()}
        for w, c in term.items():
            out[w] = out.get(w, Fraction(0)) + c
    return out


def _log_unipotent(u, top):
    z = dict(u)
    z[()] = z.get((), Fraction(0)) - 1
    z = {w: c for w, c in z.items() if c}
    out = {}
    power = {(): Fraction(1)}
    for k in range(1, top + 1):
        power = _mul(power, z, top)
        for w, c in power.items():
            out[w] = out.get(w, Fraction(0)) + Fraction((-1) ** (k + 1), k) * c
    return {w: c for w, c in out.items() if c}


def bch_series(top):
    """log(exp(X) exp(Y)) as {word over 1, 2: coefficient} up to length top."""
    X = {(1,): Fraction(1)}
    Y = {(2,): Fraction(1)}
    return _log_unipotent(_mul(_exp(X, top), _exp(Y, top), top), top)


def bch_oracle_product(table, x, y, top):
    """x * y through the Dynkin-Specht-Wever projection: a Lie polynomial
    P of degree k equals (1/k) sum_w P_w [w_1, [w_2, ... w_k]]."""
    n = len(x)
    out = [Fraction(0)] * n
    for word, c in bch_series(top).items():
        k = len(word)
        vals = [x if letter == 1 else y for letter in word]
        v = list(vals[-1])
        for head in reversed(vals[:-1]):
            v = brute_bracket(table, head, v)
        for i in range(n):
            out[i] += c / k * v[i]
    return out


def heisenberg_matrix_product(x, y):
    """Group law of the Heisenberg group from 3x3 unipotent matrices."""

    def mat(v):
        a, b, c = (sympy.Rational(t) for t in v)
        return sympy.Matrix([[0, a, c], [0, 0, b], [0, 0, 0]])

    def expm(N):
        return sympy.eye(3) + N + N * N / 2

    def logm(U):
        N = U - sympy.eye(3)
        return N - N * N / 2

    L = logm(expm(mat(x)) * expm(mat(y)))
    return [Fraction(int(t.p), int(t.q)) for t in (L[0, 1], L[1, 2], L[0, 2])]


def all_words(k):
    return list(product((1, 2), repeat=k))
