from fractions import Fraction

import pytest
from conftest import coord, heisenberg, n522, span
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import brute_lcs_dims, bracket_table, span_rank, span_rref

from lielab.algebra import (
    StructureTensor,
    Subspace,
    bracket,
    complement_within,
    contains,
    delta_filtration,
    intersection,
    is_direct_sum,
    subspace_bracket,
    subspace_lattice,
    subspace_sum,
    validate,
)

N522_BRACKETS = {(0, 1): (0, 0, 0, 1, 0), (0, 3): (0, 0, 0, 0, 1), (1, 2): (0, 0, 0, 0, 1)}

rationals = st.fractions(min_value=-5, max_value=5, max_denominator=4)


def vectors(n):
    return st.lists(rationals, min_size=n, max_size=n).map(tuple)


class TestBracket:
    def test_heisenberg(self):
        assert bracket(heisenberg(), (1, 0, 0), (0, 1, 0)) == (0, 0, 1)

    def test_n522_first_bracket(self):
        assert bracket(n522(), (1, 0, 0, 0, 0), (0, 1, 0, 0, 0)) == (0, 0, 0, 1, 0)

    @given(vectors(5))
    def test_self_bracket_vanishes(self, x):
        assert bracket(n522(), x, x) == (0,) * 5

    @given(vectors(5), vectors(5), rationals)
    def test_bilinear_antisymmetric(self, x, y, c):
        T = n522()
        lhs = bracket(T, tuple(c * a for a in x), y)
        assert lhs == tuple(c * a for a in bracket(T, x, y))
        assert bracket(T, y, x) == tuple(-a for a in bracket(T, x, y))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            bracket(heisenberg(), (1, 0), (0, 1, 0))

    def test_self_bracket_coefficient_rejected(self):
        with pytest.raises(ValueError):
            StructureTensor(3, {(0, 0, 1): 1})

    def test_antisymmetry_synthesized(self):
        T = StructureTensor(3, {(1, 0, 2): 1})
        assert bracket(T, (1, 0, 0), (0, 1, 0)) == (0, 0, -1)


class TestValidate:
    def test_abelian(self):
        r = validate(StructureTensor.abelian(4))
        assert r.jacobi_ok and r.nilpotency_step == 1
        assert [S.dim for S in r.lcs] == [4, 0]

    def test_heisenberg(self):
        r = validate(heisenberg())
        assert r.nilpotency_step == 2
        assert r.lcs[1] == coord(3, 2)

    def test_n522_against_brute_force(self):
        r = validate(n522())
        assert r.nilpotency_step == 3
        assert [S.dim for S in r.lcs] == brute_lcs_dims(bracket_table(5, N522_BRACKETS))[:4]
        assert r.lcs[1] == coord(5, 3, 4) and r.lcs[2] == coord(5, 4)

    def test_jacobi_failure_reported(self):
        # [e1,e2]=e3, [e2,e3]=e1, [e1,e3]=e1 violates Jacobi
        T = StructureTensor.from_brackets(3, {(0, 1): (0, 0, 1), (1, 2): (1, 0, 0), (0, 2): (1, 0, 0)})
        assert not validate(T).jacobi_ok

    def test_non_nilpotent(self):
        # sl2: [h,e]=2e, [h,f]=-2f, [e,f]=h
        T = StructureTensor.from_brackets(3, {(0, 1): (0, 2, 0), (0, 2): (0, 0, -2), (1, 2): (1, 0, 0)})
        r = validate(T)
        assert r.jacobi_ok and r.nilpotency_step is None


class TestSubspace:
    @settings(max_examples=60)
    @given(st.lists(vectors(4), min_size=1, max_size=4), st.data())
    def test_canonical_form(self, rows, data):
        A = Subspace.span(rows, 4)
        mix = [data.draw(vectors(len(rows))) for _ in range(len(rows) + 1)]
        combos = [tuple(sum(c * r[k] for c, r in zip(m, rows)) for k in range(4)) for m in mix]
        B = Subspace.span(combos + list(rows), 4)
        assert A == B
        assert A.dim == span_rank(rows, 4)
        assert A.basis == span_rref(rows, 4)

    def test_rref_invariants(self):
        S = span(3, (2, 4, 6), (1, 1, 1))
        for row, p in zip(S.basis, S.pivots):
            assert row[p] == 1
        assert list(S.pivots) == sorted(S.pivots)

    def test_lattice_examples(self):
        assert subspace_sum(coord(3, 0), coord(3, 1)) == coord(3, 0, 1)
        assert contains(coord(3, 0, 1), span(3, (1, 1, 0)))
        assert subspace_lattice("contains", coord(3, 0, 1), span(3, (1, 1, 0))) is True
        assert intersection(coord(3, 0, 1), coord(3, 1, 2)) == coord(3, 1)

    def test_complement_within_prefers_order(self):
        C = complement_within(coord(5, 4), coord(5, 3, 4), range(5))
        assert C == coord(5, 3)
        assert subspace_lattice("complement_within", coord(5, 4), coord(5, 3, 4)) == coord(5, 3)

    def test_complement_within_precondition(self):
        with pytest.raises(ValueError):
            complement_within(coord(3, 0), coord(3, 1))

    @given(st.lists(vectors(4), min_size=0, max_size=3), st.lists(vectors(4), min_size=0, max_size=3))
    def test_complement_is_direct(self, a_rows, b_rows):
        A = Subspace.span(a_rows, 4)
        B = subspace_sum(A, Subspace.span(b_rows, 4))
        C = complement_within(A, B)
        assert is_direct_sum([A, C], B)


class TestSubspaceBracket:
    def test_examples(self):
        assert subspace_bracket(heisenberg(), coord(3, 0), coord(3, 0)).is_zero()
        assert subspace_bracket(heisenberg(), coord(3, 0, 1), coord(3, 0, 1)) == coord(3, 2)
        assert subspace_bracket(n522(), coord(5, 0), coord(5, 3)) == coord(5, 4)

    @given(st.lists(vectors(5), max_size=3), st.lists(vectors(5), max_size=3))
    def test_symmetric(self, a, b):
        A, B = Subspace.span(a, 5), Subspace.span(b, 5)
        assert subspace_bracket(n522(), A, B) == subspace_bracket(n522(), B, A)

    @given(st.lists(vectors(5), max_size=3), st.lists(vectors(5), max_size=3))
    def test_matches_brute_force_span(self, a, b):
        A, B = Subspace.span(a, 5), Subspace.span(b, 5)
        table = bracket_table(5, N522_BRACKETS)
        from oracles import brute_bracket

        images = [brute_bracket(table, list(x), list(y)) for x in A.basis for y in B.basis]
        assert subspace_bracket(n522(), A, B).basis == span_rref(images, 5)


class TestDeltaFiltration:
    def test_heisenberg_horizontal(self):
        f = delta_filtration(heisenberg(), coord(3, 0, 1))
        assert f.cumulative == (coord(3, 0, 1), Subspace.full(3))
        assert f.bracket_generating

    def test_full_space(self):
        f = delta_filtration(n522(), Subspace.full(5))
        assert f.cumulative == (Subspace.full(5),)

    def test_line_not_generating(self):
        f = delta_filtration(heisenberg(), coord(3, 0))
        assert f.cumulative == (coord(3, 0),) and not f.bracket_generating

    def test_pairs(self):
        f = delta_filtration(n522(), coord(5, 0, 1, 2))
        assert [(p.dim, c.dim) for p, c in f.pairs()] == [(3, 3), (2, 5)]


def test_fraction_inputs_exact():
    T = StructureTensor(2, {(0, 1, 1): Fraction(1, 3)})
    assert bracket(T, (Fraction(3), 0), (0, 1)) == (0, 1)
