import pickle
import random
from fractions import Fraction

import pytest
from conftest import coord, heisenberg, n521, n522, span
from hypothesis import given, settings
from hypothesis import strategies as st

from lielab.algebra import StructureTensor, Subspace
from lielab.analysis import analyze
from lielab.gradings import Grading, build_asymptotic_grading, build_tangent_grading
from lielab.invariants import (
    INFINITY,
    alpha0,
    alpha1_inf,
    alpha2_inf,
    beta_lower_bound,
    beta_search,
    center,
    check_cqi,
    compositions,
    compute_alphas,
    exponent,
)


class TestInfinity:
    def test_singleton_and_order(self):
        assert pickle.loads(pickle.dumps(INFINITY)) is INFINITY
        assert 10**9 < INFINITY and not INFINITY < 5
        assert INFINITY == INFINITY and str(INFINITY) == "inf"

    def test_exponent(self):
        assert exponent(INFINITY, 3) is INFINITY
        assert exponent(2, 0) is INFINITY
        assert exponent(2, 4) == Fraction(1, 2)


def test_compositions():
    assert sorted(compositions(3, 2)) == [(1, 1, 1), (1, 2), (2, 1)]
    assert list(compositions(1, 3)) == []


class TestAlphas:
    def test_n522(self):
        T = n522()
        V = build_asymptotic_grading(T)
        delta = coord(5, 0, 1, 2)
        assert alpha1_inf(T, V) == 1
        assert alpha2_inf(T, V, delta) is INFINITY
        W = build_tangent_grading(T, delta)
        assert alpha0(T, W) == 1

    def test_carnot_infinite(self):
        T = heisenberg()
        G = Grading((coord(3, 0, 1), coord(3, 2)), "asymptotic")
        a = compute_alphas(T, G, coord(3, 0, 1), "asymptotic")
        assert a.alpha1_inf is INFINITY and a.alpha_inf is INFINITY

    def test_riemannian_heisenberg(self):
        T = heisenberg()
        G = Grading((coord(3, 0, 1), coord(3, 2)), "asymptotic")
        assert alpha2_inf(T, G, Subspace.full(3)) == 1

    def test_alpha2_infinite_iff_delta_in_first_layer(self):
        T = n521()
        G = build_asymptotic_grading(T)
        for k in range(1, 4):
            delta = coord(5, 0, 1, 1 + k)
            assert alpha2_inf(T, G, delta) == k
        assert alpha2_inf(T, G, coord(5, 0, 1)) is INFINITY


class TestCqi:
    def test_heisenberg_center(self):
        T = heisenberg()
        G = Grading((coord(3, 0, 1), coord(3, 2)), "asymptotic")
        cert = check_cqi(T, G, Subspace.full(3), coord(3, 2))
        assert cert.valid and cert.quotient_tensor.dim == 2

    def test_not_an_ideal(self):
        T = heisenberg()
        G = Grading((coord(3, 0, 1), coord(3, 2)), "asymptotic")
        cert = check_cqi(T, G, coord(3, 0, 1), coord(3, 0))
        assert not cert.is_ideal and not cert.valid

    def test_distribution_condition(self):
        T = heisenberg()
        G = Grading((coord(3, 0, 1), coord(3, 2)), "asymptotic")
        cert = check_cqi(T, G, Subspace.full(3), Subspace.zero(3))
        assert cert.quotient_stratified and not cert.distribution_condition

    def test_n522_center_is_enough(self):
        T = n522()
        V = build_asymptotic_grading(T)
        assert check_cqi(T, V, coord(5, 0, 1, 2), coord(5, 4)).valid

    def test_quotient_not_stratified(self):
        # span(e4) is not an ideal, and g itself is not stratified by V
        T = n522()
        V = build_asymptotic_grading(T)
        cert = check_cqi(T, V, coord(5, 0, 1, 2), coord(5, 3))
        assert not cert.is_ideal
        cert = check_cqi(T, V, coord(5, 0, 1, 2), Subspace.zero(5))
        assert cert.is_ideal and not cert.quotient_stratified

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            check_cqi(heisenberg(), Grading((coord(3, 0, 1), coord(3, 2))), coord(3, 0, 1), coord(4, 0))


class TestBeta:
    def test_center(self):
        assert center(n522()) == coord(5, 4)
        assert center(StructureTensor.abelian(3)).is_full()

    def test_heisenberg_riemannian(self):
        T = heisenberg()
        G = Grading((coord(3, 0, 1), coord(3, 2)), "asymptotic")
        r = beta_search(T, G, Subspace.full(3))
        # the witness sums every valid candidate inside D_<=2, i.e. all of g
        assert r.beta_hat == 2 and r.exhaustive and r.witness.ideal.is_full()
        assert check_cqi(T, G, Subspace.full(3), coord(3, 2)).valid

    def test_n522(self):
        T = n522()
        V = build_asymptotic_grading(T)
        r = beta_search(T, V, coord(5, 0, 1, 2))
        assert r.beta_hat == 3 and r.exhaustive and r.lower_bound == 3
        assert r.witness.ideal.is_full()

    def test_carnot_zero(self):
        T = n521()
        G = build_asymptotic_grading(T)
        r = beta_search(T, G, coord(5, 0, 1))
        assert r.beta_hat == 0 and r.witness.ideal.is_zero()

    def test_user_supplied(self):
        T = n522()
        V = build_asymptotic_grading(T)
        r = beta_search(T, V, coord(5, 0, 1, 2), "user_supplied", [coord(5, 4)])
        assert r.beta_hat == 3 and r.witness.ideal == coord(5, 4)
        r = beta_search(T, V, coord(5, 0, 1, 2), "user_supplied", [coord(5, 0)])
        assert r.beta_hat == 3 and r.witness.ideal.is_full()

    def test_unverified_grading_rejected(self):
        with pytest.raises(ValueError):
            beta_search(heisenberg(), Grading((coord(3, 0, 1), coord(3, 2))), coord(3, 0, 1))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6))
    def test_beta_bounds_on_random_gradings(self, seed):
        T = n522()
        rng = random.Random(seed)
        delta = span(5, (1, 0, 0, rng.randint(-2, 2), 0), (0, 1, 0, 0, 0), (0, 0, 1, 0, rng.randint(-2, 2)))
        V = build_asymptotic_grading(T, rng=rng)
        a = compute_alphas(T, V, delta, "asymptotic")
        r = beta_search(T, V, delta, alpha_inf=a.alpha_inf)
        assert beta_lower_bound(T, V, delta, a.alpha_inf) <= r.beta_hat <= V.step
        assert r.witness.valid
        assert (a.alpha_inf is INFINITY) == (r.beta_hat == 0)
        if a.alpha_inf is not INFINITY:
            assert a.alpha_inf < r.beta_hat


def test_canned_alpha_beta_relation(canned):
    report = analyze(canned, "both")
    side = report.sides["asymptotic"]
    alpha = side.alphas["alpha_inf"]
    assert (alpha is INFINITY) == (side.beta.beta_hat == 0)
    if alpha is not INFINITY:
        assert alpha < side.beta.beta_hat
    assert all(s.beta.exhaustive for s in report.sides.values())


def test_canned_expectations(canned):
    report = analyze(canned, "both")
    assert report.expectations_ok, [e for e in report.expectations if not e["ok"]]


def test_product_beta_bounded_by_factor():
    # beta of a product with a Carnot factor is at most that of the other factor
    report = analyze_canned("n522_x_n521")
    assert report.sides["asymptotic"].beta.beta_hat <= 3
    report = analyze_canned("n521_x_heis_riem")
    assert report.sides["asymptotic"].beta.beta_hat <= 2


def analyze_canned(name):
    from lielab.fileformat import load

    return analyze(load(name), "both")
