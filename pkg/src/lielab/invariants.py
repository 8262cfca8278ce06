"""The integer invariants alpha and beta of a polarized, graded Lie algebra."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import total_ordering
from itertools import combinations
from typing import Iterator, Sequence

from . import linalg
from .algebra import (
    StructureTensor,
    Subspace,
    annihilator,
    bracket,
    complement_within,
    contains,
    intersection,
    is_direct_sum,
    lower_central_series,
    subspace_bracket,
    subspace_sum,
)
from .gradings import Grading, _lcs_term, is_stratification, matches_side


@total_ordering
class _Infinity:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INFINITY"

    def __str__(self):
        return "inf"

    def __eq__(self, other):
        return other is self

    def __lt__(self, other):
        return False

    def __hash__(self):
        return hash("lielab-infinity")

    def __reduce__(self):
        return (_Infinity, ())


INFINITY = _Infinity()


def render(value) -> str:
    return "inf" if value is INFINITY else str(value)


@dataclass(frozen=True)
class AlphaResult:
    alpha1_inf: int | _Infinity | None = None
    alpha2_inf: int | _Infinity | None = None
    alpha_inf: int | _Infinity | None = None
    alpha0: int | _Infinity | None = None


def compositions(total: int, max_part: int, min_parts: int = 2) -> Iterator[tuple[int, ...]]:
    """Ordered tuples of integers in 1..max_part summing to ``total``."""

    def rec(remaining, prefix):
        if remaining == 0:
            if len(prefix) >= min_parts:
                yield tuple(prefix)
            return
        for part in range(1, min(max_part, remaining) + 1):
            yield from rec(remaining - part, prefix + [part])

    yield from rec(total, [])


class _IteratedBrackets:
    """Memoized left-iterated brackets [D_{p1}, [D_{p2}, ..., D_{pk}]]."""

    def __init__(self, T: StructureTensor, G: Grading):
        self.T, self.G = T, G
        self.cache: dict[tuple[int, ...], Subspace] = {}

    def __call__(self, p: tuple[int, ...]) -> Subspace:
        if p in self.cache:
            return self.cache[p]
        if len(p) == 1:
            out = self.G.layer(p[0])
        else:
            out = subspace_bracket(self.T, self.G.layer(p[0]), self(p[1:]))
        self.cache[p] = out
        return out


def _occupied_layers(G: Grading, S: Subspace) -> set[int]:
    layers = set()
    for v in S.basis:
        for j, comp in enumerate(G.components(v), start=1):
            if not linalg.is_zero(comp):
                layers.add(j)
    return layers


def alpha1_inf(T: StructureTensor, G: Grading):
    if is_stratification(T, G):
        return INFINITY
    s = G.step
    brackets = _IteratedBrackets(T, G)
    best = None
    for total in range(2, s + 1):
        for p in compositions(total, s):
            occupied = _occupied_layers(G, brackets(p))
            if any(m < total for m in occupied):
                raise ValueError("grading violates [V_i, V_j] ⊆ V_{>=i+j}; is it asymptotic?")
            above = [m for m in occupied if m > total]
            if above:
                gap = min(above) - total
                best = gap if best is None else min(best, gap)
    if best is None:
        raise RuntimeError("non-stratified grading produced no finite alpha_(1,inf)")
    return best


def alpha2_inf(T: StructureTensor, G: Grading, delta: Subspace):
    rows = [linalg.sub(v, G.component(v, 1)) for v in delta.basis]
    rest = Subspace.span(rows, T.dim)
    if rest.is_zero():
        return INFINITY
    series, nilpotent = lower_central_series(T)
    m = 1
    while contains(_lcs_term(series, nilpotent, m + 1), rest):
        m += 1
    return m - 1


def alpha0(T: StructureTensor, G: Grading):
    if is_stratification(T, G):
        return INFINITY
    q = G.step
    brackets = _IteratedBrackets(T, G)
    best = None
    total = 2
    while best is None or total - q < best:
        if total > 4 * q + T.dim + 2:
            raise RuntimeError("tuple enumeration for alpha_0 did not terminate")
        for p in compositions(total, q):
            occupied = _occupied_layers(G, brackets(p))
            if any(m > total for m in occupied):
                raise ValueError("grading violates [W_i, W_j] ⊆ W_{<=i+j}; is it tangent?")
            below = [m for m in occupied if m < total]
            if below:
                gap = total - max(below)
                best = gap if best is None else min(best, gap)
        total += 1
    return best


def compute_alphas(T: StructureTensor, G: Grading, delta: Subspace, side: str) -> AlphaResult:
    if not matches_side(G, side):
        raise ValueError(f"grading kind {G.kind!r} does not match side {side!r}")
    if side == "asymptotic":
        _, nilpotent = lower_central_series(T)
        if not nilpotent:
            raise ValueError("the asymptotic side needs a nilpotent algebra")
        a1 = alpha1_inf(T, G)
        a2 = alpha2_inf(T, G, delta)
        return AlphaResult(alpha1_inf=a1, alpha2_inf=a2, alpha_inf=min(a1, a2))
    if side == "tangent":
        return AlphaResult(alpha0=alpha0(T, G))
    raise ValueError(f"unknown side {side!r}")


# ------------------------------------------------------------------ ideals


@dataclass(frozen=True)
class Quotient:
    """g/I realized on a complement C of I."""

    ideal: Subspace
    complement: Subspace
    tensor: StructureTensor
    _inverse: tuple

    def project(self, x: Sequence) -> tuple[Fraction, ...]:
        c = linalg.vecmat(linalg.vec(x), self._inverse)
        return c[: self.complement.dim]


def quotient(T: StructureTensor, ideal: Subspace) -> Quotient:
    """Quotient bracket on the complement basis; assumes I is an ideal."""
    C = complement_within(ideal, Subspace.full(T.dim))
    basis = C.basis + ideal.basis
    inv = tuple(tuple(r) for r in linalg.inverse(basis))
    k = C.dim
    coeffs = {}
    for a in range(k):
        for b in range(a + 1, k):
            image = linalg.vecmat(bracket(T, C.basis[a], C.basis[b]), inv)[:k]
            for t, c in enumerate(image):
                if c:
                    coeffs[(a, b, t)] = c
    return Quotient(ideal, C, StructureTensor(k, coeffs), inv)


@dataclass(frozen=True)
class CqiCertificate:
    ideal: Subspace
    is_ideal: bool
    quotient_stratified: bool
    distribution_condition: bool
    quotient_tensor: StructureTensor | None
    quotient_layers: tuple[Subspace, ...] = ()

    @property
    def valid(self) -> bool:
        return self.is_ideal and self.quotient_stratified and self.distribution_condition


def is_ideal(T: StructureTensor, I: Subspace) -> bool:
    return contains(I, subspace_bracket(T, Subspace.full(T.dim), I))


def stratified_by(T: StructureTensor, layers: Sequence[Subspace]) -> bool:
    """Stratification test that tolerates zero layers and checks the direct sum."""
    if T.dim == 0:
        return True
    if not is_direct_sum(layers, Subspace.full(T.dim)):
        return False
    first = layers[0]
    for j in range(len(layers) - 1):
        if subspace_bracket(T, first, layers[j]) != layers[j + 1]:
            return False
    return subspace_bracket(T, first, layers[-1]).is_zero()


def check_cqi(T: StructureTensor, G: Grading, delta: Subspace, I: Subspace) -> CqiCertificate:
    if I.ambient_dim != T.dim or delta.ambient_dim != T.dim or G.dim != T.dim:
        raise ValueError("dimension mismatch")
    ideal_ok = is_ideal(T, I)
    dist_ok = contains(subspace_sum(G.layer(1), I), delta)
    if not ideal_ok:
        return CqiCertificate(I, False, False, dist_ok, None)
    Q = quotient(T, I)
    layers = tuple(
        Subspace.span([Q.project(v) for v in layer.basis], Q.tensor.dim) for layer in G.layers
    )
    return CqiCertificate(I, True, stratified_by(Q.tensor, layers), dist_ok, Q.tensor, layers)


@dataclass(frozen=True)
class BetaResult:
    beta_hat: int
    witness: CqiCertificate | None
    exhaustive: bool
    lower_bound: int = 0


def center(T: StructureTensor) -> Subspace:
    n = T.dim
    columns = []
    for j in range(n):
        images = [T.basis_bracket(i, j) for i in range(n)]
        columns.extend(tuple(images[i][k] for i in range(n)) for k in range(n))
    return annihilator(Subspace.span(columns, n))


def beta_lower_bound(T: StructureTensor, G: Grading, delta: Subspace, alpha_inf=None) -> int:
    """A provable lower bound for beta.

    beta >= highest layer touched by the distribution (since Delta ⊆ D_1 + I);
    beta >= 1 unless {0} is a Carnot quotient ideal; beta > alpha_inf; and,
    for nilpotent g, a nonzero ideal meets the center, so beta >= the first k
    with center ∩ D_{<=k} nonzero.
    """
    if check_cqi(T, G, delta, Subspace.zero(T.dim)).valid:
        return 0
    bound = 1
    _, nilpotent = lower_central_series(T)
    if nilpotent:
        z = center(T)
        k = 1
        while intersection(z, G.up_to(k)).is_zero():
            k += 1
        bound = max(bound, k)
    for v in delta.basis:
        for j, comp in enumerate(G.components(v), start=1):
            if not linalg.is_zero(comp):
                bound = max(bound, j)
    if alpha_inf is not None and alpha_inf is not INFINITY:
        bound = max(bound, alpha_inf + 1)
    return bound


MAX_COORDINATE_CANDIDATES = 1 << 16


def _support(c: Sequence[Fraction]) -> int:
    mask = 0
    for a, v in enumerate(c):
        if v != 0:
            mask |= 1 << a
    return mask


def _coordinate_candidates(T: StructureTensor, G: Grading, delta: Subspace, k: int) -> Iterator[Subspace]:
    """Coordinate subspaces of D_{<=k} (in the adapted basis) that pass the
    ideal and distribution conditions; checked on supports as bitmasks."""
    n = G.dim
    basis = G.adapted_basis
    indices = [a for a, w in enumerate(G.basis_weights) if w <= k]
    if 1 << len(indices) > MAX_COORDINATE_CANDIDATES:
        raise ValueError(f"coordinate search over {len(indices)} directions is too large")
    # ad-closure: support of [b_c, b_a] over all c, for each a
    closure = [0] * n
    for a in range(n):
        for c in range(n):
            closure[a] |= _support(G.coords(bracket(T, basis[c], basis[a])))
    first = sum(1 << a for a, w in enumerate(G.basis_weights) if w == 1)
    required = 0
    for v in delta.basis:
        required |= _support(G.coords(v)) & ~first
    for size in range(len(indices) + 1):
        for subset in combinations(indices, size):
            mask = sum(1 << a for a in subset)
            if required & ~mask:
                continue
            if any(closure[a] & ~mask for a in subset):
                continue
            yield Subspace.span([basis[a] for a in subset], n)


def beta_search(
    T: StructureTensor,
    G: Grading,
    delta: Subspace,
    strategy: str = "coordinate",
    candidates: Sequence[Subspace] = (),
    alpha_inf=None,
) -> BetaResult:
    """Smallest k for which a Carnot quotient ideal inside D_{<=k} is found.

    The witness is the sum of all valid candidates at that level (valid
    ideals are closed under sums), which makes it canonical.
    """
    if strategy not in ("coordinate", "user_supplied"):
        raise ValueError(f"unknown strategy {strategy!r}")
    if G.kind == "unverified":
        raise ValueError("beta_search needs a verified grading")
    lower = beta_lower_bound(T, G, delta, alpha_inf)
    full = Subspace.full(T.dim)
    for k in range(0, G.step + 1):
        box = G.up_to(k)
        if strategy == "coordinate":
            pool = _coordinate_candidates(T, G, delta, k)
        else:
            pool = [c for c in candidates if contains(box, c)]
        valid = [c for c in pool if check_cqi(T, G, delta, c).valid]
        if not valid and k == G.step:
            valid = [full]
        if valid:
            witness = valid[0]
            for c in valid[1:]:
                witness = subspace_sum(witness, c)
            cert = check_cqi(T, G, delta, witness)
            if not cert.valid:
                raise RuntimeError("sum of Carnot quotient ideals failed verification")
            return BetaResult(k, cert, exhaustive=(k == lower), lower_bound=lower)
    raise RuntimeError("no Carnot quotient ideal found, yet the whole algebra always is one")


def exponent(alpha, beta: int):
    """alpha / beta as an exact fraction, INFINITY for the Carnot case."""
    if beta == 0 or alpha is INFINITY:
        return INFINITY
    return Fraction(alpha, beta)
