"""BCH/Dynkin products and the dilation-conjugated bracket families."""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial
from typing import Callable, Mapping, Sequence

from . import linalg
from .algebra import StructureTensor, bracket, nilpotency_step
from .gradings import Grading, graded_components, matches_side, pull_back
from .linalg import Vector

MAX_BCH_STEP = 8

Word = tuple[int, ...]  # letters 1 (first factor) and 2 (second factor)


# ----------------------------------------------------------- BCH coefficients


def _block_weight(block: Word) -> Fraction | None:
    """1/(r! s!) if block is 1^r 2^s with r + s > 0, else None."""
    r = 0
    while r < len(block) and block[r] == 1:
        r += 1
    if any(letter != 2 for letter in block[r:]):
        return None
    return Fraction(1, factorial(r) * factorial(len(block) - r))


def dynkin_coefficient(word: Word) -> Fraction:
    """Coefficient of the right-nested bracket [x_{w1}, [x_{w2}, ..., x_{wk}]]
    in log(exp(x_1) exp(x_2)), from Dynkin's formula."""
    k = len(word)
    # ways[pos][n]: sum over splittings of word[:pos] into n blocks
    ways = [dict() for _ in range(k + 1)]
    ways[0][0] = Fraction(1)
    for end in range(1, k + 1):
        for start in range(end):
            w = _block_weight(word[start:end])
            if w is None:
                continue
            for n, acc in ways[start].items():
                ways[end][n + 1] = ways[end].get(n + 1, Fraction(0)) + acc * w
    total = Fraction(0)
    for n, acc in ways[k].items():
        total += Fraction((-1) ** (n - 1), n) * acc
    return total / k


def _all_words(k: int):
    if k == 0:
        yield ()
        return
    for w in _all_words(k - 1):
        yield w + (1,)
        yield w + (2,)


@dataclass(frozen=True)
class BchTable:
    max_step: int
    entries: Mapping[Word, Fraction]

    def coefficient(self, word: Word) -> Fraction:
        return self.entries.get(tuple(word), Fraction(0))

    def words(self) -> list[Word]:
        return list(self.entries)


def _bch_entries(max_step: int) -> dict[Word, Fraction]:
    entries = {}
    for k in range(1, max_step + 1):
        for w in _all_words(k):
            if k >= 2 and w[-1] == w[-2]:
                continue  # innermost bracket [x, x] vanishes
            c = dynkin_coefficient(w)
            if c:
                entries[w] = c
    return entries


# The check runs in the free associative algebra on three letters truncated at
# the table's step; the free nilpotent Lie algebra sits inside it as the Lie
# polynomials, so associativity there is associativity on the free group.

Poly = dict[tuple[int, ...], Fraction]


def _poly_mul(u: Poly, v: Poly, top: int) -> Poly:
    out: Poly = {}
    for wu, cu in u.items():
        room = top - len(wu)
        if room < 0:
            continue
        for wv, cv in v.items():
            if len(wv) <= room:
                key = wu + wv
                out[key] = out.get(key, Fraction(0)) + cu * cv
    return {w: c for w, c in out.items() if c}


def _poly_commutator(u: Poly, v: Poly, top: int) -> Poly:
    out = dict(_poly_mul(u, v, top))
    for w, c in _poly_mul(v, u, top).items():
        out[w] = out.get(w, Fraction(0)) - c
    return {w: c for w, c in out.items() if c}


def _poly_add(*terms: tuple[Fraction, Poly]) -> Poly:
    out: Poly = {}
    for scale, p in terms:
        for w, c in p.items():
            out[w] = out.get(w, Fraction(0)) + scale * c
    return {w: c for w, c in out.items() if c}


def _evaluate_bch(entries: Mapping[Word, Fraction], x, y, br: Callable, combine: Callable):
    """Sum of coefficient * right-nested bracket, with suffixes memoized."""
    memo = {(1,): x, (2,): y}

    def nested(word):
        if word not in memo:
            head = x if word[0] == 1 else y
            memo[word] = br(head, nested(word[1:]))
        return memo[word]

    return combine([(c, nested(w)) for w, c in entries.items()])


def _verify_associativity(entries: Mapping[Word, Fraction], max_step: int) -> bool:
    top = max_step
    a, b, c = ({(i,): Fraction(1)} for i in range(3))

    def prod(u, v):
        return _evaluate_bch(entries, u, v, lambda p, q: _poly_commutator(p, q, top), lambda ts: _poly_add(*ts))

    return prod(prod(a, b), c) == prod(a, prod(b, c))


@lru_cache(maxsize=None)
def bch_table(max_step: int, verify: bool = True) -> BchTable:
    if not 1 <= max_step <= MAX_BCH_STEP:
        raise ValueError(f"max_step must be between 1 and {MAX_BCH_STEP}")
    entries = _bch_entries(max_step)
    if verify and not _verify_associativity(entries, max_step):
        raise RuntimeError(f"BCH table of step {max_step} failed the associativity check")
    return BchTable(max_step, entries)


# ------------------------------------------------------------ group products


def _truncation(T: StructureTensor, truncation: int | None) -> int:
    step = nilpotency_step(T)
    if step is None:
        if truncation is None:
            raise ValueError("non-nilpotent algebra: pass an explicit truncation step")
        return truncation
    return step


def dynkin_product(T: StructureTensor, x: Sequence, y: Sequence, truncation: int | None = None) -> Vector:
    """x * y = log(exp x exp y), exact for nilpotent T.

    For non-nilpotent T the series is cut at ``truncation``; that is only a
    local approximation and the caller owns the neighborhood.
    """
    step = _truncation(T, truncation)
    table = bch_table(max(step, 1))
    x, y = linalg.vec(x), linalg.vec(y)
    n = T.dim

    def combine(terms):
        out = [Fraction(0)] * n
        for c, v in terms:
            for k, a in enumerate(v):
                if a:
                    out[k] += c * a
        return tuple(out)

    return _evaluate_bch(table.entries, x, y, lambda p, q: bracket(T, p, q), combine)


def inverse(x: Sequence) -> Vector:
    return tuple(-linalg.to_fraction(a) for a in x)


def product_chain(T: StructureTensor, factors: Sequence[Sequence], truncation: int | None = None) -> Vector:
    out = linalg.zeros(T.dim)
    for f in factors:
        out = dynkin_product(T, out, f, truncation)
    return out


# ---------------------------------------------------------- deformed family


def _eps_power(eps: Fraction, m: int) -> Fraction:
    return Fraction(1) if m == 0 else eps**m


@dataclass(frozen=True)
class DeformedFamily:
    """[x,y]^(eps) = delta_eps [delta_eps^-1 x, delta_eps^-1 y] (asymptotic side)
    or delta_eps^-1 [delta_eps x, delta_eps y] (tangent side), stored as a
    polynomial in eps with tensor coefficients."""

    base: StructureTensor
    grading: Grading
    side: str
    terms: tuple[tuple[int, StructureTensor], ...]

    def at(self, eps) -> StructureTensor:
        eps = linalg.to_fraction(eps)
        coeffs: dict[tuple[int, int, int], Fraction] = {}
        for m, tensor in self.terms:
            f = _eps_power(eps, m)
            if f == 0:
                continue
            for key, c in tensor.coeffs.items():
                coeffs[key] = coeffs.get(key, Fraction(0)) + f * c
        return StructureTensor(self.base.dim, coeffs, self.base.basis_names)

    @property
    def degree(self) -> int:
        return max((m for m, _ in self.terms), default=0)

    @property
    def product_step(self) -> int | None:
        return nilpotency_step(self.base)


def deformed_family(T: StructureTensor, G: Grading, side: str) -> DeformedFamily:
    if side not in ("asymptotic", "tangent"):
        raise ValueError(f"unknown side {side!r}")
    if not matches_side(G, side):
        raise ValueError(f"grading kind {G.kind!r} does not match side {side!r}")
    weights = G.basis_weights
    by_power: dict[int, dict[tuple[int, int], Vector]] = {}
    for (a, b), comps in graded_components(T, G).items():
        for j, comp in enumerate(comps, start=1):
            if linalg.is_zero(comp):
                continue
            shift = weights[a] + weights[b]
            m = j - shift if side == "asymptotic" else shift - j
            if m < 0:
                raise ValueError("bracket is not polynomial in eps for this grading")
            by_power.setdefault(m, {})[(a, b)] = comp
    terms = tuple((m, pull_back(G, vals, T.basis_names)) for m, vals in sorted(by_power.items()))
    return DeformedFamily(T, G, side, terms)


def deformed_tensor(F: DeformedFamily, eps) -> StructureTensor:
    return F.at(eps)


def deformed_product(F: DeformedFamily, eps, x: Sequence, y: Sequence) -> Vector:
    return dynkin_product(F.at(eps), x, y, F.product_step)


def product_difference_expansion(F: DeformedFamily, x: Sequence, y: Sequence) -> dict[int, Vector]:
    """x *_eps y - x *_0 y as {power of eps: vector}, from the layered sum of
    graded components of iterated base brackets."""
    T, G = F.base, F.grading
    step = F.product_step
    if step is None:
        raise ValueError("layered product difference needs a nilpotent base")
    table = bch_table(max(step, 1))
    s = G.step
    n = T.dim
    parts = {1: G.components(linalg.vec(x)), 2: G.components(linalg.vec(y))}
    asymptotic = F.side == "asymptotic"

    expansion: dict[int, list[Fraction]] = {}
    suffixes = {w[i:] for w in table.entries for i in range(len(w))}

    # nodes: (word, layers) -> nested bracket value of the labelled components
    level = {}
    for q in (1, 2):
        for p in range(1, s + 1):
            v = parts[q][p - 1]
            if not linalg.is_zero(v) and (q,) in suffixes:
                level[((q,), (p,))] = v
    for _ in range(2, step + 1):
        nxt = {}
        for (word, layers), inner in level.items():
            for q in (1, 2):
                w = (q,) + word
                if w not in suffixes:
                    continue
                for p in range(1, s + 1):
                    if asymptotic and p + sum(layers) > s:
                        continue
                    head = parts[q][p - 1]
                    if linalg.is_zero(head):
                        continue
                    v = bracket(T, head, inner)
                    if not linalg.is_zero(v):
                        nxt[(w, (p,) + layers)] = v
        for (w, layers), v in nxt.items():
            b = table.coefficient(w)
            if not b:
                continue
            total = sum(layers)
            for j, comp in enumerate(G.components(v), start=1):
                if linalg.is_zero(comp):
                    continue
                if asymptotic and j > total:
                    m = j - total
                elif not asymptotic and j < total:
                    m = total - j
                else:
                    continue
                acc = expansion.setdefault(m, [Fraction(0)] * n)
                for k, a in enumerate(comp):
                    if a:
                        acc[k] += b * a
        level = nxt
    return {m: tuple(v) for m, v in sorted(expansion.items()) if not linalg.is_zero(v)}


def product_difference(F: DeformedFamily, x: Sequence, y: Sequence, eps) -> Vector:
    eps = linalg.to_fraction(eps)
    out = linalg.zeros(F.base.dim)
    for m, v in product_difference_expansion(F, x, y).items():
        out = linalg.add(out, linalg.scale(_eps_power(eps, m), v))
    return out


def lowest_order(expansion: Mapping[int, Vector]) -> int | None:
    return min(expansion) if expansion else None


def random_rational_vector(rng: random.Random, n: int, spread: int = 4) -> Vector:
    return tuple(Fraction(rng.randint(-spread, spread), rng.randint(1, 3)) for _ in range(n))


# ------------------------------------------------- Carnot quotient ideals


SAMPLE_EPSILONS = (Fraction(0), Fraction(1, 7), Fraction(1, 3), Fraction(1, 2), Fraction(1))


def cqi_properties(
    T: StructureTensor,
    G: Grading,
    delta,
    ideal,
    side: str,
    eps_values: Sequence = SAMPLE_EPSILONS,
    samples: int = 5,
    seed: int = 0,
) -> dict[str, bool]:
    """Exact checks of what a Carnot quotient ideal buys across the family:
    dilation invariance, ideal and stratified quotient for every eps, one
    quotient bracket for all eps, the distribution seen through the first
    layer (asymptotic side), and the projection being a homomorphism."""
    from .algebra import Subspace
    from .gradings import dilate
    from .invariants import is_ideal, quotient, stratified_by

    F = deformed_family(T, G, side)
    eps_values = [linalg.to_fraction(e) for e in eps_values]
    positive = [e for e in eps_values if e > 0]
    base_quotient = quotient(T, ideal)
    layers = tuple(
        Subspace.span([base_quotient.project(v) for v in layer.basis], base_quotient.tensor.dim) for layer in G.layers
    )
    out = {"dilation_invariant": all(ideal.contains_vector(dilate(G, e, v)) for e in positive for v in ideal.basis)}
    tensors = {e: F.at(e) for e in eps_values}
    out["ideal_for_all_eps"] = all(is_ideal(t, ideal) for t in tensors.values())
    quotients = {e: quotient(t, ideal) for e, t in tensors.items()} if out["ideal_for_all_eps"] else {}
    out["quotient_stratified_for_all_eps"] = bool(quotients) and all(
        stratified_by(q.tensor, layers) for q in quotients.values()
    )
    out["quotient_bracket_constant"] = bool(quotients) and len({q.tensor for q in quotients.values()}) == 1
    if side == "asymptotic":
        ok = True
        for e in positive:
            for u in delta.basis:
                scaled = dilate(G, e, u)
                ok &= base_quotient.project(scaled) == base_quotient.project(G.component(scaled, 1))
        out["distribution_through_first_layer"] = ok
    if F.product_step is not None and quotients:
        rng = random.Random(seed)
        ok = True
        for e, q in quotients.items():
            for _ in range(samples):
                x = random_rational_vector(rng, T.dim)
                y = random_rational_vector(rng, T.dim)
                lhs = q.project(dynkin_product(tensors[e], x, y))
                rhs = dynkin_product(q.tensor, q.project(x), q.project(y))
                ok &= tuple(lhs) == tuple(rhs)
        out["projection_homomorphism"] = ok
    return out
