"""Linear gradings of a Lie algebra: construction, classification, dilations
and the graded (cone) brackets they induce."""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Callable, Mapping, Sequence

from . import linalg
from .algebra import (
    StructureTensor,
    Subspace,
    bracket,
    complement_within,
    contains,
    delta_filtration,
    is_direct_sum,
    lower_central_series,
    subspace_bracket,
    subspace_sum,
)
from .linalg import Vector

KINDS = ("asymptotic", "tangent", "stratification", "unverified")


@dataclass(frozen=True)
class Grading:
    """Direct-sum decomposition g = D_1 + ... + D_s; layer j has weight j."""

    layers: tuple[Subspace, ...]
    kind: str = "unverified"

    def __post_init__(self):
        if not self.layers:
            raise ValueError("a grading needs at least one layer")
        if self.kind not in KINDS:
            raise ValueError(f"unknown grading kind {self.kind!r}")
        n = self.layers[0].ambient_dim
        if any(layer.ambient_dim != n for layer in self.layers):
            raise ValueError("layers live in different ambient spaces")
        if not is_direct_sum(self.layers, Subspace.full(n)):
            raise ValueError("layers do not form a direct sum equal to the whole algebra")

    @property
    def dim(self) -> int:
        return self.layers[0].ambient_dim

    @property
    def step(self) -> int:
        return len(self.layers)

    @property
    def weights(self) -> tuple[int, ...]:
        return tuple(range(1, self.step + 1))

    def layer(self, j: int) -> Subspace:
        """D_j for 1 <= j <= s, zero outside that range."""
        if 1 <= j <= self.step:
            return self.layers[j - 1]
        return Subspace.zero(self.dim)

    def up_to(self, k: int) -> Subspace:
        """D_{<=k}."""
        out = Subspace.zero(self.dim)
        for j in range(1, min(k, self.step) + 1):
            out = subspace_sum(out, self.layers[j - 1])
        return out

    def from_(self, k: int) -> Subspace:
        """D_{>=k}."""
        out = Subspace.zero(self.dim)
        for j in range(max(k, 1), self.step + 1):
            out = subspace_sum(out, self.layers[j - 1])
        return out

    @cached_property
    def adapted_basis(self) -> tuple[Vector, ...]:
        return tuple(row for layer in self.layers for row in layer.basis)

    @cached_property
    def basis_weights(self) -> tuple[int, ...]:
        return tuple(j + 1 for j, layer in enumerate(self.layers) for _ in layer.basis)

    @cached_property
    def _inverse(self) -> list[list[Fraction]]:
        return linalg.inverse(self.adapted_basis)

    def coords(self, x: Sequence) -> Vector:
        """Coordinates of x in the adapted basis."""
        return linalg.vecmat(linalg.vec(x), self._inverse)

    def from_coords(self, c: Sequence) -> Vector:
        return linalg.vecmat(c, self.adapted_basis)

    def components(self, x: Sequence) -> list[Vector]:
        """[(x)_1, ..., (x)_s]."""
        c = self.coords(x)
        out = []
        for j in range(1, self.step + 1):
            masked = [ci if w == j else Fraction(0) for ci, w in zip(c, self.basis_weights)]
            out.append(self.from_coords(masked))
        return out

    def component(self, x: Sequence, j: int) -> Vector:
        if not 1 <= j <= self.step:
            return linalg.zeros(self.dim)
        return self.components(x)[j - 1]

    def with_kind(self, kind: str) -> Grading:
        return Grading(self.layers, kind)

    def weight_of(self, x: Sequence) -> int | None:
        """The layer index if x is homogeneous and nonzero."""
        nonzero = [j + 1 for j, comp in enumerate(self.components(x)) if not linalg.is_zero(comp)]
        return nonzero[0] if len(nonzero) == 1 else None


def dilate(G: Grading, eps, x: Sequence):
    """delta_eps(x): layer j scaled by eps**j.  Floats give floats."""
    if isinstance(eps, float):
        c = [float(v) for v in G.coords(x)]
        scaled = [ci * eps**w for ci, w in zip(c, G.basis_weights)]
        return tuple(
            sum(s * float(b[k]) for s, b in zip(scaled, G.adapted_basis)) for k in range(G.dim)
        )
    eps = linalg.to_fraction(eps)
    c = G.coords(x)
    return G.from_coords([ci * eps**w for ci, w in zip(c, G.basis_weights)])


# ------------------------------------------------------------ construction


def _shear(A: Subspace, C: Subspace, rng: random.Random) -> Subspace:
    """Replace each basis vector c of C by c + (random element of A)."""
    rows = []
    for c in C.basis:
        v = list(c)
        for a in A.basis:
            r = Fraction(rng.randint(-3, 3), rng.randint(1, 3))
            v = [vi + r * ai for vi, ai in zip(v, a)]
        rows.append(v)
    return Subspace.span(rows, C.ambient_dim)


def _complement(A, B, preference, rng):
    C = complement_within(A, B, preference)
    return _shear(A, C, rng) if rng is not None else C


def build_asymptotic_grading(
    T: StructureTensor, preference: Sequence[int] | None = None, rng: random.Random | None = None
) -> Grading:
    """V_j := a complement of g^(j+1) in g^(j).

    With ``rng`` the complements are randomly sheared, which still gives an
    asymptotic grading (used for property testing).
    """
    series, nilpotent = lower_central_series(T)
    if not nilpotent:
        raise ValueError("asymptotic gradings need a nilpotent algebra")
    layers = tuple(
        _complement(series[j + 1], series[j], preference, rng) for j in range(len(series) - 1)
    )
    return Grading(layers, "asymptotic")


def build_tangent_grading(
    T: StructureTensor,
    delta: Subspace,
    preference: Sequence[int] | None = None,
    rng: random.Random | None = None,
) -> Grading:
    filt = delta_filtration(T, delta)
    if not filt.bracket_generating:
        raise ValueError("the distribution is not bracket-generating")
    layers = [delta]
    for j in range(1, len(filt.cumulative)):
        layers.append(_complement(filt.cumulative[j - 1], filt.cumulative[j], preference, rng))
    return Grading(tuple(layers), "tangent")


# ----------------------------------------------------------- classification


@dataclass(frozen=True)
class GradingKinds:
    asymptotic: bool
    tangent: bool | None  # None when no distribution was given
    stratification: bool


def _lcs_term(series: list[Subspace], nilpotent: bool, j: int) -> Subspace:
    """g^(j) with g^(1) = g."""
    if j - 1 < len(series):
        return series[j - 1]
    return Subspace.zero(series[0].ambient_dim) if nilpotent else series[-1]


def is_asymptotic(T: StructureTensor, G: Grading) -> bool:
    series, nilpotent = lower_central_series(T)
    if not nilpotent:
        return False
    return all(
        is_direct_sum([G.layer(j), _lcs_term(series, nilpotent, j + 1)], _lcs_term(series, nilpotent, j))
        for j in range(1, G.step + 1)
    )


def is_tangent(T: StructureTensor, G: Grading, delta: Subspace) -> bool:
    filt = delta_filtration(T, delta)
    if not filt.bracket_generating:
        return False

    def cumulative(j):
        if j <= 0:
            return Subspace.zero(T.dim)
        return filt.cumulative[min(j, len(filt.cumulative)) - 1]

    return all(
        is_direct_sum([G.layer(j), cumulative(j - 1)], cumulative(j)) for j in range(1, G.step + 1)
    )


def is_stratification(T: StructureTensor, G: Grading) -> bool:
    first = G.layer(1)
    for j in range(1, G.step):
        if subspace_bracket(T, first, G.layer(j)) != G.layer(j + 1):
            return False
    return subspace_bracket(T, first, G.layer(G.step)).is_zero()


def classify_grading(T: StructureTensor, G: Grading, delta: Subspace | None = None) -> GradingKinds:
    if G.dim != T.dim:
        raise ValueError("grading and algebra have different dimensions")
    return GradingKinds(
        asymptotic=is_asymptotic(T, G),
        tangent=None if delta is None else is_tangent(T, G, delta),
        stratification=is_stratification(T, G),
    )


def verify_grading(T: StructureTensor, G: Grading, kind: str, delta: Subspace | None = None) -> Grading:
    """Return G tagged with ``kind`` after checking it, or raise."""
    if kind == "asymptotic":
        ok = is_asymptotic(T, G)
    elif kind == "tangent":
        if delta is None:
            raise ValueError("tangent check needs a distribution")
        ok = is_tangent(T, G, delta)
    elif kind == "stratification":
        ok = is_stratification(T, G)
    else:
        raise ValueError(f"cannot verify kind {kind!r}")
    if not ok:
        raise ValueError(f"grading is not {kind}")
    return G.with_kind(kind)


def matches_side(G: Grading, side: str) -> bool:
    """Stratifications qualify for either side when given explicitly."""
    return G.kind == side or G.kind == "stratification"


# --------------------------------------------------------- graded brackets


def graded_components(T: StructureTensor, G: Grading) -> dict[tuple[int, int], list[Vector]]:
    """For adapted basis indices a < b: the layer components of [b_a, b_b]."""
    basis = G.adapted_basis
    out = {}
    for a in range(len(basis)):
        for b in range(a + 1, len(basis)):
            value = bracket(T, basis[a], basis[b])
            if not linalg.is_zero(value):
                out[(a, b)] = G.components(value)
    return out


def pull_back(G: Grading, adapted: Mapping[tuple[int, int], Vector], names=()) -> StructureTensor:
    """Tensor in standard coordinates of the antisymmetric bilinear map whose
    values on adapted basis pairs a < b are given."""
    n = G.dim
    inv = G._inverse  # row p holds the adapted coordinates of e_p
    # first contract the second slot: M[a][q] = sum_b inv[q][b] * v(a, b)
    partial: dict[tuple[int, int], list[Fraction]] = {}
    for (a, b), v in adapted.items():
        for q in range(n):
            for first, second, sign in ((a, b, 1), (b, a, -1)):
                w = inv[q][second]
                if w:
                    acc = partial.setdefault((first, q), [Fraction(0)] * n)
                    f = sign * w
                    for k, vk in enumerate(v):
                        if vk:
                            acc[k] += f * vk
    coeffs: dict[tuple[int, int, int], Fraction] = {}
    for (a, q), v in partial.items():
        for p in range(q):
            w = inv[p][a]
            if w:
                for k, vk in enumerate(v):
                    if vk:
                        coeffs[(p, q, k)] = coeffs.get((p, q, k), Fraction(0)) + w * vk
    return StructureTensor(n, coeffs, tuple(names))


@dataclass(frozen=True)
class ConeAlgebra:
    tensor: StructureTensor
    source_grading: Grading
    side: str


def cone_tensor(T: StructureTensor, G: Grading, side: str) -> ConeAlgebra:
    """Keep only the layer-(i+j) component of [D_i, D_j]."""
    if side not in ("asymptotic", "tangent"):
        raise ValueError(f"unknown side {side!r}")
    if not matches_side(G, side):
        raise ValueError(f"grading kind {G.kind!r} does not match side {side!r}")
    weights = G.basis_weights
    kept = {}
    for (a, b), comps in graded_components(T, G).items():
        target = weights[a] + weights[b]
        if target <= G.step and not linalg.is_zero(comps[target - 1]):
            kept[(a, b)] = comps[target - 1]
    return ConeAlgebra(pull_back(G, kept, T.basis_names), G, side)


# ------------------------------------------------------- property checks


def _below(G: Grading, k: int) -> Subspace:
    return G.up_to(k) if k < G.step else Subspace.full(G.dim)


def grading_properties(T: StructureTensor, delta: Subspace, W: Grading, V: Grading | None = None) -> dict[str, bool]:
    """Check the structural relations between a tangent grading W, an
    asymptotic grading V, the Delta-filtration and the lower central series.

    Implications are reported as true when their hypothesis fails.
    """
    checks: dict[str, bool] = {}
    q = W.step
    checks["tangent_bracket_below"] = all(
        contains(_below(W, i + j), subspace_bracket(T, W.layer(i), W.layer(j)))
        for i in range(1, q + 1)
        for j in range(1, q + 1)
    )
    first = W.layer(1)
    hyp = all(contains(W.layer(j + 1), subspace_bracket(T, first, W.layer(j))) for j in range(1, q))
    hyp = hyp and subspace_bracket(T, first, W.layer(q)).is_zero()
    checks["tangent_stratification_criterion"] = (not hyp) or is_stratification(T, W)
    if V is None:
        return checks

    series, nilpotent = lower_central_series(T)
    if not nilpotent:
        raise ValueError("asymptotic checks need a nilpotent algebra")
    s = V.step
    filt = delta_filtration(T, delta)

    def power(j):
        return filt.powers[j - 1] if j <= len(filt.powers) else subspace_bracket(T, delta, power(j - 1))

    def cumulative(j):
        return filt.cumulative[min(j, len(filt.cumulative)) - 1]

    def lcs(j):
        return _lcs_term(series, nilpotent, j)

    checks["tangent_step_at_most_nilpotency_step"] = q <= s
    checks["lcs_generated_by_delta_powers"] = all(
        subspace_sum(power(j), lcs(j + 1)) == lcs(j) for j in range(1, s + 1)
    )
    checks["delta_filtration_fills_modulo_lcs"] = all(
        subspace_sum(cumulative(j), lcs(j + 1)).is_full() for j in range(1, s + 1)
    )
    checks["asymptotic_bracket_above"] = all(
        contains(V.from_(i + j), subspace_bracket(T, V.layer(i), V.layer(j)))
        for i in range(1, s + 1)
        for j in range(1, s + 1)
    )
    hyp = all(contains(V.layer(j + 1), subspace_bracket(T, V.layer(1), V.layer(j))) for j in range(1, s))
    checks["asymptotic_stratification_criterion"] = (not hyp) or is_stratification(T, V)
    return checks
