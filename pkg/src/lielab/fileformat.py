"""Line-oriented algebra files.

    name = heis_riem
    dim = 3
    basis = e1, e2, e3
    bracket e1 e2 = e3
    distribution = span(e1, e2, e3)
    grading V1 = span(e1, e2)          # asymptotic layers; W1, W2, ... for tangent
    norm = euclidean
    expect alpha_inf = 1

Blank lines and ``#`` comments are ignored.  Coefficients are rationals
``p/q`` (decimals are read exactly).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path

from .algebra import StructureTensor, Subspace, jacobi_failures
from .gradings import Grading
from .invariants import INFINITY
from .linalg import Vector

EXPECT_KEYS = (
    "step",
    "alpha1_inf",
    "alpha2_inf",
    "alpha_inf",
    "beta",
    "beta_witness",
    "exponent",
    "alpha0",
    "beta_tangent",
    "exponent_tangent",
    "stratification",
)

NORM_KINDS = ("euclidean", "l1", "linf", "form", "polytope")


class FormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class NormDescriptor:
    kind: str
    matrix: tuple[tuple[Fraction, ...], ...] | None = None
    vertices: tuple[Vector, ...] | None = None


@dataclass
class AlgebraFile:
    name: str
    tensor: StructureTensor
    distribution: Subspace
    asymptotic_layers: tuple[Subspace, ...] | None = None
    tangent_layers: tuple[Subspace, ...] | None = None
    norm: NormDescriptor = NormDescriptor("euclidean")
    expect: dict[str, object] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.tensor.dim

    @property
    def basis_names(self) -> tuple[str, ...]:
        return self.tensor.basis_names

    def asymptotic_grading(self) -> Grading | None:
        return Grading(self.asymptotic_layers) if self.asymptotic_layers else None

    def tangent_grading(self) -> Grading | None:
        return Grading(self.tangent_layers) if self.tangent_layers else None

    def norm_spec(self):
        from .metrics import NormSpec

        d = self.norm
        if d.kind == "form":
            return NormSpec("quadratic_form", self.distribution, matrix=tuple(tuple(float(a) for a in r) for r in d.matrix))
        if d.kind == "polytope":
            return NormSpec("polytope", self.distribution, vertices=tuple(tuple(float(a) for a in v) for v in d.vertices))
        return NormSpec(d.kind, self.distribution)


# ----------------------------------------------------------------- parsing

_TERM = re.compile(r"\s*([+-]?)\s*(?:([0-9][0-9./]*)\s*\*?\s*)?([A-Za-z_][A-Za-z0-9_']*)\s*")
_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_']*$")


def _rational(text: str, line: int) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise FormatError(f"malformed rational {text.strip()!r}", line) from None


def _linear_combination(text: str, names: dict[str, int], line: int) -> Vector:
    text = text.strip()
    if text in ("0", ""):
        return tuple(Fraction(0) for _ in names)
    out = [Fraction(0)] * len(names)
    pos = 0
    first = True
    while pos < len(text):
        m = _TERM.match(text, pos)
        if not m or m.end() == pos or (not first and not m.group(1)):
            raise FormatError(f"cannot parse linear combination {text!r}", line)
        sign, coeff, name = m.groups()
        if name not in names:
            raise FormatError(f"unknown basis element {name!r}", line)
        c = _rational(coeff, line) if coeff else Fraction(1)
        out[names[name]] += -c if sign == "-" else c
        pos = m.end()
        first = False
    return tuple(out)


def _split_top(text: str, sep: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return parts


def _call(text: str, head: str, line: int) -> str:
    text = text.strip()
    if not (text.startswith(head + "(") and text.endswith(")")):
        raise FormatError(f"expected {head}(...)", line)
    return text[len(head) + 1 : -1]


def _vectors(text: str, head: str, names, line) -> tuple[Vector, ...]:
    inner = _call(text, head, line).strip()
    if not inner:
        return ()
    return tuple(_linear_combination(v, names, line) for v in _split_top(inner, ","))


def parse_span(text: str, basis_names, line: int | None = None) -> Subspace:
    """``span(a, b - c, ...)`` in the given basis."""
    names = {b: i for i, b in enumerate(basis_names)}
    return Subspace.span(_vectors(text, "span", names, line), len(names))


def _expect_value(key: str, text: str, names, dim, line):
    text = text.strip()
    if key == "beta_witness":
        return Subspace.span(_vectors(text, "span", names, line), dim)
    if key == "stratification":
        if text not in ("true", "false"):
            raise FormatError("stratification expects true or false", line)
        return text == "true"
    if text == "inf":
        return INFINITY
    value = _rational(text, line)
    if key.startswith("exponent"):
        return value
    if value.denominator != 1 or value < 0:
        raise FormatError(f"{key} expects a non-negative integer or inf", line)
    return int(value)


def parse_algebra(text: str) -> AlgebraFile:
    name = None
    dim = None
    dim_line = None
    basis: tuple[str, ...] | None = None
    raw: list[tuple[int, str, str]] = []
    for number, original in enumerate(text.splitlines(), start=1):
        line = original.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError("expected 'key = value'", number)
        key, value = (s.strip() for s in line.split("=", 1))
        raw.append((number, key, value))

    names: dict[str, int] = {}
    for number, key, value in raw:
        if key == "name":
            name = value
        elif key == "dim":
            try:
                dim = int(value)
            except ValueError:
                raise FormatError("dim must be an integer", number) from None
            if dim <= 0:
                raise FormatError("dim must be positive", number)
            dim_line = number
        elif key == "basis":
            basis = tuple(s.strip() for s in value.split(","))
            if any(not _NAME.match(b) for b in basis) or len(set(basis)) != len(basis):
                raise FormatError("basis names must be distinct identifiers", number)
            names = {b: i for i, b in enumerate(basis)}
    if dim is None:
        raise FormatError("missing 'dim = N'")
    if basis is None:
        basis = tuple(f"e{i + 1}" for i in range(dim))
        names = {b: i for i, b in enumerate(basis)}
    elif len(basis) != dim:
        raise FormatError(f"basis has {len(basis)} names but dim = {dim}", dim_line)

    coeffs: dict[tuple[int, int, int], Fraction] = {}
    seen_pairs: dict[tuple[int, int], int] = {}
    distribution = None
    layers: dict[str, dict[int, Subspace]] = {"V": {}, "W": {}}
    norm = NormDescriptor("euclidean")
    expect: dict[str, object] = {}
    for number, key, value in raw:
        if key in ("name", "dim", "basis"):
            continue
        parts = key.split()
        if parts[0] == "bracket":
            if len(parts) != 3 or any(p not in names for p in parts[1:]):
                raise FormatError("expected 'bracket <a> <b> = <combination>'", number)
            i, j = names[parts[1]], names[parts[2]]
            rhs = _linear_combination(value, names, number)
            if i == j:
                if any(rhs):
                    raise FormatError(f"[{parts[1]}, {parts[1]}] must vanish", number)
                continue
            pair = (min(i, j), max(i, j))
            if pair in seen_pairs:
                raise FormatError(f"bracket of {parts[1]}, {parts[2]} given twice (first on line {seen_pairs[pair]})", number)
            seen_pairs[pair] = number
            sign = 1 if i < j else -1
            for k, c in enumerate(rhs):
                if c:
                    coeffs[(pair[0], pair[1], k)] = sign * c
        elif key == "distribution":
            distribution = Subspace.span(_vectors(value, "span", names, number), dim)
        elif parts[0] == "grading":
            m = re.fullmatch(r"([VW])([0-9]+)", parts[1]) if len(parts) == 2 else None
            if not m or int(m.group(2)) < 1:
                raise FormatError("expected 'grading V<k> = span(...)' or 'grading W<k> = span(...)'", number)
            layers[m.group(1)][int(m.group(2))] = Subspace.span(_vectors(value, "span", names, number), dim)
        elif key == "norm":
            norm = _parse_norm(value, names, dim, number)
        elif parts[0] == "expect":
            if len(parts) != 2 or parts[1] not in EXPECT_KEYS:
                raise FormatError(f"unknown expectation {key!r}; known: {', '.join(EXPECT_KEYS)}", number)
            expect[parts[1]] = _expect_value(parts[1], value, names, dim, number)
        else:
            raise FormatError(f"unknown key {key!r}", number)

    tensor = StructureTensor(dim, coeffs, basis)
    bad = jacobi_failures(tensor)
    if bad:
        triples = ", ".join("(" + ", ".join(basis[t] for t in triple) + ")" for triple in bad[:5])
        raise FormatError(f"Jacobi identity fails on {triples}")
    if distribution is None:
        raise FormatError("missing 'distribution = span(...)'")

    def ordered(table, letter):
        if not table:
            return None
        top = max(table)
        missing = [k for k in range(1, top + 1) if k not in table]
        if missing:
            raise FormatError(f"grading layer {letter}{missing[0]} missing")
        return tuple(table[k] for k in range(1, top + 1))

    file = AlgebraFile(
        name=name or "unnamed",
        tensor=tensor,
        distribution=distribution,
        asymptotic_layers=ordered(layers["V"], "V"),
        tangent_layers=ordered(layers["W"], "W"),
        norm=norm,
        expect=expect,
    )
    for layers_ in (file.asymptotic_layers, file.tangent_layers):
        if layers_ is not None:
            try:
                Grading(layers_)
            except ValueError as exc:
                raise FormatError(str(exc)) from None
    if norm.kind == "form" and (len(norm.matrix) != dim or any(len(r) != dim for r in norm.matrix)):
        raise FormatError(f"form(...) needs a {dim}x{dim} matrix")
    return file


def _parse_norm(value: str, names, dim, line) -> NormDescriptor:
    value = value.strip()
    if value in ("euclidean", "l1", "linf"):
        return NormDescriptor(value)
    if value.startswith("form("):
        rows = _call(value, "form", line).split(";")
        matrix = tuple(tuple(_rational(a, line) for a in r.split(",")) for r in rows)
        return NormDescriptor("form", matrix=matrix)
    if value.startswith("polytope("):
        return NormDescriptor("polytope", vertices=_vectors(value, "polytope", names, line))
    raise FormatError(f"unknown norm {value!r}; expected one of {', '.join(NORM_KINDS)}", line)


# ----------------------------------------------------------- serialization


def _fmt(c: Fraction) -> str:
    return str(c)


def format_combination(v, names) -> str:
    terms = []
    for c, name in zip(v, names):
        if not c:
            continue
        mag = abs(c)
        body = name if mag == 1 else f"{_fmt(mag)}*{name}"
        if not terms:
            terms.append(("-" if c < 0 else "") + body)
        else:
            terms.append(("- " if c < 0 else "+ ") + body)
    return " ".join(terms) if terms else "0"


def _span(vectors, names) -> str:
    return "span(" + ", ".join(format_combination(v, names) for v in vectors) + ")"


def _render_expect(key, value, names) -> str:
    if key == "beta_witness":
        return _span(value.basis, names)
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is INFINITY:
        return "inf"
    return str(value)


def serialize(file: AlgebraFile) -> str:
    names = file.basis_names
    T = file.tensor
    lines = [f"name = {file.name}", f"dim = {file.dim}", "basis = " + ", ".join(names)]
    for i in range(T.dim):
        for j in range(i + 1, T.dim):
            v = T.basis_bracket(i, j)
            if any(v):
                lines.append(f"bracket {names[i]} {names[j]} = {format_combination(v, names)}")
    lines.append("distribution = " + _span(file.distribution.basis, names))
    for letter, layers in (("V", file.asymptotic_layers), ("W", file.tangent_layers)):
        for k, layer in enumerate(layers or (), start=1):
            lines.append(f"grading {letter}{k} = {_span(layer.basis, names)}")
    norm = file.norm
    if norm.kind == "form":
        lines.append("norm = form(" + "; ".join(", ".join(_fmt(a) for a in r) for r in norm.matrix) + ")")
    elif norm.kind == "polytope":
        lines.append("norm = polytope(" + ", ".join(format_combination(v, names) for v in norm.vertices) + ")")
    else:
        lines.append(f"norm = {norm.kind}")
    for key in EXPECT_KEYS:
        if key in file.expect:
            lines.append(f"expect {key} = {_render_expect(key, file.expect[key], names)}")
    return "\n".join(lines) + "\n"


def files_equal(a: AlgebraFile, b: AlgebraFile) -> bool:
    return (
        a.name == b.name
        and a.tensor == b.tensor
        and a.basis_names == b.basis_names
        and a.distribution == b.distribution
        and a.asymptotic_layers == b.asymptotic_layers
        and a.tangent_layers == b.tangent_layers
        and a.norm == b.norm
        and a.expect == b.expect
    )


# ------------------------------------------------------------ canned files


def canned_names() -> list[str]:
    root = resources.files("lielab") / "library"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".lie"))


def canned_text(name: str) -> str:
    path = resources.files("lielab") / "library" / f"{name}.lie"
    if not path.is_file():
        raise FileNotFoundError(f"no canned example {name!r}; available: {', '.join(canned_names())}")
    return path.read_text()


def load(source: str) -> AlgebraFile:
    """A path to a .lie file, or the bare name of a canned example."""
    path = Path(source)
    if path.is_file():
        return parse_algebra(path.read_text())
    if "/" not in source and not source.endswith(".lie"):
        return parse_algebra(canned_text(source))
    raise FileNotFoundError(f"no such file: {source}")
