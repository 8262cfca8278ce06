"""Assemble the invariants of an algebra file into a report."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .algebra import Subspace, contains, delta_filtration, validate
from .fileformat import AlgebraFile, format_combination
from .gradings import (
    Grading,
    build_asymptotic_grading,
    build_tangent_grading,
    classify_grading,
    verify_grading,
)
from .invariants import INFINITY, BetaResult, beta_search, compute_alphas, exponent, render

GRADING_CHOICES = ("both", "asymptotic", "tangent", "file")


class InputError(ValueError):
    """The input cannot be analyzed as requested."""


@dataclass
class SideReport:
    side: str
    grading: Grading
    source: str
    kinds: dict
    alphas: dict
    beta: BetaResult
    exponent: object
    witness_span: Subspace | None


@dataclass
class AnalysisReport:
    file: AlgebraFile
    jacobi_ok: bool
    step: int | None
    lcs_dims: list[int]
    filtration_dims: list[int]
    bracket_generating: bool
    sides: dict[str, SideReport] = field(default_factory=dict)
    expectations: list[dict] = field(default_factory=list)
    alpha_below_beta: bool | None = None

    @property
    def expectations_ok(self) -> bool:
        return all(e["ok"] for e in self.expectations if e["ok"] is not None)


def _pick_grading(file: AlgebraFile, side: str, preference, only_file: bool):
    T = file.tensor
    layers = file.asymptotic_layers if side == "asymptotic" else file.tangent_layers
    if layers is not None:
        G = Grading(layers)
        delta = file.distribution if side == "tangent" else None
        try:
            return verify_grading(T, G, side, delta), "file"
        except ValueError as exc:
            raise InputError(f"file grading for the {side} side: {exc}") from None
    if only_file:
        return None, None
    if side == "asymptotic":
        return build_asymptotic_grading(T, preference), "built"
    return build_tangent_grading(T, file.distribution, preference), "built"


def _side_report(file: AlgebraFile, side: str, G: Grading, source: str, strategy: str, candidates) -> SideReport:
    T, delta = file.tensor, file.distribution
    kinds = classify_grading(T, G, delta)
    alphas = compute_alphas(T, G, delta, side)
    alpha = alphas.alpha_inf if side == "asymptotic" else alphas.alpha0
    beta = beta_search(T, G, delta, strategy, candidates, alpha_inf=alphas.alpha_inf)
    alpha_dict = (
        {"alpha1_inf": alphas.alpha1_inf, "alpha2_inf": alphas.alpha2_inf, "alpha_inf": alphas.alpha_inf}
        if side == "asymptotic"
        else {"alpha0": alphas.alpha0}
    )
    return SideReport(
        side,
        G,
        source,
        {"asymptotic": kinds.asymptotic, "tangent": kinds.tangent, "stratification": kinds.stratification},
        alpha_dict,
        beta,
        exponent(alpha, beta.beta_hat),
        beta.witness.ideal if beta.witness else None,
    )


def analyze(
    file: AlgebraFile,
    grading: str = "both",
    strategy: str = "coordinate",
    candidates=(),
    preference=None,
) -> AnalysisReport:
    if grading not in GRADING_CHOICES:
        raise InputError(f"unknown grading choice {grading!r}")
    T = file.tensor
    algebra = validate(T)
    filt = delta_filtration(T, file.distribution)
    report = AnalysisReport(
        file,
        algebra.jacobi_ok,
        algebra.nilpotency_step,
        [S.dim for S in algebra.lcs],
        [S.dim for S in filt.cumulative],
        filt.bracket_generating,
    )
    if not filt.bracket_generating:
        raise InputError("the distribution is not bracket-generating")
    wanted = {"both": ("asymptotic", "tangent"), "file": ("asymptotic", "tangent")}.get(grading, (grading,))
    for side in wanted:
        if side == "asymptotic" and algebra.nilpotency_step is None:
            if grading == "asymptotic":
                raise InputError("the asymptotic side needs a nilpotent algebra")
            continue
        G, source = _pick_grading(file, side, preference, grading == "file")
        if G is None:
            continue
        report.sides[side] = _side_report(file, side, G, source, strategy, candidates)
    if grading == "file" and not report.sides:
        raise InputError("the file declares no grading")
    _check_alpha_beta(report)
    report.expectations = _check_expectations(report)
    return report


def _check_alpha_beta(report: AnalysisReport) -> None:
    side = report.sides.get("asymptotic")
    if side is None:
        return
    a, b = side.alphas["alpha_inf"], side.beta.beta_hat
    report.alpha_below_beta = (a is INFINITY and b == 0) or (a is not INFINITY and a < b)


def _actual(report: AnalysisReport, key: str):
    asym = report.sides.get("asymptotic")
    tang = report.sides.get("tangent")
    if key == "step":
        return report.step, True
    if key in ("alpha1_inf", "alpha2_inf", "alpha_inf"):
        return (asym.alphas[key], True) if asym else (None, False)
    if key == "beta":
        return (asym.beta.beta_hat, True) if asym else (None, False)
    if key == "beta_witness":
        return (asym.witness_span, True) if asym else (None, False)
    if key == "exponent":
        return (asym.exponent, True) if asym else (None, False)
    if key == "stratification":
        return (asym.kinds["stratification"], True) if asym else (None, False)
    if key == "alpha0":
        return (tang.alphas["alpha0"], True) if tang else (None, False)
    if key == "beta_tangent":
        return (tang.beta.beta_hat, True) if tang else (None, False)
    if key == "exponent_tangent":
        return (tang.exponent, True) if tang else (None, False)
    raise KeyError(key)


def _check_expectations(report: AnalysisReport) -> list[dict]:
    out = []
    names = report.file.basis_names
    for key, expected in report.file.expect.items():
        actual, available = _actual(report, key)
        ok = (actual == expected) if available else None
        out.append(
            {
                "key": key,
                "expected": _render(expected, names),
                "actual": _render(actual, names) if available else None,
                "ok": ok,
            }
        )
    return out


def _render(value, names):
    if isinstance(value, Subspace):
        return span_text(value, names)
    if isinstance(value, bool) or value is None:
        return value
    if value is INFINITY or isinstance(value, Fraction):
        return render(value)
    return value


def span_text(S: Subspace, names) -> str:
    return "span(" + ", ".join(format_combination(v, names) for v in S.basis) + ")"


def report_dict(report: AnalysisReport) -> dict:
    names = report.file.basis_names
    sides = {}
    for side, r in report.sides.items():
        beta = r.beta
        sides[side] = {
            "grading": [span_text(layer, names) for layer in r.grading.layers],
            "grading_source": r.source,
            "kinds": r.kinds,
            "alphas": {k: render(v) for k, v in r.alphas.items()},
            "beta": {
                "beta_hat": beta.beta_hat,
                "exhaustive": beta.exhaustive,
                "lower_bound": beta.lower_bound,
                "witness": span_text(r.witness_span, names) if r.witness_span is not None else None,
                "quotient_dim": beta.witness.quotient_tensor.dim if beta.witness else None,
            },
            "exponent": render(r.exponent),
        }
    return {
        "schema": 1,
        "name": report.file.name,
        "dim": report.file.dim,
        "basis": list(names),
        "jacobi_ok": report.jacobi_ok,
        "nilpotency_step": report.step,
        "lcs_dims": report.lcs_dims,
        "distribution_filtration_dims": report.filtration_dims,
        "bracket_generating": report.bracket_generating,
        "sides": sides,
        "alpha_inf_below_beta": report.alpha_below_beta,
        "expectations": report.expectations,
        "expectations_ok": report.expectations_ok,
    }


def report_text(report: AnalysisReport) -> str:
    d = report_dict(report)
    lines = [
        f"algebra {d['name']} (dim {d['dim']})",
        f"  jacobi: {'ok' if d['jacobi_ok'] else 'FAILED'}",
        f"  nilpotency step: {d['nilpotency_step'] if d['nilpotency_step'] is not None else 'not nilpotent'}",
        f"  lower central series dims: {d['lcs_dims']}",
        f"  distribution filtration dims: {d['distribution_filtration_dims']}",
    ]
    for side, s in d["sides"].items():
        lines.append(f"{side} side ({s['grading_source']} grading)")
        for k, layer in enumerate(s["grading"], start=1):
            lines.append(f"  {'V' if side == 'asymptotic' else 'W'}{k} = {layer}")
        kinds = ", ".join(k for k, v in s["kinds"].items() if v) or "none"
        lines.append(f"  kinds: {kinds}")
        for k, v in s["alphas"].items():
            lines.append(f"  {k} = {v}")
        b = s["beta"]
        flag = "exact" if b["exhaustive"] else f"upper bound, proven lower bound {b['lower_bound']}"
        lines.append(f"  beta_hat = {b['beta_hat']} ({flag})")
        lines.append(f"  witness ideal = {b['witness']}")
        lines.append(f"  exponent = {s['exponent']}")
    if d["alpha_inf_below_beta"] is not None:
        lines.append(f"alpha_inf < beta (or both trivial): {d['alpha_inf_below_beta']}")
    for e in d["expectations"]:
        status = "skipped" if e["ok"] is None else ("ok" if e["ok"] else "MISMATCH")
        lines.append(f"expect {e['key']} = {e['expected']}: {status} (got {e['actual']})")
    return "\n".join(lines) + "\n"
