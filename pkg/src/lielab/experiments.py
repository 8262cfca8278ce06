"""Convergence experiments: error tables over an eps grid and log-log fits."""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .deformation import DeformedFamily
from .invariants import INFINITY, render
from .metrics import ControlPath, NormSpec, SolverConfig, SolverFailure, gronwall_probe, system_for, solve_distance

MODES = ("pansu", "mitchell", "gronwall")
FIT_FLOOR = 1e-9
UNUSABLE_BUDGET = 0.2


def fit_exponent(rows: Sequence[tuple[float, float]], floor: float = FIT_FLOOR):
    """Least squares of log(err) on log(eps); rows with err below ``floor`` or
    eps <= 0 are dropped.  Returns (slope, intercept, rms residual)."""
    usable = [(e, r) for e, r in rows if e > 0 and r is not None and math.isfinite(r) and r >= floor]
    if len(usable) < 4:
        raise ValueError(f"need at least 4 usable rows for a fit, have {len(usable)}")
    x = np.log([e for e, _ in usable])
    y = np.log([r for _, r in usable])
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    residual = float(np.sqrt(np.mean((A @ [slope, intercept] - y) ** 2)))
    return float(slope), float(intercept), residual


def eps_grid(text: str) -> list[float]:
    """``lo:hi:n:log`` or ``lo:hi:n:lin``; also a comma list of values."""
    if "," in text or ":" not in text:
        return sorted({float(Fraction(v)) for v in text.split(",")}, reverse=True)
    parts = text.split(":")
    if len(parts) != 4 or parts[3] not in ("log", "lin"):
        raise ValueError(f"bad eps grid {text!r}; expected lo:hi:n:log|lin")
    lo, hi, n = float(Fraction(parts[0])), float(Fraction(parts[1])), int(parts[2])
    if not 0 < lo < hi or n < 2:
        raise ValueError("eps grid needs 0 < lo < hi and n >= 2")
    pts = np.geomspace(lo, hi, n) if parts[3] == "log" else np.linspace(lo, hi, n)
    return sorted((float(v) for v in pts), reverse=True)


def default_eps_grid(mode: str) -> list[float]:
    if mode == "gronwall":
        return [2.0**-k for k in range(1, 9)]
    return eps_grid("0.05:1:8:log")


def _dilate_float(F: DeformedFamily, x: np.ndarray, t: float) -> np.ndarray:
    from .metrics import _grading_matrices

    _, _, _, projections = _grading_matrices(F.grading)
    return sum(t**j * (P @ x) for j, P in enumerate(projections, start=1))


def default_points(F: DeformedFamily, count: int = 4, seed: int = 0, radius: float | None = None):
    """Point pairs spread by dilation: random directions rescaled so their
    homogeneous quasi-norm is a fixed radius, from the identity and between
    two such points.  Pansu runs sit at radius 1, tangent runs closer in."""
    from .metrics import _grading_matrices

    rng = np.random.default_rng(seed)
    _, _, _, projections = _grading_matrices(F.grading)
    n = F.base.dim
    radius = radius if radius is not None else (1.0 if F.side == "asymptotic" else 0.5)

    def quasi(x):
        return sum(np.linalg.norm(P @ x) ** (1.0 / j) for j, P in enumerate(projections, start=1))

    def sample():
        x = rng.normal(size=n)
        # bisection on the dilation factor; the quasi-norm is increasing in it
        lo, hi = 0.0, 1.0
        while quasi(_dilate_float(F, x, hi)) < radius:
            hi *= 2
        for _ in range(80):
            mid = (lo + hi) / 2
            lo, hi = (mid, hi) if quasi(_dilate_float(F, x, mid)) < radius else (lo, mid)
        return _dilate_float(F, x, (lo + hi) / 2)

    pairs = []
    for k in range(count):
        q = sample()
        p = np.zeros(n) if k % 2 == 0 else sample() * 0.5
        pairs.append((p, q))
    return pairs


def theory_exponent(mode: str, alphas, beta_hat: int):
    if mode == "pansu":
        a = alphas.alpha_inf
    elif mode == "mitchell":
        a = alphas.alpha0
    else:
        return alphas.alpha_inf if alphas.alpha_inf is not None else alphas.alpha0
    if a is INFINITY or beta_hat == 0:
        return INFINITY
    return Fraction(a, beta_hat)


@dataclass
class ExperimentRow:
    mode: str
    epsilon: float
    p: tuple[float, ...]
    q: tuple[float, ...]
    err: float | None
    status: str = "ok"


@dataclass
class ExperimentResult:
    mode: str
    rows: list[ExperimentRow]
    slope: float | None
    intercept: float | None
    residual: float | None
    theory: object
    slack: float
    verdict: bool
    unusable_fraction: float
    notes: list[str] = field(default_factory=list)

    @property
    def budget_exceeded(self) -> bool:
        return self.unusable_fraction > UNUSABLE_BUDGET


def _distance_job(args):
    F, eps, norm, p, q, cfg = args
    try:
        est = solve_distance(system_for(F, eps, norm), p, q, cfg)
        return est.value, "ok"
    except (SolverFailure, RuntimeError, np.linalg.LinAlgError) as exc:
        return None, f"failed: {exc}"


def _threads(threads: int | None) -> int:
    if threads is not None:
        return max(1, threads)
    try:
        return max(1, int(os.environ.get("LIE_LAB_THREADS", "1")))
    except ValueError:
        return 1


def _run_jobs(jobs, threads: int):
    if threads <= 1 or len(jobs) <= 1:
        return [_distance_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_distance_job, jobs))


def run_metric_experiment(
    F: DeformedFamily,
    norm: NormSpec,
    mode: str,
    theory,
    eps_values: Sequence[float],
    pairs,
    cfg: SolverConfig,
    slack: float = 0.15,
    threads: int | None = None,
) -> ExperimentResult:
    """|rho_eps - rho_0| (pansu) or |d_eps - d_0| (mitchell) per eps and pair."""
    expected_side = "asymptotic" if mode == "pansu" else "tangent"
    if F.side != expected_side:
        raise ValueError(f"{mode} mode needs the {expected_side} family")
    eps_values = [e for e in eps_values if e > 0]
    jobs = [(F, 0.0, norm, p, q, cfg) for p, q in pairs]
    jobs += [(F, e, norm, p, q, cfg) for e in eps_values for p, q in pairs]
    results = _run_jobs(jobs, _threads(threads))
    base = results[: len(pairs)]
    rows = []
    for k, (e, (p, q)) in enumerate(((e, pq) for e in eps_values for pq in pairs)):
        value, status = results[len(pairs) + k]
        b_value, b_status = base[k % len(pairs)]
        if status != "ok" or b_status != "ok":
            rows.append(ExperimentRow(mode, e, tuple(p), tuple(q), None, status if status != "ok" else b_status))
        else:
            rows.append(ExperimentRow(mode, e, tuple(p), tuple(q), abs(value - b_value)))
    scale = max((v for v, s in base if s == "ok"), default=1.0)
    return _summarize(mode, rows, theory, slack, cfg.tolerance * max(scale, 1.0))


def run_gronwall(
    F: DeformedFamily, norm: NormSpec, theory, eps_values: Sequence[float], seed: int = 0, segments: int = 8, slack: float = 0.15
) -> ExperimentResult:
    """Endpoint gap of one fixed random control between eps and the cone."""
    rng = np.random.default_rng(seed)
    r = norm.ambient.dim
    coords = rng.normal(size=(segments, r))
    u = ControlPath(np.full(segments, 1.0 / segments), coords, norm.basis, 1.0, F.side)
    gaps = gronwall_probe(F, norm, u, eps_values)
    origin = tuple(0.0 for _ in range(F.base.dim))
    rows = [ExperimentRow("gronwall", e, origin, origin, g) for e, g in gaps]
    return _summarize("gronwall", rows, theory, slack, 1e-12)


def _summarize(mode, rows, theory, slack, tolerance) -> ExperimentResult:
    notes = []
    unusable = sum(r.err is None for r in rows)
    fraction = unusable / len(rows) if rows else 1.0
    worst: dict[float, float] = {}
    for r in rows:
        if r.err is not None:
            worst[r.epsilon] = max(worst.get(r.epsilon, 0.0), r.err)
    slope = intercept = residual = None
    try:
        slope, intercept, residual = fit_exponent(sorted(worst.items()))
    except ValueError as exc:
        notes.append(str(exc))
    if theory is INFINITY:
        verdict = all(v < 2 * tolerance for v in worst.values())
        notes.append(f"theory exponent is infinite: pass iff every error is below {2 * tolerance:.3g}")
    elif slope is None:
        verdict = False
    else:
        verdict = slope >= float(theory) - slack
    if fraction > UNUSABLE_BUDGET:
        verdict = False
        notes.append(f"{unusable} of {len(rows)} rows unusable")
    return ExperimentResult(mode, rows, slope, intercept, residual, theory, slack, verdict, fraction, notes)


CSV_HEADER = ("mode", "epsilon", "p", "q", "err", "slope", "theory")


def _fmt_point(x) -> str:
    return " ".join(f"{v:.12g}" for v in x)


def write_csv(result: ExperimentResult, path) -> None:
    """Rows sorted by (epsilon, p, q); coordinates space-separated."""
    rows = sorted(result.rows, key=lambda r: (r.epsilon, r.p, r.q))
    slope = "" if result.slope is None else f"{result.slope:.6g}"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for r in rows:
            err = r.status if r.err is None else f"{r.err:.12g}"
            w.writerow((r.mode, f"{r.epsilon:.12g}", _fmt_point(r.p), _fmt_point(r.q), err, slope, render(result.theory)))


def result_summary(result: ExperimentResult) -> dict:
    return {
        "schema": 1,
        "mode": result.mode,
        "slope": result.slope,
        "intercept": result.intercept,
        "residual": result.residual,
        "theory": render(result.theory),
        "slack": result.slack,
        "verdict": "PASS" if result.verdict else "FAIL",
        "rows": len(result.rows),
        "unusable_fraction": result.unusable_fraction,
        "notes": result.notes,
    }
