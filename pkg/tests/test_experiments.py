import csv
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lielab import experiments
from lielab.deformation import deformed_family
from lielab.experiments import (
    ExperimentRow,
    _summarize,
    default_points,
    eps_grid,
    fit_exponent,
    result_summary,
    run_gronwall,
    run_metric_experiment,
    theory_exponent,
    write_csv,
)
from lielab.fileformat import load
from lielab.gradings import build_asymptotic_grading
from lielab.invariants import INFINITY, AlphaResult
from lielab.metrics import SolverConfig


def n522_family():
    f = load("n522")
    return deformed_family(f.tensor, build_asymptotic_grading(f.tensor), "asymptotic"), f.norm_spec()


@given(st.floats(0.1, 3.0), st.floats(0.01, 100.0))
def test_fit_recovers_power_law(slope, scale):
    rows = [(e, scale * e**slope) for e in (0.05, 0.1, 0.2, 0.4, 0.8)]
    fitted, intercept, residual = fit_exponent(rows)
    assert fitted == pytest.approx(slope, abs=1e-9)
    assert intercept == pytest.approx(math.log(scale), abs=1e-9)
    assert residual < 1e-9


def test_fit_drops_floor_and_needs_four_rows():
    rows = [(0.1, 0.1), (0.2, 0.2), (0.4, 0.4), (0.8, 0.8), (0.05, 0.0)]
    assert fit_exponent(rows)[0] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        fit_exponent(rows[:3] + [(0.05, 1e-12)])


def test_eps_grid():
    assert eps_grid("1/4,1/2,1") == [1.0, 0.5, 0.25]
    g = eps_grid("0.01:1:3:log")
    assert g == pytest.approx([1.0, 0.1, 0.01])
    assert eps_grid("0.5:1:2:lin") == [1.0, 0.5]
    for bad in ("1:0.5:3:log", "0.1:1:3:cubic", "0.1:1:1:log"):
        with pytest.raises(ValueError):
            eps_grid(bad)


def test_theory_exponent():
    a = AlphaResult(alpha1_inf=1, alpha2_inf=INFINITY, alpha_inf=1, alpha0=1)
    assert theory_exponent("pansu", a, 3) == Fraction(1, 3)
    assert theory_exponent("mitchell", a, 2) == Fraction(1, 2)
    assert theory_exponent("pansu", a, 0) is INFINITY


def test_default_points_radius():
    F, _ = n522_family()
    pairs = default_points(F, count=4, seed=1)
    assert len(pairs) == 4
    assert not pairs[0][0].any() and pairs[1][0].any()
    from lielab.metrics import contracted_system

    sys = contracted_system(F, 1.0, load("n522").norm_spec())
    for _, q in pairs:
        assert sys.homogeneous_norm(q) == pytest.approx(1.0, rel=1e-9)


def test_summary_carnot_verdict():
    rows = [ExperimentRow("pansu", e, (0.0,), (1.0,), 1e-6) for e in (0.1, 0.2, 0.4, 0.8)]
    res = _summarize("pansu", rows, INFINITY, 0.15, 1e-3)
    assert res.verdict
    rows[0].err = 0.1
    assert not _summarize("pansu", rows, INFINITY, 0.15, 1e-3).verdict


def test_summary_unusable_budget():
    rows = [ExperimentRow("pansu", e, (0.0,), (1.0,), e) for e in (0.1, 0.2, 0.4, 0.8, 0.9)]
    rows[0].err, rows[0].status = None, "failed: x"
    rows[1].err, rows[1].status = None, "failed: x"
    res = _summarize("pansu", rows, Fraction(1), 0.15, 1e-3)
    assert res.budget_exceeded and not res.verdict


def test_gronwall_rate_on_n522():
    F, norm = n522_family()
    res = run_gronwall(F, norm, Fraction(1), [2.0**-k for k in range(1, 9)])
    assert res.slope == pytest.approx(1.0, abs=0.05) and res.verdict


def test_metric_experiment_and_csv(tmp_path, monkeypatch):
    F, norm = n522_family()
    pairs = default_points(F, count=2, seed=0)
    cfg = SolverConfig(segments=8, starts=2)
    res = run_metric_experiment(F, norm, "pansu", Fraction(1, 3), [1.0, 0.5, 0.25, 0.125], pairs, cfg)
    assert len(res.rows) == 8 and res.unusable_fraction == 0
    path = tmp_path / "out.csv"
    write_csv(res, path)
    with open(path) as fh:
        table = list(csv.reader(fh))
    assert table[0] == list(experiments.CSV_HEADER)
    assert [float(r[1]) for r in table[1:]] == sorted(float(r[1]) for r in table[1:])
    summary = result_summary(res)
    assert summary["schema"] == 1 and summary["theory"] == "1/3"


def test_metric_experiment_side_check():
    F, norm = n522_family()
    with pytest.raises(ValueError):
        run_metric_experiment(F, norm, "mitchell", 1, [0.5], [(np.zeros(5), np.ones(5))], SolverConfig())
