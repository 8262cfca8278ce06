import json

import pytest

from lielab import experiments
from lielab.cli import EXIT_BUDGET, EXIT_FAIL, EXIT_INPUT, EXIT_OK, main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_canned_listing(capsys):
    code, out, _ = run(capsys, "canned")
    assert code == EXIT_OK and "n522" in out.split()
    code, out, _ = run(capsys, "canned", "n522")
    assert "bracket e1 e2 = e4" in out


def test_analyze_text(capsys):
    code, out, _ = run(capsys, "analyze", "n522")
    assert code == EXIT_OK
    assert "1/3" in out


def test_analyze_json_is_deterministic(capsys):
    _, first, _ = run(capsys, "analyze", "n522_x_n521", "--json")
    _, second, _ = run(capsys, "analyze", "n522_x_n521", "--json")
    assert first == second
    data = json.loads(first)
    assert data["schema"] == 1


def test_analyze_file_and_expectation_failure(tmp_path, capsys):
    text = tmp_path / "h.lie"
    text.write_text("dim = 3\nbracket e1 e2 = e3\ndistribution = span(e1, e2)\nexpect beta = 1\n")
    code, _, _ = run(capsys, "analyze", str(text))
    assert code == EXIT_FAIL


def test_user_supplied_ideal(capsys):
    code, out, _ = run(capsys, "analyze", "n522", "--beta-strategy", "user_supplied", "--ideal", "span(e5)", "--json")
    assert code == EXIT_OK
    beta = json.loads(out)["sides"]["asymptotic"]["beta"]
    assert beta["beta_hat"] == 3 and beta["witness"] == "span(e5)"
    code, _, err = run(capsys, "analyze", "n522", "--beta-strategy", "user_supplied")
    assert code == EXIT_INPUT and "ideal" in err


@pytest.mark.parametrize(
    "argv",
    [
        ("analyze", "no_such_example"),
        ("analyze", "/nonexistent/file.lie"),
        ("analyze", "n522", "--prefer", "e1,e2"),
        ("converge", "n522", "--mode", "pansu", "--eps-grid", "1:0:3:log"),
        ("converge", "n522", "--mode", "pansu", "--points", "0,0>1,1"),
    ],
)
def test_input_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == EXIT_INPUT and err.startswith("lielab:")


def test_bad_file_reports_line(tmp_path, capsys):
    bad = tmp_path / "bad.lie"
    bad.write_text("dim = 2\nbracket e1 e9 = e2\n")
    code, _, err = run(capsys, "analyze", str(bad))
    assert code == EXIT_INPUT and "line 2" in err


def test_converge_gronwall_outputs(tmp_path, capsys):
    csv_path, png_path = tmp_path / "g.csv", tmp_path / "g.png"
    code, out, _ = run(
        capsys, "converge", "n522", "--mode", "gronwall", "--out", str(csv_path), "--plot", str(png_path), "--json"
    )
    assert code == EXIT_OK
    summary = json.loads(out)
    # the endpoint gap decays like eps**alpha_inf, here eps**1
    assert summary["verdict"] == "PASS" and summary["theory"] == "1"
    assert csv_path.read_text().startswith("mode,epsilon,p,q,err,slope,theory")
    assert png_path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_converge_csv_reproducible(tmp_path, capsys):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        run(capsys, "converge", "carnot_heis", "--mode", "pansu", "--eps-grid", "1,1/2,1/4,1/8",
            "--points", "auto:2", "--segments", "8", "--starts", "2", "--out", str(p))
    assert paths[0].read_text() == paths[1].read_text()


def test_converge_carnot_pass(capsys):
    code, out, _ = run(capsys, "converge", "carnot_heis", "--mode", "pansu", "--eps-grid", "1,1/2,1/4,1/8",
                       "--points", "auto:2", "--segments", "8", "--starts", "2")
    assert code == EXIT_OK and "PASS" in out


def test_converge_budget_exit(monkeypatch, capsys):
    monkeypatch.setattr(experiments, "_distance_job", lambda job: (None, "failed: forced"))
    code, out, _ = run(capsys, "converge", "n522", "--mode", "pansu", "--eps-grid", "1,1/2,1/4,1/8", "--points", "auto:2")
    assert code == EXIT_BUDGET and "unusable" in out


def test_converge_mitchell_json(capsys):
    code, out, _ = run(capsys, "converge", "heis_riem", "--mode", "mitchell", "--eps-grid", "1,1/2,1/4,1/8",
                       "--points", "auto:1", "--segments", "8", "--starts", "2", "--json")
    assert code in (EXIT_OK, EXIT_FAIL)
    assert json.loads(out)["mode"] == "mitchell"
