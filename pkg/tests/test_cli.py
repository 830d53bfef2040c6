import json
import subprocess
import sys

import pytest

from weakstrat import cli


def run(capsys, *argv):
    code = cli.run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_kappa(capsys):
    code, out, _ = run(capsys, "kappa", "--terms", "10000")
    assert code == 0
    k = float(out.splitlines()[0].split(":")[1])
    assert abs(k - 2.322) < 0.001
    assert "kappa^2: 5.39116" in out


def test_element(capsys):
    code, out, _ = run(capsys, "element", "--expr", "circle(x, fromfn(x))")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == '{"eta":0,"phi1":"x","phi3":"0"}'
    assert json.loads(lines[1]) == {"eta": 0, "Phi": "x^2/2", "psi": "0"}


def test_element_with_bindings(capsys):
    code, out, _ = run(
        capsys, "element", "--let", "M=circle(x, fromfn(x))", "--expr", "circle(x^2/2, M) - circle(x^3/2, fromfn(x))"
    )
    assert code == 0
    assert json.loads(out.splitlines()[0]) == {"eta": 0, "phi1": "0", "phi3": "-x/4"}


def test_element_without_closed_form_limit(capsys):
    code, out, err = run(capsys, "element", "--expr", "circle(exp(x^2), fromfn(x))")
    assert code == 0
    assert len(out.splitlines()) == 1
    assert "limit descriptor" in err


def test_check_identities(capsys):
    code, out, err = run(capsys, "check-identities", "--cases", "100", "--seed", "7")
    assert code == 0
    assert out.strip() == "main: 100/100, ito: 100/100, substitution: 100/100"
    assert "seed: 7" in err


def test_sample(capsys, tmp_path):
    target = tmp_path / "path.csv"
    code, _, err = run(capsys, "sample", "--n", "8", "--T", "1", "--seed", "3", "--output", str(target))
    assert code == 0 and "seed: 3" in err
    lines = target.read_text().splitlines()
    assert lines[0] == "t,B" and len(lines) == 10
    code2, out, _ = run(capsys, "sample", "--n", "8", "--seed", "3")
    assert out == target.read_text()


def test_ucp_exact(capsys):
    code, out, err = run(
        capsys, "ucp", "--lhs", "circle(x, fromfn(x))", "--rhs", "1/2*fromfn(x^2) - 1/2*const(0)",
        "--levels", "32,64", "--paths", "5",
    )
    assert code == 0
    report = json.loads(out)
    assert report["mode"] == "exact" and report["passed"]
    assert "seed: 2011" in err


def test_ucp_mismatch_is_usage_error(capsys):
    code, _, err = run(capsys, "ucp", "--lhs", "fromfn(x)", "--rhs", "fromfn(x^2)", "--levels", "8")
    assert code == 2
    assert "error" in err


def test_law_csv_and_failure_exit(capsys):
    # too few paths at a tiny level: the report is still written, exit code follows the checks
    code, out, _ = run(capsys, "law", "--expr", "cubicvar(fromfn(x))", "--n", "32", "--paths", "400", "--format", "csv")
    assert out.splitlines()[0] == "statistic,value"
    assert code in (0, 1)
    report_code, out_json, _ = run(
        capsys, "law", "--expr", "cubicvar(fromfn(x))", "--n", "32", "--paths", "400", "--format", "json"
    )
    assert report_code == code
    assert (json.loads(out_json)["passed"]) == (code == 0)


def test_joint(capsys):
    code, out, _ = run(capsys, "joint", "--expr", "fromfn(x)", "--n", "16", "--paths", "200")
    assert code == 0
    assert json.loads(out)["correlations"]["realized"] == pytest.approx(1.0)


def test_byte_identical_reruns(capsys):
    argv = ("law", "--expr", "circle(x^2, fromfn(x))", "--n", "32", "--paths", "300", "--seed", "5")
    _, a, _ = run(capsys, *argv)
    _, b, _ = run(capsys, *argv)
    assert a == b


@pytest.mark.parametrize(
    "argv",
    [
        ["frobnicate"],
        ["element"],
        ["element", "--expr", "circle(x"],
        ["element", "--expr", "fromfn(log(x))"],
        ["sample", "--n", "-4"],
        ["sample", "--n", "9000"],
        ["ucp", "--lhs", "fromfn(x)", "--rhs", "fromfn(x)", "--levels", "a,b"],
        ["element", "--let", "noequals", "--expr", "fromfn(x)"],
    ],
)
def test_usage_errors_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert err


@pytest.mark.parametrize("sub", ["kappa", "sample", "element", "check-identities", "ucp", "law", "joint"])
def test_help(capsys, sub):
    code, out, _ = run(capsys, sub, "--help")
    assert code == 0
    assert "--" in out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "weakstrat", "kappa", "--terms", "100"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("kappa: 2.32")
