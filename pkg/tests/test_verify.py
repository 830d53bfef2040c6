import json
import math

import numpy as np
import pytest
from scipy.stats import ks_2samp

from weakstrat import fbm, verify
from weakstrat.expr import X, parse
from weakstrat.riemann import Circle, Const, CubicVar, FromFunction, parse_seq, realize
from weakstrat.stratcalc import circle, cubic_variation, from_function, kappa

P = parse
KAPPA = kappa()


# ---------------------------------------------------------------------------
# limit simulation
# ---------------------------------------------------------------------------


def test_smooth_function_limit_is_deterministic():
    path = fbm.sample_path(128, 1.0, seed=1)
    e = from_function(P("x^3 + 1"))
    a = verify.simulate_limit(e, 1.0, path, w_seed=5)
    b = verify.simulate_limit(e, 1.0, path, w_seed=6)
    assert a == b == pytest.approx(path.values[-1] ** 3 + 1)


def test_cubic_variation_limit_is_kappa_normal():
    draws = verify.sample_limit_law(cubic_variation(from_function(X)), 1.0, 64, 20_000, seed=2).draws
    assert abs(np.mean(draws)) < 0.05
    assert abs(np.std(draws) / KAPPA - 1) < 0.02


def test_conditional_moments_of_mixture():
    e = circle(P("x^2"), from_function(X))
    path = fbm.sample_path(256, 1.0, seed=3)
    # psi = 1/6 on all 256 left endpoints
    assert verify.conditional_variance(e, 1.0, path) == pytest.approx(KAPPA**2 / 36)
    draws = np.array([verify.simulate_limit(e, 1.0, path, s) for s in range(4000)])
    assert abs(np.mean(draws) - path.values[-1] ** 3 / 3) < 4 * KAPPA / 6 / math.sqrt(4000)
    assert abs(np.std(draws) / (KAPPA / 6) - 1) < 0.05


def test_conditional_variance_nondecreasing():
    e = circle(P("sin(x)"), cubic_variation(from_function(X)))
    path = fbm.sample_path(128, 1.0, seed=4)
    v = [verify.conditional_variance(e, t, path) for t in np.linspace(0, 1, 33)]
    assert all(b >= a for a, b in zip(v, v[1:]))


def test_methods_agree_in_law():
    # psi = cos(x)^3 is bounded, so sample variances are stable
    e = cubic_variation(from_function(P("sin(x)")))
    cg = verify.sample_limit_law(e, 1.0, 64, 4000, seed=5).draws
    eu = verify.sample_limit_law(e, 1.0, 64, 4000, seed=5, method="euler-ito").draws
    assert abs(np.var(eu) / np.var(cg) - 1) < 0.1


def test_unknown_method():
    with pytest.raises(ValueError):
        verify.sample_limit_law(from_function(X), 1.0, 8, 2, seed=0, method="milstein")


# ---------------------------------------------------------------------------
# seeds
# ---------------------------------------------------------------------------


def test_streams_are_disjoint():
    keys = {verify.stream_seed(0, s) for s in (verify.STREAM_PATHS, verify.STREAM_LIMIT_PATHS, verify.STREAM_W)}
    assert len(keys) == 3
    paths_a = fbm.path_seeds(verify.stream_seed(0, verify.STREAM_PATHS), 1000)
    w = fbm.path_seeds(verify.stream_seed(0, verify.STREAM_W), 1000)
    assert not set(paths_a) & set(w)


def test_reports_reproducible():
    e = CubicVar(FromFunction(X))
    a = verify.law_test(e, n=64, num_paths=500, seed=9)
    b = verify.law_test(e, n=64, num_paths=500, seed=9)
    assert a.to_json() == b.to_json()


# ---------------------------------------------------------------------------
# H = 1/2 sanity: the symmetric scheme does not depend on H
# ---------------------------------------------------------------------------


def test_brownian_telescoping():
    B = fbm.sample_paths(1024, 1.0, 5, seed=10, hurst=0.5)
    assert abs(np.var(np.diff(B, axis=1)) * 1024 - 1) < 0.1
    assert np.max(np.abs(realize(Circle(X, FromFunction(X)), B) - 0.5 * B**2)) < 1e-12


# ---------------------------------------------------------------------------
# ucp
# ---------------------------------------------------------------------------


def test_ucp_exact_for_telescoping():
    e1 = Circle(X, FromFunction(X))
    e2 = 0.5 * FromFunction(P("x^2")) - 0.5 * Const(0)
    report = verify.ucp_test(e1, e2, levels=(64, 256), num_paths=10, seed=0)
    assert report.mode == "exact"
    assert report.passed
    assert all(r["median"] < 1e-12 for r in report.sup_residuals)


def test_ucp_decreasing_for_transcendental_ito():
    e1 = parse_seq("fromfn(sin(x))")
    e2 = parse_seq("circle(cos(x), fromfn(x)) + 1/12*circle(cos(x), cubicvar(fromfn(x)))")
    report = verify.ucp_test(e1, e2, levels=(64, 256, 1024), num_paths=40, seed=1)
    assert report.mode == "decreasing"
    meds = [r["median"] for r in report.sup_residuals]
    assert meds[0] > meds[1] > meds[2] > 0
    assert report.passed


def test_ucp_detects_wrong_sign():
    # constructing a mismatched pair must be refused
    e1 = parse_seq("fromfn(sin(x))")
    e2 = parse_seq("circle(cos(x), fromfn(x)) - 1/12*circle(cos(x), cubicvar(fromfn(x)))")
    with pytest.raises(verify.ImageMismatchError):
        verify.ucp_test(e1, e2, levels=(64,), num_paths=2)


def test_ucp_csv():
    e = Circle(X, FromFunction(X))
    report = verify.ucp_test(e, 0.5 * FromFunction(P("x^2")), levels=(16, 32), num_paths=3)
    lines = report.to_csv().splitlines()
    assert lines[0] == "n,median,p90" and len(lines) == 3
    assert json.loads(report.to_json())["passed"] is True


# ---------------------------------------------------------------------------
# law and joint
# ---------------------------------------------------------------------------


def test_law_smooth_function():
    report = verify.law_test(FromFunction(P("x^2")), n=64, num_paths=2000, seed=11)
    assert report.ks_distance < report.ks_band
    # on shared paths the limit of a smooth function is the function itself
    shared = verify.law_test(FromFunction(P("x^2")), n=64, num_paths=2000, seed=11, coupling="shared")
    assert shared.moment_gaps["variance"] == 0.0
    assert shared.passed


def test_law_shared_coupling_only_changes_moments():
    e = Circle(P("x^2"), FromFunction(X))
    fresh = verify.law_test(e, n=64, num_paths=1000, seed=12)
    shared = verify.law_test(e, n=64, num_paths=1000, seed=12, coupling="shared")
    assert fresh.ks_distance == shared.ks_distance
    assert shared.mode == "shared"
    with pytest.raises(ValueError):
        verify.law_test(e, n=64, num_paths=10, coupling="other")


def test_law_detects_wrong_limit():
    # the sum's law has std ~ kappa; a limit of smooth B(1) has std 1
    realized = realize(CubicVar(FromFunction(X)), fbm.sample_paths(256, 1.0, 2000, seed=13))[:, -1]
    wrong = fbm.sample_paths(256, 1.0, 2000, seed=14)[:, -1]
    assert ks_2samp(realized, wrong).statistic > verify.KS_CRITICAL * math.sqrt(2 / 2000)


def test_joint_identity():
    report = verify.joint_correlation_test(FromFunction(X), n=64, num_paths=500, seed=15)
    assert report.correlations["realized"] == pytest.approx(1.0)
    assert report.correlations["limit"] == pytest.approx(1.0)
    assert report.passed


def _finite_n_cubic_correlation(n):
    """Exact corr(B(1), sum dB^3) at level n by Gaussian moment algebra.

    E[B(1) dB_j^3] = 3 v Cov(B(1), dB_j) with v = n^{-1/3}, summing to 3v;
    Var(sum dB^3) = sum_{j,k} (9 v^2 c_jk + 6 c_jk^3) = 9 v^2 + 6 sum c_jk^3.
    """
    lag = np.arange(n, dtype=float)
    rho = 0.5 * (np.abs(lag + 1) ** (1 / 3) + np.abs(lag - 1) ** (1 / 3) - 2 * lag ** (1 / 3))
    c = rho * n ** (-1 / 3)
    weights = np.where(lag == 0, n, 2 * (n - lag))
    var = 9 * n ** (-2 / 3) + 6 * np.sum(weights * c**3)
    return 3 * n ** (-1 / 3) / math.sqrt(var)


def test_finite_n_correlation_oracle_is_sound():
    # Monte Carlo check of the oracle itself at small n
    n = 16
    B = fbm.sample_paths(n, 1.0, 40_000, seed=16)
    s = realize(CubicVar(FromFunction(X)), B)[:, -1]
    assert abs(np.corrcoef(B[:, -1], s)[0, 1] - _finite_n_cubic_correlation(n)) < 0.02
    # limit of the variance is kappa^2
    assert abs(3 * 8192 ** (-1 / 3) / _finite_n_cubic_correlation(8192) - KAPPA) < 0.01


def test_cubic_correlation_matches_finite_n_oracle():
    report = verify.joint_correlation_test(CubicVar(FromFunction(X)), n=512, num_paths=5000, seed=17)
    expected = _finite_n_cubic_correlation(512)
    se = (1 - expected**2) / math.sqrt(5000)
    assert abs(report.correlations["realized"] - expected) < 4 * se
    assert abs(report.correlations["limit"]) < 4 / math.sqrt(5000)
