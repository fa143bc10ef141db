import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import spearmanr, truncnorm

from _oracle import exact_lstsq, linear_quartile
from poprelay.bench import io as bench_io
from poprelay.bench.fitting import FitModel, fit, fit_invlog, fit_linear, fit_poly2
from poprelay.bench.measure import BenchSample, RetrievalPlan, fit_ready, measure_rctp, measure_rpr
from poprelay.bench.model import (
    REFERENCE_LEGACY_RCTP,
    REFERENCE_LEGACY_RPR,
    REFERENCE_LEGACY_RPR_RESULTS,
    REFERENCE_NOVEL_RCTP,
    REFERENCE_NOVEL_RPR,
    crossover,
    default_lambda_grid,
    param_model,
    predict_rpr_novel,
    rpr_grid,
    trie_depth,
)
from poprelay.bench.stats import iqr_bounds, iqr_filter, iqr_filter_grouped, iqr_mask
from poprelay.bench.workload import fixed_size_workload, generate_workload
from poprelay.errors import (
    DegenerateFit,
    ExtrapolationRefused,
    InconsistentParams,
    InvalidArgument,
    InvalidDomain,
    NoCrossover,
)
from poprelay.relay import RelayConfig, Strategy


def synthetic_suite(seed, n_inliers, frac=0.05, sigma=1.0, center=50.0):
    """Inliers from a normal truncated at 1.5 sigma; outliers at +/-10 sigma."""
    rng = np.random.default_rng(seed)
    inliers = center + sigma * truncnorm.rvs(-1.5, 1.5, size=n_inliers, random_state=rng)
    k = max(1, int(n_inliers * frac))
    outliers = center + sigma * (rng.choice([-1.0, 1.0], k) * 10.0 + rng.normal(0, 0.1, k))
    return inliers, outliers


# -- IQR ------------------------------------------------------------------------------------


def test_iqr_hand_example():
    y = [1, 2, 3, 4, 1000]
    # quartiles at ranks 1 and 3: Q1=2, Q3=4, fences [-1, 7]
    assert linear_quartile(y, 0.25) == 2 and linear_quartile(y, 0.75) == 4
    assert iqr_bounds(y) == (-1.0, 7.0)
    assert iqr_filter(y) == [1, 2, 3, 4]


def test_iqr_bounds_match_quartile_oracle():
    rng = np.random.default_rng(4)
    for n in (4, 5, 9, 50, 101):
        y = list(rng.normal(size=n))
        q1, q3 = linear_quartile(y, 0.25), linear_quartile(y, 0.75)
        lo, hi = iqr_bounds(y)
        assert lo == pytest.approx(q1 - 1.5 * (q3 - q1), abs=1e-12)
        assert hi == pytest.approx(q3 + 1.5 * (q3 - q1), abs=1e-12)


def test_iqr_all_equal_keeps_everything():
    assert iqr_filter([5.0] * 10) == [5.0] * 10


def test_iqr_no_outliers_is_identity():
    y = list(np.linspace(0, 1, 40))
    assert iqr_filter(y) == y


def test_iqr_small_input_passes_through(caplog):
    assert iqr_filter([1, 2, 1000]) == [1, 2, 1000]
    assert "at least 4 samples" in caplog.text


def test_iqr_filters_samples_by_y():
    samples = [BenchSample(i, float(i), y, "rpr") for i, y in enumerate([1, 2, 3, 4, 1000])]
    assert [s.y_ms for s in iqr_filter(samples)] == [1, 2, 3, 4]


def test_iqr_grouped_keeps_distant_clusters():
    ys = [1.0, 1.1, 0.9, 1.0, 50.0, 100.0, 101.0, 99.0, 100.0, 400.0]
    groups = [0] * 5 + [1] * 5
    samples = list(zip(groups, ys))
    kept = iqr_filter_grouped(samples, group=lambda s: s[0], key=lambda s: s[1])
    assert [y for _, y in kept] == [1.0, 1.1, 0.9, 1.0, 100.0, 101.0, 99.0, 100.0]


@pytest.mark.parametrize("seed", range(10))
def test_iqr_synthetic_suite_exact_separation_and_idempotence(seed):
    inliers, outliers = synthetic_suite(seed, 100 + 37 * seed)
    y = np.concatenate([inliers, outliers])
    mask = iqr_mask(y)
    assert mask[: len(inliers)].all()
    assert not mask[len(inliers):].any()
    once = iqr_filter(list(y))
    assert iqr_filter(once) == once


def test_iqr_single_pass_not_idempotent_in_general():
    # first pass fences [-2, 6] drop 7; the survivors' fences [0.25, 2.25] then drop 3
    once = iqr_filter([1, 1, 1, 3, 7])
    assert once == [1, 1, 1, 3]
    assert iqr_filter(once) == [1, 1, 1]


# -- fitting -------------------------------------------------------------------------------


def test_poly2_exact_recovery():
    x = np.arange(11.0)
    m = fit_poly2(x, 2 + 3 * x + 0.5 * x * x)
    np.testing.assert_allclose(m.coefficients, (2, 3, 0.5), rtol=1e-9)
    assert m.domain == (0.0, 10.0) and m.rms_residual < 1e-9


def test_poly2_matches_exact_normal_equations():
    xs, ys = [0, 1, 2, 3, 4, 5], [1, 3, 2, 5, 4, 9]
    assert exact_lstsq(xs, ys, 2) == [Fraction(45, 28), Fraction(-1, 40), Fraction(15, 56)]
    m = fit_poly2(xs, ys)
    np.testing.assert_allclose(m.coefficients, (45 / 28, -1 / 40, 15 / 56), rtol=1e-12)


def test_poly2_needs_three_distinct_x():
    with pytest.raises(DegenerateFit):
        fit_poly2([1, 1, 2, 2], [1, 2, 3, 4])


def test_poly2_large_x_conditioning():
    x = np.linspace(1e5, 2e5, 50)
    a = (1.31855648e3, 4.44412352e-2, -3.70701991e-7)
    m = fit_poly2(x, a[0] + a[1] * x + a[2] * x * x)
    np.testing.assert_allclose(m.coefficients, a, rtol=1e-6)


def test_linear_exact_and_oracle():
    x = np.arange(30.0)
    m = fit_linear(x, 8.96 + 0.015 * x)
    assert m.intercept == pytest.approx(8.96, rel=1e-9)
    assert m.slope == pytest.approx(0.015, rel=1e-9)
    assert exact_lstsq([0, 1, 2, 3, 4], [1, 3, 2, 5, 4], 1) == [Fraction(7, 5), Fraction(4, 5)]
    m = fit_linear([0, 1, 2, 3, 4], [1, 3, 2, 5, 4])
    assert m.coefficients == pytest.approx((1.4, 0.8), rel=1e-12)


def test_linear_constant_and_degenerate():
    assert fit_linear([1, 2, 3], [4, 4, 4]).slope == 0
    with pytest.raises(DegenerateFit):
        fit_linear([2, 2, 2], [1, 2, 3])


def test_invlog_recovers_synthetic():
    x = np.arange(6.0, 201.0)
    m = fit_invlog(x, 100 - 20 * np.log(x - 5))
    a, b, c = m.coefficients
    assert a == pytest.approx(100, rel=0.01)
    assert b == pytest.approx(20, rel=0.01)
    assert c == pytest.approx(5, rel=0.01)


def test_invlog_grid_stays_below_min_x():
    x = np.array([5.5, 7, 9, 12, 20, 40, 80])
    m = fit_invlog(x, 100 - 20 * np.log(x - 5))
    assert m.coefficients[2] < 5.5
    assert m.coefficients[2] == pytest.approx(5.0, abs=0.011)


def test_invlog_without_grid_point_is_invalid_domain():
    with pytest.raises(InvalidDomain):
        fit_invlog([0.005, 1, 2], [1, 2, 3], resolution=0.01)


def test_invlog_predict_domain():
    with pytest.raises(InvalidDomain):
        REFERENCE_LEGACY_RCTP.predict(9.99)
    assert REFERENCE_LEGACY_RCTP.predict(11.0) == pytest.approx(123.78 - 18.99 * math.log(11 - 9.99))


def test_poly2_extrapolation_guard():
    x = np.linspace(0, 10_000, 40)
    m = fit_poly2(x, REFERENCE_NOVEL_RCTP.evaluate(x))
    # the fitted curve peaks near x = 6e4, beyond which response time would fall
    assert m.predict(20_000) == pytest.approx(REFERENCE_NOVEL_RCTP.evaluate(20_000), rel=1e-6)
    with pytest.raises(ExtrapolationRefused):
        m.predict(100_000)


@settings(max_examples=40, deadline=None)
@given(
    st.floats(-1e3, 1e3), st.floats(-10, 10), st.floats(-1e-2, 1e-2),
    st.floats(0, 100), st.floats(1, 100),
)
def test_refit_closure_poly2(a0, a1, a2, start, width):
    x = np.linspace(start, start + width, 25)
    y = a0 + a1 * x + a2 * x * x
    m = fit_poly2(x, y)
    np.testing.assert_allclose(m.evaluate(x), y, rtol=1e-6, atol=1e-6 * (1 + np.abs(y).max()))


@settings(max_examples=40, deadline=None)
@given(st.floats(-1e3, 1e3), st.floats(-50, 50))
def test_refit_closure_linear(b0, b1):
    x = np.arange(1.0, 41.0)
    m = fit_linear(x, b0 + b1 * x)
    assert m.intercept == pytest.approx(b0, rel=1e-6, abs=1e-6)
    assert m.slope == pytest.approx(b1, rel=1e-6, abs=1e-9)


@settings(max_examples=15, deadline=None)
@given(st.floats(50, 200), st.floats(5, 40), st.integers(1, 2000).map(lambda k: k / 100))
def test_refit_closure_invlog(a, b, c):
    x = np.linspace(c + 1, c + 300, 120)
    m = fit_invlog(x, a - b * np.log(x - c))
    fa, fb, fc = m.coefficients
    assert fa == pytest.approx(a, rel=0.01)
    assert fb == pytest.approx(b, rel=0.01)
    assert fc == pytest.approx(c, rel=0.01, abs=0.01)


def test_fit_model_dict_roundtrip():
    m = fit("linear", [1, 2, 3, 4], [2, 4, 7, 8])
    d = m.to_dict()
    assert set(d) == {"family", "coefficients", "domain", "rms_residual", "n_samples", "n_outliers_removed"}
    assert FitModel.from_dict(json.loads(json.dumps(d))) == m
    with pytest.raises(InvalidArgument):
        fit("cubic", [1], [1])


# -- model algebra -----------------------------------------------------------------------------


def test_reference_models_stored():
    assert REFERENCE_NOVEL_RCTP.coefficients == (1.31855648e3, 4.44412352e-2, -3.70701991e-7)
    assert REFERENCE_LEGACY_RCTP.coefficients == (123.78, 18.99, 9.99)
    assert REFERENCE_NOVEL_RPR.coefficients == (8.96, 0.015)
    assert REFERENCE_LEGACY_RPR.coefficients == (2328.04, 2.34)
    assert REFERENCE_LEGACY_RPR_RESULTS.coefficients == (2328.04, -2.34)


def test_param_model_examples():
    assert param_model(n=1024).D == 10
    assert param_model(n=1).D == 0
    p = param_model(lam=500, T_c=2, m=10)
    assert (p.n, p.T_p, p.N) == (1000, 20, 1000)
    p = param_model(lam=100, T_c=1, history=[100, 100])
    assert p.N == 300 and p.D == 9
    assert param_model(T_p=20, T_c=2, n=10).m == 10


def test_param_model_errors():
    with pytest.raises(InconsistentParams):
        param_model(n=999, lam=500, T_c=2)
    with pytest.raises(InconsistentParams):
        param_model(lam=1, T_c=2, m=3, T_p=7)
    with pytest.raises(InconsistentParams):
        param_model(n=5, N=6)
    with pytest.raises(InvalidArgument):
        param_model(T_c=1)
    with pytest.raises(InvalidArgument):
        param_model(n=-1)


def test_trie_depth_rounds_up():
    assert [trie_depth(v) for v in (0, 1, 2, 3, 1024, 1025)] == [0, 0, 1, 2, 10, 11]


def test_predict_rpr_novel():
    assert predict_rpr_novel(1000, 1, [], REFERENCE_NOVEL_RPR) == pytest.approx(23.96)
    assert predict_rpr_novel(0, 1, [], REFERENCE_NOVEL_RPR) == pytest.approx(8.96)
    assert predict_rpr_novel(100, 1, [100, 100], REFERENCE_NOVEL_RPR) == pytest.approx(8.96 + 0.015 * 300)
    with pytest.raises(InvalidArgument):
        predict_rpr_novel(1, 1, [], REFERENCE_LEGACY_RCTP)


def test_rpr_grid():
    lams = default_lambda_grid()
    assert lams[0] == 250 and lams[-1] == 1000
    rows = rpr_grid(lams, [1, 2, 5], 1, REFERENCE_NOVEL_RPR)
    assert len(rows) == len(lams) * 3
    by = {(l, t): r for l, t, r in rows}
    # with T_c = 1 s and m = T_p, N per cycle is lambda
    for tp in (1, 2, 5):
        sq = rpr_grid([500], [tp], tp, REFERENCE_NOVEL_RPR)[0][2]
        assert sq == pytest.approx(predict_rpr_novel(500, 1, [], REFERENCE_NOVEL_RPR))
    assert by[(500.0, 2.0)] - 8.96 == pytest.approx(2 * (by[(250.0, 2.0)] - 8.96))
    with pytest.raises(InvalidArgument):
        rpr_grid(lams, [1], 0, REFERENCE_NOVEL_RPR)


def test_crossover_reference():
    r = crossover(REFERENCE_LEGACY_RPR, REFERENCE_NOVEL_RPR, 1000)
    # hand solve: 2328.04 + 2.34 d = 8.96 + 15 d
    assert r.delta_C_star == pytest.approx(2319.08 / 12.66, rel=1e-12)
    assert abs(r.delta_C_star - 183.18) < 0.01
    assert (r.winner_below, r.winner_above) == ("novel", "legacy")


def test_crossover_parallel_and_negative():
    with pytest.raises(NoCrossover):
        crossover(FitModel("linear", (10.0, 1.5)), FitModel("linear", (1.0, 0.015)), 100)
    r = crossover(FitModel("linear", (1.0, 1.0)), FitModel("linear", (10.0, 0.01)), 1000)
    assert r.delta_C_star < 0
    assert r.note == "legacy always faster in-domain"


# -- workload and measurement ---------------------------------------------------------------------


def test_generate_workload_shapes_and_determinism():
    w = generate_workload(750, 1, 3, seed=1)
    assert [len(c) for c in w] == [750, 750, 750]
    assert len({kv.key for c in w for kv in c}) == 2250
    assert [len(c) for c in generate_workload(1, 1, 1, seed=2)] == [1]
    assert generate_workload(20, 0.5, 4, seed=9) == generate_workload(20, 0.5, 4, seed=9)
    assert generate_workload(20, 0.5, 4, seed=9) != generate_workload(20, 0.5, 4, seed=10)
    with pytest.raises(InvalidArgument):
        generate_workload(0, 1, 1, seed=0)


def test_measure_empty_workload():
    assert measure_rctp(RelayConfig(), []) == []
    assert measure_rpr(RelayConfig(), [], RetrievalPlan()) == []


def test_measure_rctp_x_axes():
    w = fixed_size_workload([25] * 4, seed=3)
    nov = measure_rctp(RelayConfig(1000.0, 4, Strategy.NOVEL), w)
    leg = measure_rctp(RelayConfig(1000.0, 4, Strategy.LEGACY), w)
    assert [s.x for s in nov] == [25, 50, 75, 100]
    assert [s.x for s in leg] == [25] * 4
    assert all(s.kind == "rctp" and s.y_ms >= 0 for s in nov + leg)
    assert all(s.cost == 25 * 257 for s in nov + leg)


def test_measure_rctp_four_series():
    series = [measure_rctp(RelayConfig(1000.0, 3, Strategy.NOVEL), fixed_size_workload([n] * 3, n))
              for n in (25, 50, 75, 100)]
    assert [s[0].x for s in series] == [25, 50, 75, 100]


def test_measure_rpr_novel_same_cycle():
    w = fixed_size_workload([10] * 4, seed=5)
    samples = measure_rpr(RelayConfig(1000.0, 4, Strategy.NOVEL), w, RetrievalPlan())
    assert [s.x for s in samples] == [10, 20, 30, 40]
    # same-cycle PoPs carry one proof each
    assert all(s.cost == 256 for s in samples)


def test_measure_rpr_legacy_clusters_and_correlation():
    w = fixed_size_workload([1] * 1005, seed=6)
    plan = RetrievalPlan((1, 10, 100, 1000), 5, extra_keys=(b"unknown",))
    samples = measure_rpr(RelayConfig(1000.0, 1, Strategy.LEGACY), w, plan)
    ok = fit_ready(samples)
    assert sorted({s.x for s in ok}) == [1, 10, 100, 1000]
    assert all(s.cost == 256 * s.x for s in ok)
    failed = [s for s in samples if not s.ok]
    assert len(failed) == 1 and failed[0] not in ok
    rho = spearmanr([s.y_ms for s in ok], [s.cost for s in ok]).statistic
    assert rho > 0.9


def test_measure_rpr_plan_needs_enough_cycles():
    with pytest.raises(InvalidArgument):
        measure_rpr(RelayConfig(1000.0, 1, Strategy.LEGACY), fixed_size_workload([1] * 5, 0),
                    RetrievalPlan((10,), 1))


def test_bench_sample_validation():
    with pytest.raises(InvalidArgument):
        BenchSample(0, 1.0, -0.1, "rpr")
    with pytest.raises(InvalidArgument):
        BenchSample(0, 1.0, 1.0, "other")


# -- artifacts ---------------------------------------------------------------------------------


def test_samples_csv_roundtrip(tmp_path):
    samples = [BenchSample(i, i * 1.5, 0.1 * i, "rctp") for i in range(5)]
    path = bench_io.write_samples_csv(tmp_path / "s.csv", samples)
    assert path.read_text().splitlines()[0] == "cycle,x,y_ms,kind"
    back = bench_io.read_samples_csv(path)
    assert [(s.cycle_index, s.x, s.y_ms, s.kind) for s in back] == [
        (s.cycle_index, s.x, s.y_ms, s.kind) for s in samples
    ]


def test_fit_report_and_scripts(tmp_path):
    m = fit_linear([1, 2, 3], [1, 2, 3.5])
    path = bench_io.write_fit_report(tmp_path / "f.json", m)
    assert bench_io.read_fit_report(path) == m
    grid = bench_io.write_grid_csv(tmp_path / "g.csv", rpr_grid([250, 1000], [1], 1, REFERENCE_NOVEL_RPR))
    assert grid.read_text().splitlines()[0] == "lambda,T_p,R_pr_ms"
    script = bench_io.samples_plot_script("s.csv", REFERENCE_LEGACY_RCTP, "t", "x")
    assert "'s.csv'" in script and "log(x - 9.99)" in script
    assert "splot 'g.csv'" in bench_io.grid_plot_script("g.csv")
