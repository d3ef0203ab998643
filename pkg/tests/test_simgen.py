import math

import numpy as np
import pytest
from scipy import interpolate, stats

from qform import simgen
from qform.errors import NotPositiveDefinite
from qform.exact import exact_tail
from qform.matchers import fit, tail_probability
from qform.moments import moments
from qform.reduction import QuadraticFormSpec, reduce
from qform.simgen import CorrelationModel, build_correlation, run_type1_experiment


def test_equal_zero_is_identity():
    for bt in simgen.BLOCK_TYPES:
        np.testing.assert_array_equal(build_correlation(CorrelationModel("Equal", bt, 6, 0.0)), np.eye(6))


def test_equal_type_iii():
    s = build_correlation(CorrelationModel("Equal", "III", 4, 0.5))
    expected = np.full((4, 4), 0.5)
    np.fill_diagonal(expected, 1.0)
    np.testing.assert_array_equal(s, expected)


def test_block_embedding():
    s1 = build_correlation(CorrelationModel("Equal", "I", 6, 0.3))
    s2 = build_correlation(CorrelationModel("Equal", "II", 6, 0.3))
    block = simgen.equicorrelation(3, 0.3)
    np.testing.assert_array_equal(s1[:3, :3], block)
    np.testing.assert_array_equal(s1[3:, 3:], np.eye(3))
    np.testing.assert_array_equal(s2[3:, 3:], block)
    assert not s1[:3, 3:].any() and not s2[:3, 3:].any()


def test_literal_poly_blocks():
    assert simgen.poly_decay(3, 1.0)[0, 2] == 0.5
    assert simgen.poly_decay(3, 1.0)[0, 1] == 1.0
    with pytest.raises(NotPositiveDefinite):
        build_correlation(CorrelationModel("Poly", "I", 6, 1.0))
    with pytest.raises(NotPositiveDefinite):
        build_correlation(CorrelationModel("InvPoly", "III", 4, 1.0))


def test_offset_poly_blocks():
    s = build_correlation(CorrelationModel("Poly", "I", 6, 1.0, lag_offset=1))
    np.testing.assert_allclose(s[0, :3], [1.0, 0.5, 1 / 3])


def test_inverse_model_standardized_before_embedding():
    s = build_correlation(CorrelationModel("InvEqual", "I", 6, 0.5))
    inv = np.linalg.inv(simgen.equicorrelation(3, 0.5))
    d = np.sqrt(np.diag(inv))
    np.testing.assert_allclose(s[:3, :3], inv / np.outer(d, d), atol=1e-14)
    np.testing.assert_array_equal(s[3:, 3:], np.eye(3))


@pytest.mark.parametrize("offset", [0, 1])
def test_all_feasible_models_are_correlations(offset):
    built = 0
    for model in simgen.default_models((10, 50), lag_offset=offset):
        try:
            s = build_correlation(model)
        except NotPositiveDefinite:
            assert offset == 0 and model.base in ("Poly", "InvPoly")
            continue
        built += 1
        np.testing.assert_array_equal(np.diag(s), 1.0)
        np.testing.assert_array_equal(s, s.T)
        np.linalg.cholesky(s)
    assert built == (36 if offset == 0 else 72)


def test_model_validation():
    with pytest.raises(ValueError):
        CorrelationModel("Equal", "I", 5, 0.5)
    with pytest.raises(ValueError):
        CorrelationModel("Equal", "IV", 4, 0.5)
    with pytest.raises(ValueError):
        CorrelationModel("Poly", "I", 4, 0.0)
    with pytest.raises(ValueError):
        simgen.mean_vector("mu4", 4)


def test_mean_vectors():
    np.testing.assert_array_equal(simgen.mean_vector("mu1", 4), [0, 0, 0, 0])
    np.testing.assert_array_equal(simgen.mean_vector("mu2", 4), [1, 1, 1, 1])
    np.testing.assert_array_equal(simgen.mean_vector("mu3", 4), [1, 1, 0, 0])


def test_sample_mean_identity():
    x = np.concatenate(list(simgen.sample_gaussian(np.eye(3), np.zeros(3), 1_000_000, seed=4)))
    assert x.shape == (1_000_000, 3)
    assert np.all(np.abs(x.mean(axis=0)) <= 4 / math.sqrt(x.shape[0]))


def test_sample_correlation():
    x = np.concatenate(list(simgen.sample_gaussian(simgen.equicorrelation(2, 0.9), np.zeros(2),
                                                   1_000_000, seed=4)))
    assert np.corrcoef(x.T)[0, 1] == pytest.approx(0.9, abs=0.01)


def test_sample_stream_is_deterministic():
    a = list(simgen.sample_gaussian(np.eye(2), [1.0, 2.0], 1000, seed=9, block_size=300))
    b = list(simgen.sample_gaussian(np.eye(2), [1.0, 2.0], 1000, seed=9, block_size=300))
    assert [x.shape[0] for x in a] == [300, 300, 300, 100]
    for u, v in zip(a, b):
        np.testing.assert_array_equal(u, v)


@pytest.mark.slow
def test_exact_on_identity_is_calibrated():
    model = CorrelationModel("Equal", "I", 10, 0.0)
    report = run_type1_experiment(model, "mu1", ["Exact", "MR"], [0.01], 1_000_000, seed=2)
    exact, mr = report.row("Exact", 0.01), report.row("MR", 0.01)
    assert 0.9 <= exact.ratio <= 1.1
    assert exact.rejections == mr.rejections


def test_mr_critical_values_match_exact_on_identity():
    sigma = np.eye(10)
    plan = simgen.plan_configuration(sigma, np.zeros(10), ["Exact", "MR"], [0.05, 0.001])
    np.testing.assert_allclose(plan.crit[1], plan.crit[0], rtol=1e-9)
    r = fit("MR", moments(QuadraticFormSpec(sigma=sigma)))
    sf = reduce(QuadraticFormSpec(sigma=sigma))
    for q in (5.0, 15.0, 25.0):
        assert tail_probability(q, r) == pytest.approx(exact_tail(sf, q), abs=1e-9)


def test_ltz_report_equals_hbe_on_centered():
    model = CorrelationModel("InvEqual", "II", 10, 0.5)
    report = run_type1_experiment(model, "mu1", ["LTZ", "HBE"], [0.05, 0.01], 20_000, seed=3)
    for a in (0.05, 0.01):
        ltz, hbe = report.row("LTZ", a), report.row("HBE", a)
        assert ltz.rejections == hbe.rejections
        assert ltz.fallback_used


def test_ltz_falls_back_on_every_centered_model():
    for model in simgen.default_models((10,), lag_offset=1):
        sigma = build_correlation(model)
        if np.allclose(sigma, np.eye(model.n)):
            continue
        m = moments(QuadraticFormSpec(sigma=sigma))
        assert fit("LTZ", m).fallback_used, model.label


def test_critical_value_counting_equals_pvalue_counting():
    model = CorrelationModel("Equal", "III", 10, 0.5)
    sigma = build_correlation(model)
    mu = simgen.mean_vector("mu3", 10)
    methods, alphas = ["MR", "Wood", "Exact"], [0.1, 0.02]
    n_reps, seed = 3000, 21
    report = run_type1_experiment(model, "mu3", methods, alphas, n_reps, seed, block_size=1024)

    spec = QuadraticFormSpec(sigma=sigma, mu=mu)
    m = moments(spec)
    sf = reduce(spec)
    stream = simgen.config_stream(model, "mu3")
    x = np.concatenate(list(simgen.sample_gaussian(sigma, mu, n_reps, seed, 1024, stream)))
    q = np.einsum("ij,ij->i", x, x)
    for method in methods:
        if method == "Exact":
            # per-replicate inversion is slow; check the replicates nearest the critical values
            plan = simgen.plan_configuration(sigma, mu, ["Exact"], alphas)
            for j, a in enumerate(alphas):
                near = np.argsort(np.abs(q - plan.crit[0, j]))[:6]
                for i in near:
                    assert (exact_tail(sf, q[i]) < a) == (q[i] > plan.crit[0, j])
                assert report.row("Exact", a).rejections == np.count_nonzero(q > plan.crit[0, j])
            continue
        p = tail_probability(q, fit(method, m))
        for a in alphas:
            assert report.row(method, a).rejections == np.count_nonzero(p < a)


def test_block_size_and_workers_do_not_change_counts():
    model = CorrelationModel("Equal", "II", 10, 0.9)
    args = (model, "mu2", ["MR", "SW"], [0.05, 0.01], 5000)
    a = run_type1_experiment(*args, seed=1, block_size=1000)
    b = run_type1_experiment(*args, seed=1, block_size=1000, workers=2)
    assert a.rows == b.rows
    c = run_type1_experiment(*args, seed=2, block_size=1000)
    assert a.rows != c.rows


def test_report_csv_rows():
    model = CorrelationModel("Equal", "I", 10, 0.5)
    report = run_type1_experiment(model, "mu1", ["MR"], [0.05], 2000, seed=1)
    (row,) = list(report.csv_rows())
    assert tuple(row) == simgen.CSV_COLUMNS
    r = report.row("MR", 0.05)
    assert float(row["ratio"]) == r.rate / 0.05
    assert float(row["std_error"]) == pytest.approx(math.sqrt(0.05 * 0.95 / 2000))


def test_run_sweep_skips_infeasible(caplog):
    models = [CorrelationModel("Poly", "I", 10, 1.0), CorrelationModel("Equal", "I", 10, 0.1)]
    with caplog.at_level("WARNING"):
        reports = simgen.run_sweep(models, ["mu1"], ["MR"], [0.05], 1000, seed=1)
    assert len(reports) == 1
    assert "skipping Poly(1)/I/n=10" in caplog.text


def test_worker_count(monkeypatch):
    monkeypatch.delenv("QFORM_THREADS", raising=False)
    assert simgen.worker_count() == 1
    monkeypatch.setenv("QFORM_THREADS", "3")
    assert simgen.worker_count() == 3
    assert simgen.worker_count(2) == 2


def _exact_cdf_interpolant(sf, q_lo, q_hi, n_nodes=300):
    nodes = np.linspace(q_lo, q_hi, n_nodes)
    cdf = 1.0 - exact_tail(sf, nodes)
    return interpolate.PchipInterpolator(nodes, cdf, extrapolate=False)


@pytest.mark.slow
@pytest.mark.parametrize("model, mv", [
    (CorrelationModel("Equal", "I", 10, 0.9), "mu1"),
    (CorrelationModel("InvEqual", "III", 10, 0.5), "mu2"),
    (CorrelationModel("Poly", "II", 10, 1.0, lag_offset=1), "mu3"),
])
def test_exact_pvalues_are_uniform(model, mv):
    sigma = build_correlation(model)
    mu = simgen.mean_vector(mv, model.n)
    sf = reduce(QuadraticFormSpec(sigma=sigma, mu=mu))
    x = np.concatenate(list(simgen.sample_gaussian(sigma, mu, 100_000, seed=77)))
    q = np.einsum("ij,ij->i", x, x)
    F = _exact_cdf_interpolant(sf, 0.0, q.max())
    u = F(q)
    ks = stats.kstest(u, "uniform")
    crit = stats.kstwo.isf(0.001, q.size)
    assert ks.statistic < crit
