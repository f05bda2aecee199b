import warnings
from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.mixture import GaussianMixture

from lvgen.baselines import (
    REFERENCE_COLUMNS,
    STRUCTURAL_RANK,
    TAO_COLUMNS,
    TAO_N_COLUMNS,
    DegenerateFitError,
    GmmBaseline,
    GmmModel,
    TaoBaseline,
    design_row,
    fit_em,
    fit_gmm,
    gmm_sample,
    reactive_from_active,
    tao_design_row,
    tao_fit,
    tao_predict,
)


def two_blobs(n=400, d=3, sep=8.0, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, d))
    x[: n // 2, 0] += sep
    return x


# ---- GMM


def test_em_matches_sklearn():
    x = two_blobs(seed=1)
    ours = max((fit_em(x, 2, rng=np.random.default_rng(s)) for s in range(3)), key=lambda m: m.log_likelihood)
    ref = GaussianMixture(2, covariance_type="full", tol=1e-8, reg_covar=1e-6, n_init=3, random_state=0).fit(x)
    assert abs(ours.log_likelihood / len(x) - ref.score(x)) < 1e-4
    order = np.argsort(ours.means[:, 0])
    ref_order = np.argsort(ref.means_[:, 0])
    assert np.allclose(ours.means[order], ref.means_[ref_order], atol=1e-3)
    assert np.allclose(ours.weights[order], ref.weights_[ref_order], atol=1e-4)
    assert np.allclose(ours.score_samples(x[:5]), ref.score_samples(x[:5]), atol=1e-3)


def test_bic_matches_sklearn_parameter_count():
    x = two_blobs(seed=2)
    m = fit_em(x, 2, rng=np.random.default_rng(0))
    ref = GaussianMixture(2, random_state=0).fit(x)
    assert m.n_parameters() == ref._n_parameters()


@pytest.mark.parametrize("seed", range(3))
def test_bic_selects_true_count(seed):
    rng = np.random.default_rng(seed)
    one = rng.standard_normal((300, 3))
    assert fit_gmm(one, k_max=4, seed=seed)[0].n_components == 1
    assert fit_gmm(two_blobs(300, seed=seed), k_max=4, seed=seed)[0].n_components == 2


def test_bic_curve_has_minimum_at_selection():
    model, bics = fit_gmm(two_blobs(seed=7), k_max=4, seed=0)
    assert np.argmin(bics) == model.n_components - 1
    assert bics[0] > bics[1]


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 4))
def test_em_log_likelihood_monotone(seed, k):
    x = two_blobs(200, seed=seed)
    m = fit_em(x, k, rng=np.random.default_rng(seed))
    assert np.all(np.diff(m.ll_trace) >= -1e-10 * np.abs(m.ll_trace[1:]).max())


def test_diagonal_covariance_fit():
    m = fit_em(two_blobs(seed=3), 2, covariance_type="diag", rng=np.random.default_rng(0))
    assert m.covariances.shape == (2, 3) and m.full_covariances().shape == (2, 3, 3)


def test_too_few_rows():
    with pytest.raises(DegenerateFitError):
        fit_gmm(np.zeros((3, 2)), k_max=4)
    with pytest.raises(ValueError):
        fit_gmm(np.zeros((3, 2)), k_max=0)


def test_sample_mean_within_standard_errors():
    model = GmmModel(np.array([0.3, 0.7]), np.array([[0.0, 5.0], [4.0, -1.0]]),
                     np.stack([np.eye(2), np.diag([2.0, 0.5])]))
    n = 100_000
    draws = gmm_sample(model, n, seed=11)
    mu = model.mean()
    full_cov = sum(w * (c + np.outer(m - mu, m - mu)) for w, m, c in
                   zip(model.weights, model.means, model.covariances))
    se = np.sqrt(np.diag(full_cov) / n)
    assert np.all(np.abs(draws.mean(0) - mu) < 3 * se)
    assert np.array_equal(gmm_sample(model, 10, seed=1), gmm_sample(model, 10, seed=1))


def test_baseline_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    profiles = rng.standard_normal((120, 2, 6)) + np.arange(6)
    base = GmmBaseline.fit(profiles, k_max=2, seed=0, n_init=2)
    path = base.save(tmp_path / "gmm.npz")
    back = GmmBaseline.load(path)
    assert np.array_equal(back.sample(20, seed=4), base.sample(20, seed=4))
    assert base.sample(5).shape == (5, 2, 6)
    from lvgen.container import save_container

    save_container(tmp_path / "other.npz", {}, {"kind": "tao"})
    with pytest.raises(ValueError):
        GmmBaseline.load(tmp_path / "other.npz")


# ---- Tao Vanilla


def test_catalog_width():
    assert TAO_N_COLUMNS == 1 + 1 + 7 * 24 + 12 + 3 * 12 + 3 * 24 == 290
    assert len(set(TAO_COLUMNS)) == 290
    assert STRUCTURAL_RANK == 285


def test_design_row_example():
    row = design_row(3, 7, 14, 2.0, 10.0)
    names = {TAO_COLUMNS[i]: v for i, v in enumerate(row) if v != 0}
    assert names == {
        "intercept": 1.0, "trend": 10.0, "day3:hour14": 1.0, "month7": 1.0,
        "month7:tmp^1": 2.0, "month7:tmp^2": 4.0, "month7:tmp^3": 8.0,
        "hour14:tmp^1": 2.0, "hour14:tmp^2": 4.0, "hour14:tmp^3": 8.0,
    }
    assert np.array_equal(tao_design_row(date(2023, 7, 5), 14, 2.0, 10.0), row)


@pytest.mark.parametrize("args", [(0, 1, 0, 1.0, 0.0), (1, 13, 0, 1.0, 0.0), (1, 1, 24, 1.0, 0.0),
                                  (1, 1, 0, float("nan"), 0.0)])
def test_design_row_bounds(args):
    with pytest.raises(ValueError):
        design_row(*args)


def _random_design(n, seed):
    rng = np.random.default_rng(seed)
    rows = [design_row(int(rng.integers(1, 8)), int(rng.integers(1, 13)), int(rng.integers(24)),
                       float(rng.uniform(-5, 30)), float(rng.integers(0, 365))) for _ in range(n)]
    return np.array(rows)


def _known_beta(seed):
    beta = np.random.default_rng(seed).normal(0, 1, TAO_N_COLUMNS)
    beta[2:] *= 10.0
    for name in REFERENCE_COLUMNS:
        beta[TAO_COLUMNS.index(name)] = 0.0
    # keep the cubic terms modest against the level
    for i, c in enumerate(TAO_COLUMNS):
        if c.endswith("tmp^2"):
            beta[i] *= 1e-2
        if c.endswith("tmp^3"):
            beta[i] *= 1e-4
    return beta


def test_noiseless_recovery():
    x = _random_design(6000, 0)
    beta = _known_beta(1)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        model = tao_fit(x, x @ beta)
    assert model.rank == STRUCTURAL_RANK
    assert np.max(np.abs(model.beta - beta)) / np.max(np.abs(beta)) < 1e-6


def test_constant_load():
    x = _random_design(4000, 2)
    model = tao_fit(x, np.full(len(x), 5.0))
    assert model.coefficient("intercept") == pytest.approx(5.0, abs=1e-8)
    assert np.max(np.abs(model.beta[1:])) < 1e-8


def test_rank_deficient_warns():
    x = _random_design(50, 3)
    with pytest.warns(RuntimeWarning, match="rank"):
        tao_fit(x, np.ones(50))


def test_fit_shape_errors():
    with pytest.raises(ValueError):
        tao_fit(np.zeros((5, 10)), np.zeros(5))
    with pytest.raises(ValueError):
        tao_fit(np.zeros((5, 290)), np.zeros(4))


@given(st.floats(-3, 3), st.floats(-20, 40), st.integers(1, 7), st.integers(1, 12), st.integers(0, 23))
def test_prediction_linear_and_polynomial(a, tmp, dow, month, hour):
    beta = _known_beta(4)
    from lvgen.baselines import TaoModel

    m = TaoModel(beta)
    row = design_row(dow, month, hour, tmp, 3.0)
    assert tao_predict(m, a * row)[0] == pytest.approx(a * tao_predict(m, row)[0], rel=1e-9, abs=1e-9)
    scaled = design_row(dow, month, hour, 2 * tmp, 3.0)
    for k in (1, 2, 3):
        for col in (f"month{month}:tmp^{k}", f"hour{hour}:tmp^{k}"):
            i = TAO_COLUMNS.index(col)
            assert scaled[i] == pytest.approx(2 ** k * row[i], rel=1e-12, abs=1e-12)


def test_reactive_power_factor():
    q = reactive_from_active(np.array([98.0]))
    assert q[0] == pytest.approx(98.0 * np.sqrt(1 - 0.98 ** 2) / 0.98)
    assert reactive_from_active(10.0, 1.0) == 0.0
    with pytest.raises(ValueError):
        reactive_from_active(1.0, 0.0)


def test_baseline_day_profiles(tmp_path):
    rng = np.random.default_rng(0)
    start = date(2023, 1, 1)
    dates = [start + timedelta(days=k) for k in range(400)]
    tmps = rng.uniform(0, 20, len(dates))
    # profile depends on hour only, so the hour-shared half-hours are exact
    base_shape = np.repeat(50 + 10 * np.sin(np.arange(24) / 4), 2)
    p = np.array([base_shape + 0.5 * t for t in tmps])
    tao = TaoBaseline.fit(dates, tmps, p)
    pred = tao.predict(dates[:3], tmps[:3])
    assert pred.shape == (3, 2, 48)
    assert np.allclose(pred[:, 0], p[:3], atol=1e-6)
    assert np.allclose(pred[:, 1], reactive_from_active(pred[:, 0]))
    back = TaoBaseline.load(tao.save(tmp_path / "tao.npz"))
    assert np.array_equal(back.predict(dates[:3], tmps[:3]), pred)
