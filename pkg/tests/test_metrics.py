import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.stats import wasserstein_distance

from lvgen.metrics import (
    Corpus,
    UndefinedCorrelationError,
    acf,
    corpus_acf,
    deciles,
    evaluate,
    marginal_score,
    mivo,
    mmd,
    mmd_permutation_interval,
    mse,
    plot_names,
    read_report_values,
    volatility,
    wasserstein,
    wasserstein1d,
    write_figures,
)
from lvgen.metrics.kernels import sqdist_loop, sqdist_numpy


def corpus(n=40, seed=0, shift=0.0):
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 2 * np.pi, 48)
    base = np.stack([np.sin(t), 0.5 * np.cos(t)])
    return base + shift + 0.2 * rng.standard_normal((n, 2, 48))


# ---- mse


def test_mse_examples(rng):
    x = corpus()
    assert mse(x, x) == 0.0
    assert mse(x, x + 1.0) == pytest.approx(1.0)
    y = rng.standard_normal(x.shape)
    total = 0.0
    for i in range(x.shape[0]):
        for c in range(2):
            for t in range(48):
                total += (x[i, c, t] - y[i, c, t]) ** 2
    assert mse(x, y) == pytest.approx(total / x.size, rel=1e-12)


def test_mse_unpaired():
    with pytest.raises(ValueError):
        mse(corpus(10), corpus(11))
    a = Corpus("a", corpus(3), keys=[1, 2, 3])
    b = Corpus("b", corpus(3), keys=[1, 3, 2])
    with pytest.raises(ValueError):
        mse(a, b)


def test_corpus_validation():
    bad = corpus(2)
    bad[0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        Corpus("x", bad)
    with pytest.raises(ValueError):
        Corpus("x", np.zeros((4, 48)))


# ---- mmd


def _mmd_brute(x, y, h):
    k = lambda a, b: np.exp(-np.sum((a - b) ** 2) / (2 * h * h))  # noqa: E731
    n, m = len(x), len(y)
    sxx = sum(k(x[i], x[j]) for i in range(n) for j in range(n) if i != j) / (n * (n - 1))
    syy = sum(k(y[i], y[j]) for i in range(m) for j in range(m) if i != j) / (m * (m - 1))
    sxy = sum(k(x[i], y[j]) for i in range(n) for j in range(m)) / (n * m)
    return max(sxx + syy - 2 * sxy, 0.0)


def test_mmd_matches_kernel_sums():
    x, y = corpus(12, 1), corpus(9, 2, shift=0.3)
    fx, fy = x.reshape(12, -1), y.reshape(9, -1)
    assert mmd(x, y, bandwidth=3.0) == pytest.approx(_mmd_brute(fx, fy, 3.0), rel=1e-10)


def test_mmd_identical_is_zero():
    x = corpus()
    assert abs(mmd(x, x, biased=True)) < 1e-9
    assert mmd(x, x) == 0.0  # clamped


def test_mmd_far_clusters_near_two():
    rng = np.random.default_rng(0)
    x = 0.01 * rng.standard_normal((30, 2, 48))
    y = 100.0 + 0.01 * rng.standard_normal((30, 2, 48))
    assert abs(mmd(x, y, bandwidth=1.0) - 2.0) < 0.05


def test_mmd_row_duplication_biased_fixed_bandwidth():
    x, y = corpus(15, 3), corpus(15, 4, shift=0.5)
    one = mmd(x, y, bandwidth=2.0, biased=True)
    two = mmd(np.concatenate([x, x]), np.concatenate([y, y]), bandwidth=2.0, biased=True)
    assert abs(one - two) < 1e-9


def test_mmd_unbiased_shifts_under_duplication():
    # duplicated rows turn k(x, x) = 1 into off-diagonal terms
    x, y = corpus(15, 3), corpus(15, 4, shift=0.5)
    one = mmd(x, y, bandwidth=2.0)
    two = mmd(np.concatenate([x, x]), np.concatenate([y, y]), bandwidth=2.0)
    assert two > one


def test_mmd_needs_two_rows():
    with pytest.raises(ValueError):
        mmd(corpus(1), corpus(5))


def test_mmd_symmetric():
    x, y = corpus(10, 5), corpus(14, 6, shift=0.2)
    assert mmd(x, y) == pytest.approx(mmd(y, x), rel=1e-12)


def test_same_distribution_inside_permutation_interval():
    x = corpus(80, 7)
    lo, hi = mmd_permutation_interval(x[:40], x[40:], n_perm=200, seed=1)
    assert lo <= mmd(x[:40], x[40:]) <= hi


@settings(max_examples=20, deadline=None)
@given(arrays(np.float64, (6, 5), elements=st.floats(-10, 10)), arrays(np.float64, (4, 5), elements=st.floats(-10, 10)))
def test_sqdist_paths_agree(a, b):
    assert np.allclose(sqdist_loop(a, b), sqdist_numpy(a, b), atol=1e-9)


# ---- wasserstein


@pytest.mark.parametrize("u,v,expected", [([0], [3], 3.0), ([0, 1], [1, 2], 1.0), ([4, 2, 7], [4, 2, 7], 0.0)])
def test_wasserstein_examples(u, v, expected):
    assert wasserstein1d(u, v) == pytest.approx(expected)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.integers(1, 30), elements=st.floats(-100, 100)),
       arrays(np.float64, st.integers(1, 30), elements=st.floats(-100, 100)))
def test_wasserstein_matches_scipy(u, v):
    assert wasserstein1d(u, v) == pytest.approx(wasserstein_distance(u, v), rel=1e-9, abs=1e-9)


def test_wasserstein_empty():
    with pytest.raises(ValueError):
        wasserstein1d([], [1.0])


def test_corpus_wasserstein_channel_average():
    x = corpus(5)
    y = x.copy()
    y[:, 0] += 2.0
    assert wasserstein(x, y) == pytest.approx(1.0)


# ---- marginal score


def test_marginal_score_examples(rng):
    x = corpus()
    assert marginal_score(x, x) == 0.0
    assert marginal_score(x, x + 100.0) == pytest.approx(1.0)
    assert marginal_score(x, x[rng.permutation(len(x))]) == marginal_score(x, x)


def test_marginal_score_degenerate_range_warns():
    x = np.ones((5, 2, 48))
    with pytest.warns(RuntimeWarning):
        assert marginal_score(x, x) == 0.0
    with pytest.raises(ValueError):
        marginal_score(x, x, bins=1)


# ---- mivo


def test_mivo_examples():
    x = corpus()
    assert mivo(x, x) == 0.0
    assert mivo(x, x + 0.7) == pytest.approx(0.7)
    flat = np.broadcast_to(x.mean(axis=2, keepdims=True), x.shape)
    vol_real = np.mean([volatility(x[:, c]) for c in range(2)])
    min_gap = np.mean([abs(x[:, c].min() - flat[:, c].min()) for c in range(2)])
    assert mivo(x, flat) == pytest.approx(vol_real + min_gap)


# ---- acf and deciles


def test_acf_examples():
    # the lag-k estimate carries a (n - k) / n factor
    assert acf(np.tile([1.0, -1.0], 24), 5)[1] == pytest.approx(-47 / 48)
    r = acf(np.tile([1.0, -1.0], 1000), 5)
    assert r[0] == 1.0 and abs(r[1] + 1) < 1e-3
    with pytest.raises(UndefinedCorrelationError):
        acf(np.full(48, 3.0), 5)
    with pytest.raises(ValueError):
        acf(np.arange(5.0), 5)


def test_acf_white_noise_bound():
    n = 10_000
    r = acf(np.random.default_rng(0).standard_normal(n), 20)
    assert np.all(np.abs(r[1:]) < 3 / np.sqrt(n))


def test_corpus_acf_averages_days():
    x = corpus(6)
    expected = np.mean([acf(d, 10) for d in x[:, 1]], axis=0)
    assert np.allclose(corpus_acf(x, 10)[1], expected)


def test_decile_examples():
    assert np.all(deciles(np.full((20, 2, 48), 4.0)) == 4.0)
    d = deciles(corpus(50))
    assert np.all(np.diff(d, axis=0) >= 0)
    u = np.random.default_rng(1).uniform(size=(100_000, 1, 1))
    assert abs(deciles(u)[0, 0, 0] - 0.1) < 0.01


def test_deciles_small_sample_warns():
    with pytest.warns(RuntimeWarning):
        d = deciles(np.arange(5.0).reshape(5, 1, 1))
    assert d[:, 0, 0].tolist() == [0.0, 2.0, 4.0]


# ---- report


def test_identical_corpora_all_zero():
    x = Corpus("real", corpus())
    rep = evaluate(x, Corpus("copy", x.profiles.copy()))
    assert all(v == 0.0 for v in rep.scalars().values())


def test_report_determinism_and_text(tmp_path):
    real, gen = Corpus("Real test", corpus(30, 1)), Corpus("LVGen WCS", corpus(30, 2, 0.1))
    a = evaluate(real, gen, n_perm=20, seed=3)
    b = evaluate(real, gen, n_perm=20, seed=3)
    assert a.to_text() == b.to_text()
    path = a.write(tmp_path / "metrics.txt")
    vals = read_report_values(path)
    assert float(vals["mmd"]) == a.mmd and "mmd_null_hi" in vals
    assert "interpretation" in path.read_text()


def test_unpaired_report_mse_nan():
    rep = evaluate(Corpus("a", corpus(10)), Corpus("b", corpus(12)))
    assert np.isnan(rep.mse) and rep.mmd >= 0


def test_figures_named_from_labels(tmp_path):
    real, gen = Corpus("Real test", corpus(12, 1)), Corpus("LVGen WCS", corpus(12, 2))
    names = plot_names("Real test", "LVGen WCS")
    assert names["acf"] == "real-test_vs_lvgen-wcs_acf.png"
    paths = write_figures(tmp_path / "a", real, gen)
    assert sorted(p.name for p in paths) == sorted(names.values())
    again = write_figures(tmp_path / "b", real, gen)
    for p, q in zip(paths, again):
        assert p.read_bytes() == q.read_bytes()
