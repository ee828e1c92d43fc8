import numpy as np
import pytest
from scipy.stats import multivariate_normal

from dpvae import metrics as M

from conftest import small_model


def _data(n=40, seed=0):
    return np.random.default_rng(seed).normal(size=(n, 2))


def test_aggregate_density_matches_brute_force_mixture():
    rng = np.random.default_rng(1)
    agg = M.AggregatePosterior(rng.normal(size=(5, 2)), rng.normal(scale=0.3, size=(5, 2)))
    z = rng.normal(size=(7, 2))
    comps = np.array([multivariate_normal(m, np.diag(np.exp(v))).pdf(z) for m, v in zip(agg.mu, agg.log_var)])
    np.testing.assert_allclose(M.aggregate_posterior_log_density(agg, z), np.log(comps.mean(0)), rtol=1e-12)
    # chunking does not change the answer
    np.testing.assert_allclose(M.aggregate_posterior_log_density(agg, z, chunk=10), np.log(comps.mean(0)), rtol=1e-12)
    assert np.ndim(M.aggregate_posterior_log_density(agg, z[0])) == 0


def test_aggregate_std_matches_sampling():
    rng = np.random.default_rng(2)
    agg = M.AggregatePosterior(rng.normal(size=(30, 2)) * [1.0, 3.0], np.full((30, 2), -1.0))
    draws = agg.sample(200_000, np.random.default_rng(3))
    np.testing.assert_allclose(agg.std(), draws.std(0), rtol=0.01)


def test_skl_closed_form_for_scaled_gaussian():
    # q = N(0, 4I) against p = N(0, I): per dim KL(p||q) + KL(q||p) = 1/8 + 2 - 1 = 1.125
    model, params = small_model()
    agg = M.AggregatePosterior(np.zeros((1, 2)), np.full((1, 2), np.log(4.0)))
    est = M.skl(model, params, None, n=20000, seed=0, agg=agg)
    assert abs(est.value - 2.25) < 3 * est.stderr
    assert est.n == 20000 and est.seed == 0


def test_skl_zero_when_posterior_equals_prior():
    model, params = small_model()
    agg = M.AggregatePosterior(np.zeros((1, 2)), np.zeros((1, 2)))
    assert M.skl(model, params, None, n=100, agg=agg).value == pytest.approx(0.0, abs=1e-12)


def test_skl_is_seeded_and_stderr_scales():
    model, params = small_model(seed=1)
    data = _data()
    a = M.skl(model, params, data, n=500, seed=4)
    assert a == M.skl(model, params, data, n=500, seed=4)
    b = M.skl(model, params, data, n=5000, seed=4)
    assert a.stderr / b.stderr == pytest.approx(np.sqrt(10), rel=0.25)


def test_leakage_vanishes_when_posterior_is_the_prior():
    model, params = small_model()
    agg = M.AggregatePosterior(np.zeros((1, 2)), np.zeros((1, 2)))
    draws = M.leakage_draws(model, params, None, 2000, seed=0, agg=agg)
    for tau in (-8.0, -4.0, -2.0):
        assert draws.score(tau).value == pytest.approx(0.0, abs=1e-12)


def test_leakage_flags_are_nested_and_minus_infinity_is_zero():
    model, params = small_model("decoupled", seed=2)
    draws = M.leakage_draws(model, params, _data(), 3000, seed=1)
    taus = [-12.0, -8.0, -5.0, -3.0, -1.0]
    for lo, hi in zip(taus, taus[1:]):
        assert np.all(draws.flagged(hi)[draws.flagged(lo)])
        assert np.all(draws.flagged(hi, "prior")[draws.flagged(lo, "prior")])
    assert draws.score(-np.inf).value == 0.0
    with pytest.raises(ValueError):
        draws.flagged(0.0, "posterior")


def test_leakage_score_by_hand():
    model, params = small_model("decoupled", seed=3)
    data = _data()
    draws = M.leakage_draws(model, params, data, 500, seed=2)
    s = np.where(draws.log_base < -3.0, draws.log_q - draws.log_base, 0.0)
    assert M.leakage_score(model, params, data, -3.0, n=500, seed=2).value == pytest.approx(s.mean(), rel=1e-14)
    curve = M.leakage_curve(model, params, data, [-3.0, -2.0], n=500, seed=2)
    assert curve[-3.0].value == pytest.approx(s.mean(), rel=1e-14)


@pytest.mark.parametrize("ranker", [M.low_posterior_samples, M.high_posterior_samples])
def test_ranked_samples_against_full_sort(ranker):
    model, params = small_model("decoupled", seed=4)
    data = _data()
    ranked = ranker(model, params, data, pool=300, k=25, seed=5)
    full = ranker(model, params, data, pool=300, k=300, seed=5)
    assert len(ranked.points) == 25
    assert np.all(np.diff(full.scores) >= 0)
    np.testing.assert_array_equal(ranked.scores, full.scores[:25])
    assert ranked.scores.max() <= full.scores[25:].min()
    with pytest.raises(ValueError):
        ranker(model, params, data, pool=10, k=11)


def test_low_posterior_scores_are_aggregate_log_density():
    model, params = small_model(seed=5)
    data = _data()
    agg = M.AggregatePosterior.from_model(model, params, data)
    ranked = M.low_posterior_samples(model, params, data, 50, 5, seed=1, agg=agg)
    np.testing.assert_allclose(ranked.scores, M.aggregate_posterior_log_density(agg, ranked.points))


def test_nearest_distance_brute_force():
    rng = np.random.default_rng(6)
    p, r = rng.normal(size=(30, 2)), rng.normal(size=(17, 2))
    ref = np.min(np.linalg.norm(p[:, None] - r[None], axis=-1), axis=1)
    np.testing.assert_allclose(M.nearest_distance(p, r), ref, rtol=1e-13)


def test_sample_quality_mmd_is_seeded():
    model, params = small_model("decoupled", seed=7)
    held = _data(50, seed=8)
    a = M.sample_quality_mmd(model, params, held, n=200, seed=3)
    assert a == M.sample_quality_mmd(model, params, held, n=200, seed=3)
    assert a >= 0.0
    with pytest.raises(ValueError):
        M.sample_quality_mmd(model, params, np.zeros((0, 2)))


def test_nll_is_chunk_independent_and_validates():
    model, params = small_model(seed=8)
    data = _data(6)
    full = M.nll_importance(model, params, data, n=50, seed=1)
    first = M.nll_importance(model, params, data[:3], n=50, seed=1)
    assert first.value == pytest.approx(
        np.mean([-M.log_marginal_importance(model, params, x, 50, M._rng(1, "nll", i)) for i, x in enumerate(data[:3])])
    )
    assert np.isfinite(full.value) and full.stderr > 0
    with pytest.raises(ValueError):
        M.nll_importance(model, params, np.zeros((0, 2)))
