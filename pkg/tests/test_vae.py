import numpy as np
import pytest
from scipy.stats import multivariate_normal

from dpvae import diffcore as dc
from dpvae.flow import prior_log_density
from dpvae.netlib import ShapeError
from dpvae.vae import (
    GaussianPosterior,
    MonteCarloSpec,
    VaeModel,
    decode,
    encode,
    from_generation_space,
    gaussian_log_density,
    kl_decoupled,
    kl_decoupled_entropy_form,
    kl_standard,
    kl_term,
    log_prior,
    recon_log_likelihood,
    reparameterize,
    to_generation_space,
)

from conftest import small_model


def _posterior(rng, n=6, L=2):
    return GaussianPosterior(rng.normal(size=(n, L)), rng.normal(scale=0.5, size=(n, L)))


def test_build_shapes():
    model = VaeModel.build()
    assert [l.n_out for l in model.encoder.layers] == [100, 50, 4]
    assert [l.n_out for l in model.decoder.layers] == [50, 100, 2]
    assert model.prior is None and not model.decoupled
    dp = VaeModel.build(prior_mode="decoupled")
    assert dp.decoupled and len(dp.prior.blocks) == 4
    with pytest.raises(ValueError):
        VaeModel.build(prior_mode="vamp")


def test_same_seed_shares_encoder_decoder_across_modes():
    _, std = small_model("standard", seed=3)
    _, dp = small_model("decoupled", seed=3)
    for name in std:
        np.testing.assert_array_equal(std[name], dp[name])
    assert len(dp) > len(std)


def test_encode_splits_mean_and_log_variance():
    model, params = small_model()
    x = np.ones((3, 2))
    post = encode(model, params, x)
    assert post.mu.shape == (3, 2) and post.log_var.shape == (3, 2)
    assert post.latent_dim == 2


def test_reparameterize_formula():
    post = GaussianPosterior(np.array([[1.0, -1.0]]), np.array([[0.0, np.log(4.0)]]))
    z = reparameterize(post, np.array([[0.5, 0.5]]))
    np.testing.assert_allclose(dc.value_of(z), [[1.5, 0.0]])


def test_recon_log_likelihood_matches_scipy():
    rng = np.random.default_rng(0)
    x, m = rng.normal(size=(4, 2)), rng.normal(size=(4, 2))
    for s in (1.0, 0.1):
        ref = [multivariate_normal(mi, s * s * np.eye(2)).logpdf(xi) for mi, xi in zip(m, x)]
        np.testing.assert_allclose(dc.value_of(recon_log_likelihood(m, x, s)), ref, rtol=1e-12)


def test_kl_standard_closed_form_against_scalar_formula():
    post = GaussianPosterior(np.array([[0.3, -1.2]]), np.array([[np.log(0.5), np.log(2.0)]]))
    var = np.array([0.5, 2.0])
    ref = 0.5 * np.sum(np.array([0.09, 1.44]) + var - np.log(var) - 1.0)
    assert float(kl_standard(post).value[0]) == pytest.approx(ref, rel=1e-14)


def test_kl_standard_is_zero_at_the_prior():
    post = GaussianPosterior(np.zeros((2, 3)), np.zeros((2, 3)))
    np.testing.assert_array_equal(kl_standard(post).value, 0.0)


def test_decoupled_kl_forms_agree_on_shared_draws():
    model, params = small_model("decoupled", seed=1)
    post = _posterior(np.random.default_rng(1))
    mc = MonteCarloSpec(n_samples=7, seed=2)
    a = dc.value_of(kl_decoupled(post, model.prior, params, mc))
    b = dc.value_of(kl_decoupled_entropy_form(post, model.prior, params, mc))
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def test_identity_flow_kl_is_unbiased_for_closed_form():
    model, params = small_model("decoupled", identity_flow=True)
    post = _posterior(np.random.default_rng(5), n=3)
    mc = MonteCarloSpec(n_samples=20000, seed=0)
    est = dc.value_of(kl_decoupled(post, model.prior, params, mc))
    np.testing.assert_allclose(est, kl_standard(post).value, atol=0.05)


def test_decoupled_kl_matches_entropy_oracle():
    # -H(q) - E_q[log p(z)]: analytic Gaussian entropy, prior term averaged over the draws
    model, params = small_model("decoupled", seed=4)
    rng = np.random.default_rng(9)
    post = _posterior(rng, n=2)
    eps = rng.standard_normal((50, 2, 2))
    z = post.mu + np.exp(0.5 * post.log_var) * eps
    entropy = np.sum(0.5 * (1.0 + np.log(2 * np.pi) + post.log_var), axis=-1)
    log_p = prior_log_density(model.prior, params, z.reshape(-1, 2)).value.reshape(50, 2)
    ref = -entropy - np.mean(log_p, axis=0)
    np.testing.assert_allclose(dc.value_of(kl_decoupled(post, model.prior, params, eps)), ref, rtol=1e-12)


def test_kl_term_and_log_prior_follow_mode():
    rng = np.random.default_rng(2)
    post = _posterior(rng)
    model, params = small_model("standard")
    np.testing.assert_array_equal(kl_term(model, params, post, rng.normal(size=(6, 2))).value, kl_standard(post).value)
    z = rng.normal(size=(4, 2))
    np.testing.assert_allclose(log_prior(model, params, z).value, multivariate_normal(np.zeros(2)).logpdf(z))


def test_generation_space_maps_are_inverse():
    model, params = small_model("decoupled", seed=6)
    z = np.random.default_rng(3).normal(size=(5, 2))
    back = from_generation_space(model, params, to_generation_space(model, params, z))
    np.testing.assert_allclose(dc.value_of(back), z, atol=1e-12)
    std_model, std_params = small_model("standard")
    assert to_generation_space(std_model, std_params, z) is z


def test_decode_checks_latent_width():
    model, params = small_model()
    with pytest.raises(ShapeError):
        decode(model, params, np.zeros((2, 3)))


def test_gaussian_log_density_matches_scipy():
    rng = np.random.default_rng(4)
    z, mu, lv = rng.normal(size=3), rng.normal(size=3), rng.normal(size=3)
    ref = multivariate_normal(mu, np.diag(np.exp(lv))).logpdf(z)
    assert gaussian_log_density(z, mu, lv) == pytest.approx(ref, rel=1e-13)


def test_monte_carlo_spec_shapes_and_validation():
    assert MonteCarloSpec(3, 0).draw((4, 2)).shape == (3, 4, 2)
    with pytest.raises(ValueError):
        MonteCarloSpec(0)
