import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpvae import diffcore as dc
from dpvae.flow import (
    DecoupledPrior,
    checkerboard,
    coupling_forward,
    coupling_inverse,
    flow_forward,
    flow_inverse,
    prior_log_density,
    std_normal_log_density,
)
from dpvae.netlib import ShapeError


def _prior(L=2, seed=0, blocks=4, width=16, scale=1.0):
    prior = DecoupledPrior.build(L, blocks, width)
    params = prior.init_params(dc.ParamStore(), seed)
    for name in params:
        params[name] = params[name] * scale
    return prior, params


def _fd_jacobian(prior, params, z, h=1e-6):
    L = len(z)
    J = np.empty((L, L))
    for j in range(L):
        dz = np.zeros(L)
        dz[j] = h
        hi = flow_forward(prior, params, z + dz)[0].value
        lo = flow_forward(prior, params, z - dz)[0].value
        J[:, j] = (hi - lo) / (2 * h)
    return J


def test_checkerboard_masks_alternate():
    np.testing.assert_array_equal(checkerboard(5, 0), [1, 0, 1, 0, 1])
    np.testing.assert_array_equal(checkerboard(5, 1), [0, 1, 0, 1, 0])


def test_build_layout():
    prior = DecoupledPrior.build(3)
    assert len(prior.blocks) == 4
    np.testing.assert_array_equal(prior.blocks[1].mask, [0, 1, 0])
    assert prior.blocks[0].scale_net.param_names()[0] == "flow.0.s.0.W"
    assert [layer.activation for layer in prior.blocks[0].scale_net.layers] == ["leaky-relu", "leaky-relu", "linear"]
    with pytest.raises(ValueError):
        DecoupledPrior.build(1)


def test_masked_coordinates_pass_through():
    prior, params = _prior(L=4)
    z = np.random.default_rng(0).normal(size=(6, 4))
    blk = prior.blocks[0]
    y = coupling_forward(blk, params, z).value
    np.testing.assert_array_equal(y[:, blk.mask == 1], z[:, blk.mask == 1])


def test_identity_flow_is_identity():
    prior, params = _prior()
    prior.set_identity(params)
    z = np.random.default_rng(1).normal(size=(10, 2))
    z0, log_det = flow_forward(prior, params, z)
    np.testing.assert_array_equal(z0.value, z)
    np.testing.assert_array_equal(dc.value_of(log_det), 0.0)
    np.testing.assert_allclose(prior_log_density(prior, params, z).value, std_normal_log_density(z).value)


def test_empty_stack_is_identity():
    prior = DecoupledPrior(3)
    z = np.ones((2, 3))
    np.testing.assert_array_equal(flow_inverse(prior, {}, z), z)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 5))
def test_round_trip(seed, L):
    prior, params = _prior(L=L, seed=seed, width=8)
    z = np.random.default_rng(seed).normal(size=(5, L)) * 2
    back = flow_inverse(prior, params, flow_forward(prior, params, z)[0]).value
    np.testing.assert_allclose(back, z, atol=1e-10)
    blk = prior.blocks[0]
    np.testing.assert_allclose(coupling_inverse(blk, params, coupling_forward(blk, params, z)).value, z, atol=1e-12)


def test_scale_is_bounded_by_s_max():
    prior, params = _prior(L=2, blocks=1, scale=50.0)
    z = np.random.default_rng(2).normal(size=(200, 2)) * 10
    _, log_det = coupling_forward(prior.blocks[0], params, z, with_log_det=True)
    assert np.max(np.abs(log_det.value)) <= prior.blocks[0].s_max + 1e-12


@pytest.mark.parametrize("L", [2, 3, 5])
def test_log_det_matches_fd_jacobian(L):
    prior, params = _prior(L=L, seed=L)
    for z in np.random.default_rng(L).normal(size=(5, L)):
        _, log_det = flow_forward(prior, params, z)
        _, ref = np.linalg.slogdet(_fd_jacobian(prior, params, z))
        assert float(log_det.value) == pytest.approx(ref, abs=1e-6)


def test_density_integrates_to_one_on_grid():
    prior, params = _prior(seed=4)
    g = np.linspace(-9, 9, 601)
    zz = np.stack(np.meshgrid(g, g), -1).reshape(-1, 2)
    dens = np.exp(prior_log_density(prior, params, zz).value)
    assert dens.sum() * (g[1] - g[0]) ** 2 == pytest.approx(1.0, abs=0.01)


def test_flow_parameters_get_gradients():
    prior, params = _prior(L=2, blocks=2, width=4, seed=9)
    z = np.random.default_rng(3).normal(size=(4, 2))
    err = dc.grad_check(lambda p: dc.sum_(prior_log_density(prior, p, z)), params)
    assert err < 1e-6


def test_dimension_mismatch_raises():
    prior, params = _prior(L=2)
    with pytest.raises(ShapeError):
        flow_forward(prior, params, np.zeros((3, 4)))
    with pytest.raises(ShapeError):
        flow_inverse(prior, params, np.zeros(3))
