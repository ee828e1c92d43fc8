import numpy as np
import pytest

from dpvae import diffcore as dc
from dpvae.netlib import DenseLayer, Mlp, ShapeError, init_params, mlp_forward, zero_params


def _net_and_params(sizes=(3, 5, 2), hidden="relu", seed=0):
    net = Mlp.build("net", sizes, hidden=hidden)
    return net, init_params(net, dc.ParamStore(), seed)


def test_build_names_and_activations():
    net = Mlp.build("enc", (2, 100, 50, 4))
    assert [layer.name for layer in net.layers] == ["enc.0", "enc.1", "enc.2"]
    assert [layer.activation for layer in net.layers] == ["relu", "relu", "linear"]
    assert net.param_names()[:2] == ["enc.0.W", "enc.0.b"]
    assert (net.n_in, net.n_out) == (2, 4)


def test_mismatched_layers_are_rejected():
    with pytest.raises(ShapeError):
        Mlp((DenseLayer("a", 2, 3), DenseLayer("b", 4, 1)))
    with pytest.raises(ValueError):
        DenseLayer("a", 2, 3, activation="swish")


def test_forward_matches_numpy_reference():
    net, params = _net_and_params()
    x = np.random.default_rng(1).normal(size=(7, 3))
    h = np.maximum(x @ params["net.0.W"].T + params["net.0.b"], 0.0)
    ref = h @ params["net.1.W"].T + params["net.1.b"]
    np.testing.assert_allclose(mlp_forward(net, params, x).value, ref, rtol=1e-14)


def test_single_vector_equals_batch_row():
    net, params = _net_and_params(hidden="leaky-relu")
    x = np.random.default_rng(2).normal(size=(4, 3))
    batch = mlp_forward(net, params, x).value
    for i in range(4):
        np.testing.assert_allclose(mlp_forward(net, params, x[i]).value, batch[i], rtol=1e-13)


def test_wrong_input_width_raises():
    net, params = _net_and_params()
    with pytest.raises(ShapeError):
        mlp_forward(net, params, np.zeros((2, 4)))


def test_init_is_seeded_with_glorot_bounds():
    net, p1 = _net_and_params(seed=5)
    _, p2 = _net_and_params(seed=5)
    for name in p1:
        np.testing.assert_array_equal(p1[name], p2[name])
    bound = np.sqrt(6.0 / (3 + 5))
    assert np.all(np.abs(p1["net.0.W"]) <= bound)
    assert p1["net.0.W"].shape == (5, 3)
    assert not np.any(p1["net.0.b"])


def test_zero_params_gives_zero_output():
    net, params = _net_and_params(hidden="tanh")
    zero_params(net, params)
    assert not np.any(mlp_forward(net, params, np.ones((3, 3))).value)


def test_mlp_gradient_check():
    net, params = _net_and_params(sizes=(3, 6, 6, 2), hidden="tanh", seed=3)
    x = np.random.default_rng(4).normal(size=(5, 3))
    assert dc.grad_check(lambda p: dc.sum_(dc.square(mlp_forward(net, p, x))), params) < 1e-7
