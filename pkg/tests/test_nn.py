import numpy as np
import pytest

from srlgan import nn as NN


def central_diff_grads(net, loss_fn, step=1e-5):
    """Finite-difference oracle: perturb every parameter of a cloned
    parameter vector and difference the scalar loss."""
    theta = net.param_vector()
    grads = np.zeros_like(theta)
    for k in range(theta.size):
        for sign, slot in ((+1, 0), (-1, 1)):
            bumped = theta.copy()
            bumped[k] += sign * step
            net.set_param_vector(bumped)
            if slot == 0:
                up = loss_fn()
            else:
                down = loss_fn()
        grads[k] = (up - down) / (2 * step)
    net.set_param_vector(theta)
    return grads


def rel_err(a, b):
    denom = np.maximum(np.abs(a) + np.abs(b), 1e-8)
    return np.max(np.abs(a - b) / denom)


def test_linear_identity():
    rng = np.random.default_rng(0)
    layer = NN.Linear(3, 3, rng)
    layer.weight = np.eye(3)
    layer.bias = np.zeros(3)
    x = rng.normal(size=(4, 3))
    assert np.allclose(layer.forward(x), x)


def test_linear_zero_weight_constant():
    rng = np.random.default_rng(0)
    layer = NN.Linear(2, 3, rng)
    layer.weight = np.zeros((2, 3))
    layer.bias = np.array([1.0, 2.0, 3.0])
    out = layer.forward(np.ones((5, 2)))
    assert np.allclose(out, np.tile([1.0, 2.0, 3.0], (5, 1)))


def test_linear_hand_arithmetic():
    rng = np.random.default_rng(0)
    layer = NN.Linear(2, 2, rng)
    # out = W^T x for W stored (in, out): columns are output units
    layer.weight = np.array([[1.0, 3.0], [2.0, 4.0]])
    layer.bias = np.zeros(2)
    out = layer.forward(np.array([[1.0, 1.0]]))
    assert np.allclose(out, [[3.0, 7.0]])


def test_linear_shape_mismatch():
    layer = NN.Linear(3, 2, np.random.default_rng(0))
    with pytest.raises(ValueError):
        layer.forward(np.ones((1, 4)))


def test_activations():
    s = NN.Sigmoid()
    assert s.forward(np.array([[0.0]]))[0, 0] == 0.5
    lr = NN.LeakyReLU(0.01)
    out = lr.forward(np.array([[-2.0, 3.0]]))
    assert out[0, 0] == pytest.approx(-0.02)
    assert out[0, 1] == 3.0


def test_dropout_eval_identity():
    d = NN.Dropout(0.4)
    x = np.random.default_rng(0).normal(size=(3, 5))
    assert np.array_equal(d.forward(x, training=False), x)


def test_dropout_train_scales_survivors():
    d = NN.Dropout(0.4)
    rng = np.random.default_rng(0)
    x = np.ones((200, 50))
    y = d.forward(x, training=True, rng=rng)
    kept = y[y != 0]
    assert np.allclose(kept, 1.0 / 0.6)
    # survival rate near 1 - rate
    assert abs((y != 0).mean() - 0.6) < 0.02


def test_backward_before_forward_raises():
    layer = NN.Linear(2, 2, np.random.default_rng(0))
    with pytest.raises(RuntimeError):
        layer.backward(np.ones((1, 2)))


def test_single_linear_layer_gradient():
    # L = sum(out) for one linear layer: dL/dW = column of x sums
    rng = np.random.default_rng(1)
    net = NN.MLP([3, 2], rng)
    net.layers = net.layers[:1]  # strip the sigmoid
    x = rng.normal(size=(1, 3))
    net.zero_grad()
    out = net.forward(x)
    net.backward(np.ones_like(out))
    assert np.allclose(net.layers[0].grad_weight, np.outer(x[0], np.ones(2)))
    assert np.allclose(net.layers[0].grad_bias, 1.0)


def test_zero_grad_gives_zero_param_grads():
    net = NN.MLP([3, 4, 2], np.random.default_rng(0))
    net.forward(np.ones((2, 3)))
    net.backward(np.ones((2, 2)))
    net.zero_grad()
    for _, _, grad in net.params():
        assert np.all(grad == 0)


def test_mlp_gradients_match_finite_differences():
    rng = np.random.default_rng(7)
    for trial in range(5):
        sizes = [3, 5, 5, 2]
        net = NN.MLP(sizes, rng)
        x = rng.normal(size=(3, sizes[0]))
        target = rng.uniform(0.1, 0.9, size=(3, sizes[-1]))

        def loss_fn():
            out = net.forward(x)
            return float(np.sum((out - target) ** 2))

        net.zero_grad()
        out = net.forward(x)
        net.backward(2.0 * (out - target))
        analytic = np.concatenate([g.ravel() for _, _, g in net.params()])
        numeric = central_diff_grads(net, loss_fn)
        assert rel_err(analytic, numeric) < 1e-4


def test_input_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    net = NN.MLP([4, 6, 3], rng)
    x = rng.normal(size=(2, 4))
    target = rng.uniform(0.2, 0.8, size=(2, 3))
    net.zero_grad()
    out = net.forward(x)
    input_grad = net.backward(2.0 * (out - target))

    step = 1e-6
    numeric = np.zeros_like(x)
    for idx in np.ndindex(*x.shape):
        for sign in (+1, -1):
            xb = x.copy()
            xb[idx] += sign * step
            val = float(np.sum((net.forward(xb) - target) ** 2))
            if sign > 0:
                up = val
            else:
                down = val
        numeric[idx] = (up - down) / (2 * step)
    assert rel_err(input_grad, numeric) < 1e-4


def test_adam_zero_grad_no_update():
    net = NN.MLP([2, 3], np.random.default_rng(0))
    before = net.param_vector()
    opt = NN.Adam(net, lr=0.1)
    net.zero_grad()
    opt.step()
    assert np.array_equal(net.param_vector(), before)


def test_adam_first_step_magnitude():
    # Constant gradient: the bias-corrected first step has magnitude ~lr.
    net = NN.MLP([1, 1], np.random.default_rng(0))
    net.layers = net.layers[:1]
    before = net.param_vector()
    opt = NN.Adam(net, lr=0.01)
    net.layers[0].grad_weight[...] = 3.0
    net.layers[0].grad_bias[...] = 3.0
    opt.step()
    delta = net.param_vector() - before
    assert np.allclose(np.abs(delta), 0.01, rtol=1e-4)


def test_adam_identical_grads_identical_updates():
    net = NN.MLP([2, 2], np.random.default_rng(5))
    net.layers = net.layers[:1]
    net.layers[0].weight[...] = 0.5
    opt = NN.Adam(net, lr=0.02)
    net.layers[0].grad_weight[...] = 1.7
    net.layers[0].grad_bias[...] = 1.7
    opt.step()
    w = net.layers[0].weight
    assert np.allclose(w, w[0, 0])


def test_adam_nonfinite_grad_raises():
    net = NN.MLP([2, 2], np.random.default_rng(0))
    opt = NN.Adam(net, lr=0.01)
    net.layers[0].grad_weight[0, 0] = np.nan
    with pytest.raises(NN.TrainingError):
        opt.step()


def test_forward_deterministic_given_seed():
    a = NN.MLP([3, 4, 2], np.random.default_rng(9), dropout=0.3)
    b = NN.MLP([3, 4, 2], np.random.default_rng(9), dropout=0.3)
    x = np.random.default_rng(1).normal(size=(5, 3))
    r1, r2 = np.random.default_rng(4), np.random.default_rng(4)
    assert np.array_equal(a.forward(x, training=True, rng=r1),
                          b.forward(x, training=True, rng=r2))


def test_checkpoint_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(11)
    net = NN.MLP([3, 4, 2], rng, dropout=0.2)
    opt = NN.Adam(net, lr=0.005)
    x = rng.normal(size=(4, 3))
    for _ in range(3):
        net.zero_grad()
        out = net.forward(x, training=True, rng=rng)
        net.backward(out - 0.5)
        opt.step()

    path = tmp_path / "ckpt.npz"
    NN.save_checkpoint(path, {"net": net}, {"net": opt}, rng,
                       meta={"step": 3}, extra_arrays={"rho": np.ones(4)})
    nets, opts, rng2, meta, extra = NN.load_checkpoint(path)
    net2, opt2 = nets["net"], opts["net"]
    assert np.array_equal(net.param_vector(), net2.param_vector())
    assert opt2.t == opt.t and opt2.lr == opt.lr
    for name in opt.m:
        assert np.array_equal(opt.m[name], opt2.m[name])
        assert np.array_equal(opt.v[name], opt2.v[name])
    assert meta == {"step": 3}
    assert np.array_equal(extra["rho"], np.ones(4))
    # restored RNG continues the same stream
    assert rng.random() == rng2.random()
