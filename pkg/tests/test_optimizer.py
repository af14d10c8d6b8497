import numpy as np
import pytest

from app.models.training import TrainConfig
from app.services.optimizer import Adam, adam_step
from app.services.preference_net import init_params
from app.utils.errors import DivergenceError


def _constant_grads(net, value):
    return {name: np.full_like(p, value) for name, p in net.params.items()}


def test_zero_gradients_no_decay_leave_params_unchanged(tiny_net):
    before = tiny_net.state()
    adam_step(tiny_net, _constant_grads(tiny_net, 0.0), TrainConfig(weight_decay=0.0), step_count=1)
    for name, value in tiny_net.params.items():
        assert np.array_equal(value, before[name])


def test_first_step_closed_form(tiny_net):
    config = TrainConfig(learning_rate=0.005, weight_decay=0.0)
    before = tiny_net.state()
    adam_step(tiny_net, _constant_grads(tiny_net, 1.0), config, step_count=1)
    expected_delta = -0.005 / (1.0 + 1e-8)
    for name, value in tiny_net.params.items():
        np.testing.assert_allclose(value - before[name], expected_delta, rtol=1e-9)


def test_two_steps_match_scalar_recurrence(tiny_net):
    config = TrainConfig(learning_rate=0.01, weight_decay=0.0)
    b1, b2, eps, lr = 0.9, 0.999, 1e-8, 0.01
    g = 0.3
    theta0 = tiny_net.params["head.bias"][0]

    optimizer = Adam(tiny_net, config)
    optimizer.step(_constant_grads(tiny_net, g))
    optimizer.step(_constant_grads(tiny_net, g))

    m = v = 0.0
    theta = theta0
    for t in (1, 2):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        theta -= lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
    assert tiny_net.params["head.bias"][0] == pytest.approx(theta, rel=1e-12)


def test_weight_decay_skips_batch_norm(tiny_net):
    config = TrainConfig(learning_rate=0.1, weight_decay=0.5)
    tiny_net.params["blocks.0.bn1.gamma"] = np.full(8, 2.0)
    weight = tiny_net.params["projection.weight"].copy()
    adam_step(tiny_net, _constant_grads(tiny_net, 0.0), config, step_count=1)
    np.testing.assert_array_equal(tiny_net.params["blocks.0.bn1.gamma"], np.full(8, 2.0))
    np.testing.assert_allclose(tiny_net.params["projection.weight"], weight * (1 - 0.1 * 0.5))


def test_non_finite_gradient_raises(tiny_net):
    grads = _constant_grads(tiny_net, 0.0)
    grads["head.weight"][0] = np.nan
    with pytest.raises(DivergenceError):
        Adam(tiny_net, TrainConfig()).step(grads)


def test_adam_step_rejects_bad_step_count():
    net = init_params(2, 2, 0, np.random.default_rng(0))
    with pytest.raises(ValueError):
        adam_step(net, _constant_grads(net, 0.0), TrainConfig(), step_count=0)
