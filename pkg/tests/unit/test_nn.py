"""
Tests for the network building blocks and their backward passes.
"""

import numpy as np
import pytest

from wni_trajgen.config import GdmSection
from wni_trajgen.errors import ConfigurationError, NumericalError
from wni_trajgen.gdm import AmlpNet
from wni_trajgen.nn import (
    Adam,
    DenseLayer,
    Mlp,
    MultiHeadAttention,
    Parameter,
    grad_check,
    load_into,
    mha_forward,
    mlp_forward_backward,
    save_checkpoint,
    softmax,
    time_embed,
)


def _naive_attention(query, keyval, layer):
    heads = []
    for h in range(layer.heads):
        q = query @ layer.w_q[h].value.T
        k = keyval @ layer.w_k[h].value.T
        v = keyval @ layer.w_v[h].value.T
        rows = []
        for qi in q:
            scores = np.array([qi @ kj for kj in k]) / np.sqrt(layer.head_dim)
            weights = np.exp(scores - scores.max())
            weights /= weights.sum()
            rows.append(sum(w * vj for w, vj in zip(weights, v)))
        heads.append(np.array(rows))
    return np.concatenate(heads, axis=1) @ layer.w_o.value.T


def test_attention_matches_naive_loop(rng):
    """Vectorized attention agrees with a per-head, per-row loop."""
    layer = MultiHeadAttention(8, 8, heads=2, head_dim=4, rng=rng)
    query = rng.standard_normal((3, 8))
    keyval = rng.standard_normal((5, 8))

    out = mha_forward(query, keyval, layer)

    assert out.shape == (3, 8)
    np.testing.assert_allclose(out, _naive_attention(query, keyval, layer), atol=1e-10)


def test_attention_single_key_row(rng):
    """With one key row every query attends to the same projected value."""
    layer = MultiHeadAttention(6, 4, heads=3, head_dim=2, rng=rng)
    query = rng.standard_normal((4, 6))
    keyval = rng.standard_normal((1, 4))

    out = mha_forward(query, keyval, layer)

    values = np.concatenate([layer.w_v[h].value @ keyval[0] for h in range(3)])
    expected = layer.w_o.value @ values
    for row in out:
        np.testing.assert_allclose(row, expected, atol=1e-12)


def test_attention_equal_logits_average_values(rng):
    """Zeroed key projections give uniform weights, so heads return the mean value."""
    layer = MultiHeadAttention(4, 4, heads=1, head_dim=4, rng=rng)
    layer.w_k[0].value[...] = 0.0
    keyval = rng.standard_normal((2, 4))

    out = mha_forward(rng.standard_normal((1, 4)), keyval, layer)

    mean_value = layer.w_v[0].value @ keyval.mean(axis=0)
    np.testing.assert_allclose(out[0], layer.w_o.value @ mean_value, atol=1e-12)


def test_attention_ignores_key_row_order(rng):
    """Permuting the key/value rows leaves every output row unchanged."""
    layer = MultiHeadAttention(8, 6, heads=2, head_dim=4, rng=rng)
    query = rng.standard_normal((3, 8))
    keyval = rng.standard_normal((7, 6))
    order = rng.permutation(7)

    np.testing.assert_allclose(
        mha_forward(query, keyval[order], layer), mha_forward(query, keyval, layer), atol=1e-12
    )


def test_attention_permutes_with_query_rows(rng):
    """Permuting the query rows permutes the output rows the same way."""
    layer = MultiHeadAttention(8, 6, heads=2, head_dim=4, rng=rng)
    query = rng.standard_normal((5, 8))
    keyval = rng.standard_normal((4, 6))
    order = rng.permutation(5)

    expected = mha_forward(query, keyval, layer)[order]
    np.testing.assert_allclose(mha_forward(query[order], keyval, layer), expected, atol=1e-12)


def test_attention_shape_mismatch(rng):
    """A key width that does not match W_K is a configuration error."""
    layer = MultiHeadAttention(8, 8, heads=2, head_dim=4, rng=rng)
    with pytest.raises(ConfigurationError):
        mha_forward(np.zeros((2, 8)), np.zeros((3, 5)), layer)


def test_softmax_is_shift_invariant():
    """Adding a constant to every score leaves the softmax unchanged."""
    scores = np.array([[1.0, 2.0, 3.0]])
    np.testing.assert_allclose(softmax(scores), softmax(scores + 1000.0))
    assert softmax(scores).sum() == pytest.approx(1.0)


def test_identity_layer_passes_input_through(rng):
    """Identity activation with an identity weight and zero bias is a no-op."""
    layer = DenseLayer(3, 3, "identity", rng)
    layer.weight.value[...] = np.eye(3)
    net = Mlp([layer])
    x = rng.standard_normal((5, 3))

    np.testing.assert_allclose(net(x), x)


def test_dead_relu_has_zero_gradients(rng):
    """All-negative pre-activations give zero output and zero weight gradients."""
    layer = DenseLayer(3, 2, "relu", rng)
    layer.weight.value[...] = -np.abs(layer.weight.value)
    layer.bias.value[...] = -1.0
    net = Mlp([layer])

    out, _ = mlp_forward_backward(net, np.array([1.0, 2.0, 3.0]), np.ones(2))

    assert np.all(out == 0.0)
    assert np.all(layer.weight.grad == 0.0)
    assert np.all(layer.bias.grad == 0.0)


def test_tanh_input_gradient_matches_finite_differences(rng):
    """Analytic input gradient of a 2-layer tanh net matches central differences."""
    net = Mlp.build([4, 6, 3], rng, hidden_activation="tanh", output_activation="tanh")
    x = rng.standard_normal(4)
    upstream = rng.standard_normal(3)
    h = 1e-5

    _, input_grad = mlp_forward_backward(net, x, upstream)

    numeric = np.zeros_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = h
        numeric[i] = (upstream @ net(x + step) - upstream @ net(x - step)) / (2 * h)
    rel = np.abs(input_grad - numeric) / np.maximum(np.abs(input_grad) + np.abs(numeric), 1e-6)
    assert rel.max() < 1e-4


def test_non_finite_activation_names_layer():
    """Overflowing activations raise a numerical error naming the layer."""
    layer = DenseLayer(1, 1, "identity")
    layer.weight.value[...] = np.inf
    with pytest.raises(NumericalError) as exc_info:
        Mlp([layer])(np.ones((1, 1)))
    assert exc_info.value.context["layer_index"] == 0


def test_mlp_widths_must_chain(rng):
    """Layers whose widths do not chain are rejected."""
    with pytest.raises(ConfigurationError):
        Mlp([DenseLayer(2, 3, rng=rng), DenseLayer(4, 1, rng=rng)])


def test_adam_zero_gradient_leaves_parameters():
    """A zero gradient moves nothing but still counts a step."""
    param = Parameter(np.array([1.0, -2.0]))
    optimizer = Adam([param], learning_rate=0.1)

    optimizer.step()

    np.testing.assert_array_equal(param.value, [1.0, -2.0])
    assert optimizer.state.step == 1


def test_adam_first_and_second_steps():
    """Bias correction makes early updates about one learning rate in size."""
    param = Parameter(np.array([0.0]))
    optimizer = Adam([param], learning_rate=0.01)

    param.grad[...] = 0.5
    optimizer.step()
    first = -param.value[0]
    assert first == pytest.approx(0.01, rel=1e-5)
    assert param.grad[0] == 0.0

    param.grad[...] = 0.5
    before = param.value[0]
    optimizer.step()
    second = before - param.value[0]
    assert 0.005 <= second <= 0.015


def test_time_embedding_probe_values():
    """Step 0 embeds to alternating sin/cos of zero."""
    np.testing.assert_allclose(time_embed(0, 4), [0.0, 1.0, 0.0, 1.0])
    np.testing.assert_array_equal(time_embed(3, 8), time_embed(3, 8))
    assert np.linalg.norm(time_embed(1, 16) - time_embed(2, 16)) > 0


def test_time_embedding_odd_dimension():
    """Odd embedding widths are rejected."""
    with pytest.raises(ConfigurationError):
        time_embed(1, 5)


def test_grad_check_linear_mse(rng):
    """A linear net under MSE passes a tight gradient check."""
    net = Mlp.build([3, 2], rng, output_activation="identity")
    x = rng.standard_normal((6, 3))
    target = rng.standard_normal((6, 2))

    def objective(with_grad):
        out, caches = net.forward(x)
        residual = out - target
        if with_grad:
            net.backward(caches, 2.0 * residual / residual.size)
        return float(np.mean(residual**2))

    report = grad_check(net.named_parameters(), objective, tolerance=1e-6)

    assert report.passed
    assert report.checked == net.num_parameters()


def test_grad_check_attention_inputs_and_weights(rng):
    """Attention gradients for weights and both inputs match central differences."""
    layer = MultiHeadAttention(5, 6, heads=2, head_dim=3, rng=rng)
    query = Parameter(rng.standard_normal((2, 1, 5)))
    keyval = Parameter(rng.standard_normal((2, 4, 6)))
    weights = rng.standard_normal((2, 1, 5))

    def objective(with_grad):
        out, cache = layer.forward(query.value, keyval.value)
        if with_grad:
            d_query, d_keyval = layer.backward(cache, weights)
            query.grad += d_query
            keyval.grad += d_keyval
        return float(np.sum(out * weights))

    params = {"query": query, "keyval": keyval, **layer.named_parameters()}
    report = grad_check(params, objective)

    assert report.passed, report


def test_grad_check_amlp_block():
    """The attention-augmented MLP passes a gradient check."""
    config = GdmSection(hidden_dim=8, heads=2, head_dim=3, wni_dim=4, time_dim=4, layers=3)
    rng = np.random.default_rng(7)
    net = AmlpNet(target_dim=3, arity=2, wni_width=8, config=config, rng=rng)
    x_t = rng.standard_normal((2, 3))
    cond = [rng.standard_normal((2, 3)), rng.standard_normal((2, 3))]
    wni = rng.standard_normal((2, 4, 8))
    t = np.array([1, 3])
    weights = rng.standard_normal((2, 3))

    def objective(with_grad):
        out, cache = net.forward(x_t, t, wni, cond)
        if with_grad:
            net.backward(cache, weights)
        return float(np.sum(out * weights))

    report = grad_check(
        net.named_parameters(),
        objective,
        denominator_floor=1e-4,
        max_entries=8,
        rng=np.random.default_rng(0),
    )

    assert report.passed, report


def test_grad_check_flags_corrupted_backward(rng):
    """Doubling the analytic gradient is caught."""
    net = Mlp.build([3, 2], rng, output_activation="identity")
    x = rng.standard_normal((4, 3))

    def objective(with_grad):
        out, caches = net.forward(x)
        if with_grad:
            net.backward(caches, 2.0 * np.ones_like(out))
        return float(np.sum(out))

    report = grad_check(net.named_parameters(), objective)

    assert not report.passed
    assert report.max_relative_error > 0.3


def test_soft_update_rates(rng):
    """Rate 1 copies the source, rate 0 keeps the target."""
    source = Mlp.build([3, 4, 2], rng)
    target = Mlp.build([3, 4, 2], rng)
    before = target.state_dict()

    target.soft_update_from(source, 0.0)
    for name, value in target.state_dict().items():
        np.testing.assert_array_equal(value, before[name])

    target.soft_update_from(source, 1.0)
    for name, value in target.state_dict().items():
        np.testing.assert_array_equal(value, source.state_dict()[name])

    with pytest.raises(ConfigurationError):
        target.soft_update_from(source, 1.5)


def test_checkpoint_round_trip(tmp_path, rng):
    """Saved parameters load back bit-for-bit."""
    net = Mlp.build([3, 5, 2], rng)
    path = save_checkpoint(tmp_path / "net.json", net, seed=4, config_hash="abc", step_count=9)
    restored = Mlp.build([3, 5, 2], np.random.default_rng(99))

    metadata = load_into(restored, path)

    assert metadata["step_count"] == 9
    assert metadata["config_hash"] == "abc"
    for name, value in restored.state_dict().items():
        np.testing.assert_array_equal(value, net.state_dict()[name])
