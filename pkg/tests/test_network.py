import numpy as np
import pytest

from cubesolver import cube
from cubesolver import network as nn

from gradcheck import gradient_check, random_batch, tiny_config


def test_gradient_check_small_networks():
    errors = [gradient_check(seed) for seed in range(20)]
    assert max(errors) < 1e-4, errors


def test_layer_specs_and_parameter_count():
    cfg = nn.NetworkConfig(body_layer_sizes=[10, 8], value_head_sizes=[4], policy_head_sizes=[3])
    names = [s[0] for s in nn.layer_specs(cfg)]
    assert names == ["body.0", "body.1", "value.0", "value.out", "policy.0", "policy.out"]
    params = nn.init_params(cfg, 0)
    expected = 480 * 10 + 10 + 10 * 8 + 8 + 8 * 4 + 4 + 4 * 1 + 1 + 8 * 3 + 3 + 3 * 12 + 12
    assert params.num_parameters() == expected


def test_glorot_init_statistics():
    cfg = nn.NetworkConfig(body_layer_sizes=[512], value_head_sizes=[256], policy_head_sizes=[256])
    params = nn.init_params(cfg, 1)
    w = params.weights["body.0.W"]
    assert abs(w.std() - np.sqrt(2 / (480 + 512))) < 0.02 * np.sqrt(2 / (480 + 512))
    assert not params.weights["body.0.b"].any()


def test_init_is_seeded():
    a = nn.init_params(nn.DESK_NETWORK, 3)
    b = nn.init_params(nn.DESK_NETWORK, 3)
    c = nn.init_params(nn.DESK_NETWORK, 4)
    assert a.equal(b)
    assert not a.equal(c)


def test_forward_shapes_and_policy_simplex():
    params = nn.init_params(nn.DESK_NETWORK, 0)
    states = [cube.scramble(10, s)[0] for s in range(8)]
    x = cube.encode_batch(cube.as_array(states))
    pred = nn.forward(params, x)
    assert pred.value.shape == (8,)
    assert pred.policy.shape == (8, 12)
    assert np.allclose(pred.policy.sum(axis=1), 1.0)
    assert np.all(pred.policy > 0)
    single = nn.forward(params, cube.encode(states[0]))
    assert np.allclose(single.value[0], pred.value[0])


def test_sparse_forward_matches_dense():
    params = nn.init_params(nn.DESK_NETWORK, 2)
    arr = cube.as_array([cube.scramble(15, s)[0] for s in range(16)])
    dense = nn.forward(params, cube.encode_batch(arr))
    sparse = nn.forward_states(params, arr)
    assert np.allclose(dense.value, sparse.value, atol=1e-12)
    assert np.allclose(dense.policy, sparse.policy, atol=1e-12)


def test_elu_and_softmax():
    x = np.array([-50.0, -1.0, 0.0, 2.0])
    assert np.allclose(nn.elu(x), [np.expm1(-50.0), np.expm1(-1.0), 0.0, 2.0])
    p = nn.softmax(np.array([[1000.0, 1000.0, -1000.0]]))
    assert np.allclose(p, [[0.5, 0.5, 0.0]])


def test_loss_weights_are_normalized():
    rng = np.random.default_rng(0)
    cfg = tiny_config(rng)
    params = nn.init_params(cfg, 0)
    batch = random_batch(rng, 5, cfg.input_size)
    scaled = batch._replace(weight=batch.weight * 7.0)
    assert np.isclose(nn.loss_and_gradients(params, batch)[0], nn.loss_and_gradients(params, scaled)[0])


def test_loss_rejects_bad_batches():
    rng = np.random.default_rng(0)
    cfg = tiny_config(rng)
    params = nn.init_params(cfg, 0)
    batch = random_batch(rng, 3, cfg.input_size)
    with pytest.raises(ValueError):
        nn.loss_and_gradients(params, batch._replace(weight=np.array([1.0, 0.0, 1.0])))
    with pytest.raises(ValueError):
        nn.loss_and_gradients(params, nn.Batch(np.zeros((0, cfg.input_size)), np.zeros(0),
                                               np.zeros(0, int), np.zeros(0)))
    params.weights["value.out.W"][:] = np.nan
    with pytest.raises(nn.NonFiniteError):
        nn.loss_and_gradients(params, batch)


def test_rmsprop_reduces_loss_on_fixed_batch():
    rng = np.random.default_rng(1)
    cfg = tiny_config(rng)
    cfg.learning_rate = 1e-2
    params = nn.init_params(cfg, 1)
    batch = random_batch(rng, 16, cfg.input_size)
    first = nn.loss_and_gradients(params, batch)[0]
    for _ in range(200):
        _, g = nn.loss_and_gradients(params, batch)
        params = nn.rmsprop_step(params, g)
    assert nn.loss_and_gradients(params, batch)[0] < 0.5 * first


def test_rmsprop_update_formula():
    cfg = tiny_config()
    params = nn.init_params(cfg, 0)
    grads = {k: np.full_like(v, 0.5) for k, v in params.weights.items()}
    out = nn.rmsprop_step(params, grads)
    acc = (1 - cfg.rmsprop_decay) * 0.25
    step = cfg.learning_rate * 0.5 / np.sqrt(acc + cfg.rmsprop_epsilon)
    for k in params.weights:
        assert np.allclose(out.weights[k], params.weights[k] - step)
        assert np.allclose(out.accum[k], acc)
    assert not params.accum["body.0.W"].any()


def test_validate():
    nn.DESK_NETWORK.validate()
    nn.PAPER_NETWORK.validate()
    with pytest.raises(ValueError):
        nn.NetworkConfig(body_layer_sizes=[]).validate()
    with pytest.raises(ValueError):
        nn.NetworkConfig(input_size=7).validate()
    nn.NetworkConfig(input_size=7).validate(for_cube=False)


# --- checkpoints ----------------------------------------------------------------

def trained_params():
    rng = np.random.default_rng(2)
    params = nn.init_params(nn.DESK_NETWORK, 2)
    arr = cube.as_array([cube.scramble(5, s)[0] for s in range(8)])
    batch = nn.Batch(cube.encode_batch(arr), rng.uniform(-1, 1, 8), rng.integers(0, 12, 8), np.ones(8))
    _, g = nn.loss_and_gradients(params, batch)
    return nn.rmsprop_step(params, g)


def test_checkpoint_round_trip_is_bit_identical():
    params = trained_params()
    blob = nn.save_checkpoint(params, metadata={"iteration": 17, "note": "x"})
    back, cfg, meta = nn.load_checkpoint(blob)
    assert back.equal(params)
    assert cfg == params.config
    assert meta["iteration"] == 17
    assert meta["encoding_layout_version"] == cube.ENCODING_LAYOUT_VERSION
    assert nn.save_checkpoint(back, metadata=meta) == blob


def test_checkpoint_rejects_corruption():
    blob = nn.save_checkpoint(trained_params())
    with pytest.raises(nn.CheckpointTruncatedError):
        nn.load_checkpoint(blob[:-8])
    with pytest.raises(nn.CheckpointTruncatedError):
        nn.load_checkpoint(blob[:10])
    with pytest.raises(nn.CheckpointError):
        nn.load_checkpoint(b"XXXXXXXX" + blob[8:])
    with pytest.raises(nn.CheckpointVersionError):
        nn.load_checkpoint(blob, expected_layout=cube.ENCODING_LAYOUT_VERSION + 1)
    bumped = bytearray(blob)
    bumped[8] = nn.FORMAT_VERSION + 1
    with pytest.raises(nn.CheckpointVersionError):
        nn.load_checkpoint(bytes(bumped))
    with pytest.raises(nn.CheckpointShapeError):
        nn.load_checkpoint(blob + b"\0" * 8)


def test_weighted_gradient_is_weighted_sum_of_single_gradients():
    rng = np.random.default_rng(3)
    cfg = tiny_config(rng)
    params = nn.init_params(cfg, 3)
    batch = random_batch(rng, 2, cfg.input_size)._replace(weight=np.array([1.0, 1.0 / 3.0]))
    _, both = nn.loss_and_gradients(params, batch)
    singles = [nn.loss_and_gradients(params, nn.Batch(*(f[i:i + 1] for f in batch)))[1] for i in range(2)]
    w = batch.weight / batch.weight.sum()
    for k in both:
        assert np.allclose(both[k], w[0] * singles[0][k] + w[1] * singles[1][k])


def test_overfits_a_single_sample():
    cfg = nn.NetworkConfig(body_layer_sizes=[32], value_head_sizes=[16], policy_head_sizes=[16],
                           learning_rate=1e-4)
    params = nn.init_params(cfg, 0)
    x = cube.encode(cube.scramble(4, 0)[0]).reshape(1, -1)
    batch = nn.Batch(x, np.array([1.0]), np.array([5]), np.array([1.0]))
    for _ in range(3000):
        _, g = nn.loss_and_gradients(params, batch)
        nn.rmsprop_step(params, g, inplace=True)
    pred = nn.forward(params, x)
    assert abs(pred.value[0] - 1.0) < 1e-2
    assert pred.policy[0].argmax() == 5
