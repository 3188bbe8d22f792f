import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coin.siren import (
    Architecture, ContractError, SirenNetwork, backward, forward, forward_fast, init_siren,
)
from gradcheck import max_relative_error


def brute_force_count(arch):
    net = SirenNetwork.zeros(arch)
    return sum(W.size + b.size for W, b in net.layers)


def test_param_count_matches_storage_for_whole_rectangle():
    for layers in range(1, 16):
        for width in range(1, 65):
            arch = Architecture(layers, width)
            assert arch.param_count == brute_force_count(arch)


@pytest.mark.parametrize("layers,width,count", [(5, 20, 1803), (10, 28, 7479), (7, 34, 7347)])
def test_param_count_values(layers, width, count):
    assert Architecture(layers, width).param_count == count


@pytest.mark.parametrize("kwargs", [
    dict(hidden_layers=0, width=3), dict(hidden_layers=2, width=0),
    dict(hidden_layers=1, width=1, freq_scale=0.0), dict(hidden_layers=1, width=1, freq_scale=-2.0),
])
def test_architecture_rejects_invalid(kwargs):
    with pytest.raises(ContractError):
        Architecture(**kwargs)


def test_layer_shapes_chain():
    net = init_siren(Architecture(4, 7), seed=0)
    assert net.layers[0][0].shape == (7, 2)
    assert all(W.shape == (7, 7) for W, _ in net.layers[1:-1])
    assert net.layers[-1][0].shape == (3, 7)
    assert net.layers[-1][1].shape == (3,)


def test_first_layer_init_bound():
    for seed in range(50):
        W, b = init_siren(Architecture(1, 1), seed).layers[0]
        assert np.all(np.abs(W) <= 0.5) and np.all(np.abs(b) <= 0.5)


def test_init_is_deterministic():
    a = init_siren(Architecture(3, 11), seed=42)
    b = init_siren(Architecture(3, 11), seed=42)
    c = init_siren(Architecture(3, 11), seed=43)
    assert a.flatten().tobytes() == b.flatten().tobytes()
    assert a.flatten().tobytes() != c.flatten().tobytes()


def test_hidden_layer_init_bound_over_a_million_draws():
    arch = Architecture(5, 20)
    bound = math.sqrt(6 / 20) / 30  # 0.018257...
    samples = np.concatenate([init_siren(arch, s).layers[1][0].ravel() for s in range(2500)])
    assert samples.size == 10**6
    assert np.abs(samples).max() <= bound
    # uniform on the whole interval, not a narrower one
    assert np.abs(samples).max() > 0.99 * bound


def test_zero_network_outputs_zero():
    net = SirenNetwork.zeros(Architecture(3, 5))
    coords = np.random.default_rng(0).uniform(-1, 1, (17, 2))
    assert np.array_equal(forward(net, coords), np.zeros((17, 3), dtype=np.float32))


def test_forward_shape_and_order():
    net = init_siren(Architecture(2, 6), seed=1)
    coords = np.random.default_rng(1).uniform(-1, 1, (40, 2))
    out = forward(net, coords)
    assert out.shape == (40, 3)
    assert np.array_equal(out[::-1], forward(net, coords[::-1]))


def test_single_vs_batch_identical():
    net = init_siren(Architecture(3, 9), seed=5)
    coords = np.random.default_rng(5).uniform(-1, 1, (64, 2))
    batch = forward(net, coords)
    for i in range(len(coords)):
        assert np.array_equal(forward(net, coords[i:i + 1])[0], batch[i])


def test_fast_path_agrees_with_rowwise():
    net = init_siren(Architecture(4, 12), seed=2, dtype=np.float64)
    coords = np.random.default_rng(2).uniform(-1, 1, (100, 2))
    np.testing.assert_allclose(forward_fast(net, coords), forward(net, coords), rtol=0, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(
    layers=st.integers(1, 4), width=st.integers(1, 16), seed=st.integers(0, 2**32 - 1),
    n=st.integers(1, 50), data=st.data(),
)
def test_forward_permutation_equivariant(layers, width, seed, n, data):
    net = init_siren(Architecture(layers, width), seed)
    rng = np.random.default_rng(seed)
    coords = rng.uniform(-1, 1, (n, 2))
    perm = data.draw(st.permutations(range(n)))
    assert np.array_equal(forward(net, coords)[perm], forward(net, coords[perm]))


def test_forward_rejects_bad_coords():
    net = init_siren(Architecture(1, 2), 0)
    with pytest.raises(ContractError):
        forward(net, np.zeros((4, 3)))


def test_backward_at_exact_fit_is_zero():
    net = init_siren(Architecture(2, 4), seed=3, dtype=np.float64)
    coords = np.random.default_rng(3).uniform(-1, 1, (16, 2))
    loss, grads = backward(net, coords, forward_fast(net, coords))
    assert loss == 0.0
    assert all(not g.any() for pair in grads for g in pair)


def test_backward_rejects_length_mismatch():
    net = init_siren(Architecture(1, 2), 0)
    with pytest.raises(ContractError):
        backward(net, np.zeros((4, 2)), np.zeros((5, 3)))


def test_backward_hand_derivation_single_unit():
    # one hidden unit: h = sin(w0 (a x + c y + d)); out_k = v_k h + e_k
    w0 = 30.0
    arch = Architecture(1, 1, freq_scale=w0)
    a, c, d = 0.1, -0.2, 0.05
    v = np.array([0.3, -0.4, 0.5])
    e = np.array([0.01, 0.02, -0.03])
    net = SirenNetwork(arch, [
        (np.array([[a, c]]), np.array([d])),
        (v.reshape(3, 1), e.copy()),
    ])
    x, y = 0.25, -0.5
    t = np.array([0.2, 0.6, 0.9])

    z = a * x + c * y + d
    h = math.sin(w0 * z)
    out = v * h + e
    r = out - t
    expected_loss = float(np.sum(r**2) / 3)
    dout = 2 * r / 3
    dz = float(np.sum(dout * v)) * w0 * math.cos(w0 * z)

    loss, grads = backward(net, [[x, y]], [t])
    assert loss == pytest.approx(expected_loss, rel=1e-12)
    np.testing.assert_allclose(grads[1][0].ravel(), dout * h, rtol=1e-12)
    np.testing.assert_allclose(grads[1][1], dout, rtol=1e-12)
    np.testing.assert_allclose(grads[0][0].ravel(), [dz * x, dz * y], rtol=1e-12)
    np.testing.assert_allclose(grads[0][1], [dz], rtol=1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_finite_difference_error_shrinks_quadratically(seed):
    # With w0=30 the O(step^2) truncation term of central differences is
    # still visible at step=1e-4; an exact gradient shows error falling
    # ~100x per 10x step reduction until round-off takes over.
    rng = np.random.default_rng(seed)
    net = init_siren(Architecture(3, 6), seed, dtype=np.float64)
    coords = rng.uniform(-1, 1, (32, 2))
    targets = rng.uniform(0, 1, (32, 3))
    coarse = max_relative_error(net, coords, targets, step=1e-4)
    fine = max_relative_error(net, coords, targets, step=1e-5)
    assert fine < coarse / 30
    assert max_relative_error(net, coords, targets, step=1e-6) < 1e-5


def test_network_roundtrips_through_flat_vector():
    net = init_siren(Architecture(3, 5), seed=9)
    again = SirenNetwork.from_flat(net.arch, net.flatten())
    assert again.flatten().tobytes() == net.flatten().tobytes()
    with pytest.raises(ContractError):
        SirenNetwork.from_flat(net.arch, net.flatten()[:-1])


def test_freq_scale_has_float32_semantics():
    a = Architecture(2, 3, 12.3)
    assert a.freq_scale == float(np.float32(12.3))
    assert a == Architecture(2, 3, a.freq_scale)
