"""Network ansatz: parameter layout, forward pass, embeddings, persistence."""

import math
import os

import numpy as np
import pytest

from ritzgeo.engine import Dual, Dual2
from ritzgeo.networks import (
    Architecture,
    feature_dim,
    forward,
    fourier_embed,
    fourier_frequencies,
    init_params,
    layer_dims,
    load_network,
    param_count,
    save_network,
)


# parameter counts by hand: sum over layers of (fan_in * fan_out + fan_out),
# no bias on the output layer
def test_param_count_path_network():
    # 1 -> 25 -> 25 -> 2: (25 + 25) + (625 + 25) + 50 = 750
    arch = Architecture(hidden_widths=(25, 25), output_dim=2)
    assert param_count(arch) == 750
    assert layer_dims(arch) == [(1, 25), (25, 25), (25, 2)]


def test_param_count_displacement_network():
    # 1 -> 10 -> 10 -> 1: (10 + 10) + (100 + 10) + 10 = 140
    arch = Architecture(input_dim=1, hidden_widths=(10, 10), output_dim=1)
    assert param_count(arch) == 140


def test_param_count_fourier_trunk():
    # 30 features -> 15 -> 15 -> 3: (450 + 15) + (225 + 15) + 45 = 750
    arch = Architecture(hidden_widths=(15, 15), output_dim=3,
                        fourier_f=15, fourier_sigma2=4.0)
    assert feature_dim(arch) == 30
    assert param_count(arch) == 750


def test_init_params_deterministic_per_seed():
    arch = Architecture(hidden_widths=(8, 8), output_dim=2)
    p1 = init_params(arch, seed=3)
    p2 = init_params(arch, seed=3)
    p3 = init_params(arch, seed=4)
    np.testing.assert_array_equal(p1.values, p2.values)
    assert not np.array_equal(p1.values, p3.values)
    assert p1.values.size == param_count(arch)


def test_forward_matches_manual_composition():
    arch = Architecture(hidden_widths=(3,), output_dim=2, seed=0)
    params = init_params(arch, seed=5)
    w0 = params.segment("layer0.W")
    b0 = params.segment("layer0.b")
    w1 = params.segment("out.W")
    t = 0.37
    hidden = np.tanh(w0.reshape(3) * t + b0)
    expect = w1.reshape(2, 3) @ hidden
    got = np.asarray(forward(arch, params, t), dtype=np.float64)
    np.testing.assert_allclose(got, expect, rtol=1e-13, atol=1e-15)


def test_forward_dual_value_channel_matches_float():
    arch = Architecture(hidden_widths=(25, 25), output_dim=2)
    params = init_params(arch, seed=0)
    t = 0.3
    vals = np.asarray(forward(arch, params, t), dtype=np.float64)
    duals = forward(arch, params, Dual(t, 1.0))
    np.testing.assert_allclose([d.value for d in duals], vals, atol=1e-15)


def test_forward_dual_derivative_matches_finite_differences():
    arch = Architecture(hidden_widths=(25, 25), output_dim=2)
    params = init_params(arch, seed=0)
    t, eps = 0.3, 1e-6
    duals = forward(arch, params, Dual(t, 1.0))
    up = np.asarray(forward(arch, params, t + eps), dtype=np.float64)
    dn = np.asarray(forward(arch, params, t - eps), dtype=np.float64)
    fd = (up - dn) / (2 * eps)
    np.testing.assert_allclose([d.deriv for d in duals], fd, rtol=1e-7, atol=1e-9)


def test_forward_dual2_second_derivative_matches_finite_differences():
    arch = Architecture(hidden_widths=(10,), output_dim=1)
    params = init_params(arch, seed=2)
    t, eps = 0.45, 1e-4
    out = forward(arch, params, Dual2(t, 1.0, 0.0))[0]
    f0 = forward(arch, params, t)[0]
    fp = forward(arch, params, t + eps)[0]
    fm = forward(arch, params, t - eps)[0]
    fd2 = (fp - 2 * f0 + fm) / eps**2
    assert out.d2 == pytest.approx(fd2, rel=1e-5, abs=1e-6)


def test_sine_activation_forward():
    # first layer sin(omega0 (w t + b)), linear readout
    arch = Architecture(hidden_widths=(4,), output_dim=1,
                        activation="sine", omega0=1.0)
    params = init_params(arch, seed=1)
    w0 = params.segment("layer0.W").reshape(4)
    b0 = params.segment("layer0.b")
    w1 = params.segment("out.W").reshape(1, 4)
    t = 0.5
    expect = (w1 @ np.sin(w0 * t + b0)).item()
    assert forward(arch, params, t)[0] == pytest.approx(expect, abs=1e-14)


def test_unknown_activation_rejected():
    with pytest.raises(ValueError):
        Architecture(hidden_widths=(4,), output_dim=1, activation="relu")


def test_fourier_frequencies_deterministic_and_gaussian_scale():
    arch = Architecture(hidden_widths=(15, 15), output_dim=3,
                        fourier_f=15, fourier_sigma2=4.0, seed=0)
    f1 = fourier_frequencies(arch)
    f2 = fourier_frequencies(arch)
    np.testing.assert_array_equal(f1, f2)
    assert f1.shape == (15,)
    # frozen draws from N(0, sigma^2): sample std should be order sigma
    assert 0.5 < np.std(f1) < 6.0


def test_fourier_embed_layout():
    arch = Architecture(hidden_widths=(8,), output_dim=2,
                        fourier_f=4, fourier_sigma2=4.0, seed=0)
    freqs = fourier_frequencies(arch)
    t = 0.37
    emb = np.asarray(fourier_embed(arch, t), dtype=np.float64)
    assert emb.size == 8
    np.testing.assert_allclose(emb[:4], np.sin(2 * np.pi * freqs * t), atol=1e-14)
    np.testing.assert_allclose(emb[4:], np.cos(2 * np.pi * freqs * t), atol=1e-14)


def test_fourier_embed_accepts_duals():
    arch = Architecture(hidden_widths=(8,), output_dim=2,
                        fourier_f=4, fourier_sigma2=4.0, seed=0)
    freqs = fourier_frequencies(arch)
    t = 0.2
    emb = fourier_embed(arch, Dual(t, 1.0))
    # d/dt sin(2 pi f t) = 2 pi f cos(2 pi f t)
    expect = 2 * np.pi * freqs[0] * math.cos(2 * np.pi * freqs[0] * t)
    assert emb[0].deriv == pytest.approx(expect, rel=1e-12)


def test_save_load_round_trip(tmp_path):
    arch = Architecture(hidden_widths=(6, 6), output_dim=2, activation="tanh",
                        fourier_f=3, fourier_sigma2=2.0, seed=7)
    params = init_params(arch, seed=11)
    path = os.path.join(tmp_path, "net.json")
    save_network(path, arch, params)
    arch2, params2 = load_network(path)
    assert arch2 == arch
    np.testing.assert_array_equal(params2.values, params.values)
    assert params2.names() == params.names()
    # loaded network evaluates identically
    t = 0.61
    np.testing.assert_array_equal(
        np.asarray(forward(arch, params, t), dtype=np.float64),
        np.asarray(forward(arch2, params2, t), dtype=np.float64),
    )
