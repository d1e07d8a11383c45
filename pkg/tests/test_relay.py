import numpy as np
import pytest

from molrelay.channel import ChannelParams, Geometry, activation_probability, output_moments
from molrelay.dmc import blahut_arimoto, discretize_direct
from molrelay.relay import (
    RelayConfig,
    build_channel,
    effective_amax,
    relay_noise_share,
    relay_reception_noise_variance,
)

FIG34 = ChannelParams(sigma0_sq=0.1, n=25, n_receptors=10)
K_IN, K_OUT = 61, 601


def capacity(params, mode, **kw):
    return blahut_arimoto(build_channel(params, RelayConfig(mode=mode, **kw), K_IN, K_OUT)).capacity_bits


def test_beta_defaults_and_validation():
    g = Geometry(r1=1.0, r2=2.0, r3=4.0)
    assert RelayConfig(g, "single_type").beta == 0.5
    assert RelayConfig(g, "multi_type_sum").beta == 2.0
    with pytest.raises(ValueError):
        RelayConfig(g, "single_type", beta=1.0)
    with pytest.raises(ValueError):
        RelayConfig(g, "multi_type_joint", beta=0.5)
    with pytest.raises(ValueError):
        RelayConfig(g, "amplify")


def test_effective_amax():
    assert effective_amax(FIG34, RelayConfig(mode="single_type")) == 2.0
    assert effective_amax(FIG34, RelayConfig(Geometry(r1=1, r3=4), "single_type")) == 1.25
    assert effective_amax(FIG34, RelayConfig()) == 1.0
    with pytest.raises(ValueError):
        effective_amax(FIG34, RelayConfig(mode="multi_type_sum"))


def test_single_type_equals_direct_at_doubled_amax():
    relayed = build_channel(FIG34, RelayConfig(mode="single_type"), K_IN, K_OUT)
    direct = discretize_direct(FIG34.with_(a_max=2.0), K_IN, K_OUT)
    assert np.array_equal(relayed.transition, direct.transition)
    assert blahut_arimoto(relayed).capacity_bits == blahut_arimoto(direct).capacity_bits


def test_single_type_input_labels_are_direct_path():
    ch = build_channel(FIG34, RelayConfig(mode="single_type"), K_IN, K_OUT)
    assert ch.input_levels[0] == 0.0
    assert ch.input_levels[-1] == pytest.approx(FIG34.p_max)
    assert np.all(np.diff(ch.input_levels) > 0)


@pytest.mark.parametrize("a_max", [0.2, 3.0])
def test_capacity_ordering(a_max):
    p = FIG34.with_(a_max=a_max)
    c_direct = capacity(p, "direct")
    c_single = capacity(p, "single_type")
    c_sum = capacity(p, "multi_type_sum")
    c_joint = capacity(p, "multi_type_joint", joint_coords="sum_diff")
    assert c_single > c_direct
    assert c_joint >= c_sum - 1e-6
    assert c_sum > c_direct


def test_relay_noise_share_oracle():
    # linearize the receiver's mean response by finite differences
    params, g = FIG34, Geometry(r1=1.0, r3=1.7)
    a0 = 0.8
    a_r = a0 * (1 + g.r1 / g.r3)
    h = 1e-6
    slope = (output_moments(activation_probability(a_r + h, params), params).mean
             - output_moments(activation_probability(a_r - h, params), params).mean) / (2 * h)
    p0 = activation_probability(a0, params)
    added = slope ** 2 * relay_reception_noise_variance(params, g, p0)
    own = output_moments(activation_probability(a_r, params), params).variance
    assert added / own == pytest.approx(relay_noise_share(g), rel=1e-6)


def test_relay_noise_share_values():
    assert relay_noise_share(Geometry()) == 0.25
    assert relay_noise_share(Geometry(r1=1.0, r3=3.0)) == pytest.approx(1 / 16)
    assert relay_noise_share(Geometry(r1=1.0, r3=3.0)) < 0.10


def test_relay_noise_lowers_capacity():
    p = FIG34.with_(a_max=1.0)
    clean = capacity(p, "single_type")
    noisy = capacity(p, "single_type", include_relay_noise=True)
    assert noisy < clean
    # at r1 = r3 the relay noise (25% of the variance) costs more than the relay adds
    assert noisy < capacity(p, "direct")


def test_joint_defaults_fit_budget():
    pair = build_channel(FIG34, RelayConfig(mode="multi_type_joint"), k_in=21)
    assert pair.shape == (21, 101 * 101)
    rotated = build_channel(FIG34, RelayConfig(mode="multi_type_joint", joint_coords="sum_diff"), k_in=21)
    assert rotated.shape == (21, 1501 * 32)
