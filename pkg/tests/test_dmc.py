import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from molrelay.channel import ChannelParams, output_moments
from molrelay.dmc import (
    ChannelSizeError,
    DiscreteChannel,
    InvalidChannelError,
    blahut_arimoto,
    discretize_direct,
    discretize_joint,
    discretize_sum,
    dump_json,
    input_grid,
    mutual_information,
)

FIG34 = ChannelParams(sigma0_sq=0.1, n=25, n_receptors=10)


def mi_bits(t, r):
    """Plain oracle: sum_x sum_y r_x T_xy log2(T_xy / q_y)."""
    q = r @ t
    total = 0.0
    for x in range(t.shape[0]):
        for y in range(t.shape[1]):
            if r[x] > 0 and t[x, y] > 0:
                total += r[x] * t[x, y] * math.log2(t[x, y] / q[y])
    return total


def h2(e):
    return -e * math.log2(e) - (1 - e) * math.log2(1 - e)


# ------------------------------------------------------------ BA oracles

def test_bsc_capacity():
    res = blahut_arimoto(np.array([[0.9, 0.1], [0.1, 0.9]]), tol_bits=1e-9)
    assert res.capacity_bits == pytest.approx(1 - h2(0.1), abs=1e-6)
    assert res.capacity_bits == pytest.approx(0.531004406410719, abs=1e-6)
    np.testing.assert_allclose(res.input_distribution, [0.5, 0.5], atol=1e-6)


@pytest.mark.parametrize("k", [2, 5, 16])
def test_identity_capacity(k):
    res = blahut_arimoto(np.eye(k))
    assert res.capacity_bits == pytest.approx(math.log2(k), abs=1e-9)


def test_identical_rows_zero_capacity():
    res = blahut_arimoto(np.tile([0.2, 0.3, 0.5], (4, 1)))
    assert res.capacity_bits == pytest.approx(0.0, abs=1e-12)
    assert res.converged


def test_z_channel_closed_form():
    # Z channel with crossover e: C = log2(1 + (1-e) e^(e/(1-e)))
    e = 0.3
    res = blahut_arimoto(np.array([[1.0, 0.0], [e, 1 - e]]), tol_bits=1e-10)
    assert res.capacity_bits == pytest.approx(math.log2(1 + (1 - e) * e ** (e / (1 - e))), abs=1e-8)


def test_invalid_channels():
    with pytest.raises(InvalidChannelError):
        blahut_arimoto(np.array([[0.5, 0.5], [0.0, 0.0]]))
    with pytest.raises(InvalidChannelError):
        blahut_arimoto(np.array([[0.5, 0.6]]))
    with pytest.raises(InvalidChannelError):
        blahut_arimoto(np.array([[1.5, -0.5]]))
    with pytest.raises(ValueError):
        blahut_arimoto(np.eye(2), tol_bits=0)


def test_mutual_information_matches_oracle():
    rng = np.random.default_rng(3)
    t = rng.random((4, 6))
    t /= t.sum(axis=1, keepdims=True)
    r = rng.random(4)
    r /= r.sum()
    assert mutual_information(t, r) == pytest.approx(mi_bits(t, r), abs=1e-12)


def test_brute_force_prior_search():
    ch = discretize_direct(FIG34.with_(a_max=1.0), k_in=51, k_out=201)
    sub = ch.transition[[10, 11, 12]]
    sub = sub / sub.sum(axis=1, keepdims=True)
    res = blahut_arimoto(sub, tol_bits=1e-9)

    best, best_r = -1.0, None
    step = 0.01
    for i, j in itertools.product(range(101), repeat=2):
        if i + j <= 100:
            r = np.array([i, j, 100 - i - j]) * step
            v = mi_bits(sub, r)
            if v > best:
                best, best_r = v, r
    # local refinement around the coarse optimum
    for _ in range(3):
        step /= 10
        centre = best_r
        for di, dj in itertools.product(range(-10, 11), repeat=2):
            r = centre + step * np.array([di, dj, -di - dj])
            if np.all(r >= 0):
                v = mi_bits(sub, r)
                if v > best:
                    best, best_r = v, r
    assert res.capacity_bits == pytest.approx(best, abs=1e-4)
    assert res.capacity_bits >= best - 1e-9


def test_plain_and_accelerated_agree():
    ch = discretize_direct(FIG34.with_(a_max=3.0), k_in=41, k_out=301)
    plain = blahut_arimoto(ch, accelerate=False, max_iter=200_000)
    fast = blahut_arimoto(ch)
    assert plain.converged and fast.converged
    assert fast.capacity_bits == pytest.approx(plain.capacity_bits, abs=2e-6)
    assert fast.iterations < plain.iterations


def test_history_monotone_and_gap():
    ch = discretize_direct(FIG34.with_(a_max=2.0), k_in=61, k_out=401)
    for accelerate in (False, True):
        res = blahut_arimoto(ch, record_history=True, accelerate=accelerate, max_iter=100_000)
        h = np.array(res.history)
        assert np.all(np.diff(h) >= -1e-12)
        assert res.converged and res.gap_bound <= 1e-6
        assert len(h) == res.iterations + 1


def test_warm_start_same_answer():
    ch = discretize_direct(FIG34, k_in=51, k_out=301)
    cold = blahut_arimoto(ch)
    warm = blahut_arimoto(ch, init=cold.input_distribution)
    assert warm.iterations <= 1
    assert warm.capacity_bits == pytest.approx(cold.capacity_bits, abs=1e-6)
    with pytest.raises(ValueError):
        blahut_arimoto(ch, init=np.ones(3))


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 6), st.integers(2, 7), st.integers(0, 2**31))
def test_capacity_bounds_property(kx, ky, seed):
    rng = np.random.default_rng(seed)
    t = rng.random((kx, ky)) + 1e-3
    t /= t.sum(axis=1, keepdims=True)
    res = blahut_arimoto(t, tol_bits=1e-8)
    assert -1e-12 <= res.capacity_bits <= math.log2(min(kx, ky)) + 1e-9
    # any other prior gives no more information
    r = rng.random(kx)
    r /= r.sum()
    assert mi_bits(t, r) <= res.capacity_bits + 1e-8


# ------------------------------------------------------------ discretization

def test_input_grid_endpoints():
    levels = input_grid(FIG34, 101)
    assert levels[0] == 0.0
    assert levels[-1] == FIG34.p_max == 0.5
    assert levels.size == 101 and np.all(np.diff(levels) > 0)
    with pytest.raises(ValueError):
        input_grid(FIG34, 1)


@pytest.mark.parametrize("a_max", [0.1, 1.0, 20.0])
def test_rows_normalized(a_max):
    for ch in (discretize_direct(FIG34.with_(a_max=a_max), 51, 301),
               discretize_sum(FIG34.with_(a_max=a_max), 51, 301),
               discretize_joint(FIG34.with_(a_max=a_max), 21, 41),
               discretize_joint(FIG34.with_(a_max=a_max), 21, 301, coords="sum_diff")):
        np.testing.assert_allclose(ch.transition.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(ch.transition >= 0)
        for edges in ch.output_bins:
            assert np.all(np.diff(edges) > 0)
            assert edges[-1] == np.inf


def test_bin_masses_match_gaussian():
    from scipy.stats import norm
    ch = discretize_direct(FIG34, k_in=11, k_out=201)
    edges = ch.output_bins[0]
    x = 6
    m = output_moments(ch.input_levels[x], FIG34)
    expected = np.diff(norm.cdf(edges, m.mean, math.sqrt(m.variance)))
    np.testing.assert_allclose(ch.transition[x], expected / expected.sum(), atol=1e-12)


def test_zero_noise_limit_is_noiseless():
    params = ChannelParams(sigma0_sq=0.0, n=25, n_receptors=10, a_max=1.0)
    ch = discretize_direct(params, k_in=8, k_out=101)
    assert np.all(ch.transition.max(axis=1) > 1 - 1e-9)
    assert len(set(ch.transition.argmax(axis=1))) == 8
    assert blahut_arimoto(ch).capacity_bits == pytest.approx(3.0, abs=1e-6)


def test_capacity_increases_with_amax():
    caps = [blahut_arimoto(discretize_direct(FIG34.with_(a_max=a), 61, 601)).capacity_bits
            for a in (0.1, 0.5, 2.0, 10.0)]
    assert np.all(np.diff(caps) > 0)


@pytest.mark.parametrize("a_max", [0.3, 5.0])
def test_refinement_stable(a_max):
    p = FIG34.with_(a_max=a_max)
    coarse = blahut_arimoto(discretize_direct(p, 101, 1501)).capacity_bits
    fine = blahut_arimoto(discretize_direct(p, 201, 3001)).capacity_bits
    assert abs(fine - coarse) <= 2e-3


def test_joint_pair_marginalizes():
    p = FIG34.with_(a_max=2.0)
    single = discretize_direct(p, 15, 41)
    joint = discretize_joint(p, 15, 41, coords="pair")
    t = joint.transition.reshape(15, 41, 41)
    np.testing.assert_allclose(t.sum(axis=2), single.transition, atol=1e-12)
    np.testing.assert_allclose(t.sum(axis=1), single.transition, atol=1e-12)


def test_joint_sum_diff_marginalizes_to_sum():
    p = FIG34.with_(a_max=2.0)
    summed = discretize_sum(p, 21, 301)
    joint = discretize_joint(p, 21, 301, coords="sum_diff", k_spread=16)
    t = joint.transition.reshape(21, 301, 16)
    np.testing.assert_allclose(t.sum(axis=2), summed.transition, atol=1e-12)


def test_sum_channel_moments():
    p = FIG34.with_(a_max=1.0)
    ch = discretize_sum(p, 11, 3001)
    edges = ch.output_bins[0]
    mids = 0.5 * (edges[:-1] + edges[1:])
    mids[0], mids[-1] = edges[1], edges[-2]
    x = 7
    m = output_moments(ch.input_levels[x], p)
    mean = ch.transition[x] @ mids
    assert mean == pytest.approx(2 * m.mean, rel=1e-3)
    var = ch.transition[x] @ (mids - mean) ** 2
    assert var == pytest.approx(2 * m.variance, rel=2e-2)


def test_joint_memory_budget():
    with pytest.raises(ChannelSizeError):
        discretize_joint(FIG34, 201, 501)
    with pytest.raises(MemoryError):
        discretize_joint(FIG34, 11, 101, max_cells=1000)


def test_deterministic():
    a = discretize_joint(FIG34, 31, 301, coords="sum_diff")
    b = discretize_joint(FIG34, 31, 301, coords="sum_diff")
    assert np.array_equal(a.transition, b.transition)
    assert blahut_arimoto(a).capacity_bits == blahut_arimoto(b).capacity_bits


def test_immutable_and_json(tmp_path):
    ch = discretize_direct(FIG34, 5, 11)
    with pytest.raises(ValueError):
        ch.transition[0, 0] = 1.0
    dump_json(ch, tmp_path / "ch.json")
    data = json.loads((tmp_path / "ch.json").read_text())
    assert data["kind"] == "direct"
    assert np.array_equal(np.array(data["transition"]), ch.transition)
    res = blahut_arimoto(ch)
    dump_json(res, tmp_path / "res.json")
    assert json.loads((tmp_path / "res.json").read_text())["capacity_bits"] == res.capacity_bits


def test_levels_override():
    ch = discretize_direct(FIG34, levels=[0.0, 0.25, 0.5], k_out=101)
    assert isinstance(ch, DiscreteChannel) and ch.shape == (3, 101)
    with pytest.raises(ValueError):
        discretize_direct(FIG34, levels=[0.3, 0.2])
