import math

import numpy as np
import pytest

from dqarls.bussgang import VarianceTracker, estimate_input_variance, gain_diagonal, gain_scalar
from dqarls.quantizer import design_quantizer, distortion_factor, quantize_complex

from oracles import complex_gaussian, mc_bussgang_gain

# frozen from cell-by-cell quadrature of E[Q(x_r) x_r] (see oracles)
QUAD_GAINS = {
    (1, 0.5): 1.1283791670955128, (1, 1.0): 0.7978845608028656, (1, 2.0): 0.5641895835477562,
    (2, 0.5): 0.9250407276261736, (2, 1.0): 0.9231502644891127, (2, 2.0): 0.8431575675000972,
    (3, 0.5): 0.9788536485769808, (3, 1.0): 0.9760390162864935, (3, 2.0): 0.9532486122938447,
}


@pytest.fixture(scope="module")
def specs():
    return {b: design_quantizer(b) for b in range(1, 9)}


def test_one_bit_unit_variance(specs):
    spec = specs[1]
    # 2 * (1/sqrt 2) / sqrt(pi)
    assert gain_scalar(spec, 1.0) == pytest.approx(2 * (1 / math.sqrt(2)) / math.sqrt(math.pi), abs=1e-15)
    assert gain_scalar(spec, 1.0) == pytest.approx(math.sqrt(2 / math.pi), abs=1e-12)


@pytest.mark.parametrize("key", sorted(QUAD_GAINS))
def test_matches_quadrature(specs, key):
    bits, variance = key
    assert gain_scalar(specs[bits], variance) == pytest.approx(QUAD_GAINS[key], abs=1e-10)


def test_one_bit_monte_carlo(specs):
    spec = specs[1]
    g_mc, _, _ = mc_bussgang_gain(spec.thresholds, spec.labels, 1.0, 1_000_000, np.random.default_rng(10))
    assert abs(gain_scalar(spec, 1.0) - g_mc) < 0.005


@pytest.mark.parametrize("bits", [1, 2, 3])
def test_orthogonality_of_distortion(specs, bits):
    spec = specs[bits]
    for variance in (0.5, 2.0):
        g = gain_scalar(spec, variance)
        _, x, xq = mc_bussgang_gain(spec.thresholds, spec.labels, variance, 1_000_000, np.random.default_rng(bits))
        q = xq - g * x
        assert abs(np.mean(q * np.conj(x))) / variance < 0.01


def test_wrong_variance_degrades_orthogonality(specs):
    spec = specs[2]
    _, x, xq = mc_bussgang_gain(spec.thresholds, spec.labels, 1.0, 500_000, np.random.default_rng(11))
    residual = [abs(np.mean((xq - gain_scalar(spec, v) * x) * np.conj(x))) for v in (1.0, 1.5, 3.0)]
    assert residual[0] < residual[1] < residual[2]


def test_agc_gain_is_scale_free(specs):
    # x_Q = sigma * Q(x / sigma) has the unit-variance gain at every sigma
    spec = specs[1]
    for variance in (0.5, 2.0):
        g_mc, _, _ = mc_bussgang_gain(spec.thresholds, spec.labels, variance, 400_000,
                                      np.random.default_rng(12), scale=math.sqrt(variance))
        assert abs(g_mc - gain_scalar(spec, 1.0)) < 0.005


def test_gain_grows_with_bits(specs):
    gains = [gain_scalar(specs[b], 1.0) for b in range(1, 9)]
    assert all(a < b for a, b in zip(gains, gains[1:]))
    assert gains[4] > 0.99
    assert all(0 < g <= 1 for g in gains)


def test_gain_validation(specs):
    with pytest.raises(ValueError):
        gain_scalar(specs[1], 0.0)
    with pytest.raises(ValueError):
        gain_diagonal(specs[1], [1.0, -1.0])


def test_diagonal_form(specs):
    spec = specs[3]
    equal = gain_diagonal(spec, np.full(8, 1.3))
    assert np.all(equal == gain_scalar(spec, 1.3))
    mixed = gain_diagonal(spec, [1.0, 4.0])
    assert mixed[0] == gain_scalar(spec, 1.0) and mixed[1] == gain_scalar(spec, 4.0)
    per_node = gain_diagonal(spec, np.array([[0.5, 1.0], [2.0, 1.0]]))
    assert per_node.shape == (2, 2) and per_node[0, 1] == gain_scalar(spec, 1.0)


def test_variance_estimate():
    x = np.full(8, (1 + 1j) / math.sqrt(2))
    assert estimate_input_variance(x, 3) == pytest.approx(1 + math.pi * math.sqrt(3) / 2 * 2**-6, abs=1e-14)
    assert estimate_input_variance(x, 3) == pytest.approx(1.0425, abs=1e-4)
    assert estimate_input_variance(x, None) == pytest.approx(1.0)
    assert estimate_input_variance(np.zeros(8, complex), 2) == 1e-12
    assert estimate_input_variance(np.zeros(8, complex), 2, floor=1e-6) == 1e-6


def test_variance_estimate_on_agc_output(specs):
    rng = np.random.default_rng(13)
    x = complex_gaussian(rng, (20_000, 8), 2.0)
    xq = quantize_complex(specs[2], x, math.sqrt(2.0))
    est = np.mean([estimate_input_variance(row, 2) for row in xq])
    assert est == pytest.approx(2.0 * (1 + distortion_factor(2)), rel=0.01)


def test_tracker_smoothing():
    a, b = np.ones(4, complex), 3 * np.ones(4, complex)
    frozen = VarianceTracker(None, smoothing=1.0)
    frozen.update(a)
    assert frozen.update(b) == 1.0
    instant = VarianceTracker(None, smoothing=0.0)
    instant.update(a)
    assert instant.update(b) == 9.0
    blend = VarianceTracker(None, smoothing=0.5)
    blend.update(a)
    assert blend.update(b) == 5.0
