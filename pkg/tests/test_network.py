import numpy as np
import pytest

from ntk_convergence.exceptions import UnsupportedDerivativeError, ValidationError
from ntk_convergence.interfaces import ActivationKind, ModelParams
from ntk_convergence.network import (
    activation_eval,
    forward,
    forward_batch,
    init_params,
    output_grad,
    output_jacobian,
)
from ntk_convergence.numerics import finite_diff_grad

RELU = ActivationKind.RELU
RELU3 = ActivationKind.RELU_CUBED
TANH = ActivationKind.SMOOTH_TANH


def test_init_params_deterministic():
    """Test that one seed gives one initialization."""
    first = init_params(3, 4, RELU, seed=7)
    second = init_params(3, 4, RELU, seed=7)
    assert np.array_equal(first.weights, second.weights)
    assert np.array_equal(first.signs, second.signs)


def test_init_params_distribution():
    """Test weight moments and balanced signs."""
    params = init_params(100_000, 2, RELU, seed=1)
    means = params.weights.mean(axis=0)
    variances = params.weights.var(axis=0)
    assert np.all(np.abs(means) <= 0.02)
    assert np.all((variances >= 0.97) & (variances <= 1.03))
    assert 0.49 <= np.mean(params.signs > 0) <= 0.51


def test_init_params_scaled_variance():
    """Test that a variance of 1 / (d + 2) rescales the same draws and keeps the signs."""
    unit = init_params(2000, 4, RELU3, seed=3)
    scaled = init_params(2000, 4, RELU3, seed=3, variance=0.25)
    assert np.allclose(scaled.weights, 0.5 * unit.weights, rtol=0, atol=1e-15)
    assert np.array_equal(scaled.signs, unit.signs)
    with pytest.raises(ValidationError):
        init_params(2, 3, RELU, seed=0, variance=0.0)


@pytest.mark.parametrize("m, d_aug", [(0, 3), (3, 1)])
def test_init_params_validation(m, d_aug):
    with pytest.raises(ValidationError):
        init_params(m, d_aug, RELU, seed=0)


def test_params_are_immutable():
    """Test that stored weights are read-only."""
    params = init_params(2, 3, RELU, seed=0)
    with pytest.raises(ValueError):
        params.weights[0, 0] = 1.0


def test_params_reject_bad_signs():
    with pytest.raises(ValidationError):
        ModelParams(weights=np.ones((2, 2)), signs=[1.0, 0.5], activation=RELU)


def test_params_dict_roundtrip():
    params = init_params(3, 4, TANH, seed=2)
    restored = ModelParams.from_dict(params.to_dict())
    assert np.array_equal(restored.weights, params.weights)
    assert np.array_equal(restored.signs, params.signs)
    assert restored.activation is TANH


def test_relu_cubed_values():
    """Test ReLU^3 and its derivatives at hand points."""
    assert [activation_eval(RELU3, k, 2.0) for k in range(4)] == [8.0, 12.0, 12.0, 6.0]
    assert [activation_eval(RELU3, k, -1.0) for k in range(4)] == [0.0, 0.0, 0.0, 0.0]


def test_tanh_values_at_zero():
    assert activation_eval(TANH, 1, 0.0) == pytest.approx(1.0)
    assert activation_eval(TANH, 2, 0.0) == pytest.approx(0.0)


def test_relu_indicator_closed_at_zero():
    """Test that the ReLU derivative is 1 at zero."""
    assert activation_eval(RELU, 1, 0.0) == 1.0
    with pytest.raises(UnsupportedDerivativeError):
        activation_eval(RELU, 2, 1.0)


@pytest.mark.parametrize("kind", [RELU3, TANH])
@pytest.mark.parametrize("order", [0, 1, 2])
def test_activation_derivative_chain(rng, kind, order):
    """sigma^(k+1) matches the central difference of sigma^(k)."""
    z = rng.uniform(0.05, 2.0, size=100) * rng.choice([-1.0, 1.0], size=100)
    if kind is RELU3:
        z = np.abs(z)
    h = 1e-6
    numeric = (activation_eval(kind, order, z + h) - activation_eval(kind, order, z - h)) / (2 * h)
    assert np.allclose(numeric, activation_eval(kind, order + 1, z), rtol=1e-6, atol=1e-8)


def test_forward_hand_cases():
    """Test the network output on hand-computed inputs."""
    single = ModelParams(weights=[[2.0, 0.0]], signs=[1.0], activation=RELU)
    assert forward(single, np.array([1.0, 1.0])) == pytest.approx(2.0)

    four = ModelParams(weights=np.tile([1.0, 0.0], (4, 1)), signs=np.ones(4), activation=RELU3)
    assert forward(four, np.array([1.0, 1.0])) == pytest.approx(2.0)

    zero = ModelParams(weights=np.zeros((4, 3)), signs=np.ones(4), activation=RELU3)
    assert forward(zero, np.array([0.2, 0.3, 1.0])) == 0.0


def test_forward_dimension_mismatch():
    params = init_params(2, 3, RELU, seed=0)
    with pytest.raises(ValidationError):
        forward(params, np.ones(4))


def test_relu_homogeneity():
    """Test positive homogeneity of the ReLU network."""
    params = ModelParams(weights=[[0.5, 0.5]], signs=[1.0], activation=RELU)
    x = np.array([0.6, 1.0])
    scaled = params.with_weights(3.0 * params.weights)
    assert forward(scaled, x) == pytest.approx(3.0 * forward(params, x))
    cubed = ModelParams(weights=params.weights, signs=[1.0], activation=RELU3)
    assert forward(cubed.with_weights(3.0 * cubed.weights), x) == pytest.approx(27.0 * forward(cubed, x))


def test_output_grad_relu_blocks():
    """Test the per-neuron gradient blocks of the ReLU network."""
    x = np.array([1.0, 1.0])
    active = ModelParams(weights=[[1.0, 1.0]], signs=[1.0], activation=RELU)
    assert np.allclose(output_grad(active, x), x)
    inactive = ModelParams(weights=[[-1.0, -1.0]], signs=[1.0], activation=RELU)
    assert np.allclose(output_grad(inactive, x), 0.0)


@pytest.mark.parametrize("kind", [RELU, RELU3, TANH])
def test_output_grad_matches_finite_differences(kind):
    """Test weight gradients against central differences."""
    checked = 0
    for seed in range(100):
        params = init_params(1 + seed % 16, 2 + seed % 4, kind, seed=seed)
        x = np.random.default_rng(seed).uniform(-0.7, 0.7, params.d_aug)
        x[-1] = 1.0
        if kind is not TANH and np.min(np.abs(params.weights @ x)) < 1e-3:
            continue

        def f(w, params=params, x=x):
            return forward(params.with_weights(w), x)

        numeric = finite_diff_grad(f, params.weights).ravel()
        analytic = output_grad(params, x)
        scale = max(np.linalg.norm(analytic), 1e-12)
        assert np.linalg.norm(numeric - analytic) <= 1e-6 * scale
        checked += 1
    assert checked >= 50


def test_output_jacobian_stacks_rows(rng):
    params = init_params(5, 3, TANH, seed=4)
    points = np.hstack([rng.uniform(-0.5, 0.5, (4, 2)), np.ones((4, 1))])
    jac = output_jacobian(params, points)
    assert jac.shape == (4, 15)
    for i, x in enumerate(points):
        assert np.allclose(jac[i], output_grad(params, x))
    assert np.allclose(forward_batch(params, points), [forward(params, x) for x in points])
