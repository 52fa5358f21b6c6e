import math

import numpy as np
import pytest

from spreadcodes.network import (
    NetworkConfig,
    ProposalParams,
    adam_step,
    backprop_mean_gradient,
    flatten,
    forward,
    grad_log_prob,
    grad_norm,
    init_network,
    load_checkpoint,
    log_prob,
    save_checkpoint,
    unflatten,
)


def tiny_params(seed=0, num_codes=2, code_length=5, variance=0.1):
    return init_network(NetworkConfig(num_codes, code_length), seed, variance)


def clone_with_theta(params, flat_theta):
    ws, bs = unflatten(params, flat_theta)
    return ProposalParams(
        config=params.config,
        variance=params.variance,
        weights=[w.copy() for w in ws],
        biases=[b.copy() for b in bs],
        adam_m=[m.copy() for m in params.adam_m],
        adam_v=[v.copy() for v in params.adam_v],
        step=params.step,
    )


def test_init_deterministic():
    a, b = tiny_params(123), tiny_params(123)
    assert all(np.array_equal(x, y) for x, y in zip(a.weights, b.weights))
    assert all(np.array_equal(x, y) for x, y in zip(a.biases, b.biases))
    c = tiny_params(124)
    assert any(not np.array_equal(x, y) for x, y in zip(a.weights, c.weights))


def test_network_dimensions():
    cfg = NetworkConfig(3, 63)
    assert cfg.output_dim == 189
    assert cfg.hidden_size == 378
    assert cfg.layer_dims == (189, 378, 378, 189)
    params = init_network(cfg, 0)
    expected = 378 * 189 + 378 + 378 * 378 + 378 + 189 * 378 + 189
    assert params.theta_size() == expected
    assert forward(params).shape == (189,)


@pytest.mark.parametrize("seed", range(10))
def test_initial_mean_inside_half_band(seed):
    params = init_network(NetworkConfig(3, 63), seed)
    assert np.abs(forward(params)).max() < 0.5


def test_zero_parameters_give_zero_mean():
    params = tiny_params()
    for w in params.weights:
        w[:] = 0.0
    for b in params.biases:
        b[:] = 0.0
    assert np.all(forward(params) == 0.0)


def test_mean_strictly_inside_bounds():
    params = tiny_params()
    for w in params.weights:
        w[:] = 50.0  # saturate every tanh
    mu = forward(params)
    assert np.abs(mu).max() < 1.0


def test_output_bias_shifts_only_its_component():
    params = tiny_params(seed=5)
    base = forward(params)
    params.biases[-1][3] += 0.25
    shifted = forward(params)
    changed = np.nonzero(shifted != base)[0]
    assert changed.tolist() == [3]


def test_log_prob_at_mean():
    params = tiny_params(seed=1, variance=0.1)
    mu = forward(params)
    dim = params.config.output_dim
    assert log_prob(params, mu) == pytest.approx(-(dim / 2) * math.log(2 * math.pi * 0.1), rel=1e-12)


def test_log_prob_quadratic_term():
    params = tiny_params(seed=2, variance=0.1)
    mu = forward(params)
    x = mu.copy()
    x[4] += 0.1
    at_mean = log_prob(params, mu)
    # one component displaced by 0.1 at variance 0.1 costs 0.1^2/(2*0.1) = 0.05
    assert log_prob(params, x) - at_mean == pytest.approx(-0.05, rel=1e-12)


def test_log_prob_matches_dense_gaussian_oracle():
    params = tiny_params(seed=3, variance=0.07)
    mu = forward(params)
    dim = mu.size
    cov = np.diag(np.full(dim, 0.07))
    rng = np.random.default_rng(0)
    for _ in range(5):
        x = mu + 0.3 * rng.standard_normal(dim)
        diff = x - mu
        sign, logdet = np.linalg.slogdet(cov)
        oracle = -0.5 * (diff @ np.linalg.solve(cov, diff) + dim * math.log(2 * math.pi) + logdet)
        assert log_prob(params, x) == pytest.approx(oracle, rel=1e-10)


def test_log_prob_dimension_check():
    params = tiny_params()
    with pytest.raises(ValueError):
        log_prob(params, np.zeros(3))


def test_grad_log_prob_zero_at_mean():
    params = tiny_params(seed=4)
    ws, bs = grad_log_prob(params, forward(params))
    assert all(np.all(g == 0.0) for g in ws + bs)


def test_grad_log_prob_matches_finite_differences():
    params = tiny_params(seed=7)
    rng = np.random.default_rng(17)
    x = forward(params) + 0.3 * rng.standard_normal(params.config.output_dim)
    analytic = flatten(*grad_log_prob(params, x))
    theta = flatten(params.weights, params.biases)
    h = 1e-5
    numeric = np.empty_like(theta)
    for i in range(theta.size):
        plus, minus = theta.copy(), theta.copy()
        plus[i] += h
        minus[i] -= h
        numeric[i] = (log_prob(clone_with_theta(params, plus), x) - log_prob(clone_with_theta(params, minus), x)) / (2 * h)
    rel = np.abs(analytic - numeric) / np.maximum(np.abs(numeric), 1e-8)
    assert rel.max() < 1e-4


def test_grad_scales_linearly_in_displacement():
    params = tiny_params(seed=8)
    mu = forward(params)
    rng = np.random.default_rng(3)
    delta = rng.standard_normal(mu.size)
    g1 = flatten(*grad_log_prob(params, mu + delta))
    g2 = flatten(*grad_log_prob(params, mu + 2 * delta))
    assert np.abs(g2 - 2 * g1).max() < 1e-8 * max(1.0, np.abs(g1).max())


def test_score_function_has_zero_mean():
    # Monte Carlo check of E[grad log p(x)] = 0 under x ~ p.
    params = init_network(NetworkConfig(2, 2), 11, variance=0.1)
    rng = np.random.default_rng(2024)
    n = 10_000
    samples = np.empty((n, params.theta_size()))
    mu = forward(params)
    sigma = math.sqrt(params.variance)
    for i in range(n):
        x = mu + sigma * rng.standard_normal(mu.size)
        samples[i] = flatten(*grad_log_prob(params, x))
    mean = samples.mean(axis=0)
    stderr = samples.std(axis=0, ddof=1) / math.sqrt(n)
    assert np.all(np.abs(mean) < 3 * np.maximum(stderr, 1e-12))


def test_adam_zero_gradient_keeps_theta_decays_moments():
    # Fresh optimizer state: a zero gradient must not move the parameters.
    params = tiny_params(seed=9)
    theta_before = flatten(params.weights, params.biases).copy()
    zero = unflatten(params, np.zeros(params.theta_size()))
    adam_step(params, zero, lr=1e-3)
    assert np.array_equal(flatten(params.weights, params.biases), theta_before)
    assert params.step == 1

    # With accumulated momentum, a zero gradient decays both moment buffers
    # by their respective rates.
    rng = np.random.default_rng(1)
    adam_step(params, unflatten(params, rng.standard_normal(params.theta_size())), lr=1e-3)
    m_before = [m.copy() for m in params.adam_m]
    v_before = [v.copy() for v in params.adam_v]
    adam_step(params, zero, lr=1e-3)
    for m_old, m_new in zip(m_before, params.adam_m):
        assert np.array_equal(m_new, 0.9 * m_old)
    for v_old, v_new in zip(v_before, params.adam_v):
        assert np.array_equal(v_new, 0.999 * v_old)


def test_adam_first_step_is_signed_unit_step():
    params = tiny_params(seed=10)
    theta_before = flatten(params.weights, params.biases).copy()
    rng = np.random.default_rng(2)
    flat_g = np.where(rng.random(params.theta_size()) < 0.5, 1.0, -1.0) * (0.1 + rng.random(params.theta_size()))
    adam_step(params, unflatten(params, flat_g), lr=1e-3)
    delta = flatten(params.weights, params.biases) - theta_before
    assert np.allclose(delta, -1e-3 * np.sign(flat_g), rtol=1e-6)


def test_adam_descends_quadratic_bowl():
    params = tiny_params(seed=12)
    target = np.zeros(params.theta_size())
    values = []
    for _ in range(100):
        theta = flatten(params.weights, params.biases)
        values.append(0.5 * float(np.sum((theta - target) ** 2)))
        adam_step(params, unflatten(params, theta - target), lr=0.01)
    tail = values[20:]
    assert all(a > b for a, b in zip(tail, tail[1:]))
    assert values[-1] < values[0]


def test_adam_rejects_non_finite_gradient():
    params = tiny_params(seed=13)
    bad = np.zeros(params.theta_size())
    bad[0] = np.nan
    with pytest.raises(FloatingPointError):
        adam_step(params, unflatten(params, bad), lr=1e-3)


def test_forward_rejects_non_finite_parameters():
    params = tiny_params(seed=14)
    params.weights[0][0, 0] = np.inf
    with pytest.raises(FloatingPointError):
        forward(params)


def test_grad_norm_matches_flat_norm():
    params = tiny_params(seed=15)
    rng = np.random.default_rng(4)
    flat = rng.standard_normal(params.theta_size())
    grads = unflatten(params, flat)
    assert grad_norm(grads) == pytest.approx(float(np.linalg.norm(flat)), rel=1e-12)


def test_checkpoint_round_trip(tmp_path):
    params = tiny_params(seed=16)
    rng = np.random.default_rng(5)
    adam_step(params, unflatten(params, rng.standard_normal(params.theta_size())), lr=1e-3)
    path = tmp_path / "ckpt.npz"
    save_checkpoint(path, params, extra={"note": "x"})
    loaded, extra = load_checkpoint(path)
    assert extra == {"note": "x"}
    assert loaded.step == params.step
    assert loaded.variance == params.variance
    assert loaded.config == params.config
    assert all(np.array_equal(a, b) for a, b in zip(loaded.weights, params.weights))
    assert all(np.array_equal(a, b) for a, b in zip(loaded.adam_m, params.adam_m))
    assert all(np.array_equal(a, b) for a, b in zip(loaded.adam_v, params.adam_v))


def test_backprop_is_linear_in_output_gradient():
    params = tiny_params(seed=17)
    rng = np.random.default_rng(6)
    d1 = rng.standard_normal(params.config.output_dim)
    d2 = rng.standard_normal(params.config.output_dim)
    g1 = flatten(*backprop_mean_gradient(params, d1))
    g2 = flatten(*backprop_mean_gradient(params, d2))
    g12 = flatten(*backprop_mean_gradient(params, d1 + 2.5 * d2))
    assert np.allclose(g12, g1 + 2.5 * g2, atol=1e-12)
