import numpy as np
import pytest

from slicedot import EmptyBatch, TiedInputs, finite_diff_check, grad_swgg_soft, grad_task_loss, make_measure, swgg_soft
from slicedot.grad import evaluate_batch

from conftest import unit


def swgg_instance(rng, m=6, mi=None, d=3):
    return rng.standard_normal((d, m)), rng.standard_normal((d, mi or m)), unit(rng, d)


def test_value_matches_swgg_soft(rng):
    u, v, theta = swgg_instance(rng, mi=9)
    g = grad_swgg_soft(u, v, theta, 0.3)
    assert g.value == pytest.approx(swgg_soft(make_measure(u), make_measure(v), theta, 0.3), abs=1e-14)


def test_matched_sets_have_zero_gradient(rng):
    u = rng.standard_normal((2, 6))
    g = grad_swgg_soft(u, u.copy(), unit(rng, 2), 1e-3)
    assert g.value <= 1e-9
    assert np.linalg.norm(g.d_theta) <= 1e-6
    assert np.linalg.norm(g.d_refs) <= 1e-6


@pytest.mark.parametrize("tau", [0.1, 0.5, 1.0])
def test_swgg_gradients_against_finite_differences(rng, tau):
    for k in range(20):
        mi = int(rng.choice([5, 6, 8]))
        u, v, theta = swgg_instance(rng, m=6, mi=mi)
        g = grad_swgg_soft(u, v, theta, tau)
        assert finite_diff_check(lambda t: grad_swgg_soft(u, v, t, tau).value, theta, g.d_theta,
                                 1e-5, 20, seed=k) <= 1e-4
        assert finite_diff_check(lambda p: grad_swgg_soft(p.reshape(u.shape), v, theta, tau).value,
                                 u, g.d_refs, 1e-5, 20, seed=k) <= 1e-4


def test_tangent_gradient_with_renormalized_probes(rng):
    u, v, theta = swgg_instance(rng, d=2)
    g = grad_swgg_soft(u, v, theta, 0.5)
    tangent = g.d_theta - theta * (theta @ g.d_theta)
    f = lambda t: grad_swgg_soft(u, v, t / np.linalg.norm(t), 0.5).value  # noqa: E731
    assert finite_diff_check(f, theta, tangent, 1e-5, 20) <= 1e-4


def test_slice_sign_symmetry(rng):
    u, v, theta = swgg_instance(rng)
    a, b = grad_swgg_soft(u, v, theta, 0.5), grad_swgg_soft(u, v, -theta, 0.5)
    assert a.value == pytest.approx(b.value, abs=1e-12)
    np.testing.assert_allclose(b.d_theta, -a.d_theta, atol=1e-10)


def test_ties_are_reported():
    u = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    with pytest.raises(TiedInputs):
        grad_swgg_soft(u, u + 0.5, np.array([1.0, 0.0]), 0.5)


def test_displacement_antisymmetry(rng):
    # translating refs and tokens together leaves the soft SWGG unchanged
    u = rng.standard_normal((3, 5))
    g = grad_swgg_soft(u, u + 1e-3 * rng.standard_normal((3, 5)), unit(rng, 3), 0.2)
    np.testing.assert_allclose(g.d_refs.sum(axis=1), -g.d_tokens.sum(axis=1), atol=1e-9)


def head_for(rng, k, embed_dim, scale=0.3):
    return scale * rng.standard_normal(k * (embed_dim + 1))


def test_zero_head_balanced_labels(rng):
    k, n_sl, m = 3, 2, 4
    batch = [(rng.standard_normal((2, 4)), c) for c in range(k) for _ in range(2)]
    refs, thetas = rng.standard_normal((2, m)), rng.standard_normal((n_sl, 2))
    head = np.zeros(k * (n_sl * m + 1))
    g = grad_task_loss(batch, refs, thetas / np.linalg.norm(thetas, axis=1, keepdims=True), head, 0.5)
    assert g.objective_value == np.log(k)
    bias = g.d_head[-k:]
    np.testing.assert_allclose(bias, 0.0, atol=1e-15)
    np.testing.assert_array_equal(g.d_theta, 0.0)


def test_bias_gradient_unbalanced(rng):
    batch = [(rng.standard_normal((2, 3)), 0), (rng.standard_normal((2, 3)), 0), (rng.standard_normal((2, 3)), 1)]
    g = grad_task_loss(batch, rng.standard_normal((2, 3)), np.array([[1.0, 0.0]]), np.zeros(2 * 4), 0.5)
    np.testing.assert_allclose(g.d_head[-2:], [0.5 - 2 / 3, 0.5 - 1 / 3], atol=1e-15)


@pytest.mark.parametrize("tau", [0.1, 0.5, 1.0])
def test_task_loss_gradients_against_finite_differences(rng, tau):
    d, m, n_sl, k = 3, 5, 2, 3
    for seed in range(20):
        refs = rng.standard_normal((d, m))
        thetas = rng.standard_normal((n_sl, d))
        thetas /= np.linalg.norm(thetas, axis=1, keepdims=True)
        head = head_for(rng, k, n_sl * m)
        batch = [(rng.standard_normal((d, int(rng.integers(3, 8)))), int(rng.integers(k)))]
        g = grad_task_loss(batch, refs, thetas, head, tau)
        sizes = (refs.size, thetas.size)

        def f(p):
            return grad_task_loss(batch, p[:sizes[0]].reshape(refs.shape),
                                  p[sizes[0]:sum(sizes)].reshape(thetas.shape), p[sum(sizes):], tau).objective_value

        point = np.concatenate([refs.ravel(), thetas.ravel(), head])
        grad = np.concatenate([g.d_refs.ravel(), g.d_theta.ravel(), g.d_head])
        assert finite_diff_check(f, point, grad, 1e-5, 20, seed=seed, basis="coordinate") <= 1e-4


def test_duplicated_batch_same_gradient(rng):
    batch = [(rng.standard_normal((2, 5)), int(c)) for c in (0, 1, 1)]
    refs, thetas, head = rng.standard_normal((2, 4)), np.array([[0.6, 0.8]]), head_for(rng, 2, 4)
    a = grad_task_loss(batch, refs, thetas, head, 0.3)
    b = grad_task_loss(batch + batch, refs, thetas, head, 0.3)
    for x, y in ((a.d_theta, b.d_theta), (a.d_refs, b.d_refs), (a.d_head, b.d_head)):
        np.testing.assert_allclose(x, y, rtol=1e-13, atol=1e-15)


def test_gradients_deterministic(rng):
    batch = [(rng.standard_normal((3, 6)), 1), (rng.standard_normal((3, 4)), 0)]
    args = (rng.standard_normal((3, 5)), np.eye(3)[:2], head_for(rng, 2, 10), 0.4, np.array([0.3, 0.7]))
    a, b = evaluate_batch(batch, *args), evaluate_batch(batch, *args)
    np.testing.assert_array_equal(a.grads.d_theta, b.grads.d_theta)
    np.testing.assert_array_equal(a.grads.d_refs, b.grads.d_refs)


def test_empty_batch():
    with pytest.raises(EmptyBatch):
        grad_task_loss([], np.zeros((2, 3)), np.eye(2), np.zeros(2 * 7), 0.5)


def test_finite_diff_check_quadratic(rng):
    a = rng.standard_normal((5, 5))
    a = a @ a.T
    x = rng.standard_normal(5)
    # central differences are exact on quadratics; a larger step keeps roundoff small
    assert finite_diff_check(lambda p: 0.5 * p @ a @ p, x, a @ x, step=1e-3) <= 1e-10


def test_finite_diff_check_constant():
    assert finite_diff_check(lambda p: 3.0, np.ones(4), np.zeros(4)) == 0.0
    assert finite_diff_check(lambda p: 3.0, np.ones(4), np.ones(4), directions=5) > 0.1


def test_finite_diff_check_catches_wrong_gradient(rng):
    x = rng.standard_normal(4)
    assert finite_diff_check(lambda p: p @ p, x, 3 * x) > 0.1
