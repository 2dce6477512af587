"""Network and optimizer tests.

Oracles:
  * an independent per-sample, per-layer loop reimplementation of the
    forward pass (dual implementation, no shared code),
  * central finite differences for every analytic gradient.
"""

import numpy as np
import pytest

from radarlab.drl.nets import Adam, Mlp, relu_grad, sigmoid, soft_update


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------


def forward_oracle(net: Mlp, x: np.ndarray) -> np.ndarray:
    """Plain-loop reimplementation of the forward pass for one sample."""
    a = np.array(x, dtype=float)
    n_layers = len(net.weights)
    for i in range(n_layers):
        w, b = net.weights[i], net.biases[i]
        z = np.array([float(np.dot(w[j], a)) + b[j] for j in range(w.shape[0])])
        if i < n_layers - 1:
            a = np.array([max(v, 0.0) for v in z])
        elif net.head == "sigmoid":
            a = np.array([1.0 / (1.0 + np.exp(-v)) for v in z])
        else:
            a = z
    return a


def fd_param_gradient(net: Mlp, x, upstream, param_idx, flat_idx, h=1e-5):
    """Central finite difference of sum(upstream * forward(x)) w.r.t. one
    parameter entry."""
    p = net.parameters()[param_idx]
    orig = p.flat[flat_idx]
    p.flat[flat_idx] = orig + h
    f_plus = float(np.sum(upstream * net.forward(x)))
    p.flat[flat_idx] = orig - h
    f_minus = float(np.sum(upstream * net.forward(x)))
    p.flat[flat_idx] = orig
    return (f_plus - f_minus) / (2.0 * h)


def rel_err(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-8)


# ---------------------------------------------------------------------------
# Forward pass
# ---------------------------------------------------------------------------


class TestForward:
    def test_zero_parameters_give_zero_output(self):
        net = Mlp([4, 8, 3], np.random.default_rng(0))
        for p in net.parameters():
            p[...] = 0.0
        out = net.forward(np.ones(4))
        assert np.all(out == 0.0)

    def test_single_identity_layer_is_identity(self):
        net = Mlp([3, 3], np.random.default_rng(0))
        net.weights[0][...] = np.eye(3)
        net.biases[0][...] = 0.0
        x = np.array([0.3, -1.2, 4.0])
        assert np.allclose(net.forward(x), x, atol=0.0)

    @pytest.mark.parametrize("head", ["linear", "sigmoid"])
    @pytest.mark.parametrize("sizes", [[5, 7, 3], [4, 16, 16, 2], [2, 1]])
    def test_forward_matches_loop_reimplementation(self, head, sizes):
        rng = np.random.default_rng(42)
        net = Mlp(sizes, rng, head=head, final_scale=0.5)
        for _ in range(20):
            x = rng.standard_normal(sizes[0]) * 2.0
            assert np.allclose(net.forward(x), forward_oracle(net, x), atol=1e-12)

    def test_batched_forward_matches_per_sample(self):
        rng = np.random.default_rng(3)
        net = Mlp([4, 10, 2], rng)
        xs = rng.standard_normal((6, 4))
        batch = net.forward(xs)
        for i in range(6):
            assert np.allclose(batch[i], net.forward(xs[i]), atol=0.0)

    def test_dimension_mismatch_raises(self):
        net = Mlp([4, 2], np.random.default_rng(0))
        with pytest.raises(ValueError, match="input width"):
            net.forward(np.zeros(5))

    def test_sigmoid_head_bounded(self):
        rng = np.random.default_rng(9)
        net = Mlp([3, 8, 2], rng, head="sigmoid", final_scale=2.0)
        out = net.forward(rng.standard_normal((100, 3)) * 10)
        # Closed bounds: float sigmoid saturates to exactly 0/1 far out.
        assert np.all(out >= 0.0) and np.all(out <= 1.0)
        moderate = net.forward(np.zeros(3))
        assert np.all(moderate > 0.0) and np.all(moderate < 1.0)

    def test_bad_head_rejected(self):
        with pytest.raises(ValueError, match="head"):
            Mlp([2, 2], np.random.default_rng(0), head="tanh")


# ---------------------------------------------------------------------------
# Backward pass
# ---------------------------------------------------------------------------


class TestBackward:
    def test_linear_layer_weight_gradient_is_outer_product(self):
        net = Mlp([4, 1], np.random.default_rng(0))
        x = np.array([1.0, -2.0, 3.0, 0.5])
        _, cache = net.forward_cache(x)
        grads, _ = net.backward(cache, np.array([2.0]))
        assert np.allclose(grads[0], 2.0 * x[None, :], atol=0.0)
        assert np.allclose(grads[1], [2.0], atol=0.0)

    @pytest.mark.parametrize(
        "sizes,head",
        [
            ([5, 12, 3], "linear"),
            ([4, 8, 8, 2], "linear"),
            ([6, 10, 4], "sigmoid"),
            ([3, 1], "sigmoid"),
        ],
    )
    def test_parameter_gradients_match_finite_differences(self, sizes, head):
        rng = np.random.default_rng(7)
        net = Mlp(sizes, rng, head=head, final_scale=0.5)
        x = rng.standard_normal((3, sizes[0]))
        upstream = rng.standard_normal((3, sizes[-1]))
        _, cache = net.forward_cache(x)
        grads, _ = net.backward(cache, upstream)
        n_checked = 0
        while n_checked < 100:
            pi = rng.integers(len(grads))
            fi = rng.integers(net.parameters()[pi].size)
            fd = fd_param_gradient(net, x, upstream, pi, fi)
            assert rel_err(fd, grads[pi].flat[fi]) < 1e-4
            n_checked += 1

    def test_input_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        net = Mlp([5, 9, 2], rng, final_scale=0.5)
        x = rng.standard_normal(5)
        upstream = rng.standard_normal(2)
        _, cache = net.forward_cache(x)
        _, gin = net.backward(cache, upstream)
        h = 1e-5
        for i in range(5):
            xp, xm = x.copy(), x.copy()
            xp[i] += h
            xm[i] -= h
            fd = (
                float(np.sum(upstream * net.forward(xp)))
                - float(np.sum(upstream * net.forward(xm)))
            ) / (2 * h)
            assert rel_err(fd, gin[i]) < 1e-4

    def test_rectifier_subgradient_at_zero_is_zero(self):
        assert relu_grad(np.array([0.0]))[0] == 0.0
        # A preactivation of exactly zero passes no gradient through.
        net = Mlp([1, 1, 1], np.random.default_rng(0))
        net.weights[0][...] = 1.0
        net.biases[0][...] = 0.0
        net.weights[1][...] = 1.0
        _, cache = net.forward_cache(np.array([0.0]))
        grads, gin = net.backward(cache, np.array([1.0]))
        assert grads[0][0, 0] == 0.0
        assert gin[0] == 0.0

    def test_shape_mismatch_raises(self):
        net = Mlp([3, 2], np.random.default_rng(0))
        _, cache = net.forward_cache(np.zeros(3))
        with pytest.raises(ValueError, match="gradient shape"):
            net.backward(cache, np.zeros(3))

    def test_gradients_accumulate_over_batch(self):
        rng = np.random.default_rng(13)
        net = Mlp([4, 6, 2], rng)
        xs = rng.standard_normal((5, 4))
        ups = rng.standard_normal((5, 2))
        _, cache = net.forward_cache(xs)
        grads, _ = net.backward(cache, ups)
        summed = None
        for i in range(5):
            _, ci = net.forward_cache(xs[i])
            gi, _ = net.backward(ci, ups[i])
            if summed is None:
                summed = [g.copy() for g in gi]
            else:
                for s, g in zip(summed, gi):
                    s += g
        for g_batch, g_sum in zip(grads, summed):
            assert np.allclose(g_batch, g_sum, atol=1e-12)


# ---------------------------------------------------------------------------
# Optimizer and target updates
# ---------------------------------------------------------------------------


class TestAdam:
    def test_first_step_matches_hand_computation(self):
        p = [np.array([1.0, -2.0])]
        g = [np.array([0.5, -0.25])]
        opt = Adam(p, lr=1e-2)
        opt.step(p, g)
        # t=1: m_hat = g, v_hat = g^2 -> update = lr * g/(|g| + eps)
        expected = np.array([1.0, -2.0]) - 1e-2 * np.array([0.5, -0.25]) / (
            np.abs([0.5, -0.25]) + 1e-8
        )
        assert np.allclose(p[0], expected, atol=1e-12)

    def test_two_steps_match_reference_recursion(self):
        rng = np.random.default_rng(5)
        p = [rng.standard_normal((3, 2))]
        grads = [rng.standard_normal((3, 2)) for _ in range(2)]
        opt = Adam(p, lr=3e-3)
        ref = p[0].copy()
        m = np.zeros_like(ref)
        v = np.zeros_like(ref)
        for t, g in enumerate(grads, start=1):
            opt.step(p, [g])
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            ref -= 3e-3 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
        assert np.allclose(p[0], ref, atol=1e-14)

    def test_zero_gradient_leaves_parameters_fixed(self):
        p = [np.array([1.0, 2.0])]
        opt = Adam(p)
        opt.step(p, [np.zeros(2)])
        assert np.allclose(p[0], [1.0, 2.0], atol=0.0)


class TestSoftUpdate:
    def test_distance_decreases_monotonically(self):
        rng = np.random.default_rng(21)
        online = Mlp([4, 8, 2], rng)
        target = Mlp([4, 8, 2], rng)
        def dist():
            return sum(
                float(np.sum((tp - op) ** 2))
                for tp, op in zip(target.parameters(), online.parameters())
            )
        prev = dist()
        for _ in range(50):
            soft_update(target, online, 0.005)
            cur = dist()
            assert cur < prev
            prev = cur

    def test_rho_one_copies_online(self):
        rng = np.random.default_rng(22)
        online = Mlp([3, 5, 1], rng)
        target = Mlp([3, 5, 1], rng)
        soft_update(target, online, 1.0)
        for tp, op in zip(target.parameters(), online.parameters()):
            assert np.allclose(tp, op, atol=1e-15)

    def test_rho_zero_is_noop(self):
        rng = np.random.default_rng(23)
        online = Mlp([3, 5, 1], rng)
        target = Mlp([3, 5, 1], rng)
        before = target.get_state()
        soft_update(target, online, 0.0)
        for b, a in zip(before, target.parameters()):
            assert np.array_equal(b, a)


class TestStatePlumbing:
    def test_get_set_state_roundtrip(self):
        rng = np.random.default_rng(31)
        a = Mlp([4, 6, 2], rng)
        b = Mlp([4, 6, 2], rng)
        b.set_state(a.get_state())
        x = rng.standard_normal(4)
        assert np.array_equal(a.forward(x), b.forward(x))

    def test_copy_is_independent(self):
        net = Mlp([3, 4, 1], np.random.default_rng(0))
        clone = net.copy()
        net.weights[0][...] += 1.0
        assert not np.allclose(clone.weights[0], net.weights[0])

    def test_set_state_shape_mismatch_raises(self):
        a = Mlp([3, 4, 1], np.random.default_rng(0))
        b = Mlp([3, 5, 1], np.random.default_rng(0))
        with pytest.raises(ValueError):
            a.set_state(b.get_state())

    def test_sigmoid_is_stable_at_extremes(self):
        z = np.array([-1e3, -50.0, 0.0, 50.0, 1e3])
        s = sigmoid(z)
        assert np.all(np.isfinite(s))
        assert s[0] == 0.0 or s[0] < 1e-300
        assert s[2] == 0.5
        assert s[-1] == 1.0
