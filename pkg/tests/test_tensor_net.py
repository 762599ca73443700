import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from jumpcal.errors import BadSpec, EmptyTape, NonFinite
from jumpcal.tensor_net import tape as ad
from jumpcal.tensor_net.network import (
    HEADS, Network, NetSpec, NetworkSet, disable_jumps, forward, init, init_network_set,
    load_checkpoint, save_checkpoint, value_and_grad,
)
from jumpcal.tensor_net.optim import Adam, AdamConfig, scheduled_lr


def oracle_forward(net: Network, x):
    acts = {"tanh": np.tanh, "relu": lambda z: np.maximum(z, 0), "softplus": lambda z: np.log1p(np.exp(z)),
            "identity": lambda z: z}
    h = np.asarray(x, dtype=float)
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h.dot(w) + b
        last = k == len(net.weights) - 1
        h = acts[net.output_activation if last else net.hidden_activation](z)
    return h[..., 0]


def flat_fd(net, x, h=1e-5):
    w = net.flat()
    g = np.empty_like(w)
    for i in range(w.size):
        e = np.zeros_like(w)
        e[i] = h
        g[i] = (forward(net.with_flat(w + e), x).sum() - forward(net.with_flat(w - e), x).sum()) / (2 * h)
    return g


def analytic_grad(net, x):
    tape = ad.Tape()
    params = [tape.variable(p) for p in net.parameters()]
    out = ad.total(forward(net, x, tape, params))
    return np.concatenate([g.ravel() for g in tape.grad(out, params)])


class TestForward:
    def test_zero_net_identity_is_zero(self, rng):
        net = init(NetSpec((4, 8, 1)), 0).with_flat(np.zeros(4 * 8 + 8 + 8 + 1))
        assert np.all(forward(net, rng.normal(size=(5, 4))) == 0)

    def test_zero_weights_softplus_bias(self, rng):
        net = init(NetSpec((4, 8, 1), output_activation="softplus", output_bias=0.7, output_weight_scale=0.0), 0)
        net = Network(net.layer_sizes, [w * 0 for w in net.weights], net.biases, "tanh", "softplus")
        np.testing.assert_allclose(forward(net, rng.normal(size=(3, 4))), np.log1p(np.exp(0.7)), rtol=1e-15)

    def test_matches_matrix_oracle(self, rng):
        for act in ("identity", "softplus", "tanh"):
            net = init(NetSpec((4, 16, 16, 1), output_activation=act, output_weight_scale=1.0), 7)
            x = rng.normal(size=(50, 4))
            np.testing.assert_allclose(forward(net, x), oracle_forward(net, x), atol=1e-12, rtol=0)

    @given(st.lists(st.floats(-50, 50), min_size=4, max_size=4))
    def test_output_ranges(self, x):
        sp = init(NetSpec((4, 8, 1), output_activation="softplus", output_weight_scale=1.0), 1)
        th = init(NetSpec((4, 8, 1), output_activation="tanh", output_weight_scale=1.0), 2)
        assert forward(sp, np.array([x]))[0] > 0
        assert -1 < forward(th, np.array([x]))[0] < 1

    def test_non_finite_raises(self):
        net = init(NetSpec((4, 4, 1)), 0)
        with pytest.raises(NonFinite):
            forward(net, np.array([[np.inf, 0, 0, 0]]))


class TestBackward:
    def test_linear_neuron(self):
        net = Network((1, 1), [np.array([[2.5]])], [np.zeros(1)], "tanh", "identity")
        tape = ad.Tape()
        w, b = (tape.variable(p) for p in net.parameters())
        out = forward(net, np.array([[3.0]]), tape, [w, b])
        gw, gb = tape.grad(ad.total(out), [w, b])
        assert gw[0, 0] == 3.0 and gb[0] == 1.0

    def test_finite_difference_small_net(self, rng):
        net = init(NetSpec((4, 8, 1), output_weight_scale=1.0), 3)
        x = rng.normal(size=(6, 4))
        fd, an = flat_fd(net, x), analytic_grad(net, x)
        assert np.max(np.abs(fd - an) / np.maximum(np.abs(fd), 1e-8)) < 1e-6

    def test_twenty_random_nets_every_head(self, rng):
        worst = 0.0
        for i in range(20):
            act = ("identity", "softplus", "tanh")[i % 3]
            net = init(NetSpec((4, 5, 5, 1), ("tanh", "softplus")[i % 2], act, 0.3, 1.0), i)
            x = rng.normal(size=(4, 4))
            fd, an = flat_fd(net, x), analytic_grad(net, x)
            worst = max(worst, np.max(np.abs(fd - an)) / np.max(np.abs(fd)))
        assert worst < 1e-5

    def test_constant_output_zero_gradient(self):
        net = Network((4, 3, 1), [np.zeros((4, 3)), np.zeros((3, 1))], [np.ones(3), np.array([0.5])],
                      "relu", "identity")
        # relu of positive constants passes gradient to the bias, so use zero output weights and
        # check the gradient w.r.t. the inputs instead
        tape = ad.Tape()
        x = tape.variable(np.ones((2, 4)))
        out = ad.total(forward(net, x, tape))
        assert np.all(tape.grad(out, [x])[0] == 0)

    def test_input_gradient(self, rng):
        net = init(NetSpec((4, 6, 1), output_weight_scale=1.0), 5)
        x0 = rng.normal(size=(3, 4))
        tape = ad.Tape()
        x = tape.variable(x0)
        (g,) = tape.grad(ad.total(forward(net, x, tape)), [x])
        h = 1e-6
        for j in range(4):
            e = np.zeros_like(x0)
            e[:, j] = h
            fd = (forward(net, x0 + e) - forward(net, x0 - e)) / (2 * h)
            np.testing.assert_allclose(g[:, j], fd, rtol=1e-6, atol=1e-9)

    def test_empty_tape(self):
        tape = ad.Tape()
        with pytest.raises(EmptyTape):
            tape.backward(object())

    def test_primitives_match_finite_differences(self, rng):
        a0, b0 = rng.uniform(0.5, 2, (3, 4)), rng.uniform(0.5, 2, (4,))
        funcs = [
            lambda a, b: ad.total(ad.div(ad.mul(a, b), ad.add(a, 1.0))),
            lambda a, b: ad.total(ad.sqrt(ad.exp(ad.neg(a)) + ad.log(b))),
            lambda a, b: ad.total(ad.softplus(ad.sub(a, b)) * ad.square(ad.tanh(a))),
            lambda a, b: ad.total(ad.mean(ad.relu(ad.sub(a, 1.0)), axis=1)),
            lambda a, b: ad.total(ad.getitem(ad.stack([a, ad.reshape(ad.floor(a, 1.0), (3, 4))], 0), 1)),
        ]
        for f in funcs:
            tape = ad.Tape()
            a, b = tape.variable(a0), tape.variable(b0)
            ga, gb = tape.grad(f(a, b), [a, b])
            h = 1e-6
            for (arr, g, which) in ((a0, ga, 0), (b0, gb, 1)):
                fd = np.zeros_like(arr)
                for idx in np.ndindex(arr.shape):
                    e = np.zeros_like(arr)
                    e[idx] = h
                    args_p = (a0 + e, b0) if which == 0 else (a0, b0 + e)
                    args_m = (a0 - e, b0) if which == 0 else (a0, b0 - e)
                    fd[idx] = (f(*args_p) - f(*args_m)) / (2 * h)
                np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-8)

    def test_plain_arrays_bypass_the_tape(self):
        assert ad.add(np.ones(2), 1.0).tolist() == [2.0, 2.0]


class TestInit:
    def test_same_seed_bitwise(self):
        a, b = init(NetSpec(), 11), init(NetSpec(), 11)
        assert np.array_equal(a.flat(), b.flat())

    def test_different_seed_differs(self):
        assert not np.array_equal(init(NetSpec(), 1).flat(), init(NetSpec(), 2).flat())

    def test_fan_in_scaling(self):
        net = init(NetSpec((100, 100, 1)), 0)
        assert abs(net.weights[0].var() * 100 - 1.0) < 0.2

    def test_bad_spec(self):
        with pytest.raises(BadSpec):
            init(NetSpec((4, 3, 2)), 0)
        with pytest.raises(BadSpec):
            init(NetSpec((4, 3, 1), output_activation="relu"), 0)


class TestNetworkSet:
    def test_independent_heads_and_stable_order(self):
        nets = init_network_set((6,), seed=4)
        flats = [n.flat() for n in nets.nets]
        assert all(not np.array_equal(flats[0], f) for f in flats[1:])
        np.testing.assert_array_equal(nets.flat(), np.concatenate(flats))
        sl = nets.head_slices()
        np.testing.assert_array_equal(nets.flat()[sl["intensity"]], nets["intensity"].flat())

    def test_forward_all_matches_single_nets(self, rng):
        nets = init_network_set((5, 5), seed=2)
        x = rng.normal(size=(7, 4))
        rows = nets.forward_all(x)
        for head, row in zip(HEADS, rows):
            np.testing.assert_allclose(row, forward(nets[head], x), rtol=1e-13, atol=1e-14)

    def test_stacked_round_trip(self):
        nets = init_network_set((5,), seed=2)
        assert np.array_equal(nets.flat_from_stacked(nets.stacked_parameters()), nets.flat())

    def test_disable_jumps_zeroes_heads(self, rng):
        nets = disable_jumps(init_network_set((5,), seed=2))
        rows = nets.forward_all(rng.normal(size=(3, 4)))
        for head in ("jump_s", "jump_v", "intensity"):
            assert np.all(rows[HEADS.index(head)] == 0)

    def test_wrong_count(self):
        with pytest.raises(BadSpec):
            NetworkSet(init_network_set((3,)).nets[:7])

    def test_checkpoint_round_trip(self, tmp_path):
        nets = disable_jumps(init_network_set((4, 3), seed=9))
        save_checkpoint(tmp_path / "c.json", nets, {"epoch": 3})
        back, extra = load_checkpoint(tmp_path / "c.json")
        assert np.array_equal(back.flat(), nets.flat()) and extra == {"epoch": 3}
        assert back["intensity"].clamped
        net = init(NetSpec((4, 2, 1)), 0)
        save_checkpoint(tmp_path / "n.json", net)
        assert np.array_equal(load_checkpoint(tmp_path / "n.json")[0].flat(), net.flat())

    def test_bad_checkpoint(self, tmp_path):
        p = tmp_path / "x.json"
        p.write_text('{"format": "other"}')
        with pytest.raises(BadSpec):
            load_checkpoint(p)


class TestAdam:
    def test_minimises_quadratic(self):
        opt = Adam.fresh(2, AdamConfig(lr=0.1))
        x = np.array([3.0, -2.0])
        for _ in range(500):
            x = opt.step(x, 2 * x)
        assert np.abs(x).max() < 1e-2

    def test_clipping_bounds_first_step(self):
        opt = Adam.fresh(1, AdamConfig(lr=1.0, clip_norm=1.0))
        assert abs(opt.step(np.zeros(1), np.array([1e6]))[0]) == pytest.approx(1.0, rel=1e-6)

    def test_state_round_trip(self):
        opt = Adam.fresh(3, AdamConfig())
        opt.step(np.zeros(3), np.ones(3))
        back = Adam.from_state(AdamConfig(), opt.state_dict())
        assert back.t == 1 and np.array_equal(back.m, opt.m)

    def test_schedule_endpoints(self):
        cfg = AdamConfig(lr=1e-2, lr_final=1e-4)
        assert scheduled_lr(cfg, 0, 11) == pytest.approx(1e-2)
        assert scheduled_lr(cfg, 10, 11) == pytest.approx(1e-4)
        assert scheduled_lr(AdamConfig(), 5, 10) == 1e-3


def test_value_and_grad_helper(rng):
    net = init(NetSpec((4, 3, 1), output_weight_scale=1.0), 0)
    x = rng.normal(size=(2, 4))
    val, flat, gx = value_and_grad(net, x)
    np.testing.assert_allclose(val, forward(net, x))
    np.testing.assert_allclose(flat, analytic_grad(net, x), rtol=1e-12)
    assert gx.shape == x.shape
