import math

import numpy as np
import pytest

from jumpcal.errors import Diverged, NegativeDt, ShapeMismatch
from jumpcal.jump_relax import RelaxConfig
from jumpcal.njsde import (
    Batch, ContractSpec, ModelConfig, NoiseBank, PathState, StepContext, TrainConfig, build_networks,
    disable_jumps, grad_loss, loss, loss_and_grad, make_bank, noise_slice, price_call, price_calls,
    simulate, step, train,
)
from jumpcal.tensor_net.network import HEADS, constant_network_set

from oracles import bachelier_call


def cfg_for(paths=8, steps=5, **model):
    return TrainConfig(paths=paths, steps=steps, epochs=3, model=ModelConfig(hidden=(4,), **model))


def small_targets(rng, n=3):
    ks = rng.uniform(85, 115, n)
    ts = rng.uniform(0.1, 1.0, n)
    return [(ContractSpec(k, t, 0.02, 100.0), float(p)) for k, t, p in zip(ks, ts, rng.uniform(2, 15, n))]


class TestStep:
    def test_constant_coefficients_match_euler_oracle(self, rng):
        a, b, c, d, rho = 0.03, 0.2, 0.5, 0.3, -0.4
        nets = constant_network_set({"drift_s": a, "diffusion_s": b, "drift_v": c, "diffusion_v": d,
                                     "correlation": rho})
        bank = NoiseBank.generate(6, 1, 3, 1)
        batch = Batch.build([ContractSpec(95.0, 0.5, 0.01, 100.0)], 6)
        s0, v0 = rng.uniform(80, 120, 6), rng.uniform(0.01, 0.1, 6)
        dt = 0.01
        out = step(PathState(s0, v0, 0), nets, noise_slice(bank, 0), RelaxConfig(), dt,
                   StepContext(batch, ModelConfig(hidden=(2,))))
        eps, w = bank.eps_s[:, 0], bank.eps_v[:, 0]
        s_ref = s0 + a * 100 * dt + b * 100 * math.sqrt(dt) * eps
        v_ref = v0 + c * dt + d * math.sqrt(dt) * (rho * eps + math.sqrt(1 - rho**2) * w)
        np.testing.assert_allclose(out.s, s_ref, rtol=0, atol=1e-12)
        np.testing.assert_allclose(out.v, v_ref, rtol=0, atol=1e-12)

    def test_zero_outputs_leave_spot_unchanged(self):
        nets = constant_network_set({})
        cfg = TrainConfig(paths=4, steps=1, model=ModelConfig(hidden=(2,)))
        s = simulate([ContractSpec(100.0, 1.0, 0.0, 100.0)], nets, make_bank(cfg), cfg)
        assert np.all(s == 100.0)

    def test_zero_correlation_uses_independent_shock(self):
        nets = constant_network_set({"diffusion_v": 0.5})
        bank = NoiseBank.generate(5, 1, 3, 2)
        batch = Batch.build([ContractSpec(100.0, 1.0, 0.0, 100.0)], 5)
        out = step(PathState(np.full(5, 100.0), np.zeros(5), 0), nets, noise_slice(bank, 0), RelaxConfig(),
                   0.25, StepContext(batch, ModelConfig(hidden=(2,))))
        np.testing.assert_allclose(out.v, 0.5 * 0.5 * bank.eps_v[:, 0], rtol=1e-15)

    def test_negative_dt(self):
        nets = constant_network_set({})
        bank = NoiseBank.generate(2, 1, 3, 0)
        batch = Batch.build([ContractSpec(100.0, 1.0, 0.0, 100.0)], 2)
        with pytest.raises(NegativeDt):
            step(PathState(np.ones(2), np.zeros(2)), nets, noise_slice(bank, 0), RelaxConfig(), -0.1,
                 StepContext(batch, ModelConfig(hidden=(2,))))

    def test_jump_term(self):
        nets = constant_network_set({"jump_s": 0.05, "intensity": 2.0, "jump_v": 0.1})
        cfg = TrainConfig(paths=50, steps=1, model=ModelConfig(hidden=(2,)))
        bank = make_bank(cfg)
        s = simulate([ContractSpec(100.0, 0.5, 0.0, 100.0)], nets, bank, cfg, temperature=0.3)
        from jumpcal.jump_relax import relaxed_count_and_grad
        f, _ = relaxed_count_and_grad(np.full(50, 2.0 * 0.5), bank.gumbel[:, 0], 0.3)
        np.testing.assert_allclose(s[0], 100.0 + 0.05 * 100.0 * f * bank.u_s[:, 0], rtol=1e-14)


class TestPricing:
    def test_intrinsic_without_dynamics(self):
        nets = constant_network_set({})
        cfg = cfg_for()
        price, payoffs = price_call(ContractSpec(80.0, 1.0, 0.0, 100.0), nets, make_bank(cfg), cfg)
        assert price == 20.0 and payoffs.shape == (8,)

    def test_bachelier_oracle_at_large_m(self):
        a, b = 0.02, 0.25
        nets = constant_network_set({"drift_s": a, "diffusion_s": b})
        cfg = TrainConfig(paths=100_000, steps=4, model=ModelConfig(hidden=(2,)))
        c = ContractSpec(105.0, 0.75, 0.03, 100.0)
        res = price_calls([c], nets, make_bank(cfg), cfg)
        ref = bachelier_call(100.0, 105.0, 0.03, 0.75, a * 100, b * 100)
        assert abs(res.prices[0] - ref) < 3 * res.std_errors[0]

    def test_standard_error_scaling(self):
        nets = constant_network_set({"diffusion_s": 0.2})
        c = [ContractSpec(100.0, 1.0, 0.0, 100.0)]
        se = {}
        for m in (2000, 4000, 8000):
            cfg = TrainConfig(paths=m, steps=2, seed=5, model=ModelConfig(hidden=(2,)))
            se[m] = price_calls(c, nets, make_bank(cfg), cfg).std_errors[0]
        assert se[2000] / se[4000] == pytest.approx(math.sqrt(2), rel=0.2)
        assert se[2000] / se[8000] == pytest.approx(2.0, rel=0.2)

    def test_deterministic(self, rng):
        cfg = cfg_for()
        nets, bank, tg = build_networks(cfg, 1), make_bank(cfg), small_targets(rng)
        a, b = loss_and_grad(tg, nets, bank, cfg, 0.5), loss_and_grad(tg, nets, bank, cfg, 0.5)
        assert a[0] == b[0] and np.array_equal(a[1], b[1])

    def test_bank_mismatch(self):
        cfg = cfg_for()
        with pytest.raises(ShapeMismatch):
            simulate([ContractSpec(100.0, 1.0, 0.0, 100.0)], build_networks(cfg, 0),
                     NoiseBank.generate(8, 6, 3, 0), cfg)
        with pytest.raises(ShapeMismatch):
            simulate([ContractSpec(100.0, 1.0, 0.0, 100.0)], build_networks(cfg_for(variance_feature=True), 0),
                     make_bank(cfg), cfg)


class TestLoss:
    def test_zero_when_exact(self, rng):
        cfg = cfg_for()
        nets, bank = build_networks(cfg, 0), make_bank(cfg)
        cs = [c for c, _ in small_targets(rng)]
        exact = list(zip(cs, price_calls(cs, nets, bank, cfg).prices))
        assert loss(exact, nets, bank, cfg) == 0.0
        assert np.all(grad_loss(exact, nets, bank, cfg) == 0)

    def test_residual_arithmetic(self):
        nets = constant_network_set({})
        cfg = cfg_for()
        bank = make_bank(cfg)
        c1, c2 = ContractSpec(80.0, 1.0, 0.0, 100.0), ContractSpec(90.0, 1.0, 0.0, 100.0)
        assert loss([(c1, 23.0)], nets, bank, cfg) == 9.0
        assert loss([(c1, 21.0), (c2, 8.0)], nets, bank, cfg) == 5.0

    def test_out_of_the_money_gradient_is_zero(self, rng):
        cfg = cfg_for()
        nets = build_networks(cfg, 0)
        tg = [(ContractSpec(1e4, 0.5, 0.0, 100.0), 3.0)]
        assert np.all(grad_loss(tg, nets, make_bank(cfg), cfg) == 0)


def _fd_check(cfg, seed, rng, h=1e-4, per_head=25):
    nets, bank, tg = build_networks(cfg, seed), make_bank(cfg), small_targets(rng, 2)
    _, g, _ = loss_and_grad(tg, nets, bank, cfg, 0.5)
    w = nets.flat()
    worst = {}
    for head, sl in nets.head_slices().items():
        idx = np.arange(w.size)[sl]
        if per_head is not None and per_head < idx.size:
            idx = idx[np.linspace(0, idx.size - 1, per_head).astype(int)]
        fd = np.empty(idx.size)
        for j, i in enumerate(idx):
            e = np.zeros_like(w)
            e[i] = h
            fd[j] = (loss(tg, nets.with_flat(w + e), bank, cfg, 0.5)
                     - loss(tg, nets.with_flat(w - e), bank, cfg, 0.5)) / (2 * h)
        worst[head] = np.max(np.abs(fd - g[idx])) / max(np.max(np.abs(fd)), 1e-12)
    return worst


class TestGradient:
    def test_every_head_matches_finite_differences(self, rng):
        worst = _fd_check(cfg_for(variance_feature=True), 3, rng)
        assert max(worst.values()) < 1e-3, worst

    def test_hard_mode_gradient_is_finite(self, rng):
        cfg = TrainConfig(paths=8, steps=5, relax=RelaxConfig(hard_mode=True), model=ModelConfig(hidden=(4,)))
        g = grad_loss(small_targets(rng), build_networks(cfg, 0), make_bank(cfg), cfg)
        assert np.all(np.isfinite(g))


class TestDegeneracy:
    def test_disabled_jumps_equal_jump_free_engine(self, rng):
        on = cfg_for()
        off = cfg_for(jumps=False)
        nets = build_networks(on, 2)
        cs = [c for c, _ in small_targets(rng)]
        a = price_calls(cs, disable_jumps(nets), make_bank(on), on).terminal
        b = price_calls(cs, nets, make_bank(off), off).terminal
        assert np.array_equal(a, b)

    def test_disabled_equals_zero_intensity_and_sizes(self, rng):
        cfg = cfg_for()
        nets = build_networks(cfg, 4)
        zeroed = nets
        for head in ("jump_s", "jump_v", "intensity"):
            net = nets[head]
            ws = [w * 0 for w in net.weights]
            bs = [b * 0 for b in net.biases]
            bs[-1][0] = -800.0  # softplus(-800) underflows to exactly zero
            zeroed = zeroed.replace_head(head, type(net)(net.layer_sizes, ws, bs, net.hidden_activation,
                                                         net.output_activation))
        cs = [c for c, _ in small_targets(rng)]
        bank = make_bank(cfg)
        a = price_calls(cs, disable_jumps(nets), bank, cfg).terminal
        b = price_calls(cs, zeroed, bank, cfg).terminal
        assert np.array_equal(a, b)

    def test_jump_gradient_zero_when_disabled(self, rng):
        cfg = cfg_for()
        nets = disable_jumps(build_networks(cfg, 0))
        g = grad_loss(small_targets(rng), nets, make_bank(cfg), cfg)
        for head in ("jump_s", "jump_v", "intensity"):
            assert np.all(g[nets.head_slices()[head]] == 0)


class TestTrain:
    def test_zero_epochs(self, rng):
        cfg = TrainConfig(paths=8, steps=5, epochs=0, model=ModelConfig(hidden=(4,)))
        res = train(small_targets(rng), cfg, init_seed=3)
        assert res.history == [] and np.array_equal(res.nets.flat(), build_networks(cfg, 3).flat())

    def test_fixed_point(self, rng):
        cfg = TrainConfig(paths=8, steps=5, epochs=5, model=ModelConfig(hidden=(4,)))
        nets = build_networks(cfg, 0)
        c = ContractSpec(95.0, 0.5, 0.01, 100.0)
        p = price_calls([c], nets, make_bank(cfg), cfg, temperature=1.0).prices[0]
        # the temperature anneals, so pin it to keep the target exact at every epoch
        cfg = TrainConfig(paths=8, steps=5, epochs=5, relax=RelaxConfig(schedule="constant", tau=1.0),
                          model=ModelConfig(hidden=(4,)))
        res = train([(c, p)], cfg, init_seed=0)
        assert max(res.losses) < 1e-20
        assert np.max(np.abs(res.nets.flat() - nets.flat())) < 1e-6

    def test_loss_decreases(self, rng):
        cfg = TrainConfig(paths=16, steps=5, epochs=40, adam=TrainConfig().adam,
                          model=ModelConfig(hidden=(4,)))
        res = train(small_targets(rng, 4), cfg)
        assert res.losses[-1] < res.losses[0]
        assert [h[0] for h in res.history] == list(range(40))

    def test_resume_is_bitwise(self, rng):
        tg = small_targets(rng)
        cfg = TrainConfig(paths=8, steps=5, epochs=6, model=ModelConfig(hidden=(4,)))
        full = train(tg, cfg)
        first = train(tg, cfg, stop_at=3)
        assert first.state.epoch == 3
        rest = train(tg, cfg, state=first.state)
        assert [h[1] for h in rest.history] == [h[1] for h in full.history]
        assert np.array_equal(rest.nets.flat(), full.nets.flat())

    def test_divergence_reported(self, rng):
        cfg = TrainConfig(paths=8, steps=5, epochs=3, model=ModelConfig(hidden=(4,)))
        tg = [(ContractSpec(90.0, 1.0, 0.0, 100.0), float("inf"))]
        with pytest.raises(Diverged) as err:
            train(tg, cfg)
        assert err.value.epoch == 0

    @pytest.mark.slow
    def test_heston_grid_beats_black_scholes_in_sample(self):
        from jumpcal.benchmarks import calibrate_parametric, model_prices
        from jumpcal.synthetic import generate_prices, heston_training_grid
        from jumpcal.tensor_net.optim import AdamConfig
        quotes = generate_prices(heston_training_grid())
        tg = [(ContractSpec(q.strike, q.maturity, q.rate, q.spot), q.price) for q in quotes]
        cfg = TrainConfig(paths=100, steps=10, epochs=300, adam=AdamConfig(lr=3e-3, lr_final=1e-4),
                          model=ModelConfig(hidden=(16, 16)))
        res = train(tg, cfg)
        obs = np.array([q.price for q in quotes])
        nj = np.mean(np.abs(obs - price_calls([c for c, _ in tg], res.nets, make_bank(cfg), cfg).prices))
        bs = calibrate_parametric("bs", quotes)
        bs_mae = np.mean(np.abs(obs - model_prices("bs", bs.params, quotes)))
        assert nj < bs_mae
