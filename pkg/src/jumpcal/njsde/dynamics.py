"""Euler recursion, Monte-Carlo call pricing, calibration loss and its gradient.

Every contract in a batch is simulated with the same noise bank (common
random numbers across contracts and epochs).  Rows are laid out
contract-major: row ``j*M + k`` is path ``k`` of contract ``j``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import NegativeDt, NonFinite, ShapeMismatch
from ..jump_relax import RelaxConfig, relaxed_count_and_grad
from ..tensor_net import tape as ad
from ..tensor_net.network import HEADS, NetworkSet
from .config import ModelConfig, TrainConfig
from .noise import NoiseBank

_I = {h: i for i, h in enumerate(HEADS)}
_RHO_FLOOR = 1e-12


@dataclass(frozen=True)
class ContractSpec:
    strike: float
    maturity: float
    rate: float
    spot: float

    def __post_init__(self):
        for name in ("strike", "maturity", "spot"):
            if not getattr(self, name) > 0:
                raise ShapeMismatch(f"contract {name} must be positive")


@dataclass
class PathState:
    s: object   # array or tape node, one entry per row
    v: object
    k: int = 0


@dataclass
class StepNoise:
    eps_s: np.ndarray
    w: np.ndarray
    u_s: np.ndarray
    u_v: np.ndarray
    gumbel: np.ndarray


@dataclass
class Batch:
    """Per-row contract data for a contract-major batch."""

    spot: np.ndarray
    strike: np.ndarray
    maturity: np.ndarray
    rate: np.ndarray
    n_contracts: int
    paths: int

    @classmethod
    def build(cls, contracts: Sequence[ContractSpec], paths: int) -> "Batch":
        rep = lambda xs: np.repeat(np.asarray(xs, dtype=float), paths)
        return cls(rep([c.spot for c in contracts]), rep([c.strike for c in contracts]),
                   rep([c.maturity for c in contracts]), rep([c.rate for c in contracts]),
                   len(contracts), paths)


@dataclass
class StepContext:
    batch: Batch
    model: ModelConfig
    params: list | None = None    # stacked-parameter tape nodes, or None
    temperature: float = 1.0


def noise_slice(bank: NoiseBank, k: int) -> StepNoise:
    return StepNoise(bank.eps_s[:, k], bank.w[:, k], bank.u_s[:, k], bank.u_v[:, k],
                     bank.gumbel[:, k, :])


def features(state: PathState, ctx: StepContext, dt):
    b = ctx.batch
    t = state.k * dt
    time_in = b.maturity - t if ctx.model.time_feature == "remaining" else t
    cols = [ad.div(state.s, b.spot), b.strike / b.spot,
            np.broadcast_to(time_in, b.spot.shape), b.rate]
    if ctx.model.variance_feature:
        cols.append(ad.relu(state.v))
    return ad.stack(cols, axis=-1)


def relaxed_count(rate_dt, gumbel, tau: float, hard_mode: bool):
    """Tape primitive for the relaxed jump count of mean ``rate_dt``."""
    f, dfdx = relaxed_count_and_grad(ad.value(rate_dt), gumbel, tau, hard_mode)
    return ad.record(f, ad.tape_of(rate_dt), (rate_dt, lambda g: g * dfdx))


def step(state: PathState, nets: NetworkSet, noise: StepNoise, relax: RelaxConfig, dt,
         ctx: StepContext) -> PathState:
    """One Euler step of the asset and variance recursions.

    ``dt`` is a scalar or a per-row array.  Coefficients are evaluated on
    the pre-step state; with tape parameters in ``ctx`` every operation is
    recorded.
    """
    dt = np.asarray(dt, dtype=float)
    if np.any(dt <= 0):
        raise NegativeDt("time step must be positive")
    sqdt = np.sqrt(dt)
    spot = ctx.batch.spot
    x = features(state, ctx, dt)
    out = nets.forward_all(x, ctx.params)
    for o in out:
        if not np.all(np.isfinite(ad.value(o))):
            raise NonFinite(f"non-finite coefficient at step {state.k}")

    drift_s = ad.mul(out[_I["drift_s"]], spot)
    diff_s = ad.mul(out[_I["diffusion_s"]], spot)
    s_new = ad.add(ad.add(state.s, ad.mul(drift_s, dt)),
                   ad.mul(diff_s, sqdt * noise.eps_s))

    rho = out[_I["correlation"]]
    resid = ad.sqrt(ad.floor(ad.sub(1.0, ad.square(rho)), _RHO_FLOOR))
    eps_v = ad.add(ad.mul(rho, noise.eps_s), ad.mul(resid, noise.w))
    v_new = ad.add(ad.add(state.v, ad.mul(out[_I["drift_v"]], dt)),
                   ad.mul(out[_I["diffusion_v"]], ad.mul(eps_v, sqdt)))

    if ctx.model.jumps:
        rate_dt = ad.mul(out[_I["intensity"]], dt)
        f = relaxed_count(rate_dt, noise.gumbel, ctx.temperature, relax.hard_mode)
        jump_s = ad.mul(out[_I["jump_s"]], spot)
        s_new = ad.add(s_new, ad.mul(jump_s, ad.mul(f, noise.u_s)))
        v_new = ad.add(v_new, ad.mul(out[_I["jump_v"]], ad.mul(f, noise.u_v)))
    return PathState(s_new, v_new, state.k + 1)


def _check_bank(bank: NoiseBank, cfg: TrainConfig):
    if bank.steps != cfg.steps:
        raise ShapeMismatch(f"bank has {bank.steps} steps, config expects {cfg.steps}")
    if bank.n_jumps != cfg.relax.n:
        raise ShapeMismatch(f"bank has {bank.n_jumps + 1} jump categories, config expects {cfg.relax.n + 1}")


def simulate(contracts: Sequence[ContractSpec], nets: NetworkSet, bank: NoiseBank, cfg: TrainConfig,
             params=None, temperature: float | None = None, keep_paths: bool = False):
    """Terminal asset levels, shape ``(I, M)`` (a tape node when ``params`` are nodes).

    With ``keep_paths`` a list of per-step ``(S, V)`` value arrays is also
    returned.
    """
    _check_bank(bank, cfg)
    if nets.layer_sizes[0] != cfg.model.n_features:
        raise ShapeMismatch(f"networks take {nets.layer_sizes[0]} inputs, model feeds {cfg.model.n_features}")
    if temperature is None:
        temperature = cfg.relax.tau_end
    batch = Batch.build(contracts, bank.paths)
    tiled = bank.tiled(batch.n_contracts)
    ctx = StepContext(batch, cfg.model, params, temperature)
    dt = batch.maturity / cfg.steps
    state = PathState(batch.spot.copy(), np.full(batch.spot.shape, float(cfg.v0)), 0)
    trail = [(ad.value(state.s), ad.value(state.v))] if keep_paths else None
    for k in range(cfg.steps):
        state = step(state, nets, noise_slice(tiled, k), cfg.relax, dt, ctx)
        if keep_paths:
            trail.append((ad.value(state.s), ad.value(state.v)))
    s_t = ad.reshape(state.s, (batch.n_contracts, bank.paths))
    return (s_t, trail) if keep_paths else s_t


@dataclass
class PriceResult:
    prices: np.ndarray    # (I,)
    payoffs: np.ndarray   # (I, M) discounted per-path payoffs
    terminal: np.ndarray  # (I, M)

    @property
    def std_errors(self) -> np.ndarray:
        m = self.payoffs.shape[1]
        return self.payoffs.std(axis=1, ddof=1) / np.sqrt(m) if m > 1 else np.zeros(len(self.prices))


def _discounted_prices(s_t, contracts):
    strikes = np.array([c.strike for c in contracts])[:, None]
    disc = np.exp(-np.array([c.rate * c.maturity for c in contracts]))
    payoff = ad.relu(ad.sub(s_t, strikes))
    return ad.mul(ad.mean(payoff, axis=1), disc), payoff, disc


def price_calls(contracts: Sequence[ContractSpec], nets: NetworkSet, bank: NoiseBank, cfg: TrainConfig,
                temperature: float | None = None) -> PriceResult:
    s_t = simulate(contracts, nets, bank, cfg, temperature=temperature)
    prices, payoff, disc = _discounted_prices(s_t, contracts)
    return PriceResult(np.asarray(prices), payoff * disc[:, None], s_t)


def price_call(spec: ContractSpec, nets: NetworkSet, bank: NoiseBank, cfg: TrainConfig,
               temperature: float | None = None) -> tuple[float, np.ndarray]:
    """Monte-Carlo call price and the discounted per-path payoffs."""
    res = price_calls([spec], nets, bank, cfg, temperature)
    return float(res.prices[0]), res.payoffs[0]


def _split_targets(targets):
    if len(targets) == 0:
        raise ShapeMismatch("loss needs at least one target")
    contracts = [t[0] for t in targets]
    observed = np.array([t[1] for t in targets], dtype=float)
    return contracts, observed


def loss(targets, nets: NetworkSet, bank: NoiseBank, cfg: TrainConfig,
         temperature: float | None = None) -> float:
    """Sum of squared pricing errors over ``(ContractSpec, observed price)`` pairs."""
    contracts, observed = _split_targets(targets)
    res = price_calls(contracts, nets, bank, cfg, temperature)
    return float(np.sum((observed - res.prices) ** 2))


def loss_and_grad(targets, nets: NetworkSet, bank: NoiseBank, cfg: TrainConfig,
                  temperature: float | None = None):
    """Loss, its gradient over omega, and the model prices."""
    contracts, observed = _split_targets(targets)
    tape = ad.Tape()
    params = [tape.variable(p) for p in nets.stacked_parameters()]
    s_t = simulate(contracts, nets, bank, cfg, params=params, temperature=temperature)
    prices, _, _ = _discounted_prices(s_t, contracts)
    resid = ad.sub(observed, prices)
    total = ad.total(ad.square(resid))
    value = float(ad.value(total))
    if not isinstance(total, ad.Node):
        return value, np.zeros(nets.n_params), np.asarray(ad.value(prices))
    grads = tape.grad(total, params)
    tape.clear()
    return value, nets.flat_from_stacked(grads), np.asarray(prices.value)


def grad_loss(targets, nets: NetworkSet, bank: NoiseBank, cfg: TrainConfig,
              temperature: float | None = None) -> np.ndarray:
    return loss_and_grad(targets, nets, bank, cfg, temperature)[1]
