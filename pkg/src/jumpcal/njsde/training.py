"""Training loop: fixed noise bank, simulate -> loss -> Adam update for D epochs."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import Diverged
from ..tensor_net.network import NetworkSet, disable_jumps, init_network_set
from ..tensor_net.optim import Adam, scheduled_lr
from .config import TrainConfig
from .dynamics import loss_and_grad
from .noise import NoiseBank

log = logging.getLogger(__name__)


@dataclass
class TrainState:
    nets: NetworkSet
    optimizer: Adam
    epoch: int = 0  # epochs completed
    history: list = field(default_factory=list)  # (epoch, loss, temperature)


@dataclass
class TrainResult:
    nets: NetworkSet
    history: list
    state: TrainState

    @property
    def losses(self) -> np.ndarray:
        return np.array([h[1] for h in self.history])


def build_networks(cfg: TrainConfig, init_seed: int) -> NetworkSet:
    m = cfg.model
    nets = init_network_set(m.hidden, m.n_features, init_seed, m.hidden_activation,
                            m.head_activations, m.head_bias, m.output_weight_scale)
    return nets if m.jumps else disable_jumps(nets)


def make_bank(cfg: TrainConfig) -> NoiseBank:
    return NoiseBank.generate(cfg.paths, cfg.steps, cfg.relax.n, cfg.seed)


def train(targets, cfg: TrainConfig, init_seed: int = 0, nets: NetworkSet | None = None,
          state: TrainState | None = None, bank: NoiseBank | None = None,
          callback: Callable[[int, float, float], None] | None = None,
          stop_at: int | None = None) -> TrainResult:
    """Fit the coefficient networks to ``(ContractSpec, price)`` targets.

    Runs until ``cfg.epochs`` epochs are complete; passing the ``state`` of
    an earlier call resumes it, and ``stop_at`` pauses before the end
    without changing the temperature or learning-rate schedules.  The loss recorded for an epoch is the loss
    at the parameters before that epoch's update.
    """
    if state is None:
        if nets is None:
            nets = build_networks(cfg, init_seed)
        state = TrainState(nets, Adam.fresh(nets.n_params, cfg.adam), 0, [])
    if bank is None:
        bank = make_bank(cfg)
    omega = state.nets.flat()
    nets = state.nets
    end = cfg.epochs if stop_at is None else min(stop_at, cfg.epochs)
    for epoch in range(state.epoch, end):
        tau = cfg.relax.temperature(epoch, cfg.epochs)
        value, grad, _ = loss_and_grad(targets, nets, bank, cfg, temperature=tau)
        if not np.isfinite(value) or not np.all(np.isfinite(grad)):
            raise Diverged(epoch, value)
        state.history.append((epoch, value, tau))
        if callback is not None:
            callback(epoch, value, tau)
        omega = state.optimizer.step(omega, grad, scheduled_lr(cfg.adam, epoch, cfg.epochs))
        nets = nets.with_flat(omega)
        state.epoch = epoch + 1
        state.nets = nets
    return TrainResult(state.nets, state.history, state)
