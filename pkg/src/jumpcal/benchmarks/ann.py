"""Direct price regression with a single feedforward network."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import Diverged, EmptyInput
from ..tensor_net import tape as ad
from ..tensor_net.network import Network, NetSpec, forward, init
from ..tensor_net.optim import Adam, AdamConfig, scheduled_lr


@dataclass(frozen=True)
class AnnConfig:
    hidden: tuple[int, ...] = (32, 32)
    hidden_activation: str = "tanh"
    epochs: int = 2000
    # geometric decay to 1e-5 keeps the full-batch loss curve monotone near convergence
    adam: AdamConfig = field(default_factory=lambda: AdamConfig(lr_final=1e-5))
    seed: int = 0


def ann_features(spot, strike, maturity, rate) -> np.ndarray:
    """(S/S0, K/S0, T, r) at valuation time, so S/S0 = 1."""
    spot = np.asarray(spot, dtype=float)
    return np.column_stack([np.ones_like(spot), np.asarray(strike) / spot,
                            np.asarray(maturity, dtype=float), np.asarray(rate, dtype=float)])


def _quote_arrays(quotes):
    if len(quotes) == 0:
        raise EmptyInput("no training quotes")
    spot = np.array([q.spot for q in quotes])
    x = ann_features(spot, [q.strike for q in quotes], [q.maturity for q in quotes],
                     [q.rate for q in quotes])
    y = np.array([q.price for q in quotes])
    return x, spot, y


def ann_price(net: Network, spot, strike, maturity, rate) -> np.ndarray:
    """Price = spot * net(features); the SoftPlus head keeps it positive."""
    x = ann_features(np.atleast_1d(spot), np.atleast_1d(strike), np.atleast_1d(maturity),
                     np.atleast_1d(rate))
    return np.atleast_1d(spot) * forward(net, x)


def ann_price_quotes(net: Network, quotes) -> np.ndarray:
    x, spot, _ = _quote_arrays(quotes)
    return spot * forward(net, x)


def ann_init(cfg: AnnConfig) -> Network:
    spec = NetSpec((4, *cfg.hidden, 1), cfg.hidden_activation, "softplus", 0.0, 0.1)
    return init(spec, cfg.seed)


def ann_train(quotes, cfg: AnnConfig = AnnConfig(), callback=None):
    """Fit the network to observed prices by minimising the sum of squared errors.

    Returns ``(network, per-epoch losses)``.
    """
    x, spot, y = _quote_arrays(quotes)
    net = ann_init(cfg)
    omega = net.flat()
    opt = Adam.fresh(net.n_params, cfg.adam)
    losses = []
    for epoch in range(cfg.epochs):
        tape = ad.Tape()
        params = [tape.variable(p) for p in net.parameters()]
        pred = ad.mul(forward(net, x, tape, params), spot)
        loss = ad.total(ad.square(ad.sub(y, pred)))
        value = float(loss.value)
        grads = tape.grad(loss, params)
        tape.clear()
        flat = np.concatenate([g.ravel() for g in grads])
        if not np.isfinite(value) or not np.all(np.isfinite(flat)):
            raise Diverged(epoch, value)
        losses.append(value)
        if callback is not None:
            callback(epoch, value)
        omega = opt.step(omega, flat, scheduled_lr(cfg.adam, epoch, cfg.epochs))
        net = net.with_flat(omega)
    return net, np.array(losses)
