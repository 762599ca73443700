"""Adam with global gradient-norm clipping, operating on flat vectors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float | None = 10.0
    lr_final: float | None = None  # geometric decay towards this over the run


@dataclass
class Adam:
    cfg: AdamConfig
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def fresh(cls, n, cfg: AdamConfig) -> "Adam":
        return cls(cfg, np.zeros(n), np.zeros(n), 0)

    def step(self, params, grad, lr=None):
        cfg = self.cfg
        lr = cfg.lr if lr is None else lr
        grad = np.asarray(grad, dtype=float)
        if cfg.clip_norm is not None:
            norm = float(np.sqrt(grad @ grad))
            if norm > cfg.clip_norm:
                grad = grad * (cfg.clip_norm / norm)
        self.t += 1
        self.m = cfg.beta1 * self.m + (1.0 - cfg.beta1) * grad
        self.v = cfg.beta2 * self.v + (1.0 - cfg.beta2) * grad * grad
        mhat = self.m / (1.0 - cfg.beta1 ** self.t)
        vhat = self.v / (1.0 - cfg.beta2 ** self.t)
        return params - lr * mhat / (np.sqrt(vhat) + cfg.eps)

    def state_dict(self) -> dict:
        return {"m": self.m.tolist(), "v": self.v.tolist(), "t": self.t}

    @classmethod
    def from_state(cls, cfg: AdamConfig, state: dict) -> "Adam":
        return cls(cfg, np.asarray(state["m"], dtype=float), np.asarray(state["v"], dtype=float),
                   int(state["t"]))


def scheduled_lr(cfg: AdamConfig, epoch: int, total: int) -> float:
    if cfg.lr_final is None or total <= 1:
        return cfg.lr
    frac = epoch / (total - 1)
    return cfg.lr * (cfg.lr_final / cfg.lr) ** frac
