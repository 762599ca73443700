"""Truncated-Poisson jump counts and their Gumbel-Softmax relaxation.

All functions broadcast over leading axes; the category axis is last.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

from .errors import BadSpec, DegenerateProbabilities, NegativeIntensity

LOG_FLOOR_PROB = 1e-30
LOG_FLOOR = float(np.log(LOG_FLOOR_PROB))


@dataclass(frozen=True)
class RelaxConfig:
    n: int = 3
    tau: float = 1.0
    tau_start: float = 1.0
    tau_end: float = 0.1
    schedule: str = "geometric"  # geometric | linear | constant
    hard_mode: bool = False

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise BadSpec(f"n must be a positive integer, got {self.n!r}")
        if not (self.tau > 0 and self.tau_start > 0 and self.tau_end > 0):
            raise BadSpec("temperatures must be positive")
        if self.tau_end > self.tau_start:
            raise BadSpec("tau_end must not exceed tau_start")
        if self.schedule not in ("geometric", "linear", "constant"):
            raise BadSpec(f"unknown temperature schedule {self.schedule!r}")

    def temperature(self, epoch: int, total: int) -> float:
        """Temperature for ``epoch`` (0-based) of a ``total``-epoch run."""
        if self.schedule == "constant" or total <= 1:
            return self.tau if self.schedule == "constant" else self.tau_start
        frac = min(max(epoch / (total - 1), 0.0), 1.0)
        if self.schedule == "linear":
            return self.tau_start + frac * (self.tau_end - self.tau_start)
        return self.tau_start * (self.tau_end / self.tau_start) ** frac


def _check_rate(rate):
    rate = np.asarray(rate, dtype=float)
    if np.any(rate < 0):
        raise NegativeIntensity("jump intensity must be non-negative")
    return rate


def truncated_poisson(intensity, dt, n: int) -> np.ndarray:
    """P(i jumps | at most n) for a Poisson count with mean ``intensity*dt``."""
    x = _check_rate(np.asarray(intensity, dtype=float) * dt)
    i = np.arange(n + 1)
    fact = np.array([factorial(k) for k in i], dtype=float)
    terms = x[..., None] ** i / fact
    return terms / terms.sum(axis=-1, keepdims=True)


def clamped_log(pi) -> np.ndarray:
    pi = np.asarray(pi, dtype=float)
    with np.errstate(divide="ignore"):
        return np.maximum(np.log(pi), LOG_FLOOR)


def _check_probs(pi):
    pi = np.asarray(pi, dtype=float)
    if np.any(~np.isfinite(pi)) or np.any(pi < 0):
        raise DegenerateProbabilities("probabilities must be finite and non-negative")
    s = pi.sum(axis=-1)
    if np.any(np.abs(s - 1.0) > 1e-9):
        raise DegenerateProbabilities("probabilities must sum to one")
    return pi


def gumbel_max(pi, g) -> np.ndarray:
    """Categorical draw ``argmax(g + log pi)``; ties go to the lowest index."""
    pi = _check_probs(pi)
    return np.argmax(np.asarray(g, dtype=float) + clamped_log(pi), axis=-1)


def _softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def gumbel_softmax(pi, g, tau: float) -> np.ndarray:
    if not tau > 0:
        raise BadSpec("temperature must be positive")
    pi = _check_probs(pi)
    return _softmax((np.asarray(g, dtype=float) + clamped_log(pi)) / tau)


def gumbel_softmax_jacobian(y, tau: float) -> np.ndarray:
    """d y_i / d log(pi_k) = (y_i * (delta_ik - y_k)) / tau."""
    y = np.asarray(y, dtype=float)
    eye = np.eye(y.shape[-1])
    return (y[..., :, None] * (eye - y[..., None, :])) / tau


def relaxed_jump_count(y, hard_mode: bool = False) -> np.ndarray:
    """Scalar jump count from a relaxed one-hot vector.

    Soft mode returns the expected count ``sum_i i*y_i``.  Hard mode
    returns the argmax index (its gradient is taken from soft mode by the
    callers that differentiate it).
    """
    y = np.asarray(y, dtype=float)
    if hard_mode:
        return np.argmax(y, axis=-1).astype(float)
    return y @ np.arange(y.shape[-1], dtype=float)


def _dlogpi_drate(x, n):
    """d log(pi_i) / d x for x = intensity*dt, zero where pi_i is floored."""
    i = np.arange(n + 1, dtype=float)
    fact = np.array([factorial(k) for k in range(n + 1)], dtype=float)
    terms = x[..., None] ** i / fact
    z = terms.sum(axis=-1)
    # d z / d x = sum_{j>=1} x^(j-1)/(j-1)!, finite at x = 0
    dz = terms[..., :-1].sum(axis=-1)
    pi = terms / z[..., None]
    xs = np.where(x > 0, x, 1.0)[..., None]
    d = np.where(i > 0, i / xs, 0.0) - (dz / z)[..., None]
    return np.where(pi >= LOG_FLOOR_PROB, d, 0.0), pi


def relaxed_count_and_grad(rate_dt, g, tau: float, hard_mode: bool = False):
    """Relaxed jump count for mean ``rate_dt`` and its derivative in ``rate_dt``.

    ``g`` holds the Gumbel draws with shape ``rate_dt.shape + (n+1,)``.
    Returns ``(f, df/d rate_dt)``; in hard mode ``f`` is the argmax count
    and the derivative is the soft one (straight-through).
    """
    x = _check_rate(rate_dt)
    g = np.asarray(g, dtype=float)
    n = g.shape[-1] - 1
    dlogpi, pi = _dlogpi_drate(x, n)
    y = _softmax((g + clamped_log(pi)) / tau)
    k = np.arange(n + 1, dtype=float)
    f_soft = y @ k
    # df/dlogpi_k = y_k (k - f_soft) / tau
    df_dlogpi = y * (k - f_soft[..., None]) / tau
    grad = (df_dlogpi * dlogpi).sum(axis=-1)
    f = np.argmax(y, axis=-1).astype(float) if hard_mode else f_soft
    return f, grad


def sample_gumbel(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.gumbel(size=shape)
