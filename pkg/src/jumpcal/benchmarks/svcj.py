"""Stochastic volatility with correlated jumps (SVCJ), priced by Monte Carlo.

Dynamics, log-Euler with full truncation:

    d ln S = (mu - lambda*m_bar - V+/2) dt + sqrt(V+) dW_S + Z_y dN
    dV     = kappa (theta - V+) dt + sigma_v sqrt(V+) dW_V + Z_v dN

with corr(W_S, W_V) = rho, Z_v ~ Exp(mean mu_v),
Z_y | Z_v ~ N(mu_y + rho_j Z_v, sigma_y^2), and
m_bar = E[e^{Z_y}] - 1 so that E[S_T] = S_0 e^{mu T} exactly as in the
jump-free Heston case.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import BadInput
from .heston import HestonParams


@dataclass(frozen=True)
class SvcjParams(HestonParams):
    lam: float = 0.1
    mu_v: float = 0.6
    mu_y: float = 0.08
    sigma_y: float = 2.15
    rho_j: float = 0.57

    def validate(self):
        super().validate()
        if self.lam < 0:
            raise BadInput("jump intensity must be non-negative")
        if self.mu_v < 0 or self.sigma_y < 0:
            raise BadInput("mu_v and sigma_y must be non-negative")
        if self.lam > 0 and self.rho_j * self.mu_v >= 1:
            raise BadInput("rho_j * mu_v must be < 1 for E[exp(Z_y)] to exist")

    @property
    def heston(self) -> HestonParams:
        return HestonParams(self.mu, self.kappa, self.theta, self.sigma_v, self.rho, self.v0)

    @property
    def mean_jump_return(self) -> float:
        """E[exp(Z_y)] - 1."""
        if self.lam == 0:
            return 0.0
        return np.exp(self.mu_y + 0.5 * self.sigma_y**2) / (1.0 - self.rho_j * self.mu_v) - 1.0

    def to_dict(self) -> dict:
        return asdict(self)


# synthetic SVCJ generator: the Heston set plus the jump block
GENERATOR_SVCJ = SvcjParams(mu=0.04, kappa=1.5, theta=0.1, sigma_v=0.3, rho=-0.5, v0=0.04,
                        lam=0.1, mu_v=0.6, mu_y=0.08, sigma_y=2.15, rho_j=0.57)


@dataclass(frozen=True)
class McSettings:
    paths: int = 100_000
    steps_per_year: int = 240
    seed: int = 0
    antithetic: bool = True
    chunk: int = 250_000


def _step_counts(maturities, steps_per_year):
    counts = []
    for t in maturities:
        n = t * steps_per_year
        if abs(n - round(n)) > 1e-9 or round(n) < 1:
            raise BadInput(f"maturity {t} is not a multiple of 1/{steps_per_year}")
        counts.append(int(round(n)))
    return counts


def _simulate_terminal(spot, maturities, p: SvcjParams, mc: McSettings, rng, n_paths):
    """Terminal prices ``(len(maturities), n_paths)`` from one set of paths."""
    counts = _step_counts(maturities, mc.steps_per_year)
    dt = 1.0 / mc.steps_per_year
    sqdt = np.sqrt(dt)
    half = n_paths // 2 if mc.antithetic else n_paths
    sign = np.concatenate([np.ones(half), -np.ones(half)]) if mc.antithetic else None
    rep = (lambda a: np.concatenate([a, a])) if mc.antithetic else (lambda a: a)
    x = np.full(n_paths, np.log(spot))
    v = np.full(n_paths, p.v0)
    drift = p.mu - p.lam * p.mean_jump_return
    rho_c = np.sqrt(1.0 - p.rho**2)
    out = np.empty((len(maturities), n_paths))
    wanted = {c: i for i, c in enumerate(counts)}
    for k in range(1, max(counts) + 1):
        z1 = rng.standard_normal(half)
        z2 = rng.standard_normal(half)
        if mc.antithetic:
            z1 = rep(z1) * sign
            z2 = rep(z2) * sign
        vp = np.maximum(v, 0.0)
        sv = np.sqrt(vp) * sqdt
        x += (drift - 0.5 * vp) * dt + sv * z1
        v += p.kappa * (p.theta - vp) * dt + p.sigma_v * sv * (p.rho * z1 + rho_c * z2)
        if p.lam > 0:
            n_jumps = rep(rng.poisson(p.lam * dt, half))
            hit = np.nonzero(n_jumps[:half])[0]
            if hit.size:
                c = n_jumps[hit].astype(float)
                # sums of c iid jumps: Gamma(c, mu_v) and conditionally normal Z_y
                zv = rng.gamma(c, p.mu_v) if p.mu_v > 0 else np.zeros(hit.size)
                zy = p.mu_y * c + p.rho_j * zv + p.sigma_y * np.sqrt(c) * rng.standard_normal(hit.size)
                idx = np.concatenate([hit, hit + half]) if mc.antithetic else hit
                v[idx] += rep(zv)
                x[idx] += rep(zy)
        if k in wanted:
            out[wanted[k]] = np.exp(x)
    return out


def svcj_prices(spot, strikes, maturities, rate, p: SvcjParams, mc: McSettings = McSettings()):
    """Monte-Carlo price and standard-error matrices ``(len(maturities), len(strikes))``.

    All strikes and maturities share one set of paths (common random
    numbers), so prices are monotone in strike.
    """
    p.validate()
    strikes = np.atleast_1d(np.asarray(strikes, dtype=float))
    maturities = list(np.atleast_1d(np.asarray(maturities, dtype=float)))
    if spot <= 0 or np.any(strikes <= 0) or min(maturities) <= 0:
        raise BadInput("spot, strikes and maturities must be positive")
    if mc.paths < 2 or (mc.antithetic and mc.paths % 2):
        raise BadInput("paths must be >= 2 (and even with antithetic variates)")
    rng = np.random.default_rng(mc.seed)
    n_t, n_k = len(maturities), len(strikes)
    # streaming sums over chunks of "units": paths, or antithetic pairs
    s1 = np.zeros((n_t, n_k))
    s2 = np.zeros((n_t, n_k))
    units = 0
    remaining = mc.paths
    while remaining > 0:
        n = min(mc.chunk, remaining)
        n -= n % 2 if mc.antithetic else 0
        terminal = _simulate_terminal(spot, maturities, p, mc, rng, n)
        disc = np.exp(-rate * np.asarray(maturities))[:, None, None]
        pay = disc * np.maximum(terminal[:, None, :] - strikes[None, :, None], 0.0)
        if mc.antithetic:
            h = n // 2
            pay = 0.5 * (pay[..., :h] + pay[..., h:])
        s1 += pay.sum(axis=-1)
        s2 += (pay * pay).sum(axis=-1)
        units += pay.shape[-1]
        remaining -= n
    mean = s1 / units
    var = np.maximum(s2 / units - mean * mean, 0.0) * units / max(units - 1, 1)
    return mean, np.sqrt(var / units)


def svcj_call(spot, strike, rate, maturity, p: SvcjParams, mc: McSettings = McSettings()):
    """Single call: ``(price, std_error)``."""
    price, se = svcj_prices(spot, [strike], [maturity], rate, p, mc)
    return float(price[0, 0]), float(se[0, 0])
