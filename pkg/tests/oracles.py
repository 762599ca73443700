"""Reference computations written independently of the package internals."""

import math

import numpy as np
from scipy.stats import norm


def bachelier_call(s0, strike, rate, maturity, drift, vol):
    """Discounted call on S_T = s0 + drift*T + vol*sqrt(T)*Z (arithmetic terminal law)."""
    mean = s0 + drift * maturity
    sd = vol * math.sqrt(maturity)
    d = (mean - strike) / sd
    return math.exp(-rate * maturity) * ((mean - strike) * norm.cdf(d) + sd * norm.pdf(d))


def lognormal_call_quadrature(spot, strike, rate, maturity, sigma, nodes=400):
    """Discounted payoff integrated against the lognormal law with Gauss-Legendre."""
    m = math.log(spot) + (rate - 0.5 * sigma**2) * maturity
    s = sigma * math.sqrt(maturity)
    lo, hi = math.log(strike), m + 12 * s
    x, w = np.polynomial.legendre.leggauss(nodes)
    y = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    dens = np.exp(-0.5 * ((y - m) / s) ** 2) / (s * math.sqrt(2 * math.pi))
    return math.exp(-rate * maturity) * 0.5 * (hi - lo) * np.sum(w * (np.exp(y) - strike) * dens)


def heston_euler_mc(spot, strike, rate, maturity, mu, kappa, theta, sigma_v, rho, v0,
                    paths, dt, seed, chunk=200_000):
    """Full-truncation Euler on (ln S, V); returns (price, std error)."""
    rng = np.random.default_rng(seed)
    steps = int(round(maturity / dt))
    total, total_sq, done = 0.0, 0.0, 0
    while done < paths:
        n = min(chunk, paths - done)
        x = np.full(n, math.log(spot))
        v = np.full(n, v0)
        for _ in range(steps):
            z1 = rng.standard_normal(n)
            z2 = rho * z1 + math.sqrt(1 - rho * rho) * rng.standard_normal(n)
            vp = np.maximum(v, 0.0)
            x += (mu - 0.5 * vp) * dt + np.sqrt(vp * dt) * z1
            v += kappa * (theta - vp) * dt + sigma_v * np.sqrt(vp * dt) * z2
        pay = math.exp(-rate * maturity) * np.maximum(np.exp(x) - strike, 0.0)
        total += pay.sum()
        total_sq += (pay * pay).sum()
        done += n
    mean = total / paths
    return mean, math.sqrt((total_sq / paths - mean * mean) / (paths - 1))
