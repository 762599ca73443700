"""Black-Scholes European call."""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr

from ..errors import BadInput


def bs_call(spot, strike, rate, maturity, sigma):
    """Closed-form call price; broadcasts over array arguments."""
    spot, strike, maturity, sigma = (np.asarray(a, dtype=float) for a in (spot, strike, maturity, sigma))
    rate = np.asarray(rate, dtype=float)
    if np.any(spot <= 0) or np.any(strike <= 0) or np.any(maturity <= 0) or np.any(sigma <= 0):
        raise BadInput("spot, strike, maturity and sigma must be positive")
    if not (np.all(np.isfinite(spot)) and np.all(np.isfinite(sigma)) and np.all(np.isfinite(rate))):
        raise BadInput("non-finite input")
    vol = sigma * np.sqrt(maturity)
    d1 = (np.log(spot / strike) + (rate + 0.5 * sigma**2) * maturity) / vol
    d2 = d1 - vol
    price = spot * ndtr(d1) - strike * np.exp(-rate * maturity) * ndtr(d2)
    # clamp round-off below the arbitrage bound
    lower = np.maximum(spot - strike * np.exp(-rate * maturity), 0.0)
    price = np.maximum(price, lower)
    return float(price) if price.ndim == 0 else price
