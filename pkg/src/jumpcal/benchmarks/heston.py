"""Heston model: parameters and semi-analytic call prices.

Prices use the single-integral (Lewis) representation

    C = e^{-rT} [F - sqrt(F K)/pi * int_0^inf Re(e^{iuk} phi(u - i/2)) / (u^2 + 1/4) du]

with ``k = ln(F/K)`` and ``phi`` the characteristic function of
``ln(S_T/F)``.  The asset grows at ``p.mu`` (set ``mu = rate`` for the
risk-neutral model) and is discounted at ``rate``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy.integrate import quad

from ..errors import BadInput, QuadratureFailed
from .black_scholes import bs_call

QUAD_TOL = 1e-8


@dataclass(frozen=True)
class HestonParams:
    mu: float = 0.04
    kappa: float = 1.5
    theta: float = 0.1
    sigma_v: float = 0.3
    rho: float = -0.5
    v0: float = 0.04

    def validate(self):
        if not (self.kappa > 0 and self.theta > 0 and self.sigma_v >= 0 and self.v0 > 0):
            raise BadInput(f"invalid Heston parameters {self}")
        if not -1 < self.rho < 1:
            raise BadInput(f"rho must lie in (-1, 1), got {self.rho}")
        if not all(np.isfinite(v) for v in asdict(self).values()):
            raise BadInput("non-finite Heston parameter")

    @property
    def feller_ratio(self) -> float:
        return 2 * self.kappa * self.theta / self.sigma_v**2 if self.sigma_v > 0 else np.inf

    def to_dict(self) -> dict:
        return asdict(self)


# synthetic Heston generator
GENERATOR_HESTON = HestonParams(mu=0.04, kappa=1.5, theta=0.1, sigma_v=0.3, rho=-0.5, v0=0.04)


def _log1p(z):
    # numpy's complex log1p is log(1 + z), which loses the digits of a tiny z
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-4
    series = z * (1.0 - z * (0.5 - z * (1.0 / 3.0 - 0.25 * z)))
    return np.where(small, series, np.log(1.0 + np.where(small, 0.0, z)))


def log_forward_cf(u, maturity, p: HestonParams):
    """E[exp(i u ln(S_T/F))] for complex ``u`` (numerically stable branch)."""
    kappa, theta, sig, rho, v0 = p.kappa, p.theta, p.sigma_v, p.rho, p.v0
    iu = 1j * u
    b = kappa - rho * sig * iu
    d = np.sqrt(b * b + sig * sig * (iu + u * u))
    # (b - d) / sig^2 written without the cancellation that hurts small sig
    beta = -(iu + u * u) / (b + d)
    g = beta * sig * sig / (b + d)
    e = np.exp(-d * maturity)
    log_ratio = _log1p(g * (1.0 - e) / (1.0 - g))
    c = kappa * theta * (beta * maturity - 2.0 * log_ratio / sig**2)
    dd = beta * (1.0 - e) / (1.0 - g * e)
    return np.exp(c + dd * v0)


def _deterministic_variance_call(spot, strike, rate, maturity, p: HestonParams):
    # sigma_v = 0: variance follows its ODE, so the price is BS with the mean variance
    kt = p.kappa * maturity
    mean_var = p.theta + (p.v0 - p.theta) * (-np.expm1(-kt)) / kt
    fwd_growth = np.exp((p.mu - rate) * maturity)
    return fwd_growth * bs_call(spot, strike, p.mu, maturity, np.sqrt(mean_var))


def _check(spot, strike, maturity, p):
    p.validate()
    if np.any(np.asarray(spot) <= 0) or np.any(np.asarray(strike) <= 0) or np.any(np.asarray(maturity) <= 0):
        raise BadInput("spot, strike and maturity must be positive")


def heston_call(spot, strike, rate, maturity, p: HestonParams, tol: float = QUAD_TOL) -> float:
    """Call price by adaptive quadrature; raises QuadratureFailed above ``tol``."""
    _check(spot, strike, maturity, p)
    if p.sigma_v < 1e-8:
        return float(_deterministic_variance_call(spot, strike, rate, maturity, p))
    fwd = spot * np.exp(p.mu * maturity)
    k = np.log(fwd / strike)

    def integrand(u):
        return (np.exp(1j * u * k) * log_forward_cf(u - 0.5j, maturity, p)).real / (u * u + 0.25)

    scale = np.sqrt(fwd * strike) / np.pi
    # the integrand decays like |phi|/u^2; beyond ``upper`` it contributes < 1e-13
    upper = _upper_limit(maturity, p, scale)
    integral, err = quad(integrand, 0.0, upper, epsabs=tol / (10 * scale), epsrel=0.0, limit=2000)
    achieved = scale * err
    if not np.isfinite(integral) or achieved > tol:
        raise QuadratureFailed(achieved, tol)
    price = np.exp(-rate * maturity) * (fwd - scale * integral)
    return float(max(price, 0.0))


_GL_X, _GL_W = np.polynomial.legendre.leggauss(64)


def _upper_limit(maturity, p: HestonParams, scale, tol=1e-13):
    u = 8.0
    while u < 1e5:
        mag = scale * abs(log_forward_cf(u - 0.5j, maturity, p)) / (u * u)
        if mag < tol:
            return u
        u *= 1.5
    return u


def heston_call_grid(spot, strikes, rate, maturity, p: HestonParams, panels: int | None = None) -> np.ndarray:
    """Prices for many strikes at one maturity with composite Gauss-Legendre.

    Much faster than :func:`heston_call` and used inside calibration; the
    test suite checks the two agree.
    """
    strikes = np.atleast_1d(np.asarray(strikes, dtype=float))
    _check(spot, strikes, maturity, p)
    if p.sigma_v < 1e-8:
        return np.asarray(_deterministic_variance_call(spot, strikes, rate, maturity, p))
    fwd = spot * np.exp(p.mu * maturity)
    k = np.log(fwd / strikes)
    scale = np.sqrt(fwd * strikes.max()) / np.pi
    upper = _upper_limit(maturity, p, scale)
    if panels is None:
        # about one panel per oscillation period of e^{iuk}
        kmax = max(float(np.abs(k).max()), 0.5)
        panels = int(min(max(8, np.ceil(upper * kmax / (2 * np.pi)) + 4), 4000))
    edges = np.linspace(0.0, upper, panels + 1)
    half = 0.5 * np.diff(edges)
    u = (edges[:-1, None] + half[:, None] * (_GL_X[None, :] + 1.0)).ravel()
    w = (half[:, None] * _GL_W[None, :]).ravel()
    phi = log_forward_cf(u - 0.5j, maturity, p) / (u * u + 0.25)
    integral = (np.exp(1j * np.outer(k, u)) * phi).real @ w
    price = np.exp(-rate * maturity) * (fwd - np.sqrt(fwd * strikes) / np.pi * integral)
    return np.maximum(price, 0.0)


def heston_prices(spot, strikes, maturities, rate, p: HestonParams) -> np.ndarray:
    """Price matrix ``(len(maturities), len(strikes))``."""
    return np.vstack([heston_call_grid(spot, strikes, rate, t, p) for t in maturities])


def risk_neutral(p: HestonParams, rate: float) -> HestonParams:
    return replace(p, mu=rate)
