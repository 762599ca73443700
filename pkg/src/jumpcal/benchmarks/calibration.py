"""Least-squares calibration of the parametric benchmarks (BS, Heston, SVCJ).

Each model is fitted by Nelder-Mead in an unconstrained parameterisation,
restarted from several random starting points; the best run wins.  The
SVCJ objective uses a fixed-seed Monte Carlo so it is deterministic.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from ..errors import BadInput, CalibrationFailed, EmptyInput, JumpcalError
from .black_scholes import bs_call
from .heston import HestonParams, heston_call_grid
from .svcj import McSettings, SvcjParams, svcj_prices

MODELS = ("bs", "heston", "svcj")


@dataclass
class CalibrationResult:
    model: str
    params: dict
    objective: float
    n_evals: int = 0
    restarts: list = field(default_factory=list)  # best objective of each restart

    def to_dict(self) -> dict:
        return {"model": self.model, "params": self.params, "objective": self.objective,
                "n_evals": self.n_evals, "restarts": self.restarts}

    @classmethod
    def from_dict(cls, d: dict) -> "CalibrationResult":
        return cls(d["model"], d["params"], d["objective"], d.get("n_evals", 0), d.get("restarts", []))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "CalibrationResult":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


# --- pricing a quote list under a parameter set --------------------------------

def _groups(quotes, keys):
    out = defaultdict(list)
    for i, q in enumerate(quotes):
        out[tuple(getattr(q, k) for k in keys)].append(i)
    return out


def model_prices(model: str, params, quotes, mc: McSettings | None = None) -> np.ndarray:
    """Prices of ``quotes`` under a calibrated (or given) parameter set."""
    if model not in MODELS:
        raise BadInput(f"unknown parametric model {model!r}")
    out = np.empty(len(quotes))
    if model == "bs":
        sigma = params["sigma"] if isinstance(params, dict) else params
        for i, q in enumerate(quotes):
            out[i] = bs_call(q.spot, q.strike, q.rate, q.maturity, sigma)
        return out
    if model == "heston":
        p = params if isinstance(params, HestonParams) else HestonParams(**params)
        for (spot, rate, mat), idx in _groups(quotes, ("spot", "rate", "maturity")).items():
            out[idx] = heston_call_grid(spot, [quotes[i].strike for i in idx], rate, mat, p)
        return out
    p = params if isinstance(params, SvcjParams) else SvcjParams(**params)
    mc = mc or McSettings(paths=20_000, steps_per_year=48, seed=0)
    for (spot, rate), idx in _groups(quotes, ("spot", "rate")).items():
        strikes = sorted({quotes[i].strike for i in idx})
        mats = sorted({quotes[i].maturity for i in idx})
        prices, _ = svcj_prices(spot, strikes, _snap(mats, mc.steps_per_year), rate, p, mc)
        for i in idx:
            out[i] = prices[mats.index(quotes[i].maturity), strikes.index(quotes[i].strike)]
    return out


def _snap(mats, steps_per_year):
    # dtm/365 round-trips to within an ulp of k/steps_per_year
    out = []
    for t in mats:
        n = round(t * steps_per_year)
        if n < 1 or abs(t * steps_per_year - n) > 1e-6:
            raise BadInput(f"maturity {t} is not on the 1/{steps_per_year} simulation grid")
        out.append(n / steps_per_year)
    return out


# --- parameterisations ----------------------------------------------------------

def _heston_from_z(z, rate, free_drift):
    mu = z[5] if free_drift else rate
    return HestonParams(mu=mu, kappa=math.exp(z[0]), theta=math.exp(z[1]), sigma_v=math.exp(z[2]),
                        rho=math.tanh(z[3]), v0=math.exp(z[4]))


def _heston_to_z(p: HestonParams, free_drift):
    z = [math.log(p.kappa), math.log(p.theta), math.log(p.sigma_v), math.atanh(p.rho), math.log(p.v0)]
    return np.array(z + ([p.mu] if free_drift else []))


def _svcj_from_z(z, rate, free_drift):
    h = _heston_from_z(np.r_[z[:5], z[10:11]] if free_drift else z[:5], rate, free_drift)
    return SvcjParams(**asdict(h), lam=math.exp(z[5]), mu_v=math.exp(z[6]), mu_y=z[7],
                      sigma_y=math.exp(z[8]), rho_j=z[9])


def _svcj_to_z(p: SvcjParams, free_drift):
    z = list(_heston_to_z(p.heston, False))
    z += [math.log(max(p.lam, 1e-8)), math.log(max(p.mu_v, 1e-8)), p.mu_y,
          math.log(max(p.sigma_y, 1e-8)), p.rho_j]
    return np.array(z + ([p.mu] if free_drift else []))


def _random_start(model, rng, rate, free_drift):
    if model == "bs":
        return np.array([math.log(rng.uniform(0.05, 0.8))])
    h = HestonParams(mu=rate, kappa=rng.uniform(0.3, 5.0), theta=rng.uniform(0.01, 0.3),
                     sigma_v=rng.uniform(0.1, 1.0), rho=rng.uniform(-0.9, 0.3), v0=rng.uniform(0.01, 0.3))
    if model == "heston":
        return _heston_to_z(h, free_drift)
    s = SvcjParams(**asdict(h), lam=rng.uniform(0.05, 1.0), mu_v=rng.uniform(0.01, 0.3),
                   mu_y=rng.uniform(-0.2, 0.1), sigma_y=rng.uniform(0.02, 0.3), rho_j=rng.uniform(-0.5, 0.5))
    return _svcj_to_z(s, free_drift)


# search box; the optimiser treats points outside it as infeasible
BOUNDS = {"sigma": (1e-4, 10.0), "kappa": (1e-3, 50.0), "theta": (1e-4, 10.0), "sigma_v": (1e-3, 10.0),
          "rho": (-0.999, 0.999), "v0": (1e-4, 10.0), "mu": (-1.0, 1.0), "lam": (0.0, 10.0),
          "mu_v": (0.0, 5.0), "mu_y": (-5.0, 5.0), "sigma_y": (0.0, 5.0), "rho_j": (-5.0, 5.0)}


def in_bounds(params) -> bool:
    values = params if isinstance(params, dict) else asdict(params)
    return all(lo <= values[k] <= hi for k, (lo, hi) in BOUNDS.items() if k in values)


_DEFAULT_MAXITER = {"bs": 400, "heston": 1500, "svcj": 600}


def calibrate_parametric(model: str, quotes, restarts: int = 5, seed: int = 0,
                         mc: McSettings | None = None, free_drift: bool = False,
                         maxiter: int | None = None) -> CalibrationResult:
    """Minimise the summed squared pricing error of ``model`` over ``quotes``.

    The asset drift is pinned to the quotes' risk-free rate unless
    ``free_drift`` is set (then it is calibrated too).  BS ignores it.
    """
    if model not in MODELS:
        raise BadInput(f"unknown parametric model {model!r}")
    if len(quotes) == 0:
        raise EmptyInput("no quotes to calibrate to")
    rates = {q.rate for q in quotes}
    rate = float(np.mean(sorted(rates)))
    observed = np.array([q.price for q in quotes])
    mc = mc or McSettings(paths=20_000, steps_per_year=48, seed=seed)
    maxiter = maxiter or _DEFAULT_MAXITER[model]
    n_evals = 0

    def to_params(z):
        if model == "bs":
            return {"sigma": math.exp(z[0])}
        if model == "heston":
            return _heston_from_z(z, rate, free_drift)
        return _svcj_from_z(z, rate, free_drift)

    def objective(z):
        nonlocal n_evals
        n_evals += 1
        if not np.all(np.isfinite(z)) or np.any(np.abs(z) > 50):
            return np.inf
        try:
            params = to_params(z)
            if not in_bounds(params):
                return np.inf
            pred = model_prices(model, params, quotes, mc)
        except (JumpcalError, FloatingPointError, OverflowError, ValueError):
            return np.inf
        val = float(np.sum((observed - pred) ** 2))
        return val if np.isfinite(val) else np.inf

    rng = np.random.default_rng(seed)
    starts = []
    if model == "bs":
        starts.append(np.array([math.log(0.2)]))
    elif model == "heston":
        starts.append(_heston_to_z(HestonParams(mu=rate), free_drift))
    else:
        starts.append(_svcj_to_z(SvcjParams(mu=rate, lam=0.1, mu_v=0.05, mu_y=-0.05, sigma_y=0.1,
                                            rho_j=0.0), free_drift))
    while len(starts) < restarts:
        starts.append(_random_start(model, rng, rate, free_drift))

    best_z, best_f, per_restart = None, np.inf, []
    tol = {"xatol": 1e-10, "fatol": 1e-18} if model == "bs" else {"xatol": 1e-7, "fatol": 1e-12}
    for z0 in starts[:max(restarts, 1)]:
        res = minimize(objective, z0, method="Nelder-Mead",
                       options={"maxiter": maxiter, "maxfev": 2 * maxiter, "adaptive": len(z0) > 4, **tol})
        f = float(res.fun)
        per_restart.append(f)
        if f < best_f:
            best_z, best_f = np.array(res.x), f
    if best_z is None or not np.isfinite(best_f):
        raise CalibrationFailed(f"{model}: no finite objective found")
    params = to_params(best_z)
    params = params if isinstance(params, dict) else asdict(params)
    return CalibrationResult(model, params, best_f, n_evals, per_restart)
