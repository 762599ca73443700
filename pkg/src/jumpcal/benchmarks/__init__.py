"""Comparison pricers: Black-Scholes, Heston, SVCJ, a plain ANN, and their calibration."""

from .ann import AnnConfig, ann_init, ann_price, ann_price_quotes, ann_train
from .black_scholes import bs_call
from .calibration import CalibrationResult, calibrate_parametric, model_prices
from .heston import GENERATOR_HESTON, HestonParams, heston_call, heston_call_grid, heston_prices
from .svcj import GENERATOR_SVCJ, McSettings, SvcjParams, svcj_call, svcj_prices

__all__ = [
    "AnnConfig", "ann_init", "ann_price", "ann_price_quotes", "ann_train", "bs_call",
    "CalibrationResult", "calibrate_parametric", "model_prices", "GENERATOR_HESTON", "HestonParams",
    "heston_call", "heston_call_grid", "heston_prices", "GENERATOR_SVCJ", "McSettings", "SvcjParams",
    "svcj_call", "svcj_prices",
]
