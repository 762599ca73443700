"""Synthetic option grids priced under a Heston or SVCJ generator."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

import numpy as np

from .benchmarks.heston import GENERATOR_HESTON, HestonParams, heston_call_grid
from .benchmarks.svcj import GENERATOR_SVCJ, McSettings, SvcjParams, svcj_prices
from .errors import BadSpec
from .market_data import OptionQuote

SYNTHETIC_DATE = dt.date(2020, 1, 2)
SPOT = 100.0
RATE = 0.025

TRAIN_MATURITIES = (1 / 12, 2 / 12, 3 / 12, 6 / 12, 1.0)
TRAIN_STRIKES = tuple(float(k) for k in range(60, 141, 10))
# seven months is not part of the testing maturities
TEST_MATURITIES = tuple(m / 12 for m in (1, 2, 3, 4, 5, 6, 8, 9, 10)) + (1.0,)
TEST_STRIKES = tuple(float(k) for k in range(60, 141, 5))

GENERATORS = ("heston", "svcj")


@dataclass(frozen=True)
class GridSpec:
    maturities: tuple[float, ...]
    strikes: tuple[float, ...]
    spot: float = SPOT
    rate: float = RATE
    generator: str = "heston"
    params: HestonParams = GENERATOR_HESTON
    mc: McSettings = field(default_factory=lambda: McSettings(paths=1_000_000, steps_per_year=240))

    def __post_init__(self):
        if not self.maturities or not self.strikes:
            raise BadSpec("grid needs at least one maturity and one strike")
        if len(set(self.maturities)) != len(self.maturities) or len(set(self.strikes)) != len(self.strikes):
            raise BadSpec("duplicate maturity or strike: (T, K) pairs must be unique")
        if self.generator not in GENERATORS:
            raise BadSpec(f"generator must be one of {GENERATORS}, got {self.generator!r}")
        if self.generator == "svcj" and not isinstance(self.params, SvcjParams):
            raise BadSpec("svcj generator needs SvcjParams")

    @property
    def points(self) -> list[tuple[float, float]]:
        """(T, K) pairs, T-major with K ascending."""
        return [(t, k) for t in sorted(self.maturities) for k in sorted(self.strikes)]

    def __len__(self) -> int:
        return len(self.maturities) * len(self.strikes)


def heston_training_grid() -> GridSpec:
    return GridSpec(TRAIN_MATURITIES, TRAIN_STRIKES)


def heston_testing_grid() -> GridSpec:
    return GridSpec(TEST_MATURITIES, TEST_STRIKES)


def svcj_grids(mc: McSettings | None = None) -> tuple[GridSpec, GridSpec]:
    kw = {"generator": "svcj", "params": GENERATOR_SVCJ}
    if mc is not None:
        kw["mc"] = mc
    return GridSpec(TRAIN_MATURITIES, TRAIN_STRIKES, **kw), GridSpec(TEST_MATURITIES, TEST_STRIKES, **kw)


def grids(generator: str, mc: McSettings | None = None) -> tuple[GridSpec, GridSpec]:
    if generator == "heston":
        return heston_training_grid(), heston_testing_grid()
    if generator == "svcj":
        return svcj_grids(mc)
    raise BadSpec(f"generator must be one of {GENERATORS}, got {generator!r}")


def generate_prices(grid: GridSpec, seed: int = 0) -> list[OptionQuote]:
    """Price every grid point; SVCJ quotes carry their Monte-Carlo std error.

    The asset grows at the generator's drift and is discounted at the grid
    rate.  ``seed`` only matters for SVCJ; a shared seed gives training and
    testing grids the same simulated paths.
    """
    mats = sorted(grid.maturities)
    strikes = sorted(grid.strikes)
    if grid.generator == "heston":
        prices = np.vstack([heston_call_grid(grid.spot, strikes, grid.rate, t, grid.params) for t in mats])
        errors = None
    else:
        mc = McSettings(grid.mc.paths, grid.mc.steps_per_year, seed, grid.mc.antithetic, grid.mc.chunk)
        prices, errors = svcj_prices(grid.spot, strikes, mats, grid.rate, grid.params, mc)
    out = []
    for i, t in enumerate(mats):
        for j, k in enumerate(strikes):
            se = None if errors is None else float(errors[i, j])
            out.append(OptionQuote.from_maturity(SYNTHETIC_DATE, grid.spot, k, t, grid.rate,
                                                 float(prices[i, j]), std_error=se))
    return out
