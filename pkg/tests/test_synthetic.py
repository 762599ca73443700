import math

import numpy as np
import pytest

from jumpcal.benchmarks import GENERATOR_HESTON, McSettings, heston_call_grid
from jumpcal.errors import BadSpec
from jumpcal.market_data import filter_illiquid
from jumpcal.synthetic import (
    TEST_MATURITIES, TRAIN_MATURITIES, GridSpec, generate_prices, grids, heston_testing_grid,
    heston_training_grid, svcj_grids,
)

SMALL_MC = McSettings(paths=40_000, steps_per_year=240)


def test_grid_sizes_and_order():
    tr, te = heston_training_grid(), heston_testing_grid()
    assert (len(tr), len(te)) == (45, 170)
    pts = te.points
    assert pts == sorted(pts) and len(set(pts)) == 170
    assert 7 / 12 not in TEST_MATURITIES and len(TEST_MATURITIES) == 10
    assert set(TRAIN_MATURITIES) <= set(TEST_MATURITIES)


def test_heston_quotes():
    qs = generate_prices(heston_training_grid())
    assert len(qs) == 45
    assert [(q.maturity, q.strike) for q in qs] == pytest.approx(heston_training_grid().points)
    deep = next(q for q in qs if q.strike == 60 and q.maturity == pytest.approx(1.0))
    assert deep.price >= 100 - 60 * math.exp(-0.025) - 1e-9
    assert 100 - 60 * math.exp(-0.025) == pytest.approx(41.48, abs=5e-3)
    assert all(q.std_error is None for q in qs)
    np.testing.assert_allclose([q.price for q in qs[:9]],
                               heston_call_grid(100.0, range(60, 141, 10), 0.025, 1 / 12, GENERATOR_HESTON))


def test_testing_quotes_pass_the_liquidity_filter():
    qs = generate_prices(heston_testing_grid())
    assert len(filter_illiquid(qs, moneyness_range=None)) == 170


def test_deterministic_per_seed():
    tr, _ = svcj_grids(McSettings(2_000, 240))
    a, b = generate_prices(tr, seed=4), generate_prices(tr, seed=4)
    assert [q.price for q in a] == [q.price for q in b]
    assert [q.price for q in generate_prices(tr, seed=5)] != [q.price for q in a]


def test_svcj_atm_not_below_heston():
    tr, _ = svcj_grids(SMALL_MC)
    svcj = generate_prices(tr, seed=1)
    heston = {(q.maturity, q.strike): q.price for q in generate_prices(heston_training_grid())}
    atm = [q for q in svcj if q.strike == 100.0]
    assert len(atm) == 5
    for q in atm:
        assert q.price >= heston[(q.maturity, q.strike)] - 3 * q.std_error


def test_validation():
    with pytest.raises(BadSpec):
        GridSpec((0.5, 0.5), (100.0,))
    with pytest.raises(BadSpec):
        GridSpec((0.5,), ())
    with pytest.raises(BadSpec):
        GridSpec((0.5,), (100.0,), generator="svcj")
    with pytest.raises(BadSpec):
        grids("merton")
