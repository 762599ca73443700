"""Option quotes: data model, liquidity filters, moneyness/maturity buckets, CSV I/O."""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import MissingColumn, OutOfRange, ParseError

DAYS_PER_YEAR = 365.0

MONEYNESS_CLASSES = ("DeepOTM", "OTM", "ATM", "ITM", "DeepITM")
MATURITY_CLASSES = ("Short", "Medium", "Long")

# left-closed / right-open, except the open lower end at 0.8
MONEYNESS_EDGES = (0.8, 0.9, 0.99, 1.01, 1.1, 1.5)
DTM_EDGES = (1.0, 60.0, 180.0)

REQUIRED_COLUMNS = ("quote_date", "spot", "strike", "dtm", "rate", "price")
OPTIONAL_COLUMNS = ("bid", "ask", "volume", "open_interest", "std_error")


@dataclass(frozen=True)
class OptionQuote:
    quote_date: dt.date
    spot: float
    strike: float
    dtm: float
    rate: float
    price: float
    bid: float | None = None
    ask: float | None = None
    volume: float | None = None
    open_interest: float | None = None
    std_error: float | None = None

    @property
    def maturity(self) -> float:
        return self.dtm / DAYS_PER_YEAR

    @property
    def moneyness(self) -> float:
        return self.spot / self.strike

    # missing liquidity fields pass every filter
    @property
    def effective_bid(self) -> float:
        return self.price if self.bid is None else self.bid

    @property
    def effective_ask(self) -> float:
        return self.price if self.ask is None else self.ask

    @property
    def effective_volume(self) -> float:
        return 1.0 if self.volume is None else self.volume

    @property
    def effective_open_interest(self) -> float:
        return 1.0 if self.open_interest is None else self.open_interest

    @classmethod
    def from_maturity(cls, quote_date, spot, strike, maturity, rate, price, **kw) -> "OptionQuote":
        return cls(quote_date, spot, strike, maturity * DAYS_PER_YEAR, rate, price, **kw)


@dataclass(frozen=True)
class Bucket:
    moneyness_class: str
    maturity_class: str

    @property
    def label(self) -> str:
        return f"{self.moneyness_class}/{self.maturity_class}"


def call_lower_bound(spot: float, strike: float, rate: float, maturity: float) -> float:
    return max(spot - strike * math.exp(-rate * maturity), 0.0)


# Each predicate returns True when the quote must be discarded.

def fails_zero_liquidity(q: OptionQuote) -> bool:
    return q.effective_volume == 0 or q.effective_open_interest == 0


def fails_wide_spread(q: OptionQuote) -> bool:
    bid = q.effective_bid
    return bid < 0.05 and q.effective_ask > 2.0 * bid


def fails_min_dtm(q: OptionQuote) -> bool:
    return q.dtm < 1.0


def fails_moneyness(q: OptionQuote, lo: float = 0.80, hi: float = 1.50) -> bool:
    m = q.moneyness
    return not (lo <= m <= hi)


def fails_lower_bound(q: OptionQuote) -> bool:
    return q.price < call_lower_bound(q.spot, q.strike, q.rate, q.maturity)


def filter_illiquid(quotes: Iterable[OptionQuote],
                    moneyness_range: tuple[float, float] | None = (0.80, 1.50)) -> list[OptionQuote]:
    """Drop quotes failing any liquidity/no-arbitrage screen, preserving order.

    ``moneyness_range=None`` skips the moneyness screen (the synthetic grids
    deliberately extend past it).
    """
    kept = []
    for q in quotes:
        if fails_zero_liquidity(q) or fails_wide_spread(q) or fails_min_dtm(q):
            continue
        if moneyness_range is not None and fails_moneyness(q, *moneyness_range):
            continue
        if fails_lower_bound(q):
            continue
        kept.append(q)
    return kept


def moneyness_class(m: float) -> str:
    if not (MONEYNESS_EDGES[0] < m < MONEYNESS_EDGES[-1]):
        raise OutOfRange(f"moneyness {m!r} outside (0.8, 1.5)")
    for name, upper in zip(MONEYNESS_CLASSES, MONEYNESS_EDGES[1:]):
        if m < upper:
            return name
    raise AssertionError("unreachable")


def maturity_class(dtm: float) -> str:
    if dtm < DTM_EDGES[0]:
        raise OutOfRange(f"dtm {dtm!r} below one day")
    if dtm < DTM_EDGES[1]:
        return "Short"
    if dtm < DTM_EDGES[2]:
        return "Medium"
    return "Long"


def classify(quote: OptionQuote) -> Bucket:
    return Bucket(moneyness_class(quote.moneyness), maturity_class(quote.dtm))


# --- CSV ---------------------------------------------------------------------

_FLOAT_FIELDS = ("spot", "strike", "dtm", "rate", "price") + OPTIONAL_COLUMNS


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, dt.date):
        return x.isoformat()
    return repr(float(x))


def read_quotes(path, schema: Mapping[str, str] | None = None) -> list[OptionQuote]:
    """Read quotes from a CSV file with a header row.

    ``schema`` maps canonical field names to the column names used in the
    file, e.g. ``{"price": "mid"}``; unmapped fields use their own name.
    """
    schema = dict(schema or {})
    col = {name: schema.get(name, name) for name in REQUIRED_COLUMNS + OPTIONAL_COLUMNS}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for name in REQUIRED_COLUMNS:
            if col[name] not in header:
                raise MissingColumn(f"{path}: missing required column {col[name]!r}")
        quotes = []
        # row numbers count the header as row 1
        for rowno, row in enumerate(reader, start=2):
            quotes.append(_parse_row(row, col, rowno))
    return quotes


def _parse_row(row, col, rowno) -> OptionQuote:
    values = {}
    try:
        values["quote_date"] = dt.date.fromisoformat(row[col["quote_date"]].strip())
    except (ValueError, AttributeError) as exc:
        raise ParseError(f"bad quote_date {row.get(col['quote_date'])!r}", rowno) from exc
    for name in _FLOAT_FIELDS:
        raw = row.get(col[name])
        if raw is None or raw.strip() == "":
            if name in REQUIRED_COLUMNS:
                raise ParseError(f"empty {name}", rowno)
            values[name] = None
            continue
        try:
            values[name] = float(raw)
        except ValueError as exc:
            raise ParseError(f"bad {name} {raw!r}", rowno) from exc
    if values["spot"] <= 0 or values["strike"] <= 0:
        raise ParseError("spot and strike must be positive", rowno)
    if values["price"] < 0:
        raise ParseError("negative price", rowno)
    for name in _FLOAT_FIELDS:
        v = values[name]
        if v is not None and not math.isfinite(v):
            raise ParseError(f"non-finite {name}", rowno)
    return OptionQuote(**values)


def write_quotes(path, quotes: Sequence[OptionQuote], include_std_error: bool | None = None) -> None:
    """Write quotes as CSV. Floats use ``repr`` so a read round-trips exactly."""
    if include_std_error is None:
        include_std_error = any(q.std_error is not None for q in quotes)
    columns = list(REQUIRED_COLUMNS) + ["bid", "ask", "volume", "open_interest"]
    if include_std_error:
        columns.append("std_error")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for q in quotes:
            w.writerow([_fmt(getattr(q, c)) for c in columns])


def with_price(quote: OptionQuote, price: float) -> OptionQuote:
    return replace(quote, price=price)


QUOTE_FIELDS = tuple(f.name for f in fields(OptionQuote))
