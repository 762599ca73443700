"""Pricing-error metrics, moneyness/maturity bucket reports and the Diebold-Mariano test."""

from __future__ import annotations

import csv
import itertools
import json
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import norm

from .errors import EmptyInput, LengthMismatch, OutOfRange
from .market_data import classify

OUTSIDE = "outside"


def _errors(observed, predicted) -> np.ndarray:
    o = np.asarray(observed, dtype=float).ravel()
    p = np.asarray(predicted, dtype=float).ravel()
    if o.size != p.size:
        raise LengthMismatch(f"{o.size} observations vs {p.size} predictions")
    if o.size == 0:
        raise EmptyInput("no observations")
    return o - p


def mae(observed, predicted) -> float:
    return float(np.mean(np.abs(_errors(observed, predicted))))


def mse(observed, predicted) -> float:
    return float(np.mean(_errors(observed, predicted) ** 2))


def bucket_label(quote) -> str:
    """``market_data.classify`` label, or ``"outside"`` beyond the moneyness range."""
    try:
        return classify(quote).label
    except OutOfRange:
        return OUTSIDE


@dataclass
class ReportRow:
    contract_id: int
    observed: float
    predicted: float
    abs_error: float
    sq_error: float
    bucket: str


@dataclass
class PricingReport:
    model: str
    sample: str
    rows: list[ReportRow]
    mae: float
    mse: float
    bucket_mae: dict[str, float]
    bucket_count: dict[str, int]

    @property
    def errors(self) -> np.ndarray:
        return np.array([r.observed - r.predicted for r in self.rows])

    def to_dict(self) -> dict:
        return {"model": self.model, "sample": self.sample, "mae": self.mae, "mse": self.mse,
                "bucket_mae": self.bucket_mae, "bucket_count": self.bucket_count,
                "rows": [asdict(r) for r in self.rows]}

    def write_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["contract_id", "observed", "predicted", "abs_error", "sq_error", "bucket"])
            for r in self.rows:
                w.writerow([r.contract_id, repr(r.observed), repr(r.predicted), repr(r.abs_error),
                            repr(r.sq_error), r.bucket])


def bucket_report(quotes, predictions, model: str, sample: str = "out") -> PricingReport:
    """Per-option errors plus overall and per-bucket aggregates."""
    pred = np.asarray(predictions, dtype=float).ravel()
    if len(quotes) != pred.size:
        raise LengthMismatch(f"{len(quotes)} quotes vs {pred.size} predictions")
    if pred.size == 0:
        raise EmptyInput("no quotes to report on")
    rows = []
    by_bucket = defaultdict(list)
    for i, (q, p) in enumerate(zip(quotes, pred)):
        e = q.price - float(p)
        row = ReportRow(i, float(q.price), float(p), abs(e), e * e, bucket_label(q))
        rows.append(row)
        by_bucket[row.bucket].append(row.abs_error)
    abs_e = np.array([r.abs_error for r in rows])
    sq_e = np.array([r.sq_error for r in rows])
    return PricingReport(model, sample, rows, float(abs_e.mean()), float(sq_e.mean()),
                         {b: float(np.mean(v)) for b, v in sorted(by_bucket.items())},
                         {b: len(v) for b, v in sorted(by_bucket.items())})


def combined_table(reports) -> tuple[list[str], list[list]]:
    """One row per (sample, metric), one column per model: ``(header, rows)``."""
    models = list(dict.fromkeys(r.model for r in reports))
    samples = list(dict.fromkeys(r.sample for r in reports))
    index = {(r.model, r.sample): r for r in reports}
    rows = []
    for s in samples:
        for metric in ("MAE", "MSE"):
            row = [s, metric]
            for m in models:
                r = index.get((m, s))
                row.append("" if r is None else repr(r.mae if metric == "MAE" else r.mse))
            rows.append(row)
    return ["sample", "metric", *models], rows


def write_table(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def plot_data(reports) -> list[list]:
    """``[bucket, model, mae]`` rows for an external plotting tool."""
    return [[b, r.model, repr(v)] for r in reports for b, v in r.bucket_mae.items()]


# --- Diebold-Mariano ------------------------------------------------------------

@dataclass(frozen=True)
class DmResult:
    statistic: float
    p_value: float
    n: int
    loss_kind: str = "squared"


def newey_west_variance(d: np.ndarray, lag: int | None = None) -> float:
    """Long-run variance of ``d`` with Bartlett weights."""
    n = d.size
    lag = int(math.floor(n ** (1 / 3))) if lag is None else lag
    x = d - d.mean()
    lrv = float(x @ x) / n
    for k in range(1, min(lag, n - 1) + 1):
        lrv += 2.0 * (1.0 - k / (lag + 1)) * float(x[k:] @ x[:-k]) / n
    return lrv


def dm_from_differential(d, lag: int | None = None) -> DmResult:
    d = np.asarray(d, dtype=float).ravel()
    n = d.size
    if n < 10:
        raise EmptyInput(f"Diebold-Mariano needs at least 10 observations, got {n}")
    lrv = newey_west_variance(d, lag)
    mean = float(d.mean())
    if not lrv > 0:  # constant differential, e.g. identical loss series
        return DmResult(0.0, 1.0, n)
    stat = mean / math.sqrt(lrv / n)
    return DmResult(stat, float(2.0 * norm.sf(abs(stat))), n)


def dm_test(errors_a, errors_b, lag: int | None = None) -> DmResult:
    """Squared-loss DM test; a positive statistic favours model b."""
    a = np.asarray(errors_a, dtype=float).ravel()
    b = np.asarray(errors_b, dtype=float).ravel()
    if a.size != b.size:
        raise LengthMismatch(f"{a.size} vs {b.size} errors")
    return dm_from_differential(a * a - b * b, lag)


@dataclass
class DmMatrix:
    models: list[str]
    entries: dict = field(default_factory=dict)  # (row model, column model) -> DmResult

    def to_rows(self) -> list[list]:
        """Upper-triangular layout: statistic and p-value per (row, column) cell."""
        rows = []
        for (a, b), r in self.entries.items():
            rows.append([a, b, repr(r.statistic), repr(r.p_value), r.n])
        return rows

    def write_csv(self, path):
        write_table(path, ["row_model", "column_model", "dm_statistic", "p_value", "n"], self.to_rows())


def dm_matrix(errors: dict[str, np.ndarray]) -> DmMatrix:
    """Pairwise tests over models in insertion order, entries (i, j) with i < j."""
    models = list(errors)
    if len(models) < 2:
        raise EmptyInput("need at least two models to compare")
    out = DmMatrix(models)
    for a, b in itertools.combinations(models, 2):
        out.entries[(a, b)] = dm_test(errors[a], errors[b])
    return out
