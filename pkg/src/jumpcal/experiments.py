"""End-to-end synthetic experiments: generate, fit every model, score out of sample.

Used by the scripts in ``scripts/`` and by the acceptance tests.  One run
fits calibrated Black-Scholes and Heston benchmarks plus the neural SDE
with and without its jump channel, then reports MAE/MSE on both grids and
the pairwise Diebold-Mariano matrix on out-of-sample errors.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .benchmarks.calibration import CalibrationResult, calibrate_parametric, model_prices
from .benchmarks.svcj import McSettings
from .evalkit import dm_matrix, mae, mse
from .njsde.config import ModelConfig, TrainConfig
from .njsde.dynamics import ContractSpec, price_calls
from .njsde.training import make_bank, train
from .synthetic import generate_prices, grids
from .tensor_net.optim import AdamConfig

log = logging.getLogger(__name__)

BENCHMARKS = ("bs", "heston")
NEURAL = ("njsde", "nsde")


@dataclass(frozen=True)
class ExperimentConfig:
    generator: str = "heston"
    data_seed: int = 0
    mc_paths: int = 1_000_000  # SVCJ generator only
    restarts: int = 5
    paths: int = 100
    steps: int = 10
    epochs: int = 600
    lr: float = 3e-3
    lr_final: float = 1e-4
    hidden: tuple[int, ...] = (16, 16)
    # feeding max(V, 0) to the heads lets the jump channel react to the variance level
    variance_feature: bool = True

    def train_config(self, seed: int, jumps: bool) -> TrainConfig:
        return TrainConfig(paths=self.paths, steps=self.steps, epochs=self.epochs, seed=seed,
                           adam=AdamConfig(lr=self.lr, lr_final=self.lr_final),
                           model=ModelConfig(hidden=tuple(self.hidden), variance_feature=self.variance_feature,
                                             jumps=jumps))


@dataclass
class Dataset:
    train: list
    test: list


@dataclass
class ModelScore:
    model: str
    mae_in: float
    mse_in: float
    mae_out: float
    mse_out: float
    seconds: float
    errors_out: np.ndarray = field(repr=False, default=None)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    seed: int
    scores: dict[str, ModelScore]
    calibrations: dict[str, CalibrationResult]

    def mae_out(self, model: str) -> float:
        return self.scores[model].mae_out

    def dm(self):
        return dm_matrix({m: s.errors_out for m, s in self.scores.items()})

    def to_dict(self) -> dict:
        return {"config": asdict(self.config), "seed": self.seed,
                "scores": {m: {k: v for k, v in asdict(s).items() if k != "errors_out"}
                           for m, s in self.scores.items()},
                "calibrations": {m: c.to_dict() for m, c in self.calibrations.items()},
                "dm": [[a, b, r.statistic, r.p_value] for (a, b), r in self.dm().entries.items()]}

    def summary(self) -> str:
        lines = [f"{'model':8s} {'MAE in':>10s} {'MSE in':>10s} {'MAE out':>10s} {'MSE out':>10s} {'sec':>7s}"]
        for s in self.scores.values():
            lines.append(f"{s.model:8s} {s.mae_in:10.4f} {s.mse_in:10.4f} {s.mae_out:10.4f} "
                         f"{s.mse_out:10.4f} {s.seconds:7.1f}")
        return "\n".join(lines)


def load_dataset(cfg: ExperimentConfig) -> Dataset:
    mc = McSettings(paths=cfg.mc_paths, steps_per_year=240)
    tr, te = grids(cfg.generator, mc)
    return Dataset(generate_prices(tr, cfg.data_seed), generate_prices(te, cfg.data_seed))


def _targets(quotes):
    return [(ContractSpec(q.strike, q.maturity, q.rate, q.spot), q.price) for q in quotes]


def _score(model, data: Dataset, pred_in, pred_out, seconds) -> ModelScore:
    obs_in = [q.price for q in data.train]
    obs_out = np.array([q.price for q in data.test])
    return ModelScore(model, mae(obs_in, pred_in), mse(obs_in, pred_in), mae(obs_out, pred_out),
                      mse(obs_out, pred_out), seconds, obs_out - np.asarray(pred_out))


def fit_benchmarks(cfg: ExperimentConfig, data: Dataset, models=BENCHMARKS):
    """Calibrate each parametric model on the training grid: ``(scores, calibrations)``."""
    scores, cals = {}, {}
    for m in models:
        t0 = time.perf_counter()
        cal = calibrate_parametric(m, data.train, restarts=cfg.restarts)
        scores[m] = _score(m, data, model_prices(m, cal.params, data.train),
                           model_prices(m, cal.params, data.test), time.perf_counter() - t0)
        cals[m] = cal
        log.info("%s calibrated: %s", m, cal.params)
    return scores, cals


def fit_neural(cfg: ExperimentConfig, data: Dataset, seed: int, jumps: bool) -> ModelScore:
    """Train on the training grid and price both grids on the training noise bank."""
    tcfg = cfg.train_config(seed, jumps)
    t0 = time.perf_counter()
    res = train(_targets(data.train), tcfg, init_seed=seed)
    bank = make_bank(tcfg)
    p_in = price_calls([c for c, _ in _targets(data.train)], res.nets, bank, tcfg).prices
    p_out = price_calls([c for c, _ in _targets(data.test)], res.nets, bank, tcfg).prices
    return _score("njsde" if jumps else "nsde", data, p_in, p_out, time.perf_counter() - t0)


def run_experiment(cfg: ExperimentConfig, seed: int = 0, data: Dataset | None = None,
                   benchmarks=None) -> ExperimentResult:
    """Fit all four models; ``benchmarks`` reuses an earlier ``fit_benchmarks`` result."""
    data = data or load_dataset(cfg)
    scores, cals = benchmarks if benchmarks is not None else fit_benchmarks(cfg, data)
    scores = dict(scores)
    for jumps in (True, False):
        s = fit_neural(cfg, data, seed, jumps)
        scores[s.model] = s
        log.info("%s trained: out-of-sample MAE %.4f", s.model, s.mae_out)
    return ExperimentResult(cfg, seed, scores, dict(cals))


def write_result(path, result: ExperimentResult):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(result.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")
