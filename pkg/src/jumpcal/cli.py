"""``jumpcal`` command line: generate, train, evaluate, compare.

Every command reads an optional JSON config (``--config``), applies flag
overrides, and writes a ``manifest.json`` holding the resolved config.
Passing that manifest back as ``--config`` reruns the command exactly.

Exit codes: 0 success, 1 validation error, 2 runtime failure (divergence),
3 file-system error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .benchmarks.ann import AnnConfig, ann_price_quotes, ann_train
from .benchmarks.calibration import CalibrationResult, calibrate_parametric, model_prices
from .benchmarks.svcj import McSettings
from .errors import BadSpec, Diverged, JumpcalError, ValidationError
from .evalkit import bucket_report, combined_table, dm_matrix, plot_data, write_table
from .market_data import read_quotes, write_quotes
from .njsde.config import TrainConfig
from .njsde.dynamics import ContractSpec, price_calls
from .njsde.training import TrainState, build_networks, make_bank, train
from .synthetic import GENERATORS, generate_prices, grids
from .tensor_net.network import load_checkpoint, save_checkpoint
from .tensor_net.optim import Adam, AdamConfig

log = logging.getLogger("jumpcal")

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME, EXIT_IO = 0, 1, 2, 3
NEURAL_MODELS = ("njsde", "nsde")
PARAMETRIC_MODELS = ("bs", "heston", "svcj")
TRAIN_MODELS = NEURAL_MODELS + ("ann",) + PARAMETRIC_MODELS


# --- config handling --------------------------------------------------------------

def _defaults(command: str) -> dict:
    if command == "generate":
        return {"generator": "heston", "seed": 0, "mc_paths": 1_000_000, "mc_steps_per_year": 240,
                "antithetic": True}
    if command == "train":
        return {"model": "njsde", "data": None, "label": None, "seed": 0, "checkpoint_every": 0,
                "resume": None, "engine": TrainConfig().to_dict(),
                "ann": {"hidden": [32, 32], "hidden_activation": "tanh", "epochs": 2000,
                        "adam": asdict(AnnConfig().adam)},
                "calibration": {"restarts": 5, "mc_paths": 20_000, "mc_steps_per_year": 48,
                                "free_drift": False}}
    if command == "evaluate":
        return {"data": None, "runs": []}
    return {"inputs": []}


def _merge(base: dict, over: dict, where: str) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in out:
            raise BadSpec(f"{where}{k}: unknown config field")
        if isinstance(out[k], dict) and isinstance(v, dict) and k not in ("head_bias", "head_activations"):
            out[k] = _merge(out[k], v, f"{where}{k}.")
        else:
            out[k] = v
    return out


def load_config(command: str, path) -> dict:
    """Defaults, overlaid with the file's section for ``command`` (or a manifest)."""
    cfg = _defaults(command)
    if path is None:
        return cfg
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if "command" in data and "config" in data:
        if data["command"] != command:
            raise BadSpec(f"manifest is for {data['command']!r}, not {command!r}")
        section = data["config"]
    else:
        section = data.get(command, {})
    return _merge(cfg, section, f"{command}.")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out: Path, command: str, config: dict, outputs: list[str]):
    manifest = {"command": command, "version": __version__, "config": config,
                "outputs": {name: _sha256(out / name) for name in sorted(outputs)}}
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _out_dir(args) -> Path:
    if args.out is None:
        raise BadSpec("--out: output directory is required")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _check_distinct(inputs, out: Path):
    for p in inputs:
        if p is not None and Path(p).resolve() == (out / "manifest.json").resolve():
            raise BadSpec(f"input {p} would be overwritten by the output")


# --- generate ---------------------------------------------------------------------

def cmd_generate(args) -> int:
    cfg = load_config("generate", args.config)
    if args.model is not None:
        cfg["generator"] = args.model
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.paths is not None:
        cfg["mc_paths"] = args.paths
    if args.steps is not None:
        cfg["mc_steps_per_year"] = args.steps
    if cfg["generator"] not in GENERATORS:
        raise BadSpec(f"generate.generator: unknown model {cfg['generator']!r}, expected one of {GENERATORS}")
    out = _out_dir(args)
    mc = McSettings(paths=int(cfg["mc_paths"]), steps_per_year=int(cfg["mc_steps_per_year"]),
                    antithetic=bool(cfg["antithetic"]))
    train_grid, test_grid = grids(cfg["generator"], mc)
    written = []
    for name, grid in (("train.csv", train_grid), ("test.csv", test_grid)):
        quotes = generate_prices(grid, int(cfg["seed"]))
        write_quotes(out / name, quotes)
        written.append(name)
        print(f"{cfg['generator']} {name}: {len(quotes)} quotes, "
              f"{len(grid.maturities)} maturities x {len(grid.strikes)} strikes")
    write_manifest(out, "generate", cfg, written)
    return EXIT_OK


# --- train ------------------------------------------------------------------------

def _targets(quotes):
    return [(ContractSpec(q.strike, q.maturity, q.rate, q.spot), q.price) for q in quotes]


def _write_losses(path: Path, history, with_temperature: bool):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "loss", "temperature"] if with_temperature else ["epoch", "loss"])
        for row in history:
            w.writerow([row[0]] + [repr(float(x)) for x in row[1:]])


def _engine_config(cfg: dict) -> TrainConfig:
    engine = copy.deepcopy(cfg["engine"])
    if cfg["model"] == "nsde":
        engine["model"]["jumps"] = False
    try:
        return TrainConfig.from_dict(engine)
    except TypeError as exc:
        raise BadSpec(f"train.engine: {exc}") from exc


def cmd_train(args) -> int:
    cfg = load_config("train", args.config)
    for flag, key in (("model", "model"), ("data", "data"), ("resume", "resume"), ("label", "label")):
        if getattr(args, flag, None) is not None:
            cfg[key] = getattr(args, flag)
    if args.seed is not None:
        cfg["seed"] = args.seed
        cfg["engine"]["seed"] = args.seed
    if args.epochs is not None:
        cfg["engine"]["epochs"] = args.epochs
        cfg["ann"]["epochs"] = args.epochs
    if args.paths is not None:
        cfg["engine"]["paths"] = args.paths
    if args.steps is not None:
        cfg["engine"]["steps"] = args.steps
    model = cfg["model"]
    if model not in TRAIN_MODELS:
        raise BadSpec(f"train.model: unknown model {model!r}, expected one of {TRAIN_MODELS}")
    if cfg["data"] is None:
        raise BadSpec("train.data: path to the training CSV is required")
    if model == "nsde":
        cfg["engine"]["model"]["jumps"] = False  # recorded in the manifest
    cfg["label"] = cfg["label"] or model
    out = _out_dir(args)
    _check_distinct([cfg["data"], cfg["resume"]], out)
    quotes = read_quotes(cfg["data"])
    seed = int(cfg["seed"])

    if model in NEURAL_MODELS:
        tcfg = _engine_config(cfg)
        cfg["engine"] = tcfg.to_dict()
        state = None
        if cfg["resume"] is not None:
            nets, extra = load_checkpoint(cfg["resume"])
            state = TrainState(nets, Adam.from_state(tcfg.adam, extra["adam"]), int(extra["epoch"]),
                               [tuple(h) for h in extra["history"]])
        every = int(cfg["checkpoint_every"])

        def _save(path, st):
            save_checkpoint(path, st.nets, {"model": model, "epoch": st.epoch, "history": st.history,
                                            "adam": st.optimizer.state_dict(), "config": cfg})

        def callback(epoch, value, tau):
            log.info("epoch %d loss %.6g tau %.4g", epoch, value, tau)

        written = []
        if every > 0:
            # train in segments so intermediate checkpoints reflect completed epochs
            nets = build_networks(tcfg, seed) if state is None else None
            bank = make_bank(tcfg)
            st = state or TrainState(nets, Adam.fresh(nets.n_params, tcfg.adam), 0, [])
            while st.epoch < tcfg.epochs:
                stop = min(tcfg.epochs, (st.epoch // every + 1) * every)
                res = train(_targets(quotes), tcfg, seed, state=st, bank=bank, callback=callback,
                            stop_at=stop)
                st = res.state
                if stop < tcfg.epochs:
                    name = f"checkpoint_epoch{stop}.json"
                    _save(out / name, st)
                    written.append(name)
            result_state = st
        else:
            result_state = train(_targets(quotes), tcfg, seed, state=state, callback=callback).state
        _save(out / "checkpoint.json", result_state)
        _write_losses(out / "losses.csv", result_state.history, True)
        written += ["checkpoint.json", "losses.csv"]
        final = result_state.history[-1][1] if result_state.history else float("nan")
        print(f"{cfg['label']}: {result_state.epoch} epochs, final loss {final:.6g}")
    elif model == "ann":
        a = cfg["ann"]
        acfg = AnnConfig(tuple(a["hidden"]), a["hidden_activation"], int(a["epochs"]),
                         AdamConfig(**a["adam"]), seed)
        net, losses = ann_train(quotes, acfg)
        save_checkpoint(out / "checkpoint.json", net, {"model": "ann", "config": cfg})
        _write_losses(out / "losses.csv", list(enumerate(losses)), False)
        written = ["checkpoint.json", "losses.csv"]
        print(f"{cfg['label']}: {acfg.epochs} epochs, final loss {losses[-1] if len(losses) else float('nan'):.6g}")
    else:
        c = cfg["calibration"]
        res = calibrate_parametric(model, quotes, restarts=int(c["restarts"]), seed=seed,
                                   mc=_calib_mc(cfg, seed), free_drift=bool(c["free_drift"]))
        res.save(out / "params.json")
        written = ["params.json"]
        print(f"{cfg['label']}: objective {res.objective:.6g}, params {res.params}")
    write_manifest(out, "train", cfg, written)
    return EXIT_OK


def _calib_mc(cfg: dict, seed: int) -> McSettings:
    c = cfg["calibration"]
    return McSettings(paths=int(c["mc_paths"]), steps_per_year=int(c["mc_steps_per_year"]), seed=seed)


# --- evaluate ---------------------------------------------------------------------

def _load_manifest(run_dir: Path) -> dict:
    with open(run_dir / "manifest.json", encoding="utf-8") as fh:
        m = json.load(fh)
    if m.get("command") != "train":
        raise BadSpec(f"{run_dir}: not a train run")
    return m["config"]


def predict(run_dir, quotes) -> np.ndarray:
    """Prices of ``quotes`` under the model trained in ``run_dir``."""
    run_dir = Path(run_dir)
    cfg = _load_manifest(run_dir)
    model = cfg["model"]
    if model in NEURAL_MODELS:
        nets, _ = load_checkpoint(run_dir / "checkpoint.json")
        tcfg = TrainConfig.from_dict(cfg["engine"])
        contracts = [c for c, _ in _targets(quotes)]
        return price_calls(contracts, nets, make_bank(tcfg), tcfg).prices
    if model == "ann":
        net, _ = load_checkpoint(run_dir / "checkpoint.json")
        return ann_price_quotes(net, quotes)
    res = CalibrationResult.load(run_dir / "params.json")
    return model_prices(model, res.params, quotes, _calib_mc(cfg, int(cfg["seed"])))


def run_label(run_dir) -> str:
    return _load_manifest(Path(run_dir))["label"]


def cmd_evaluate(args) -> int:
    cfg = load_config("evaluate", args.config)
    if args.data is not None:
        cfg["data"] = args.data
    if args.runs:
        cfg["runs"] = list(args.runs)
    if cfg["data"] is None:
        raise BadSpec("evaluate.data: dataset directory is required")
    if not cfg["runs"]:
        raise BadSpec("evaluate.runs: at least one trained run is required")
    out = _out_dir(args)
    data = Path(cfg["data"])
    samples = {"in": read_quotes(data / "train.csv"), "out": read_quotes(data / "test.csv")}
    reports, written = [], []
    labels = [run_label(r) for r in cfg["runs"]]
    if len(set(labels)) != len(labels):
        raise BadSpec("evaluate.runs: run labels must be unique")
    for run, label in zip(cfg["runs"], labels):
        for sample, quotes in samples.items():
            rep = bucket_report(quotes, predict(run, quotes), label, sample)
            reports.append(rep)
            stem = f"report_{label}_{sample}"
            rep.write_json(out / f"{stem}.json")
            rep.write_csv(out / f"{stem}.csv")
            written += [f"{stem}.json", f"{stem}.csv"]
            if sample == "out":
                name = f"predictions_{label}.csv"
                _write_predictions(out / name, rep, label)
                written.append(name)
    header, rows = combined_table(reports)
    write_table(out / "table.csv", header, rows)
    write_table(out / "plot_data.csv", ["bucket", "model", "mae"],
                plot_data([r for r in reports if r.sample == "out"]))
    written += ["table.csv", "plot_data.csv"]
    for row in rows:
        print(" ".join(str(x) if i < 2 else f"{float(x):.5g}" for i, x in enumerate(row)))
    write_manifest(out, "evaluate", cfg, written)
    return EXIT_OK


def _write_predictions(path: Path, rep, label: str):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "contract_id", "observed", "predicted"])
        for r in rep.rows:
            w.writerow([label, r.contract_id, repr(r.observed), repr(r.predicted)])


def read_predictions(path) -> tuple[str, np.ndarray]:
    """``(model label, observed - predicted)`` from a predictions CSV."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise BadSpec(f"{path}: no predictions")
    try:
        errors = np.array([float(r["observed"]) - float(r["predicted"]) for r in rows])
    except (KeyError, ValueError) as exc:
        raise BadSpec(f"{path}: malformed predictions file") from exc
    return rows[0].get("model") or Path(path).stem, errors


# --- compare ----------------------------------------------------------------------

def cmd_compare(args) -> int:
    cfg = load_config("compare", args.config)
    if args.inputs:
        cfg["inputs"] = list(args.inputs)
    if len(cfg["inputs"]) < 2:
        raise BadSpec("compare.inputs: at least two prediction files are required")
    out = _out_dir(args)
    errors = {}
    for i, path in enumerate(cfg["inputs"]):
        label, e = read_predictions(path)
        if label in errors:
            label = f"{label}#{i}"
        errors[label] = e
    matrix = dm_matrix(errors)
    matrix.write_csv(out / "dm_matrix.csv")
    for a, b, stat, p, n in matrix.to_rows():
        print(f"{a} vs {b}: DM {float(stat):.4f} (p {float(p):.4f}, n {n})")
    write_manifest(out, "compare", cfg, ["dm_matrix.csv"])
    return EXIT_OK


# --- entry point ------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_VALIDATION)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="jumpcal", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"jumpcal {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="JSON config file or a manifest from an earlier run")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int)
        return sp

    g = common(sub.add_parser("generate", help="write synthetic train/test quotes"))
    g.add_argument("--model", help="generator: heston or svcj")
    g.add_argument("--paths", type=int, help="Monte-Carlo paths (svcj)")
    g.add_argument("--steps", type=int, help="Monte-Carlo steps per year (svcj)")
    g.set_defaults(func=cmd_generate)

    t = common(sub.add_parser("train", help="fit one model to a quote file"))
    t.add_argument("--model", help=f"one of {', '.join(TRAIN_MODELS)}")
    t.add_argument("--data", help="training quotes CSV")
    t.add_argument("--epochs", type=int)
    t.add_argument("--paths", type=int, help="simulated paths M")
    t.add_argument("--steps", type=int, help="time steps m")
    t.add_argument("--resume", help="checkpoint to continue from")
    t.add_argument("--label", help="model label used in reports")
    t.set_defaults(func=cmd_train)

    e = common(sub.add_parser("evaluate", help="price train/test quotes with trained runs"))
    e.add_argument("--data", help="directory holding train.csv and test.csv")
    e.add_argument("--runs", nargs="+", help="train output directories")
    e.set_defaults(func=cmd_evaluate)

    c = common(sub.add_parser("compare", help="pairwise Diebold-Mariano tests"))
    c.add_argument("--inputs", nargs="+", help="predictions CSVs written by evaluate")
    c.set_defaults(func=cmd_compare)
    return p


def _thread_limit():
    raw = os.environ.get("JUMPCAL_THREADS")
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise BadSpec(f"JUMPCAL_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise BadSpec("JUMPCAL_THREADS must be >= 1")
    return n


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return EXIT_VALIDATION
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        limit = _thread_limit()
        if limit is None:
            return args.func(args)
        from threadpoolctl import threadpool_limits
        with threadpool_limits(limits=limit):
            return args.func(args)
    except Diverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValidationError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (JumpcalError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
