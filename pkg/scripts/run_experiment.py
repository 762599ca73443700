"""Run the synthetic Heston or SVCJ experiment and print the error table.

    python3 scripts/run_experiment.py heston --seeds 0
    python3 scripts/run_experiment.py svcj --seeds 0 1 2 --out results/
"""

import argparse
import logging
from dataclasses import replace
from pathlib import Path

from jumpcal.experiments import ExperimentConfig, fit_benchmarks, load_dataset, run_experiment, write_result


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("generator", choices=("heston", "svcj"))
    p.add_argument("--seeds", type=int, nargs="+", default=[0])
    p.add_argument("--epochs", type=int)
    p.add_argument("--mc-paths", type=int, help="paths for the SVCJ generator")
    p.add_argument("--out", type=Path, help="directory for per-seed JSON results")
    p.add_argument("-v", "--verbose", action="store_true")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")

    cfg = ExperimentConfig(generator=args.generator)
    if args.epochs is not None:
        cfg = replace(cfg, epochs=args.epochs)
    if args.mc_paths is not None:
        cfg = replace(cfg, mc_paths=args.mc_paths)
    data = load_dataset(cfg)
    bench = fit_benchmarks(cfg, data)
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
    for seed in args.seeds:
        res = run_experiment(cfg, seed, data, bench)
        print(f"\n{args.generator}, seed {seed}\n{res.summary()}")
        for (a, b), r in res.dm().entries.items():
            print(f"  DM {a} vs {b}: {r.statistic:+.3f} (p {r.p_value:.3f})")
        if args.out:
            write_result(args.out / f"{args.generator}_seed{seed}.json", res)


if __name__ == "__main__":
    main()
