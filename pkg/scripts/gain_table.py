"""Multiplexing gain for the 31- and 59-element masks, calculated vs Monte-Carlo."""
import argparse
from pathlib import Path

from cha.experiments import ScanConfig, run_gain_benchmark
from cha.fileio import write_report

p = argparse.ArgumentParser(description=__doc__)
p.add_argument("--trials", type=int, default=10_000)
p.add_argument("--sigma", type=float, default=1e-3)
p.add_argument("--seed", type=int, default=0)
p.add_argument("--workers", type=int, default=1)
p.add_argument("--outdir", type=Path, default=Path("out/gain"))
args = p.parse_args()

print(f"{'n':>3} {'calculated':>10} {'measured':>9} {'stderr':>8}")
for n in (31, 59):
    cfg = ScanConfig.for_mask(n, scenario="gain", sigma=args.sigma, trials=args.trials, seed=args.seed)
    rep = run_gain_benchmark(cfg, workers=args.workers)
    write_report(rep, args.outdir / f"n{n}")
    r = rep.results
    print(f"{n:>3} {r['theoretical_gain']:>10.4f} {r['measured_gain']:>9.4f} {r['stderr']:>8.4f}")
