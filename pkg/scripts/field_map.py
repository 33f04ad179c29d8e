"""2D radiation map from masked scanning next to the direct single-aperture raster."""
import argparse
from pathlib import Path

from cha.experiments import ScanConfig, run_field_map
from cha.fileio import write_report

p = argparse.ArgumentParser(description=__doc__)
p.add_argument("--n", type=int, default=31)
p.add_argument("--interlace", type=int, default=1)
p.add_argument("--sigma", type=float, default=0.0)
p.add_argument("--averages", type=int, default=1)
p.add_argument("--seed", type=int, default=0)
p.add_argument("--outdir", type=Path, default=Path("out/fieldmap"))
args = p.parse_args()

cfg = ScanConfig.for_mask(args.n, scenario="fieldmap", interlace=args.interlace, sigma=args.sigma,
                          averages=args.averages, seed=args.seed)
rep = run_field_map(cfg)
write_report(rep, args.outdir)
for k, v in rep.results.items():
    print(f"{k:>28}: {v}")
