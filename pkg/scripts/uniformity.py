"""Per-element sensitivity with an identical on-axis transmitter over each virtual element."""
import argparse
from pathlib import Path

from cha.experiments import ScanConfig, run_uniformity_scan
from cha.fileio import write_report

p = argparse.ArgumentParser(description=__doc__)
p.add_argument("--n", type=int, default=59)
p.add_argument("--receiver-mm", type=float, default=38.0)
p.add_argument("--outdir", type=Path, default=Path("out/uniformity"))
args = p.parse_args()

rep = run_uniformity_scan(ScanConfig.for_mask(args.n, scenario="uniformity", receiver_diameter_mm=args.receiver_mm))
write_report(rep, args.outdir)
t = rep.tables["sensitivity"]
print(" ".join("#" if s >= 0.5 else "." for s in t["sensitivity"]))
for k, v in rep.results.items():
    print(f"{k:>22}: {v}")
