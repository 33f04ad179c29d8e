"""Loss vs incidence angle: demultiplexed 1 mm element against the bare 38 mm receiver."""
import argparse
from pathlib import Path

from cha.experiments import ScanConfig, run_angular_response
from cha.fileio import write_report

p = argparse.ArgumentParser(description=__doc__)
p.add_argument("--n", type=int, default=59)
p.add_argument("--distance-mm", type=float, default=220.0)
p.add_argument("--angles", type=float, nargs="+", default=[0.0, 10.0, 20.0, 30.0, 40.0])
p.add_argument("--outdir", type=Path, default=Path("out/angular"))
args = p.parse_args()

cfg = ScanConfig.for_mask(args.n, scenario="angular", distance_mm=args.distance_mm, angles_deg=tuple(args.angles))
rep = run_angular_response(cfg)
write_report(rep, args.outdir)
loss = rep.tables["loss"]
print(f"{'angle':>5} {'masked':>7} {'bare':>7} {'bare(exact)':>11} {'1mm piston':>10} {'38mm piston':>11}")
for row in zip(*(loss[k] for k in ("angle_deg", "masked_loss_db", "unmasked_loss_db", "unmasked_exact_loss_db",
                                   "aperture_model_loss_db", "receiver_model_loss_db"))):
    print("{:>5.0f} {:>7.2f} {:>7.2f} {:>11.2f} {:>10.2f} {:>11.2f}".format(*row))
