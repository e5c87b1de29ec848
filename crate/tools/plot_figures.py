"""LMP at the load bus and storage SoC per hour, from `pricehedge run` output."""
import csv
import glob
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def main(out_dir):
    files = [("baseline", os.path.join(out_dir, "baseline.csv"))]
    files += [
        (os.path.basename(p)[len("trajectory_"):-4].upper(), p)
        for p in sorted(glob.glob(os.path.join(out_dir, "trajectory_h*.csv")))
    ]
    fig, (ax_lmp, ax_soc) = plt.subplots(2, 1, sharex=True, figsize=(8, 6))
    for label, path in files:
        rows = read(path)
        lmp_col = [c for c in rows[0] if c.startswith("lmp_bus")][-1]
        hours = [int(r["hour"]) for r in rows]
        ax_lmp.step(hours, [float(r[lmp_col]) for r in rows], where="mid", label=label)
        if label != "baseline":
            ax_soc.plot(hours, [float(r["soc"]) for r in rows], marker=".", label=label)
    ax_lmp.set_ylabel("LMP at load bus [€/MWh]")
    ax_soc.set_ylabel("SoC [MWh]")
    ax_soc.set_xlabel("hour")
    ax_lmp.legend()
    ax_soc.legend()
    ax_lmp.set_title("calibrated reconstruction")
    fig.tight_layout()
    target = os.path.join(out_dir, "lmp_soc.png")
    fig.savefig(target, dpi=120)
    print(target)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "out")
