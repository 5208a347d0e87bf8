"""Effect of power control on the near-far scenario for each retransmission limit."""
import argparse
from dataclasses import replace
from pathlib import Path

from cdmaharq.config import load_config
from cdmaharq.sim import run_many

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(ROOT / "scenarios" / "near_far.yaml"))
    ap.add_argument("--workers", type=int, default=4)
    args = ap.parse_args()

    base = load_config(args.config)
    limits = [1, 2, 3, 4]
    cfgs = []
    for r_T in limits:
        cfgs += [replace(base, r_T=r_T), replace(base, r_T=r_T, power_control=False)]
    reps = run_many(cfgs, workers=args.workers)
    print(f"{'r_T':>3s} {'eta PC on':>10s} {'eta PC off':>11s} {'outage on':>10s} {'outage off':>11s}")
    for r_T, on, off in zip(limits, reps[::2], reps[1::2]):
        print(f"{r_T:3d} {on.eta:10.5f} {off.eta:11.5f} {on.outage:10.4f} {off.outage:11.4f}")


if __name__ == "__main__":
    main()
