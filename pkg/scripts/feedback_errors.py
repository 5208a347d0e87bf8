"""Throughput under ACK/NACK errors: collaborators with better or equal feedback, q = 0.5, conventional."""
import argparse
from dataclasses import replace
from pathlib import Path

from cdmaharq.config import load_config
from cdmaharq.sim import run_many

ROOT = Path(__file__).resolve().parents[1]


def with_error(cfg, p, better, impaired="T1"):
    nodes = [replace(n, p_fb=(p / 10 if better and n.id != impaired else p)) for n in cfg.nodes]
    return replace(cfg, nodes=nodes, p_fb=p)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(ROOT / "scenarios" / "impaired.yaml"))
    ap.add_argument("--r-T", type=int, default=2)
    ap.add_argument("--workers", type=int, default=4)
    args = ap.parse_args()

    base = replace(load_config(args.config), r_T=args.r_T)
    probs = [0.0, 0.05, 0.1, 0.2, 0.3]
    cfgs = []
    for p in probs:
        cfgs += [with_error(base, p, True), with_error(base, p, False),
                 with_error(replace(base, q=0.5), p, False),
                 with_error(replace(base, mode="conventional"), p, False)]
    reps = run_many(cfgs, workers=args.workers)
    print(f"{'p_fb':>5s} {'better':>8s} {'equal':>8s} {'q=0.5':>8s} {'conv':>8s}")
    for i, p in enumerate(probs):
        print(f"{p:5.2f} " + " ".join(f"{r.eta:8.5f}" for r in reps[4 * i:4 * i + 4]))


if __name__ == "__main__":
    main()
