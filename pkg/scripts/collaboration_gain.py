"""Collaborative versus conventional HARQ on the impaired-link scenario over a noise sweep."""
import argparse
from dataclasses import replace
from pathlib import Path

from cdmaharq.config import load_config
from cdmaharq.sim import sweep

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(ROOT / "scenarios" / "impaired.yaml"))
    ap.add_argument("--workers", type=int, default=4)
    args = ap.parse_args()

    cfg = load_config(args.config)
    noise = [3e-10, 1e-9, 3e-9, 1e-8, 3e-8]
    collab = sweep(cfg, "noise_psd", noise, workers=args.workers)
    conv = sweep(replace(cfg, mode="conventional"), "noise_psd", noise, workers=args.workers)
    print(f"{'N0':>8s} {'eta collab':>11s} {'eta conv':>9s} {'tx collab':>10s} {'tx conv':>8s}")
    for n0, a, b in zip(noise, collab, conv):
        print(f"{n0:8.0e} {a.eta:11.5f} {b.eta:9.5f} {a.mean_transmissions:10.3f} {b.mean_transmissions:8.3f}")


if __name__ == "__main__":
    main()
