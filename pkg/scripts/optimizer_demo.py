"""Solve the rate-maximisation problem for one scenario file and check it against the grid oracle."""
import argparse
from pathlib import Path

from cdmaharq.config import load_optimizer_config
from cdmaharq.optimizer import brute_force_oracle, grid_gap, solve_rate_max

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(ROOT / "scenarios" / "opt.json"))
    ap.add_argument("--resolution", type=int, default=401)
    args = ap.parse_args()

    sc = load_optimizer_config(args.config)
    sol = solve_rate_max(sc)
    print(sol.to_dict())
    ora = brute_force_oracle(sc, resolution=args.resolution)
    print(f"solver {sol.objective:.6f}  oracle {ora.objective:.6f}  "
          f"grid gap {grid_gap(sc, sol, resolution=args.resolution):.2e}  kkt {sol.kkt_residual}")


if __name__ == "__main__":
    main()
