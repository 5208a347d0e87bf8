"""BER and PER versus per-chip SNR for each spreading length, one RS code."""
import argparse

from cdmaharq.montecarlo import ber_sweep
from cdmaharq.rs import CodeSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--mod", default="bpsk", choices=("bpsk", "qpsk"))
    ap.add_argument("--n", type=int, default=15)
    ap.add_argument("--k", type=int, default=9)
    ap.add_argument("--bits", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=9)
    args = ap.parse_args()

    sls = [10, 20, 30, 40]
    snrs = [-20.0, -17.0, -14.0, -11.0, -8.0, -5.0]
    pts = ber_sweep(args.mod, CodeSpec(args.n, args.k), sls, snrs, args.bits, seed=args.seed)
    table = {(p.snr_db, p.sl): p for p in pts}
    print("snr_db " + " ".join(f"{'SL' + str(sl):>10s}" for sl in sls))
    for snr in snrs:
        print(f"{snr:6.1f} " + " ".join(f"{table[(snr, sl)].ber:10.2e}" for sl in sls))


if __name__ == "__main__":
    main()
