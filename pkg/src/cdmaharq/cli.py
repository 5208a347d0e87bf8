"""Command-line front end: runs, sweeps, paired comparisons, optimizer solves, chip dumps, BER tables.

Every subcommand writes plain files (JSON, CSV, JSONL) into the output
directory, which defaults to ``$CDMAHARQ_OUTPUT_DIR`` or ``./out``.
Exit status is 1 for an invalid configuration and 2 for any other failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .chaos import ChaoticCodeSpec, MapFamily, write_chip_dump
from .config import ConfigError, load_config, load_optimizer_config
from .montecarlo import ber_sweep
from .optimizer import brute_force_oracle, grid_gap, solve_rate_max
from .rs import CodeSpec
from .sim import MODE_GRID, compare_modes, reports_csv, run_scenario, sweep

OUTPUT_ENV = "CDMAHARQ_OUTPUT_DIR"
BER_COLUMNS_PREFIX = "ber_sl"


def _outdir(arg: Optional[str]) -> Path:
    out = Path(arg or os.environ.get(OUTPUT_ENV) or "out")
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise OSError(f"output directory {out} is not writable")
    return out


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def parse_range(text: str) -> list[float]:
    """``start:stop:step`` (stop included) or a comma list."""
    if ":" in text:
        parts = [float(v) for v in text.split(":")]
        if len(parts) == 2:
            parts.append(1.0)
        start, stop, step = parts
        if step == 0:
            raise ValueError("step must be non-zero")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 10) for i in range(max(n, 0))]
    return [float(v) for v in text.split(",") if v.strip()]


def _scalar(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_values(text: str) -> list:
    """Comma-separated sweep values: JSON scalars (numbers, true/false), anything else a string."""
    return [_scalar(v.strip()) for v in text.split(",") if v.strip()]


# ---------------------------------------------------------------------------
# subcommands


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    rep = run_scenario(cfg)
    paths = rep.write(_outdir(args.out), args.stem)
    print(f"eta={rep.eta:.6g} outage={rep.outage:.4g} delivered={rep.delivered}/{rep.offered} "
          f"digest={rep.log_digest}")
    for p in paths.values():
        print(p)
    return 0


def _emit_table(text: str, rows: list[dict], out: Path, stem: str, fmt: str) -> Path:
    if fmt == "json":
        path = out / f"{stem}.json"
        path.write_text(json.dumps(rows, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    else:
        path = out / f"{stem}.csv"
        path.write_text(text, encoding="utf-8")
    return path


def _rows(csv_text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(csv_text)))


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    values = parse_values(args.values)
    reps = sweep(cfg, args.axis, values, workers=args.workers)
    text = reports_csv([(args.axis, v, r) for v, r in zip(values, reps)])
    path = _emit_table(text, _rows(text), _outdir(args.out), args.stem, args.format)
    print(path)
    return 0


def cmd_compare(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    reps = compare_modes(cfg, workers=args.workers)
    rows = [("mode", f"{m}/{'pc' if pc else 'nopc'}", reps[(m, pc)]) for m, pc in MODE_GRID]
    text = reports_csv(rows)
    path = _emit_table(text, _rows(text), _outdir(args.out), args.stem, args.format)
    for m, pc in MODE_GRID:
        r = reps[(m, pc)]
        print(f"{m:13s} pc={'on ' if pc else 'off'} eta={r.eta:.6g} mean_tx={r.mean_transmissions:.4g} "
              f"outage={r.outage:.4g}")
    print(path)
    return 0


def cmd_optimize(args) -> int:
    sc = load_optimizer_config(args.config)
    sol = solve_rate_max(sc)
    doc = {"solution": sol.to_dict()}
    if args.oracle:
        ora = brute_force_oracle(sc, resolution=args.resolution)
        gap = grid_gap(sc, sol, resolution=args.resolution)
        doc["oracle"] = ora.to_dict()
        doc["grid_gap"] = gap
        doc["objective_difference"] = abs(sol.objective - ora.objective) if sol.feasible and ora.feasible else None
        doc["feasibility_agrees"] = bool(sol.feasible == ora.feasible)
    path = _outdir(args.out) / f"{args.stem}.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n", encoding="utf-8")
    print(f"feasible={sol.feasible} objective={sol.objective:.9g} kkt_residual={sol.kkt_residual}")
    if args.oracle:
        print(f"oracle objective={doc['oracle']['objective']:.9g} difference={doc['objective_difference']}")
    print(path)
    return 0


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serialisable: {type(o).__name__}")


def cmd_codegen(args) -> int:
    spec = ChaoticCodeSpec(MapFamily(args.map), args.seed, args.sl, args.bifurcation, args.burn_in)
    path = _outdir(args.out) / (args.stem + ".chips")
    write_chip_dump(path, spec, args.start, args.bits)
    print(path)
    return 0


def cmd_ber(args) -> int:
    n, k = _int_list(args.code)
    code = CodeSpec(n, k)
    sls = _int_list(args.sl)
    snrs = parse_range(args.snr)
    points = ber_sweep(args.mod, code, sls, snrs, args.bits, seed=args.seed if args.seed is not None else 0)
    table = {(p.snr_db, p.sl): p for p in points}
    header = ["snr_db"] + [f"{BER_COLUMNS_PREFIX}{sl}" for sl in sls] + [f"per_sl{sl}" for sl in sls]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    rows = []
    for snr in snrs:
        cells = [table[(snr, sl)] for sl in sls]
        w.writerow([snr] + [repr(c.ber) for c in cells] + [repr(c.per) for c in cells])
        rows.append(dict(zip(header, [snr] + [c.ber for c in cells] + [c.per for c in cells])))
    path = _emit_table(buf.getvalue(), rows, _outdir(args.out), args.stem, args.format)
    print(path)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cdmaharq", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=True, seed=True, stem="run", fmt=False):
        if config:
            p.add_argument("--config", required=True, help="scenario file (.json or .yaml)")
        if seed:
            p.add_argument("--seed", type=int, default=None, help="override the master seed")
        p.add_argument("--out", default=None, help=f"output directory (default ${OUTPUT_ENV} or ./out)")
        p.add_argument("--stem", default=stem, help="output file name stem")
        if fmt:
            p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("run", help="simulate one scenario")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="one run per value of a config field")
    common(p, stem="sweep", fmt=True)
    p.add_argument("--axis", required=True, help="dotted config path, e.g. noise_psd or nodes.0.p_fb")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="conventional/collaborative x power control on/off")
    common(p, stem="compare", fmt=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("optimize", help="solve one rate-maximisation problem")
    common(p, seed=False, stem="optimize")
    p.add_argument("--oracle", action="store_true", help="also run the brute-force grid oracle")
    p.add_argument("--resolution", type=int, default=61, help="oracle grid points per power axis")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("codegen", help="dump chaotic chips, one line per bit")
    common(p, config=False, seed=False, stem="code")
    p.add_argument("--map", choices=[f.value for f in MapFamily], default="logistic")
    p.add_argument("--seed", type=float, default=0.3, help="map seed in (0, 1)")
    p.add_argument("--sl", type=int, default=10)
    p.add_argument("--bits", type=int, default=16)
    p.add_argument("--start", type=int, default=0, help="first bit index")
    p.add_argument("--burn-in", type=int, default=1000)
    p.add_argument("--bifurcation", type=float, default=None)
    p.set_defaults(func=cmd_codegen)

    p = sub.add_parser("ber", help="single-link BER versus per-chip SNR")
    common(p, config=False, stem="ber", fmt=True)
    p.add_argument("--mod", choices=("bpsk", "qpsk"), default="bpsk")
    p.add_argument("--code", default="15,9", help="RS code as n,k")
    p.add_argument("--sl", default="10,20,30,40", help="comma-separated spreading lengths")
    p.add_argument("--snr", default="-20:-8:3", help="per-chip SNR in dB, start:stop:step or a list")
    p.add_argument("--bits", type=int, default=10_000, help="coded bits per cell")
    p.set_defaults(func=cmd_ber)
    return ap


def _glue_negative_values(argv: Sequence[str]) -> list[str]:
    # argparse takes "-5:15:2" for an option; bind such values to their flag
    out: list[str] = []
    it = iter(argv)
    for a in it:
        if a in ("--snr", "--values"):
            nxt = next(it, None)
            out.append(a if nxt is None else f"{a}={nxt}")
        else:
            out.append(a)
    return out


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(_glue_negative_values(argv))
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - every other failure maps to exit 2
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
