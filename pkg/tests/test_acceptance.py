"""Acceptance suite: twelve criteria at their stated tolerances.

Each test carries a ``criterion`` marker; the conftest hook prints one
PASS/FAIL line per criterion at the end of the run.  Run it alone with
``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
"""
import itertools
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from cdmaharq import analytics
from cdmaharq.chaos import ChaoticCodeSpec, MapFamily
from cdmaharq.config import load_config
from cdmaharq.harq import simulate_round_counts
from cdmaharq.modem import Modulation, receive_chain, transmit_chain
from cdmaharq.montecarlo import ber_sweep, packet_error_rate, snr_for_bound, wrong_seed_ber
from cdmaharq.optimizer import OptimizationScenario, brute_force_oracle, grid_gap, solve_rate_max
from cdmaharq.rs import PAPER_CODES, CodeSpec, rs_decode, rs_encode
from cdmaharq.sim import run_many, run_scenario, sweep, sweep_configs

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def criterion(n, title):
    return pytest.mark.criterion(n, title)


@criterion(1, "noiseless PHY chain round trip, 2 modulations x 6 codes x SL {10,30,40}, < 1 min")
def test_c01_phy_round_trip(record_property):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    failures = 0
    cases = 0
    for scheme in Modulation:
        for n, k in PAPER_CODES:
            code = CodeSpec(n, k)
            for sl in (10, 30, 40):
                spec = ChaoticCodeSpec(MapFamily.LOGISTIC, 0.3, sl)
                data = rng.integers(0, n + 1, k)
                wave, n_bits = transmit_chain(data, code, spec, scheme)
                out = receive_chain(wave, code, spec, scheme, n_bits)
                failures += out is None or not np.array_equal(out, data)
                cases += 1
    elapsed = time.perf_counter() - t0
    record_property("detail", f"{cases} cases, {failures} failures, {elapsed:.1f} s")
    assert cases == 36 and failures == 0
    assert elapsed < 60


@criterion(2, "RS(7,3) errors-and-erasures: success iff 2e + f < 5, e <= 3, f <= 4, exhaustive")
def test_c02_erasure_boundary(record_property):
    code = CodeSpec(7, 3)
    rng = np.random.default_rng(2)
    cw = rs_encode([5, 1, 6], code)
    violations = 0
    cases = 0
    for f in range(5):
        for erased in itertools.combinations(range(7), f):
            rest = [p for p in range(7) if p not in erased]
            for e in range(4):
                for errs in itertools.combinations(rest, e):
                    rx = cw.copy()
                    for p in errs:
                        rx[p] ^= int(rng.integers(1, 8))
                    for p in erased:
                        rx[p] = int(rng.integers(0, 8))  # erased symbols carry garbage
                    out = rs_decode(rx, code, erasures=erased)
                    ok = out is not None and np.array_equal(out, cw)
                    violations += ok != (2 * e + f < code.d)
                    cases += 1
    record_property("detail", f"{cases} placements, {violations} violations")
    assert violations == 0


@criterion(3, "Bhattacharyya closed forms and union bound on toy enumerators to 1e-12")
def test_c03_bhattacharyya(record_property):
    B = analytics.bhattacharyya_bsc
    U = analytics.union_bhattacharyya_bound
    checks = [
        (B(0.0), 0.0), (B(0.5), 1.0), (B(0.1), 0.6),
        (U({3: 1}, 0.0), 0.0), (U({3: 1}, 0.5), 0.125), (U({1: 2, 2: 1}, 0.1), 0.21),
        (U({5: 126, 6: 441, 7: 1344}, 0.2), 126 * 0.2 ** 5 + 441 * 0.2 ** 6 + 1344 * 0.2 ** 7),
    ]
    worst = max(abs(a - b) for a, b in checks)
    record_property("detail", f"max abs error {worst:.1e}")
    assert worst <= 1e-12


@criterion(4, "Monte-Carlo PER never exceeds the CDMA packet bound at 3 points, 1e4 packets, 99% confidence")
def test_c04_bound_dominance(record_property):
    code = CodeSpec(7, 3)
    sl = 10
    t0 = time.perf_counter()
    parts = []
    worst_p = 1.0
    for i, target in enumerate((0.5, 0.1, 0.01)):
        snr = snr_for_bound(target, code.info_bits, sl, code)
        rng = np.random.default_rng(np.random.SeedSequence(4, spawn_key=(i,)))
        res = packet_error_rate(code, sl, snr, 10_000, rng, decoder="ml")
        worst_p = min(worst_p, res.p_value())
        parts.append(f"bound {res.bound:.3g} PER {res.per:.4f}")
        # rejected only if PER exceeds the bound at the 1% level
        assert res.p_value() >= 0.01, parts[-1]
    elapsed = time.perf_counter() - t0
    record_property("detail", "; ".join(parts) + f"; min p {worst_p:.2g}; {elapsed:.0f} s")
    assert elapsed < 300


@criterion(5, "optimizer vs brute-force oracle on 20 random scenarios, N <= 3; KKT stationarity < 1e-6")
def test_c05_optimizer_oracle(record_property):
    rng = np.random.default_rng(1)
    mismatches, kkt_bad, worst = 0, 0, 0.0
    for _ in range(20):
        n = int(rng.integers(1, 4))
        p_th = float(rng.choice([np.inf, rng.uniform(1e-5, 1e-3)]))
        sc = OptimizationScenario(gains=10 ** rng.uniform(-6, -3, n), N0=1e-9, W=15e3, J_m=0.0,
                                  gamma_min_db=float(rng.uniform(10, 20)), P_max=1.0, P_th=p_th,
                                  codes=(CodeSpec(7, 3), CodeSpec(15, 9)), sl_menu=(10, 30))
        sol = solve_rate_max(sc)
        ora = brute_force_oracle(sc, 61)
        gap = grid_gap(sc, sol, 61)
        diff = abs(sol.objective - ora.objective)
        worst = max(worst, diff)
        if sol.feasible != ora.feasible or diff > max(1e-3, gap):
            mismatches += 1
        if sol.feasible and not (sol.kkt_residual is not None and sol.kkt_residual < 1e-6):
            kkt_bad += 1
    record_property("detail", f"{mismatches} mismatches, {kkt_bad} KKT failures, max |dF| {worst:.3g}")
    assert mismatches == 0 and kkt_bad == 0


@criterion(6, "simulated round count vs the average-transmissions formula within 3 SE, q in {0, 0.5, 1}")
def test_c06_eq5(record_property):
    p, r_T = 0.4, 4
    parts = []
    for i, q in enumerate((0.0, 0.5, 1.0)):
        rng = np.random.default_rng(np.random.SeedSequence(6, spawn_key=(i,)))
        stats = simulate_round_counts(p, r_T, 10_000, rng, q=q, p_fail_collab=p)
        mean, se = stats.delivery_weighted_rounds()
        expect = analytics.avg_transmissions(p, p, q, r_T)
        parts.append(f"q={q}: {mean:.4f} vs {expect:.4f} ({abs(mean - expect) / se:.2f} SE)")
        assert abs(mean - expect) <= 3 * se, parts[-1]
    record_property("detail", "; ".join(parts))


@pytest.fixture(scope="module")
def impaired():
    return load_config(SCENARIOS / "impaired.yaml")


NOISE_SWEEP = [3e-10, 1e-9, 3e-9, 1e-8, 3e-8]


@criterion(7, "one impaired link: collaborative eta > conventional and fewer transmissions, 5-point SNR sweep")
def test_c07_collaboration_gain(impaired, record_property):
    collab = sweep(impaired, "noise_psd", NOISE_SWEEP, workers=4)
    conv = sweep(replace(impaired, mode="conventional"), "noise_psd", NOISE_SWEEP, workers=4)
    parts = []
    for n0, a, b in zip(NOISE_SWEEP, collab, conv):
        assert a.seed == b.seed  # common random numbers
        parts.append(f"N0={n0:g}: {a.eta:.4f}>{b.eta:.4f}, tx {a.mean_transmissions:.3f}<{b.mean_transmissions:.3f}")
    record_property("detail", "; ".join(parts))
    for a, b in zip(collab, conv):
        assert a.eta > b.eta
        assert a.mean_transmissions < b.mean_transmissions


@criterion(8, "power control: eta(on) >= eta(off) for r_T in {1,2,3,4}, paired seeds")
def test_c08_power_control(record_property):
    base = load_config(SCENARIOS / "near_far.yaml")
    cfgs = []
    for r_T in (1, 2, 3, 4):
        on = replace(base, r_T=r_T)
        cfgs += [on, replace(on, power_control=False)]
    reps = run_many(cfgs, workers=4)
    parts = []
    ok = True
    for r_T, (on, off) in zip((1, 2, 3, 4), zip(reps[::2], reps[1::2])):
        parts.append(f"r_T={r_T}: {on.eta:.4f} vs {off.eta:.4f}")
        ok &= on.eta >= off.eta
    record_property("detail", "; ".join(parts))
    assert ok


@criterion(9, "BPSK BER non-increasing in SL {10,20,30,40} at 5 SNR points, 1e4 bits per cell")
def test_c09_spreading_trend(record_property):
    snrs = [-20.0, -17.0, -14.0, -11.0, -8.0]
    sls = [10, 20, 30, 40]
    pts = ber_sweep("bpsk", CodeSpec(15, 9), sls, snrs, 10_000, seed=9)
    table = {(p.snr_db, p.sl): p for p in pts}
    assert all(p.bits >= 10_000 for p in pts)
    bad = 0
    for snr in snrs:
        bers = [table[(snr, sl)].ber for sl in sls]
        bad += sum(a < b for a, b in zip(bers, bers[1:]))
    record_property("detail", " | ".join(
        f"{snr:g} dB: " + ",".join(f"{table[(snr, sl)].ber:.2g}" for sl in sls) for snr in snrs))
    assert bad == 0


def _with_feedback_error(cfg, p, better):
    # "better" gives the collaborators (every node but the impaired T1) a tenth of the error rate
    nodes = [replace(n, p_fb=(p / 10 if better and n.id != "T1" else p)) for n in cfg.nodes]
    return replace(cfg, nodes=nodes, p_fb=p)


@criterion(10, "feedback errors: collab+better fb >= collab+equal fb >= q=0.5 >= conventional")
def test_c10_feedback_ordering(impaired, record_property):
    base = replace(impaired, r_T=2)
    sweep_p = [0.0, 0.05, 0.1, 0.2, 0.3]
    cfgs = []
    for p in sweep_p:
        cfgs += [_with_feedback_error(base, p, True), _with_feedback_error(base, p, False),
                 _with_feedback_error(replace(base, q=0.5), p, False),
                 _with_feedback_error(replace(base, mode="conventional"), p, False)]
    reps = run_many(cfgs, workers=4)
    parts = []
    ok = True
    for i, p in enumerate(sweep_p):
        etas = [r.eta for r in reps[4 * i: 4 * i + 4]]
        parts.append(f"p_fb={p}: " + ",".join(f"{e:.4f}" for e in etas))
        ok &= all(a >= b for a, b in zip(etas, etas[1:]))
    record_property("detail", "; ".join(parts))
    assert ok


@criterion(11, "wrong-seed BER in [0.45, 0.55] over 1e4 bits; same seed BER 0 noiseless")
def test_c11_security(record_property):
    wrong, right = wrong_seed_ber(10_000, 20, np.random.default_rng(11))
    record_property("detail", f"wrong {wrong:.4f}, right {right}")
    assert 0.45 <= wrong <= 0.55
    assert right == 0.0


@criterion(12, "byte-identical event logs across two runs and worker counts {1, 4}")
def test_c12_determinism(impaired, record_property):
    cfg = replace(impaired, packets_per_node=10, p_fb=0.1)
    a, b = run_scenario(cfg), run_scenario(cfg)
    assert a.log_text() == b.log_text()
    cfgs = sweep_configs(cfg, "noise_psd", NOISE_SWEEP)
    one = run_many(cfgs, workers=1)
    four = run_many(cfgs, workers=4)
    same = all(x.log_text() == y.log_text() for x, y in zip(one, four))
    record_property("detail", f"digest {a.log_digest[:12]}, {len(cfgs)} sweep runs identical: {same}")
    assert same


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
