"""Property-based checks across modules."""
import math

import numpy as np
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from cdmaharq import analytics
from cdmaharq.channel import Transmission, apply_channel
from cdmaharq.chaos import ChaoticCodeSpec, MapFamily, chip_block
from cdmaharq.harq import FeedbackMsg, HarqSession, SenderState, Stop, Verdict, sender_step, start
from cdmaharq.modem import demodulate, despread, modulate, spread
from cdmaharq.optimizer import OptimizationScenario, evaluate_solution, solve_rate_max
from cdmaharq.rs import PAPER_CODES, CodeSpec, bits_to_symbols, rs_decode, rs_encode, symbols_to_bits

codes = st.sampled_from(PAPER_CODES).map(lambda nk: CodeSpec(*nk))
seeds = st.floats(0.01, 0.99).filter(lambda s: abs(s - 0.75) > 1e-6)


@given(codes, st.data())
def test_rs_corrects_within_bound(code, data):
    msg = data.draw(st.lists(st.integers(0, code.n), min_size=code.k, max_size=code.k))
    cw = rs_encode(msg, code)
    f = data.draw(st.integers(0, code.d - 1))
    e = data.draw(st.integers(0, (code.d - 1 - f) // 2))
    pos = data.draw(st.permutations(range(code.n)))
    erased, wrong = pos[:f], pos[f:f + e]
    rx = cw.copy()
    for p in wrong:
        rx[p] ^= data.draw(st.integers(1, code.n))
    for p in erased:
        rx[p] = data.draw(st.integers(0, code.n))
    np.testing.assert_array_equal(rs_decode(rx, code, erasures=erased), cw)


@given(st.integers(2, 5), st.lists(st.integers(0, 1), max_size=60))
def test_bits_symbols_round_trip(m, bits):
    bits = bits[: len(bits) - len(bits) % m]
    arr = np.array(bits, dtype=np.int64)
    assert symbols_to_bits(bits_to_symbols(arr, m), m).tolist() == bits


@given(st.floats(0, 1))
def test_bhattacharyya_symmetric_and_bounded(p):
    b = analytics.bhattacharyya_bsc(p)
    assert 0 <= b <= 1 + 1e-12
    assert math.isclose(b, analytics.bhattacharyya_bsc(1 - p), abs_tol=1e-12)
    assert b <= analytics.bhattacharyya_bsc(0.5) + 1e-12


@given(st.dictionaries(st.integers(1, 10), st.integers(1, 100), min_size=1), st.floats(0, 1), st.floats(0, 1))
def test_union_bound_monotone_in_b(enum, b1, b2):
    lo, hi = sorted((b1, b2))
    assert analytics.union_bhattacharyya_bound(enum, lo) <= analytics.union_bhattacharyya_bound(enum, hi) + 1e-12


@given(st.floats(0, 10), st.floats(0, 10), st.integers(1, 60))
def test_cdma_bound_monotone_in_power(p1, p2, sl):
    lo, hi = sorted((p1, p2))
    assert analytics.cdma_error_bound(9, hi, 1.0, sl, 0.6, 7) <= analytics.cdma_error_bound(9, lo, 1.0, sl, 0.6, 7)


@given(st.integers(1, 500), st.floats(1e-3, 1e3))
def test_doubling_sl_adds_3db(sl, sir):
    a = analytics.sinr_db(0, sl, 0.5, 5, [sir], [1], [1.0], 1.0, 1.0)
    b = analytics.sinr_db(0, 2 * sl, 0.5, 5, [sir], [1], [1.0], 1.0, 1.0)
    assert math.isclose(b - a, 10 * math.log10(2), abs_tol=1e-9)


@settings(max_examples=40)
@given(seeds, st.integers(1, 64), st.sampled_from(["bpsk", "qpsk"]), st.integers(0, 50),
       st.lists(st.integers(0, 1), min_size=2, max_size=40))
def test_spread_despread_identity(seed, sl, scheme, start_bit, bits):
    if scheme == "qpsk" and len(bits) % 2:
        bits = bits[:-1]
    spec = ChaoticCodeSpec(MapFamily.LOGISTIC, seed, sl)
    sym = modulate(bits, scheme)
    back = despread(spread(sym, spec, start_bit, scheme), spec, start_bit, scheme)
    np.testing.assert_allclose(back, sym, atol=1e-12)
    assert demodulate(back, scheme).tolist() == bits


@settings(max_examples=30)
@given(seeds, st.integers(1, 40))
def test_chips_are_plus_minus_one(seed, sl):
    chips = chip_block(ChaoticCodeSpec(MapFamily.LOGISTIC, seed, sl), 0, 5)
    assert set(np.unique(chips)) <= {-1.0, 1.0}


@given(st.integers(1, 4), st.lists(st.booleans(), min_size=4, max_size=4))
def test_sender_liveness(r_T, verdicts):
    s = HarqSession("x", CodeSpec(7, 3), r_T=r_T)
    start(s)
    steps = 0
    for ok in verdicts:
        steps += 1
        act = sender_step(s, FeedbackMsg("x", Verdict.ACK if ok else Verdict.NACK, s.round))
        if isinstance(act, Stop):
            break
    if not any(verdicts[:r_T]):
        assert s.state is SenderState.DROPPED and steps == r_T
    else:
        assert s.state is SenderState.DONE and steps == verdicts.index(True) + 1
    assert s.parity_sent <= s.code.nsym


@given(st.lists(st.floats(0, 1), min_size=1, max_size=4), st.floats(0.1, 10))
def test_throughput_at_most_one_round_rate(fails, X):
    costs = [1.0] * len(fails)
    rep = analytics.long_term_throughput(X, fails, costs)
    assert 0 <= rep.eta <= X + 1e-12
    assert math.isclose(rep.outage, float(np.prod(fails)), rel_tol=1e-9, abs_tol=1e-15)


@settings(suppress_health_check=[HealthCheck.too_slow])
@given(st.lists(st.floats(-1, 1), min_size=8, max_size=8), st.lists(st.floats(-1, 1), min_size=8, max_size=8),
       st.floats(0.01, 2), st.floats(0.01, 2), st.integers(0, 4))
def test_channel_linearity(w1, w2, p1, p2, d):
    a = Transmission(np.array(w1), p1, 0.5, ((0, 1.0), (d, 0.3)))
    b = Transmission(np.array(w2), p2, 0.2, ((1, 0.8),))
    both = apply_channel([a, b], 0.0, length=20)
    np.testing.assert_allclose(both, apply_channel([a], 0.0, length=20) + apply_channel([b], 0.0, length=20),
                               atol=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(-5, -3), min_size=1, max_size=3), st.floats(5, 20))
def test_optimizer_solution_reevaluates(log_gains, gamma):
    sc = OptimizationScenario([10 ** g for g in log_gains], 1e-9, 15e3, gamma_min_db=gamma,
                              codes=(CodeSpec(7, 3), CodeSpec(15, 9)), sl_menu=(10, 40))
    sol = solve_rate_max(sc, with_kkt=False)
    assume(sol.feasible)
    again = evaluate_solution(sc, sol.powers, sol.alphas, sol.codes, sol.sls)
    assert again.feasible
    assert math.isclose(again.objective, sol.objective, rel_tol=1e-12)
