import numpy as np
import pytest

from cdmaharq import analytics
from cdmaharq.harq import (FeedbackErrorMode, FeedbackMsg, HarqSession, ProtocolError, SendPortion,
                           SenderState, Stop, Timeout, Verdict, Wait, crc32, inject_feedback_error, log_line,
                           receiver_step, sender_step, simulate_round_counts, start, timer_duration)
from cdmaharq.rs import CodeSpec, rs_encode


def _session(r_T=4, **kw):
    return HarqSession("s1", CodeSpec(7, 3, max_rounds=4), r_T=r_T, **kw)


def ack(r):
    return FeedbackMsg("s1", Verdict.ACK, r)


def nack(r):
    return FeedbackMsg("s1", Verdict.NACK, r)


def test_ack_first_round():
    s = _session()
    assert start(s) == SendPortion(1)
    assert sender_step(s, ack(1)) == Stop(SenderState.DONE)
    assert s.transmissions == 1


def test_nack_nack_ack():
    s = _session()
    start(s)
    assert sender_step(s, nack(1)) == SendPortion(2)
    assert sender_step(s, nack(2)) == SendPortion(3)
    assert sender_step(s, ack(3)) == Stop(SenderState.DONE)
    assert s.transmissions == 3


def test_drop_after_r_T_nacks():
    s = _session(r_T=4)
    start(s)
    for r in range(1, 4):
        sender_step(s, nack(r))
    assert sender_step(s, nack(4)) == Stop(SenderState.DROPPED)
    assert s.transmissions == 4
    assert s.parity_sent == 4  # n - k, never more


def test_stale_feedback_and_protocol_errors():
    s = _session()
    with pytest.raises(ProtocolError):
        sender_step(s, ack(1))  # not started
    start(s)
    with pytest.raises(ProtocolError):
        start(s)
    sender_step(s, nack(1))
    assert isinstance(sender_step(s, nack(1)), Wait)
    with pytest.raises(ProtocolError):
        sender_step(s, FeedbackMsg("other", Verdict.ACK, 2))


def test_timeout_resends_last_portion_then_gives_up():
    s = _session(max_timeouts=2)
    start(s, now=0.0, timer=3.0)
    assert s.timer_deadline == 3.0
    assert sender_step(s, Timeout("s1"), now=3.0, timer=3.0) == SendPortion(1, duplicate=True)
    assert sender_step(s, Timeout("s1")) == SendPortion(1, duplicate=True)
    assert sender_step(s, Timeout("s1")) == Stop(SenderState.DROPPED)


def test_timer_duration():
    assert timer_duration(0.5) == 1.5
    assert timer_duration(1.0, margin=0.0) == 2.0


def test_r_T_bounds():
    with pytest.raises(ValueError):
        HarqSession("x", CodeSpec(7, 3, max_rounds=2), r_T=3)


def test_receiver_clean_round_one_acks():
    code = CodeSpec(7, 3)
    cw = rs_encode([4, 5, 6], code)
    s = HarqSession("s1", code, crc=crc32([4, 5, 6]))
    data, msg = receiver_step(s, {p: int(cw[p]) for p in code.round_positions(1)}, 1)
    assert msg.verdict is Verdict.ACK
    np.testing.assert_array_equal(data, [4, 5, 6])


def test_receiver_nack_then_ack():
    code = CodeSpec(7, 3, max_rounds=2)
    cw = rs_encode([1, 0, 1], code)
    s = HarqSession("s1", code, crc=crc32([1, 0, 1]))
    r1 = {p: int(cw[p]) for p in code.round_positions(1)}
    r1[0] ^= 3
    r1[1] ^= 1
    _, m1 = receiver_step(s, r1, 1)
    _, m2 = receiver_step(s, {p: int(cw[p]) for p in code.round_positions(2)}, 2)
    assert (m1.verdict, m2.verdict) == (Verdict.NACK, Verdict.ACK)


def test_receiver_hopeless_packet_nacks_every_round():
    code = CodeSpec(7, 3, max_rounds=4)
    cw = rs_encode([2, 2, 2], code)
    s = HarqSession("s1", code, crc=crc32([2, 2, 2]))
    verdicts = []
    for r in range(1, 5):
        portion = {p: int(cw[p]) ^ 7 for p in code.round_positions(r)}
        verdicts.append(receiver_step(s, portion, r)[1].verdict)
    assert verdicts == [Verdict.NACK] * 4


def test_duplicate_portion_is_idempotent():
    code = CodeSpec(7, 3, max_rounds=2)
    cw = rs_encode([3, 1, 4], code)
    s = HarqSession("s1", code, crc=crc32([3, 1, 4]))
    r1 = {p: int(cw[p]) for p in code.round_positions(1)}
    receiver_step(s, r1, 1)
    held = dict(s.portions)
    corrupted = {p: v ^ 1 for p, v in r1.items()}
    data, msg = receiver_step(s, corrupted, 1)
    assert s.portions == held
    assert msg.verdict is Verdict.ACK


def test_feedback_error_modes(rng):
    m = ack(1)
    assert inject_feedback_error(m, 0.0, rng) is m
    assert inject_feedback_error(m, 1.0, rng).verdict is Verdict.NACK
    assert inject_feedback_error(m, 1.0, rng, FeedbackErrorMode.DROP) is None
    hits = sum(inject_feedback_error(m, 0.3, rng) is not m for _ in range(10_000))
    assert abs(hits / 10_000 - 0.3) < 0.02


def test_feedback_error_deterministic():
    def draws(seed):
        g = np.random.default_rng(seed)
        return [inject_feedback_error(ack(1), 0.5, g).verdict for _ in range(50)]
    assert draws(9) == draws(9)


def test_log_line_shape():
    rec = log_line(1.23456789012, "T1", "T1#0", "tx", 2)
    assert rec == {"t": 1.23456789, "node": "T1", "session": "T1#0", "event": "tx", "round": 2, "verdict": None}


def test_round_counts_match_eq5_q0():
    stats = simulate_round_counts(0.3, 4, 10_000, np.random.default_rng(5))
    mean, se = stats.delivery_weighted_rounds()
    assert abs(mean - analytics.avg_transmissions(0.3, 0.3, 0.0, 4)) < 3 * se
    assert stats.transmissions.max() <= 4
