"""Incremental-redundancy HARQ sender/receiver state machines."""
from __future__ import annotations

import enum
import math
import zlib
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .rs import CodeSpec, accumulate_and_decode

DEFAULT_PROCESSING_MARGIN = 0.5
DEFAULT_MAX_TIMEOUTS = 8


class ProtocolError(RuntimeError):
    pass


class SenderState(str, enum.Enum):
    IDLE = "idle"
    AWAIT_FEEDBACK = "await_feedback"
    DONE = "done"
    DROPPED = "dropped"


class Verdict(str, enum.Enum):
    ACK = "ACK"
    NACK = "NACK"

    def flipped(self) -> "Verdict":
        return Verdict.NACK if self is Verdict.ACK else Verdict.ACK


class FeedbackErrorMode(str, enum.Enum):
    FLIP = "flip"
    DROP = "drop"


@dataclass(frozen=True)
class FeedbackMsg:
    session_id: str
    verdict: Verdict
    round: int


@dataclass(frozen=True)
class Timeout:
    session_id: str


@dataclass(frozen=True)
class SendPortion:
    round: int
    duplicate: bool = False


@dataclass(frozen=True)
class Stop:
    state: SenderState


@dataclass(frozen=True)
class Wait:
    """Stale feedback; nothing to do."""


Action = Union[SendPortion, Stop, Wait]


def crc32(data: Sequence[int]) -> int:
    return zlib.crc32(np.asarray(data, dtype=np.int64).astype("<u2").tobytes())


def timer_duration(propagation_delay: float, margin: float = DEFAULT_PROCESSING_MARGIN) -> float:
    return 2.0 * propagation_delay + margin


@dataclass
class HarqSession:
    session_id: str
    code: CodeSpec
    r_T: Optional[int] = None
    round: int = 1
    state: SenderState = SenderState.IDLE
    timer_deadline: float = math.inf
    p_fb: float = 0.0
    max_timeouts: int = DEFAULT_MAX_TIMEOUTS
    crc: Optional[int] = None
    timeouts: int = 0
    transmissions: int = 0
    portions: dict = field(default_factory=dict)
    decoded: Optional[np.ndarray] = None
    verdicts: list = field(default_factory=list)

    def __post_init__(self):
        if self.r_T is None:
            self.r_T = self.code.max_rounds
        if not 1 <= self.r_T <= self.code.max_rounds:
            raise ValueError(f"r_T must lie in 1..{self.code.max_rounds}")
        if not 0.0 <= self.p_fb <= 1.0:
            raise ValueError("feedback error probability must lie in [0, 1]")

    @property
    def finished(self) -> bool:
        return self.state in (SenderState.DONE, SenderState.DROPPED)

    @property
    def parity_sent(self) -> int:
        """Distinct parity symbols sent so far (duplicates excluded)."""
        return sum(1 for p in self.code_positions_sent() if p >= self.code.k)

    def code_positions_sent(self) -> set:
        out: set = set()
        for r in range(1, self.round + 1):
            out.update(self.code.round_positions(r))
        return out


# ---------------------------------------------------------------------------
# sender


def start(session: HarqSession, now: float = 0.0, timer: float = math.inf) -> SendPortion:
    if session.state is not SenderState.IDLE:
        raise ProtocolError(f"session {session.session_id} already started")
    session.state = SenderState.AWAIT_FEEDBACK
    session.round = 1
    session.transmissions = 1
    session.timer_deadline = now + timer
    return SendPortion(1)


def sender_step(session: HarqSession, event: Union[FeedbackMsg, Timeout], now: float = 0.0,
                timer: float = math.inf) -> Action:
    """Advance the sender on feedback or timer expiry.

    ACK ends the session; NACK advances to the next parity portion or drops
    at r_T; a timeout resends the most recent portion, up to ``max_timeouts``.
    """
    if event.session_id != session.session_id:
        raise ProtocolError(f"feedback for unknown session {event.session_id!r}")
    if session.state is not SenderState.AWAIT_FEEDBACK:
        raise ProtocolError(f"session {session.session_id} is {session.state.value}")
    if isinstance(event, Timeout):
        session.timeouts += 1
        if session.timeouts > session.max_timeouts:
            session.state = SenderState.DROPPED
            return Stop(SenderState.DROPPED)
        session.transmissions += 1
        session.timer_deadline = now + timer
        return SendPortion(session.round, duplicate=True)
    if event.round != session.round:
        return Wait()
    if event.verdict is Verdict.ACK:
        session.state = SenderState.DONE
        session.timer_deadline = math.inf
        return Stop(SenderState.DONE)
    if session.round >= session.r_T:
        session.state = SenderState.DROPPED
        session.timer_deadline = math.inf
        return Stop(SenderState.DROPPED)
    session.round += 1
    session.transmissions += 1
    session.timer_deadline = now + timer
    return SendPortion(session.round)


# ---------------------------------------------------------------------------
# receiver


def receiver_step(session: HarqSession, portion: dict, round_: Optional[int] = None
                  ) -> tuple[Optional[np.ndarray], FeedbackMsg]:
    """Store a portion (``None`` marks an erased symbol) and try to decode.

    A symbol already held is never overwritten, so duplicate portions only
    refill erasures.  Decoding also has to match the header CRC when one is
    attached to the session, which rejects miscorrections.
    """
    r = session.round if round_ is None else round_
    for pos, sym in portion.items():
        if sym is None:
            continue
        if session.portions.get(pos) is None:
            session.portions[pos] = int(sym)
    if session.decoded is None:
        known = {p: s for p, s in session.portions.items() if s is not None}
        data = accumulate_and_decode([known], session.code)
        if data is not None and (session.crc is None or crc32(data) == session.crc):
            session.decoded = data
    verdict = Verdict.ACK if session.decoded is not None else Verdict.NACK
    session.verdicts.append(verdict)
    return session.decoded, FeedbackMsg(session.session_id, verdict, r)


def inject_feedback_error(msg: FeedbackMsg, p_fb: float, rng: np.random.Generator,
                          mode: FeedbackErrorMode | str = FeedbackErrorMode.FLIP) -> Optional[FeedbackMsg]:
    """With probability ``p_fb`` flip the verdict or lose the message (returns None)."""
    if not 0.0 <= p_fb <= 1.0:
        raise ValueError("feedback error probability must lie in [0, 1]")
    mode = FeedbackErrorMode(mode)
    if p_fb == 0.0 or rng.random() >= p_fb:
        return msg
    if mode is FeedbackErrorMode.DROP:
        return None
    return FeedbackMsg(msg.session_id, msg.verdict.flipped(), msg.round)


def log_line(t: float, node, session: str, event: str, round_: int, verdict: Optional[str] = None, **extra) -> dict:
    rec = {"t": round(float(t), 9), "node": node, "session": session, "event": event,
           "round": int(round_), "verdict": verdict}
    rec.update(extra)
    return rec


# ---------------------------------------------------------------------------
# packet-level Monte-Carlo with Bernoulli decode outcomes


@dataclass
class RoundCountStats:
    rounds: np.ndarray
    delivered: np.ndarray
    transmissions: np.ndarray

    @property
    def n(self) -> int:
        return len(self.rounds)

    def mean_transmissions(self) -> tuple[float, float]:
        return _mean_se(self.transmissions)

    def delivery_weighted_rounds(self) -> tuple[float, float]:
        """Mean and standard error of R 1{delivered}."""
        return _mean_se(self.rounds * self.delivered)


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return float(x.mean()) if x.size else 0.0, 0.0
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def simulate_round_counts(p_fail, r_T: int, n_sessions: int, rng: np.random.Generator,
                          q: float = 0.0, p_fail_collab=None) -> RoundCountStats:
    """Drive sessions through the sender state machine with i.i.d. per-round failures.

    After a NACK in round 1 a collaborator takes over with probability ``q``;
    its per-round failure probabilities ``p_fail_collab`` then apply to
    rounds 2..r_T.  Feedback is error-free.
    """
    pe = _per_round(p_fail, r_T)
    pc = _per_round(p_fail if p_fail_collab is None else p_fail_collab, r_T)
    code = CodeSpec(7, 3, max_rounds=max(r_T, 1)) if r_T <= 4 else CodeSpec(15, 9, max_rounds=r_T)
    rounds = np.zeros(n_sessions, dtype=int)
    delivered = np.zeros(n_sessions, dtype=bool)
    tx = np.zeros(n_sessions, dtype=int)
    for s in range(n_sessions):
        sess = HarqSession(str(s), code, r_T=r_T)
        start(sess)
        helped = False
        while True:
            probs = pc if helped else pe
            ok = rng.random() >= probs[sess.round - 1]
            if sess.round == 1 and not ok and q > 0:
                helped = rng.random() < q
            action = sender_step(sess, FeedbackMsg(sess.session_id, Verdict.ACK if ok else Verdict.NACK, sess.round))
            if isinstance(action, Stop):
                break
        rounds[s] = sess.round
        delivered[s] = sess.state is SenderState.DONE
        tx[s] = sess.transmissions
    return RoundCountStats(rounds, delivered, tx)


def _per_round(p, r_T: int) -> list[float]:
    if np.isscalar(p):
        return [float(p)] * r_T
    vals = [float(v) for v in p]
    if len(vals) != r_T:
        raise ValueError(f"need {r_T} per-round probabilities")
    return vals
