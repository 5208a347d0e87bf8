"""Round-synchronous simulation of CDMA neighbourhoods running conventional or collaborative HARQ.

Every packet slot starts one HARQ session per node.  A round consists of
(optionally optimised) transmissions, chip-level superposition at every
receiver, despreading and RS decoding at the sink, ACK/NACK feedback and,
in collaborative mode, the impairment handling of the collaboration layer.
All randomness comes from generators keyed by (purpose, slot, round, ...)
under the master seed, so runs that differ only in protocol choices share
their channel and noise realisations.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import analytics, collab
from .chaos import ChaoticCodeSpec, MapFamily, derive_seed
from .channel import ChannelParams, ChannelTrace, Transmission, apply_channel, awgn, link_gain, load_channel_trace
from .config import ScenarioConfig
from .harq import (FeedbackErrorMode, FeedbackMsg, HarqSession, SendPortion, Stop, Timeout, Verdict,
                   crc32, inject_feedback_error, receiver_step, sender_step, start, timer_duration)
from .modem import Modulation, demodulate, despread, modulate, pad_bits, spread
from .optimizer import OptimizationScenario, OptimizerSolution, evaluate_solution, solve_rate_max
from .rs import CodeSpec, accumulate_and_decode, bits_to_symbols, rs_encode, symbols_to_bits

NOISE, PAYLOAD, FEEDBACK, ENGAGE, SWEEP = 1, 2, 3, 4, 5


def keyed_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in key)))


def derive_run_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence(entropy=seed, spawn_key=(SWEEP, index)).generate_state(1)[0])


def _f(x: float, digits: int = 12) -> Optional[float]:
    if x is None or not math.isfinite(x):
        return None
    return float(f"{x:.{digits}g}")


@lru_cache(maxsize=4096)
def _spec(family: str, seed: float, sl: int, bifurcation: Optional[float], burn_in: int) -> ChaoticCodeSpec:
    return ChaoticCodeSpec(MapFamily(family), seed, sl, bifurcation, burn_in)


# ---------------------------------------------------------------------------
# run bookkeeping


@dataclass
class Leg:
    """One transmitter's HARQ process for a session (owner, or a collaborator after takeover)."""

    session: "Session"
    node: str
    harq: HarqSession
    codeword: np.ndarray
    pending: Optional[SendPortion] = None
    active: bool = True
    handed_over: bool = False


@dataclass
class Session:
    sid: str
    owner: str
    slot: int
    code: Optional[CodeSpec] = None
    data: Optional[np.ndarray] = None
    crc: int = 0
    legs: list = field(default_factory=list)
    delivered_round: Optional[int] = None
    undetected: bool = False

    @property
    def transmissions(self) -> int:
        return sum(leg.harq.transmissions for leg in self.legs)


@dataclass
class RunReport:
    seed: int
    mode: str
    power_control: bool
    q: float
    offered: int
    delivered: int
    dropped: int
    undetected_errors: int
    delivered_nats: float
    airtime_chips: int
    eta: float
    outage: float
    mean_transmissions: float
    mean_transmissions_se: float
    delivery_weighted_rounds: float
    delivery_weighted_rounds_se: float
    per_node: dict
    neighborhood_rate: dict
    collab_actions: dict
    sinr_series: list
    log_digest: str
    log: list = field(default_factory=list, repr=False)
    session_rows: list = field(default_factory=list, repr=False)

    def to_dict(self, with_log: bool = False) -> dict:
        d = asdict(self)
        if not with_log:
            d.pop("log")
            d.pop("session_rows")
        return d

    def log_text(self) -> str:
        return "".join(line + "\n" for line in self.log)

    def write(self, outdir: str | Path, stem: str = "run") -> dict:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "report": out / f"{stem}_report.json",
            "nodes": out / f"{stem}_nodes.csv",
            "sinr": out / f"{stem}_sinr.csv",
            "events": out / f"{stem}_events.jsonl",
        }
        paths["report"].write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        with paths["nodes"].open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(NODE_COLUMNS)
            for nid in sorted(self.per_node):
                row = self.per_node[nid]
                w.writerow([nid] + [row[c] for c in NODE_COLUMNS[1:]])
        with paths["sinr"].open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(SINR_COLUMNS)
            for row in self.sinr_series:
                w.writerow([row[c] for c in SINR_COLUMNS])
        paths["events"].write_text(self.log_text(), encoding="utf-8")
        return {k: str(v) for k, v in paths.items()}


NODE_COLUMNS = ("node", "offered", "delivered", "dropped", "bits", "bit_errors", "ber",
                "effective_rate", "transmissions", "relayed_frames")
SINR_COLUMNS = ("slot", "round", "node", "session", "power", "sl", "code", "sinr_db", "rate")


# ---------------------------------------------------------------------------
# engine


class SlotEngine:
    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.scheme = Modulation(cfg.modulation)
        self.codes = cfg.code_specs
        self.ids = cfg.node_ids()
        self.node_idx = {n: i for i, n in enumerate(self.ids)}
        self.sink_ids = [s.id for s in cfg.sinks]
        self.recv_idx = {r: i for i, r in enumerate(self.sink_ids + self.ids)}
        self.positions = {n.id: n.position for n in cfg.nodes}
        self.positions.update({s.id: s.position for s in cfg.sinks})
        self.link_cfg = {(ln.tx, ln.rx): ln for ln in cfg.links}
        self.noise_power = cfg.noise_psd * cfg.bandwidth
        self.trace: Optional[ChannelTrace] = load_channel_trace(cfg.trace_file) if cfg.trace_file else None
        self.nbhd = {}
        self.nb_of = {}
        for nb in cfg.neighborhoods:
            self.nbhd[nb.id] = collab.Neighborhood(nb.id, tuple(nb.members), nb.family_seed, nb.sink, cfg.q,
                                                   tuple(nb.candidates))
            for m in nb.members:
                self.nb_of[m] = nb.id
        self.node_seed = {}
        for nb in cfg.neighborhoods:
            for j, m in enumerate(nb.members):
                self.node_seed[m] = derive_seed(nb.family_seed, j)
        self.buffers = {n: collab.OverhearBuffer() for n in self.ids}
        self._gain_cache: dict = {}
        self._opt_cache: dict = {}
        self._enum_cache: dict = {}
        max_bits = max(c.n * c.m + 1 for c in self.codes)
        max_taps = 0
        for ln in cfg.links:
            if ln.taps:
                max_taps = max(max_taps, max(int(t[0]) for t in ln.taps))
        if self.trace is not None:
            for snap in self.trace.snapshots:
                for taps in snap.values():
                    max_taps = max(max_taps, max(d for d, _ in taps))
        biggest = max(len(nb.members) for nb in cfg.neighborhoods)
        self.max_len = max_bits * max(cfg.sl_menu) * biggest + max_taps + 1
        self.log: list = []
        self.t = 0.0
        self.airtime = 0
        self.prev_rx_power: dict = {}
        self.sinr_rows: list = []
        self.bit_stats = {n: [0, 0] for n in self.ids}
        self.relayed = {n: 0 for n in self.ids}
        self.collab_counts = {a.value: 0 for a in collab.CollabAction}
        self.current: list = []

    # -- geometry --------------------------------------------------------
    def distance(self, tx: str, rx: str) -> Optional[float]:
        ln = self.link_cfg.get((tx, rx)) or self.link_cfg.get((rx, tx))
        if ln is not None and ln.distance is not None:
            return ln.distance
        a, b = self.positions.get(tx), self.positions.get(rx)
        if a is None or b is None:
            return None
        return float(math.dist(a, b))

    def gain(self, tx: str, rx: str) -> float:
        key = (tx, rx)
        if key not in self._gain_cache:
            d = self.distance(tx, rx)
            if d is None:
                g = 0.0
            else:
                ln = self.link_cfg.get((tx, rx)) or self.link_cfg.get((rx, tx))
                extra = ln.extra_loss_db if ln is not None else 0.0
                g = link_gain(ChannelParams(d, sound_speed=self.cfg.sound_speed,
                                            spreading_exponent=self.cfg.spreading_exponent,
                                            carrier_freq=self.cfg.carrier_freq, extra_loss_db=extra))
            self._gain_cache[key] = g
        return self._gain_cache[key]

    def delay(self, tx: str, rx: str) -> float:
        d = self.distance(tx, rx)
        return 0.0 if d is None else d / self.cfg.sound_speed

    def taps(self, tx: str, rx: str, t: float):
        if self.trace is not None:
            taps = self.trace.taps_at(f"{tx}->{rx}", t)
            if taps is not None:
                return taps
        ln = self.link_cfg.get((tx, rx))
        if ln is not None and ln.taps:
            return tuple((int(tp[0]), complex(float(tp[1]), float(tp[2]) if len(tp) > 2 else 0.0)) for tp in ln.taps)
        return ((0, 1.0 + 0j),)

    def spec(self, owner: str, sl: int) -> ChaoticCodeSpec:
        c = self.cfg
        return _spec(c.map_family, self.node_seed[owner], int(sl), c.bifurcation, c.burn_in)

    def p_fb(self, node: str) -> float:
        n = self.cfg.node(node)
        return self.cfg.p_fb if n.p_fb is None else n.p_fb

    def packets(self, node: str) -> int:
        n = self.cfg.node(node)
        return self.cfg.packets_per_node if n.packets is None else n.packets

    def emit(self, rec: dict) -> None:
        self.log.append(json.dumps(rec, sort_keys=True, separators=(",", ":")))

    # -- optimisation ----------------------------------------------------
    def plan(self, nb_id: int, legs: list[Leg]) -> tuple[OptimizationScenario, OptimizerSolution]:
        cfg = self.cfg
        sink = self.nbhd[nb_id].sink
        gains = [self.gain(leg.node, sink) for leg in legs]
        J = self.prev_rx_power.get(sink, 0.0)
        J = float(f"{J:.3g}")
        code_menus = []
        for leg in legs:
            code_menus.append(tuple(self.codes) if leg.session.code is None else (leg.harq.code,))
        sc = OptimizationScenario(
            gains, cfg.noise_psd, cfg.bandwidth, J, cfg.gamma_min_db, cfg.P_max, cfg.P_th,
            tuple(self.codes), tuple(cfg.sl_menu), 1, code_menus, [tuple(cfg.sl_menu)] * len(legs),
            [1] * len(legs), True)
        if not cfg.power_control:
            # fixed, channel-agnostic setting: full power and the menu point with the largest SINR margin
            sl = max(cfg.sl_menu)
            codes = [max(m, key=lambda c: (c.rate * c.d, c.rate)) for m in code_menus]
            sol = evaluate_solution(sc, [cfg.P_max] * len(legs), [1] * len(legs), codes, [sl] * len(legs))
            return sc, sol
        return sc, self.solve(sc)

    def solve(self, sc: OptimizationScenario) -> OptimizerSolution:
        key = sc.key()
        if key not in self._opt_cache:
            self._opt_cache[key] = solve_rate_max(sc, with_kkt=False)
        return self._opt_cache[key]

    # -- one slot --------------------------------------------------------
    def run_slot(self, slot: int) -> list[Session]:
        cfg = self.cfg
        sessions = []
        for n in self.ids:
            if slot < self.packets(n):
                s = Session(f"{n}#{slot}", n, slot)
                leg = Leg(s, n, None, None)  # harq created once the code is chosen
                s.legs.append(leg)
                sessions.append(s)
        self.current = sessions
        r = 0
        while True:
            r += 1
            legs = self.active_legs()
            if not legs:
                break
            self.run_round(slot, r, legs)
        for s in sessions:
            self.emit({"event": "session_end", "t": round(self.t, 9), "session": s.sid, "node": s.owner,
                       "delivered": s.delivered_round is not None, "round": s.delivered_round or 0,
                       "transmissions": s.transmissions})
        delivered = sum(1 for s in sessions if s.delivered_round is not None)
        self.emit({"event": "checkpoint", "t": round(self.t, 9), "slot": slot, "offered": len(sessions),
                   "delivered": delivered, "dropped": len(sessions) - delivered, "in_flight": 0})
        return sessions

    def active_legs(self) -> list[Leg]:
        return [leg for s in self.current for leg in s.legs if leg.active]

    def run_round(self, slot: int, r: int, legs: list[Leg]) -> None:
        cfg = self.cfg
        t0 = self.t
        by_nb: dict = {}
        for leg in legs:
            by_nb.setdefault(self.nb_of[leg.node], []).append(leg)
        plan: dict = {}
        scen: dict = {}
        for nb_id in sorted(by_nb):
            nb_legs = by_nb[nb_id]
            sc, sol = self.plan(nb_id, nb_legs)
            scen[nb_id] = (sc, sol, nb_legs)
            for i, leg in enumerate(nb_legs):
                plan[id(leg)] = (float(sol.powers[i]), sol.codes[i], int(sol.sls[i]), float(sol.rates[i]),
                                 float(sol.sinr_db[i]))
        # sessions starting now get their code, payload and HARQ process
        for leg in legs:
            s = leg.session
            if s.code is None:
                code = plan[id(leg)][1]
                s.code = code
                rng = keyed_rng(cfg.seed, PAYLOAD, slot, self.node_idx[s.owner])
                s.data = rng.integers(0, 1 << code.m, code.k)
                s.crc = crc32(s.data)
                leg.codeword = rs_encode(s.data, code)
                leg.harq = HarqSession(s.sid, code, r_T=cfg.r_T, max_timeouts=cfg.max_timeouts, crc=s.crc,
                                       p_fb=self.p_fb(s.owner))
                leg.pending = start(leg.harq, t0, self.timer(leg.node))

        # frames, concatenated per carrier: own session first, then relayed ones
        per_carrier: dict = {}
        for leg in legs:
            per_carrier.setdefault(leg.node, []).append(leg)
        frames: dict = {}
        carrier_wave: dict = {}
        for node, cl in per_carrier.items():
            cl.sort(key=lambda lg: (lg.session.owner != node, self.node_idx[lg.session.owner]))
            parts, off = [], 0
            for leg in cl:
                P, code, sl, rate, sinr = plan[id(leg)]
                hcode = leg.harq.code
                pos = hcode.round_positions(leg.pending.round)
                bits = symbols_to_bits(leg.codeword[list(pos)], hcode.m)
                spec = self.spec(leg.session.owner, sl)
                wave = spread(modulate(pad_bits(bits, self.scheme), self.scheme), spec, pos[0] * hcode.m, self.scheme)
                frames[id(leg)] = (off, wave.size, pos, bits, spec)
                parts.append(math.sqrt(P) * wave)
                off += wave.size
                if leg.session.owner != node:
                    self.relayed[node] += 1
                self.emit({"event": "tx", "t": round(t0, 9), "node": node, "session": leg.session.sid,
                           "round": r, "ir_round": leg.pending.round, "duplicate": leg.pending.duplicate,
                           "power": _f(P), "sl": sl, "code": hcode.label(), "verdict": None})
                self.sinr_rows.append({"slot": slot, "round": r, "node": node, "session": leg.session.sid,
                                       "power": _f(P), "sl": sl, "code": hcode.label(), "sinr_db": _f(sinr),
                                       "rate": _f(rate)})
            carrier_wave[node] = np.concatenate(parts)
        round_chips = max(w.size for w in carrier_wave.values())

        # receivers: sinks always; members overhear round-1 frames when collaboration may engage
        listeners: dict = {}
        for nb_id, (sc, sol, nb_legs) in scen.items():
            listeners.setdefault(self.nbhd[nb_id].sink, [])
        overhear: list = []
        if cfg.mode == "collaborative" and cfg.q > 0 and cfg.r_T > 1:
            for leg in legs:
                if leg.node == leg.session.owner and leg.pending.round == 1 and not leg.pending.duplicate:
                    for m in self.nbhd[self.nb_of[leg.node]].members:
                        if m != leg.node:
                            overhear.append((m, leg))
                            listeners.setdefault(m, [])
        received = {}
        for rx in sorted(listeners, key=lambda x: self.recv_idx[x]):
            txs = [Transmission(w, 1.0, self.gain(c, rx), self.taps(c, rx, t0))
                   for c, w in sorted(carrier_wave.items()) if c != rx and self.gain(c, rx) > 0]
            sig = apply_channel(txs, 0.0, length=self.max_len)
            noise = awgn(self.max_len, self.noise_power, keyed_rng(cfg.seed, NOISE, slot, r, self.recv_idx[rx]))
            received[rx] = sig + noise
            self.emit({"event": "channel", "t": round(t0, 9), "receiver": rx, "slot": slot, "round": r,
                       "noise": hashlib.sha256(noise.tobytes()).hexdigest()[:16]})

        # overhearing (stores verified copies for a possible takeover)
        for m, leg in overhear:
            off, size, pos, bits, spec = frames[id(leg)]
            hcode = leg.harq.code
            hard = self._hard_bits(received[m][off:off + size], spec, pos[0] * hcode.m, bits.size)
            portion = dict(zip(pos, bits_to_symbols(hard, hcode.m).tolist()))
            data = accumulate_and_decode([portion], hcode)
            collab.overhear_store(self.buffers[m], leg.session.sid, data, leg.session.crc)

        # sink decoding and feedback
        max_delay = 0.0
        for leg in sorted(legs, key=lambda lg: (self.node_idx[lg.session.owner], self.node_idx[lg.node])):
            s = leg.session
            sink = self.nbhd[self.nb_of[leg.node]].sink
            off, size, pos, bits, spec = frames[id(leg)]
            hcode = leg.harq.code
            hard = self._hard_bits(received[sink][off:off + size], spec, pos[0] * hcode.m, bits.size)
            st = self.bit_stats[leg.node]
            st[0] += bits.size
            st[1] += int(np.count_nonzero(hard != bits))
            portion = dict(zip(pos, bits_to_symbols(hard, hcode.m).tolist()))
            data, msg = receiver_step(leg.harq, portion, leg.harq.round)
            if data is not None and s.delivered_round is None:
                if np.array_equal(data, s.data):
                    s.delivered_round = r
                else:
                    s.undetected = True
            d = self.delay(leg.node, sink)
            max_delay = max(max_delay, d)
            t_rx = t0 + d + (off + size) / cfg.bandwidth
            self.emit({"event": "rx", "t": round(t_rx, 9), "node": leg.node, "session": s.sid, "round": r,
                       "verdict": msg.verdict.value})
            fb = inject_feedback_error(msg, self.p_fb(leg.node),
                                       keyed_rng(cfg.seed, FEEDBACK, slot, r, self.node_idx[s.owner],
                                                 self.node_idx[leg.node]),
                                       FeedbackErrorMode(cfg.feedback_mode))
            ir_round = leg.harq.round
            if fb is None:
                t_ev = leg.harq.timer_deadline
                self.emit({"event": "feedback_lost", "t": round(t_rx + d, 9), "node": leg.node,
                           "session": s.sid, "round": r, "verdict": None})
                action = sender_step(leg.harq, Timeout(s.sid), t_ev, self.timer(leg.node))
                self.emit({"event": "timeout", "t": round(t_ev, 9), "node": leg.node, "session": s.sid,
                           "round": r, "verdict": None})
            else:
                t_ev = t_rx + d
                self.emit({"event": "feedback", "t": round(t_ev, 9), "node": leg.node, "session": s.sid,
                           "round": r, "verdict": fb.verdict.value})
                action = sender_step(leg.harq, fb, t_ev, self.timer(leg.node))
            if isinstance(action, Stop):
                leg.pending = None
                leg.active = False
                self.emit({"event": action.state.value, "t": round(t_ev, 9), "node": leg.node,
                           "session": s.sid, "round": r, "verdict": None})
            else:
                leg.pending = action
            # the sink's true NACK starts a takeover, whatever the impaired node itself heard
            if (cfg.mode == "collaborative" and cfg.q > 0 and leg.node == s.owner and ir_round == 1
                    and msg.verdict is Verdict.NACK and r < cfg.r_T and not leg.handed_over):
                self._maybe_collaborate(slot, r, leg, scen, t_rx + d)

        self.airtime += round_chips
        self._update_cross_interference(legs, plan)
        self.t = t0 + round_chips / cfg.bandwidth + 2.0 * max_delay + cfg.processing_margin

    def _enumerator(self, code: CodeSpec):
        key = (code.n, code.k)
        if key not in self._enum_cache:
            self._enum_cache[key] = analytics.weight_enumerator(code)
        return self._enum_cache[key]

    def timer(self, node: str) -> float:
        sink = self.nbhd[self.nb_of[node]].sink
        return timer_duration(self.delay(node, sink), self.cfg.processing_margin)

    def _hard_bits(self, seg: np.ndarray, spec: ChaoticCodeSpec, start_bit: int, n_bits: int) -> np.ndarray:
        return demodulate(despread(seg, spec, start_bit, self.scheme), self.scheme)[:n_bits]

    def _update_cross_interference(self, legs: list[Leg], plan: dict) -> None:
        out: dict = {}
        for nb in self.nbhd.values():
            total = 0.0
            for leg in legs:
                if self.nb_of[leg.node] != nb.id:
                    total += plan[id(leg)][0] * self.gain(leg.node, nb.sink)
            out[nb.sink] = total
        self.prev_rx_power = out

    def _maybe_collaborate(self, slot: int, r: int, leg: Leg, scen: dict, t: float) -> None:
        cfg = self.cfg
        s = leg.session
        nb_id = self.nb_of[s.owner]
        nb = self.nbhd[nb_id]
        u = keyed_rng(cfg.seed, ENGAGE, slot, self.node_idx[s.owner]).random()
        if not collab.engage(nb.q, u):
            return
        sc, sol, nb_legs = scen[nb_id]
        states = []
        for i, lg in enumerate(nb_legs):
            if lg.node == lg.session.owner and lg.node != s.owner and sol.codes[i] is not None:
                c = sol.codes[i]
                snr_bit = 10 ** (sol.sinr_db[i] / 10.0) / (c.rate * c.d) if math.isfinite(sol.sinr_db[i]) else 0.0
                states.append(collab.link_state_from_snr(lg.node, snr_bit, self._enumerator(c)))
        ranked = collab.select_collaborators(states)
        nb = replace(nb, candidates=tuple(ranked) or nb.candidates)
        names = [lg.node if lg.node == lg.session.owner else f"{lg.node}/{lg.session.owner}" for lg in nb_legs]
        idx = nb_legs.index(leg)
        eligible = [m for m in nb.members if m != s.owner and s.sid in self.buffers[m]]
        decision = collab.on_impairment(nb, s.owner, sc, names, float(sol.rates[idx]), eligible, self.solve)
        self.collab_counts[decision.action.value] += 1
        self.emit({"event": "collab", "t": round(t, 9), "neighborhood": nb_id, "impaired": s.owner,
                   "collaborator": decision.collaborator, "action": decision.action.value,
                   "session": s.sid, "round": r})
        if decision.action is collab.CollabAction.DROP:
            return
        j = decision.collaborator
        # the takeover command travels over the collaborator's own feedback channel
        order = FeedbackMsg(s.sid, Verdict.NACK, r)
        got = inject_feedback_error(order, self.p_fb(j),
                                    keyed_rng(cfg.seed, FEEDBACK, slot, r, self.node_idx[s.owner],
                                              self.node_idx[j], 1),
                                    FeedbackErrorMode(cfg.feedback_mode))
        if got is None or got.verdict is not Verdict.NACK:
            self.emit({"event": "takeover_missed", "t": round(t, 9), "node": j, "session": s.sid,
                       "round": r, "verdict": None})
            return
        rounds_left = cfg.r_T - r
        copy = self.buffers[j].get(s.sid)
        code = CodeSpec(s.code.n, s.code.k, max_rounds=rounds_left)
        harq = HarqSession(s.sid, code, r_T=rounds_left, max_timeouts=cfg.max_timeouts, crc=s.crc,
                           p_fb=self.p_fb(j))
        new = Leg(s, j, harq, rs_encode(copy, code))
        new.pending = start(harq, t, self.timer(j))
        s.legs.append(new)
        leg.active = False
        leg.pending = None
        leg.handed_over = True


def run_scenario(cfg: ScenarioConfig) -> RunReport:
    """Simulate every packet slot of ``cfg`` and summarise."""
    eng = SlotEngine(cfg)
    sessions: list[Session] = []
    n_slots = max((eng.packets(n) for n in eng.ids), default=0)
    for slot in range(n_slots):
        sessions.extend(eng.run_slot(slot))
    return _report(cfg, eng, sessions)


def _report(cfg: ScenarioConfig, eng: SlotEngine, sessions: list[Session]) -> RunReport:
    offered = len(sessions)
    delivered = [s for s in sessions if s.delivered_round is not None]
    nats = {n: 0.0 for n in eng.ids}
    for s in delivered:
        nats[s.owner] += s.code.info_bits * math.log(2.0)
    total_nats = sum(nats.values())
    air = eng.airtime
    tx = np.array([s.transmissions for s in sessions], dtype=float)
    dwr = np.array([(s.delivered_round or 0) for s in sessions], dtype=float)

    def mse(x):
        if x.size == 0:
            return 0.0, 0.0
        se = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
        return float(x.mean()), se

    per_node = {}
    for n in eng.ids:
        mine = [s for s in sessions if s.owner == n]
        bits, errs = eng.bit_stats[n]
        per_node[n] = {
            "offered": len(mine),
            "delivered": sum(1 for s in mine if s.delivered_round is not None),
            "dropped": sum(1 for s in mine if s.delivered_round is None),
            "bits": bits,
            "bit_errors": errs,
            "ber": errs / bits if bits else 0.0,
            "effective_rate": nats[n] / air if air else 0.0,
            "transmissions": sum(s.transmissions for s in mine),
            "relayed_frames": eng.relayed[n],
        }
    nb_rate = {str(nb.id): sum(per_node[m]["effective_rate"] for m in nb.members) for nb in cfg.neighborhoods}
    mt, mt_se = mse(tx)
    dw, dw_se = mse(dwr)
    text = "".join(line + "\n" for line in eng.log)
    return RunReport(
        seed=cfg.seed, mode=cfg.mode, power_control=cfg.power_control, q=cfg.q,
        offered=offered, delivered=len(delivered), dropped=offered - len(delivered),
        undetected_errors=sum(1 for s in sessions if s.undetected),
        delivered_nats=total_nats, airtime_chips=air, eta=total_nats / air if air else 0.0,
        outage=1.0 - len(delivered) / offered if offered else 0.0,
        mean_transmissions=mt, mean_transmissions_se=mt_se,
        delivery_weighted_rounds=dw, delivery_weighted_rounds_se=dw_se,
        per_node=per_node, neighborhood_rate=nb_rate, collab_actions=dict(eng.collab_counts),
        sinr_series=eng.sinr_rows, log_digest=hashlib.sha256(text.encode()).hexdigest(), log=eng.log,
        session_rows=[{"session": s.sid, "node": s.owner, "delivered": s.delivered_round is not None,
                       "round": s.delivered_round or 0, "transmissions": s.transmissions} for s in sessions],
    )


# ---------------------------------------------------------------------------
# sweeps and paired comparisons


def _run(cfg: ScenarioConfig) -> RunReport:
    return run_scenario(cfg)


def run_many(cfgs: Sequence[ScenarioConfig], workers: int = 1) -> list[RunReport]:
    """Run configs, in parallel when ``workers > 1``; results keep input order."""
    cfgs = list(cfgs)
    if workers <= 1 or len(cfgs) <= 1:
        return [run_scenario(c) for c in cfgs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run, cfgs))


def sweep_configs(cfg: ScenarioConfig, axis: str, values: Sequence, derive_seeds: bool = True) -> list[ScenarioConfig]:
    out = []
    for i, v in enumerate(values):
        c = cfg.replace_path(axis, v)
        if derive_seeds:
            c = replace(c, seed=derive_run_seed(cfg.seed, i))
        out.append(c)
    return out


def sweep(cfg: ScenarioConfig, axis: str, values: Sequence, workers: int = 1,
          derive_seeds: bool = True) -> list[RunReport]:
    """One run per value; sub-seeds depend only on the value's position."""
    return run_many(sweep_configs(cfg, axis, values, derive_seeds), workers)


MODE_GRID = (("conventional", True), ("collaborative", True), ("conventional", False), ("collaborative", False))


def compare_modes(cfg: ScenarioConfig, workers: int = 1) -> dict:
    """Four runs sharing the master seed: {conventional, collaborative} x power control {on, off}."""
    cfgs = [replace(cfg, mode=m, power_control=pc) for m, pc in MODE_GRID]
    reports = run_many(cfgs, workers)
    return {(m, pc): rep for (m, pc), rep in zip(MODE_GRID, reports)}


SWEEP_COLUMNS = ("axis", "value", "seed", "mode", "power_control", "q", "eta", "outage",
                 "mean_transmissions", "mean_transmissions_se", "offered", "delivered", "dropped",
                 "airtime_chips", "log_digest")


def reports_csv(rows: Sequence[tuple[str, object, RunReport]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for axis, value, rep in rows:
        w.writerow([axis, value, rep.seed, rep.mode, rep.power_control, rep.q, repr(rep.eta), repr(rep.outage),
                    repr(rep.mean_transmissions), repr(rep.mean_transmissions_se), rep.offered,
                    rep.delivered, rep.dropped, rep.airtime_chips, rep.log_digest])
    return buf.getvalue()
