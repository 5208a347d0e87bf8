"""Neighbourhood-level collaborative HARQ: collaborator ranking, switch-off and takeover."""
from __future__ import annotations

import enum
import math
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from . import analytics
from .harq import crc32
from .optimizer import OptimizationScenario, OptimizerSolution, solve_rate_max

OVERHEAR_CAPACITY = 16


class CollabAction(str, enum.Enum):
    TAKE_OVER = "TakeOver"
    UPDATE_COLLABORATOR_SET = "UpdateCollaboratorSet"
    DROP = "Drop"


@dataclass
class Neighborhood:
    id: int
    members: tuple
    family_seed: float
    sink: str
    q: float = 0.0
    candidates: tuple = ()

    def __post_init__(self):
        self.members = tuple(self.members)
        if not 0.0 <= self.q <= 1.0:
            raise ValueError("collaboration probability q must lie in [0, 1]")
        if len(set(self.members)) != len(self.members):
            raise ValueError("duplicate neighbourhood members")
        if not self.candidates:
            self.candidates = self.members
        if not set(self.candidates) <= set(self.members):
            raise ValueError("collaborator candidates must be neighbourhood members")


@dataclass(frozen=True)
class LinkState:
    node: object
    B: float
    enumerator: Mapping[int, int]

    @property
    def bound(self) -> float:
        return analytics.union_bhattacharyya_bound(self.enumerator, self.B)


@dataclass
class CollabDecision:
    impaired: object
    collaborator: Optional[object]
    action: CollabAction
    solution: Optional[OptimizerSolution] = None
    rates: dict = field(default_factory=dict)


def _sort_key(node):
    return (0, node) if isinstance(node, (int, np.integer)) else (1, str(node))


def select_collaborators(states: Sequence[LinkState]) -> list:
    """Members ordered by ascending union-Bhattacharyya bound, ties by node id."""
    return [s.node for s in sorted(states, key=lambda s: (s.bound, _sort_key(s.node)))]


def on_impairment(neighborhood: Neighborhood, impaired, scenario: OptimizationScenario,
                  nodes: Sequence, impaired_rate: float, eligible: Optional[Sequence] = None,
                  solver: Callable[[OptimizationScenario], OptimizerSolution] = None) -> CollabDecision:
    """Switch the impaired node off, re-optimise, and pick who carries its data.

    ``nodes[i]`` names the node behind optimizer index ``i``.  ``eligible``
    restricts the collaborators to those holding a verified copy of the
    impaired node's payload; by default every candidate qualifies.
    ``solver`` replaces :func:`solve_rate_max`, e.g. with a memoised version.
    """
    nodes = list(nodes)
    alpha = [0 if nd == impaired else 1 for nd in nodes]
    sol = None
    rates: dict = {}
    if any(alpha):
        sub = replace(scenario, fixed_alpha=alpha, best_effort=True)
        sol = solver(sub) if solver is not None else solve_rate_max(sub, with_kkt=False)
        rates = {nd: float(sol.rates[i]) for i, nd in enumerate(nodes) if alpha[i]}
    pool = [c for c in neighborhood.candidates if c != impaired and c in rates]
    if eligible is not None:
        pool = [c for c in pool if c in set(eligible)]
    if not pool:
        return CollabDecision(impaired, None, CollabAction.DROP, sol, rates)
    by_rate = sorted(pool, key=lambda c: (-rates[c], pool.index(c)))
    best = by_rate[0]
    if rates[best] > impaired_rate:
        return CollabDecision(impaired, best, CollabAction.TAKE_OVER, sol, rates)
    untried = by_rate[1:]
    if untried and impaired_rate < sum(rates[c] for c in untried):
        return CollabDecision(impaired, untried[0], CollabAction.UPDATE_COLLABORATOR_SET, sol, rates)
    return CollabDecision(impaired, None, CollabAction.DROP, sol, rates)


class OverhearBuffer:
    """Per-node store of overheard payloads, FIFO-evicted at capacity."""

    def __init__(self, capacity: int = OVERHEAR_CAPACITY):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._items: OrderedDict = OrderedDict()

    def __len__(self):
        return len(self._items)

    def __contains__(self, session_id):
        return session_id in self._items

    def get(self, session_id) -> Optional[np.ndarray]:
        return self._items.get(session_id)

    def keys(self):
        return list(self._items)

    def put(self, session_id, data: np.ndarray) -> None:
        if session_id in self._items:
            return
        if len(self._items) >= self.capacity:
            self._items.popitem(last=False)
        self._items[session_id] = np.asarray(data, dtype=np.int64).copy()


def overhear_store(buffer: OverhearBuffer, session_id, decoded: Optional[np.ndarray], crc: int) -> bool:
    """Keep an overheard payload only if it decoded and matches the header CRC."""
    if decoded is None or crc32(decoded) != crc:
        return False
    buffer.put(session_id, decoded)
    return True


def engage(q: float, u: float) -> bool:
    """Collaboration engages when the session's uniform draw falls below q."""
    return u < q


def link_state_from_snr(node, snr_bit: float, enumerator: Mapping[int, int]) -> LinkState:
    """Hard-decision BSC estimate p = Q(sqrt(snr_bit)) turned into a Bhattacharyya state.

    ``snr_bit`` is the despread per-bit SNR, 2 SL x SIR for BPSK.
    """
    p = float(analytics.q_function(math.sqrt(max(snr_bit, 0.0))))
    return LinkState(node, analytics.bhattacharyya_bsc(min(p, 0.5)), enumerator)


def run_collaborative_round(engine, slot: int, round_index: int, legs: Optional[Sequence] = None) -> list:
    """Execute one protocol round of a running simulation and return the legs it served.

    ``engine`` is a :class:`cdmaharq.sim.SlotEngine`; collaboration engages
    with its neighbourhoods' probability ``q``.  Without ``legs`` every
    active leg of the engine's current slot takes part.
    """
    if legs is None:
        legs = engine.active_legs()
    legs = list(legs)
    if legs:
        engine.run_round(slot, round_index, legs)
    return legs
