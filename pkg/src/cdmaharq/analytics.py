"""Closed-form link metrics: error bounds, rates, SINR and HARQ throughput."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.special import erfc

from .rs import CodeSpec, codebook

NODE_OFF = -math.inf


def q_function(x):
    """Gaussian tail probability Q(x)."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


class WeightEnumerator(dict):
    """Map codeword weight -> number of codewords of that weight."""

    @property
    def total(self) -> int:
        return sum(self.values())


def bhattacharyya_bsc(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError("crossover probability must lie in [0, 1]")
    return 2.0 * math.sqrt(p * (1.0 - p))


def union_bhattacharyya_bound(A: Mapping[int, int], B: float) -> float:
    """sum_{w>=1} A_w B^w.  May exceed 1; the raw value is returned."""
    if not 0.0 <= B <= 1.0:
        raise ValueError("Bhattacharyya parameter must lie in [0, 1]")
    return float(sum(count * B ** w for w, count in A.items() if w >= 1))


@lru_cache(maxsize=None)
def _mds_enumerator(n: int, k: int, q: int) -> tuple[tuple[int, int], ...]:
    d = n - k + 1
    out = [(0, 1)]
    for w in range(d, n + 1):
        s = sum((-1) ** j * math.comb(w, j) * (q ** (w - d + 1 - j) - 1) for j in range(w - d + 1))
        out.append((w, math.comb(n, w) * s))
    return tuple(out)


def weight_enumerator(code: CodeSpec, exact: Optional[bool] = None) -> WeightEnumerator:
    """Symbol-weight distribution; exhaustive for tiny codes, MDS formula otherwise."""
    q = 1 << code.m
    if exact is None:
        exact = q ** code.k <= 4096
    if exact:
        weights = np.count_nonzero(codebook(code.n, code.k), axis=1)
        vals, counts = np.unique(weights, return_counts=True)
        return WeightEnumerator({int(v): int(c) for v, c in zip(vals, counts)})
    return WeightEnumerator({w: a for w, a in _mds_enumerator(code.n, code.k, q) if a})


def cdma_error_bound(k_bits: int, P: float, J: float, SL: int, R_c: float, d: int) -> float:
    """(2^k - 1) Q(2 sqrt(P/J * SL * R_c * d)) packet-error bound."""
    if J <= 0:
        raise ZeroDivisionError("interference-plus-noise J must be positive")
    if P < 0 or SL <= 0 or R_c <= 0 or d <= 0 or k_bits <= 0:
        raise ValueError("arguments must be positive (P may be zero)")
    arg = 2.0 * math.sqrt(P / J * SL * R_c * d)
    return float((2.0 ** k_bits - 1.0) * q_function(arg))


def interference(i: int, powers, alphas, gains) -> float:
    p = np.asarray(powers, dtype=float) * np.asarray(alphas, dtype=float) * np.asarray(gains, dtype=float)
    return float(p.sum() - p[i])


def spectral_efficiency(i: int, powers, alphas, gains, N0: float, W: float, J_m: float = 0.0) -> float:
    """ln(1 + alpha_i P_i g_i / (N0 W + intra-neighbourhood interference + J_m)), in nats."""
    denom = N0 * W + interference(i, powers, alphas, gains) + J_m
    if denom <= 0:
        raise ValueError("noise plus interference must be positive")
    sig = alphas[i] * powers[i] * gains[i]
    return math.log1p(sig / denom)


def cross_neighborhood_interference(membership: Sequence[int], powers, alphas, gains_to_m, m: int) -> float:
    """Received power at neighbourhood ``m``'s sink from every node outside ``m``.

    ``membership[j]`` is node j's neighbourhood; ``gains_to_m[j]`` its gain
    towards the sink of ``m``.
    """
    total = 0.0
    for j, nb in enumerate(membership):
        if nb != m:
            total += alphas[j] * powers[j] * gains_to_m[j]
    return float(total)


def db(x: float) -> float:
    return 10.0 * math.log10(x) if x > 0 else NODE_OFF


def sinr_db(i: int, SL: int, R_c: float, d: int, powers, alphas, gains,
            N0: float, W: float, J_m: float = 0.0) -> float:
    """Processing gain (2 SL) + coding gain (R_c d) + signal-to-interference, all in dB."""
    if alphas[i] == 0 or powers[i] * gains[i] <= 0:
        return NODE_OFF
    J_i = N0 * W + interference(i, powers, alphas, gains)
    return db(2.0 * SL) + db(R_c * d) + db(alphas[i] * powers[i] * gains[i] / (J_i + J_m))


@dataclass
class ThroughputReport:
    X: float
    outage: float
    expected_cost: float
    eta: float

    @property
    def expected_reward(self) -> float:
        return self.X * (1.0 - self.outage)


def long_term_throughput(X: float, fail_probs: Sequence[float], round_costs: Sequence[float]) -> ThroughputReport:
    """Renewal-reward throughput of truncated HARQ.

    Round r is attempted only when rounds 1..r-1 all failed; its cost is
    ``round_costs[r-1]`` channel uses.
    """
    if len(fail_probs) != len(round_costs) or not fail_probs:
        raise ValueError("need one failure probability and one cost per round")
    survive = 1.0
    cost = 0.0
    for p, c in zip(fail_probs, round_costs):
        if not 0.0 <= p <= 1.0:
            raise ValueError("failure probabilities must lie in [0, 1]")
        cost += survive * c
        survive *= p
    eta = X * (1.0 - survive) / cost if cost > 0 else 0.0
    return ThroughputReport(X, survive, cost, eta)


def _series(values, r_T: int) -> list[float]:
    if np.isscalar(values):
        return [float(values)] * r_T
    vals = [float(v) for v in values]
    if len(vals) != r_T:
        raise ValueError(f"need {r_T} per-round values, got {len(vals)}")
    return vals


def avg_transmissions(pe, pe_collab, q: float, r_T: int) -> float:
    """Average transmissions of an impaired node under collaboration probability ``q``.

    ``pe[r-1]`` and ``pe_collab[r-1]`` are round-r failure probabilities of the
    impaired node and of its collaborator.  Evaluated term by term as
    (1 - pe_1) + sum_{r=2..r_T} r[(1-q) pe_r^(r-1)(1-pe_r) + q pc_r^(r-1)(1-pc_r)].
    """
    pe = _series(pe, r_T)
    pc = _series(pe_collab, r_T)
    total = 1.0 - pe[0]
    for r in range(2, r_T + 1):
        a, b = pe[r - 1], pc[r - 1]
        total += r * (1 - q) * a ** (r - 1) * (1 - a) + r * q * b ** (r - 1) * (1 - b)
    return total


def expected_delivery_rounds(pe, pe_collab, q: float, r_T: int) -> tuple[float, float]:
    """Exact E[R 1{delivered}] and E[transmissions] when a collaborator takes over after round 1.

    Unlike :func:`avg_transmissions` this chains the per-round probabilities
    along each path, so it is the quantity a packet-level simulation estimates
    when the collaborator's failure rate differs from the impaired node's.
    """
    pe = _series(pe, r_T)
    pc = _series(pe_collab, r_T)
    credited = 1.0 - pe[0]
    tx = 1.0 - pe[0]
    alone = pe[0]
    helped = pe[0]
    for r in range(2, r_T + 1):
        p_alone = alone * (1 - pe[r - 1])
        p_helped = helped * (1 - pc[r - 1])
        credited += r * ((1 - q) * p_alone + q * p_helped)
        tx += r * ((1 - q) * p_alone + q * p_helped)
        alone *= pe[r - 1]
        helped *= pc[r - 1]
    tx += r_T * ((1 - q) * alone + q * helped)
    return credited, tx
