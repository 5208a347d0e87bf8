"""Reed-Solomon coding over GF(2^m) with errors-and-erasures decoding.

Codewords are systematic: the first ``k`` symbols are the data, the last
``n - k`` are parity.  Symbol ``i`` of a codeword is the coefficient of
``x^(n-1-i)``.  The generator polynomial has roots ``alpha^1 .. alpha^(n-k)``.

Incremental-redundancy support lives here too: a :class:`CodeSpec` carries a
puncture schedule that splits the parity symbols into ``r_T`` ordered
portions.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

# Primitive polynomials, bit i is the coefficient of x^i.
PRIMITIVE_POLYS = {
    2: 0b111,
    3: 0b1011,
    4: 0b10011,
    5: 0b100101,
    6: 0b1000011,
    7: 0b10001001,
    8: 0b100011101,
}

PAPER_CODES = ((7, 3), (15, 9), (31, 19), (31, 21), (31, 23), (31, 25))


class DimensionError(ValueError):
    """Input length does not match the code or schedule."""


class GF:
    """Log/antilog tables for GF(2^m)."""

    def __init__(self, m: int):
        if m not in PRIMITIVE_POLYS:
            raise ValueError(f"unsupported symbol size m={m}")
        self.m = m
        self.q = 1 << m
        self.order = self.q - 1
        exp = [0] * (2 * self.order)
        log = [0] * self.q
        x = 1
        for i in range(self.order):
            exp[i] = x
            log[x] = i
            x <<= 1
            if x & self.q:
                x ^= PRIMITIVE_POLYS[m]
        for i in range(self.order, 2 * self.order):
            exp[i] = exp[i - self.order]
        self.exp = exp
        self.log = log

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return self.exp[self.log[a] + self.log[b]]

    def div(self, a: int, b: int) -> int:
        if b == 0:
            raise ZeroDivisionError("division by zero in GF")
        if a == 0:
            return 0
        return self.exp[(self.log[a] - self.log[b]) % self.order]

    def inv(self, a: int) -> int:
        return self.div(1, a)

    def pow(self, a: int, n: int) -> int:
        if a == 0:
            return 0 if n else 1
        return self.exp[(self.log[a] * n) % self.order]

    def alpha(self, n: int) -> int:
        return self.exp[n % self.order]

    # polynomials below are lists of coefficients, lowest degree first
    def poly_mul(self, p: Sequence[int], q: Sequence[int]) -> list[int]:
        out = [0] * (len(p) + len(q) - 1)
        for i, a in enumerate(p):
            if a == 0:
                continue
            for j, b in enumerate(q):
                out[i + j] ^= self.mul(a, b)
        return out

    def poly_eval(self, p: Sequence[int], x: int) -> int:
        y = 0
        for c in reversed(p):
            y = self.mul(y, x) ^ c
        return y


@lru_cache(maxsize=None)
def galois_field(m: int) -> GF:
    return GF(m)


@dataclass(frozen=True)
class CodeSpec:
    """RS(n, k) mother code plus the parity split across HARQ rounds.

    ``puncture_schedule`` lists, per round, the codeword positions of the
    parity symbols sent in that round.  When omitted it is built by
    :func:`even_schedule` from ``max_rounds``.
    """

    n: int
    k: int
    max_rounds: int = 4
    puncture_schedule: tuple[tuple[int, ...], ...] = None  # type: ignore[assignment]

    def __post_init__(self):
        m = (self.n + 1).bit_length() - 1
        if (1 << m) - 1 != self.n or m not in PRIMITIVE_POLYS:
            raise ValueError(f"n={self.n} is not 2^m - 1 for a supported m")
        if not 0 < self.k < self.n:
            raise ValueError(f"need 0 < k < n, got k={self.k}, n={self.n}")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        if self.puncture_schedule is None:
            object.__setattr__(self, "puncture_schedule", even_schedule(self.n, self.k, self.max_rounds))
        sched = tuple(tuple(int(p) for p in portion) for portion in self.puncture_schedule)
        object.__setattr__(self, "puncture_schedule", sched)
        if len(sched) != self.max_rounds:
            raise ValueError("puncture schedule must have one portion per round")
        if any(not portion for portion in sched):
            raise ValueError(f"every round needs a parity symbol: max_rounds <= n - k = {self.n - self.k}")
        flat = [p for portion in sched for p in portion]
        if sorted(flat) != list(range(self.k, self.n)):
            raise ValueError("puncture schedule must partition the parity positions")

    @property
    def m(self) -> int:
        return (self.n + 1).bit_length() - 1

    @property
    def rate(self) -> float:
        return self.k / self.n

    @property
    def d(self) -> int:
        return self.n - self.k + 1

    @property
    def t(self) -> int:
        return (self.n - self.k) // 2

    @property
    def nsym(self) -> int:
        return self.n - self.k

    @property
    def info_bits(self) -> int:
        return self.k * self.m

    def with_rounds(self, max_rounds: int) -> "CodeSpec":
        return CodeSpec(self.n, self.k, max_rounds)

    def round_positions(self, r: int) -> tuple[int, ...]:
        """Codeword positions carried by round ``r`` (1-based)."""
        if not 1 <= r <= self.max_rounds:
            raise ValueError(f"round {r} outside 1..{self.max_rounds}")
        portion = self.puncture_schedule[r - 1]
        if r == 1:
            return tuple(range(self.k)) + portion
        return portion

    def label(self) -> str:
        return f"({self.n},{self.k})"


def even_schedule(n: int, k: int, rounds: int) -> tuple[tuple[int, ...], ...]:
    """Split parity positions k..n-1 into ``rounds`` contiguous portions.

    Sizes differ by at most one; earlier rounds take the remainder.
    """
    nsym = n - k
    base, extra = divmod(nsym, rounds)
    out = []
    pos = k
    for r in range(rounds):
        size = base + (1 if r < extra else 0)
        out.append(tuple(range(pos, pos + size)))
        pos += size
    return tuple(out)


@lru_cache(maxsize=None)
def generator_poly(n: int, k: int) -> tuple[int, ...]:
    gf = galois_field((n + 1).bit_length() - 1)
    g = [1]
    for j in range(1, n - k + 1):
        g = gf.poly_mul(g, [gf.alpha(j), 1])
    return tuple(g)


def rs_encode(data: Sequence[int], code: CodeSpec) -> np.ndarray:
    """Systematic encoding of ``k`` data symbols into an ``n``-symbol codeword."""
    data = [int(s) for s in data]
    if len(data) != code.k:
        raise DimensionError(f"expected {code.k} data symbols, got {len(data)}")
    gf = galois_field(code.m)
    if any(s < 0 or s >= gf.q for s in data):
        raise ValueError(f"symbols must lie in GF({gf.q})")
    g = generator_poly(code.n, code.k)  # low -> high, monic
    nsym = code.nsym
    # long division of data(x) * x^nsym by g(x), working high degree first
    rem = [0] * nsym  # rem[0] is the highest-degree remainder coefficient
    for s in data:
        fb = s ^ rem[0]
        rem = rem[1:] + [0]
        if fb:
            for j in range(nsym):
                rem[j] ^= gf.mul(fb, g[nsym - 1 - j])
    return np.array(data + rem, dtype=np.int64)


def syndromes(received: Sequence[int], code: CodeSpec) -> list[int]:
    gf = galois_field(code.m)
    out = []
    for j in range(1, code.nsym + 1):
        x = gf.alpha(j)
        y = 0
        for c in received:
            y = gf.mul(y, x) ^ int(c)
        out.append(y)
    return out


def _berlekamp_massey(gf: GF, seq: Sequence[int]) -> tuple[list[int], int]:
    """Shortest LFSR (connection polynomial, length) generating ``seq``."""
    C = [1]
    B = [1]
    L = 0
    shift = 1
    b = 1
    for i, s in enumerate(seq):
        delta = s
        for j in range(1, min(L, len(C) - 1) + 1):
            delta ^= gf.mul(C[j], seq[i - j])
        if delta == 0:
            shift += 1
            continue
        coef = gf.div(delta, b)
        update = [0] * shift + [gf.mul(coef, x) for x in B]
        T = list(C)
        C = C + [0] * max(0, len(update) - len(C))
        for j, u in enumerate(update):
            C[j] ^= u
        if 2 * L <= i:
            L = i + 1 - L
            B = T
            b = delta
            shift = 1
        else:
            shift += 1
    C = (C + [0] * (L + 1))[: L + 1]
    return C, L


def rs_decode(received: Sequence[int], code: CodeSpec, erasures: Sequence[int] = ()) -> Optional[np.ndarray]:
    """Errors-and-erasures decoding.

    ``received`` holds ``n`` symbols (values at erased positions are ignored).
    Returns the corrected codeword, or ``None`` when the word is not within
    the decoding radius ``2e + f < d``.
    """
    if len(received) != code.n:
        raise DimensionError(f"expected {code.n} symbols, got {len(received)}")
    gf = galois_field(code.m)
    n, nsym = code.n, code.nsym
    erasures = sorted(set(int(p) for p in erasures))
    f = len(erasures)
    if f > nsym:
        return None
    r = [int(c) for c in received]
    for p in erasures:
        r[p] = 0
    S = syndromes(r, code)
    if f == 0 and not any(S):
        return np.array(r, dtype=np.int64)

    # erasure locator: prod (1 - X_p x), X_p = alpha^(n-1-p)
    gamma = [1]
    for p in erasures:
        gamma = gf.poly_mul(gamma, [1, gf.alpha(n - 1 - p)])
    # modified (Forney) syndromes: coefficients f..nsym-1 of gamma(x) S(x)
    prod = gf.poly_mul(gamma, S)
    forney = prod[f:nsym]
    lam, nu = _berlekamp_massey(gf, forney) if forney else ([1], 0)
    if 2 * nu + f > nsym:
        return None
    sigma = gf.poly_mul(lam, gamma)

    # Chien search over the n valid locators
    roots = []
    for p in range(n):
        xinv = gf.alpha(-(n - 1 - p))
        if gf.poly_eval(sigma, xinv) == 0:
            roots.append(p)
    if len(roots) != nu + f:
        return None

    omega = gf.poly_mul(S, sigma)[:nsym]
    # formal derivative: odd-power coefficients shift down
    dsigma = [sigma[i] if i % 2 == 1 else 0 for i in range(1, len(sigma))]
    for p in roots:
        xinv = gf.alpha(-(n - 1 - p))
        denom = gf.poly_eval(dsigma, xinv)
        if denom == 0:
            return None
        # fcr = 1 makes the X^(1 - fcr) factor vanish
        r[p] ^= gf.div(gf.poly_eval(omega, xinv), denom)

    if any(syndromes(r, code)):
        return None
    return np.array(r, dtype=np.int64)


def select_round_portion(codeword: Sequence[int], code: CodeSpec, r: int) -> dict[int, int]:
    """Symbols sent in round ``r``, keyed by codeword position."""
    if len(codeword) != code.n:
        raise DimensionError(f"expected {code.n} symbols, got {len(codeword)}")
    return {p: int(codeword[p]) for p in code.round_positions(r)}


def accumulate_and_decode(portions: Sequence[dict[int, int]], code: CodeSpec) -> Optional[np.ndarray]:
    """Decode from the union of received portions; missing positions are erasures.

    Returns the ``k`` data symbols, or ``None`` on decode failure.
    """
    buf = [0] * code.n
    have = [False] * code.n
    for portion in portions:
        for p, s in portion.items():
            if not have[p]:
                buf[p] = int(s)
                have[p] = True
    erasures = [p for p in range(code.n) if not have[p]]
    cw = rs_decode(buf, code, erasures)
    if cw is None:
        return None
    return cw[: code.k]


def bits_to_symbols(bits: Sequence[int], m: int) -> np.ndarray:
    """Pack bits MSB-first into m-bit symbols."""
    bits = np.asarray(bits, dtype=np.int64)
    if bits.size % m:
        raise DimensionError(f"bit count {bits.size} not a multiple of {m}")
    weights = 1 << np.arange(m - 1, -1, -1)
    return bits.reshape(-1, m) @ weights


def symbols_to_bits(symbols: Sequence[int], m: int) -> np.ndarray:
    symbols = np.asarray(symbols, dtype=np.int64)
    shifts = np.arange(m - 1, -1, -1)
    return ((symbols[:, None] >> shifts) & 1).reshape(-1)


@lru_cache(maxsize=None)
def codebook(n: int, k: int) -> np.ndarray:
    """All q^k codewords as a (q^k, n) array; only sensible for tiny codes."""
    code = CodeSpec(n, k)
    q = 1 << code.m
    if q ** k > 1 << 16:
        raise ValueError("codebook too large to enumerate")
    words = [rs_encode(d, code) for d in itertools.product(range(q), repeat=k)]
    return np.array(words, dtype=np.int64)


def ml_decode_bpsk(soft: np.ndarray, code: CodeSpec) -> np.ndarray:
    """Exhaustive soft-decision maximum-likelihood decoding for BPSK.

    ``soft`` is the real despread statistic per coded bit (bit 0 -> +1).
    Returns the ``k`` data symbols of the codeword with maximum correlation.
    """
    book = codebook(code.n, code.k)
    signs = _codebook_signs(code.n, code.k)
    soft = np.asarray(soft, dtype=float)
    if soft.ndim == 1:
        best = int(np.argmax(signs @ soft))
        return book[best, : code.k]
    best = np.argmax(soft @ signs.T, axis=1)
    return book[best, : code.k]


@lru_cache(maxsize=None)
def _codebook_signs(n: int, k: int) -> np.ndarray:
    code = CodeSpec(n, k)
    book = codebook(n, k)
    bits = np.array([symbols_to_bits(w, code.m) for w in book])
    return 1.0 - 2.0 * bits
