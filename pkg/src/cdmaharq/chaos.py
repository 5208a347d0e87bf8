"""Chaotic spreading codes from logistic and Bernoulli-shift orbits.

A code family is one orbit of a 1-D chaotic map.  Bit ``b`` of a stream is
spread by the chips obtained from orbit states ``burn_in + b*SL + 1`` through
``burn_in + (b+1)*SL``, thresholded at 0.5.  Any party holding the same
:class:`ChaoticCodeSpec` regenerates the same chips; anyone else sees noise.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

DEFAULT_LOGISTIC_R = 3.9999
# Slope just under 2: with an exact slope of 2 every binary float seed
# collapses to 0 within ~55 steps.
DEFAULT_BERNOULLI_SLOPE = 1.9999
DEFAULT_BURN_IN = 1000
MAX_SL = 1024
VALIDATION_MULTIPLIER = 10_000


class MapFamily(str, enum.Enum):
    LOGISTIC = "logistic"
    BERNOULLI = "bernoulli"


class DegenerateOrbitError(ValueError):
    """The orbit left (0, 1) or collapsed onto a fixed point."""


@dataclass(frozen=True)
class ChaoticCodeSpec:
    map_family: MapFamily
    seed: float
    spreading_length: int
    bifurcation: Optional[float] = None
    burn_in: int = DEFAULT_BURN_IN

    def __post_init__(self):
        object.__setattr__(self, "map_family", MapFamily(self.map_family))
        if self.bifurcation is None:
            default = DEFAULT_LOGISTIC_R if self.map_family is MapFamily.LOGISTIC else DEFAULT_BERNOULLI_SLOPE
            object.__setattr__(self, "bifurcation", default)
        if not 0.0 < self.seed < 1.0:
            raise ValueError(f"seed must lie strictly inside (0, 1), got {self.seed}")
        if not 1 <= self.spreading_length <= MAX_SL:
            raise ValueError(f"spreading length must be in 1..{MAX_SL}")
        if self.burn_in < 0:
            raise ValueError("burn_in must be non-negative")
        r = self.bifurcation
        if self.map_family is MapFamily.LOGISTIC:
            if not 0.0 < r <= 4.0:
                raise ValueError(f"logistic parameter must be in (0, 4], got {r}")
            if self.seed == (r - 1.0) / r:
                raise DegenerateOrbitError("seed is the logistic fixed point")
        else:
            if not 1.0 < r <= 2.0:
                raise ValueError(f"Bernoulli slope must be in (1, 2], got {r}")
        _check_orbit(self.map_family, self.seed, r, self.burn_in + self.spreading_length * VALIDATION_MULTIPLIER)

    @property
    def sl(self) -> int:
        return self.spreading_length

    def with_seed(self, seed: float) -> "ChaoticCodeSpec":
        return ChaoticCodeSpec(self.map_family, seed, self.spreading_length, self.bifurcation, self.burn_in)

    def with_sl(self, sl: int) -> "ChaoticCodeSpec":
        return ChaoticCodeSpec(self.map_family, self.seed, sl, self.bifurcation, self.burn_in)


@dataclass(frozen=True)
class ChipSequence:
    chips: np.ndarray
    bit_index: int

    def __len__(self):
        return len(self.chips)

    def __neg__(self):
        return ChipSequence(-self.chips, self.bit_index)


def map_step(x: float, spec: ChaoticCodeSpec) -> float:
    if not 0.0 < x < 1.0:
        raise DegenerateOrbitError(f"state {x} outside (0, 1)")
    y = _step(spec.map_family, spec.bifurcation, x)
    if not 0.0 <= y <= 1.0:
        raise DegenerateOrbitError(f"state escaped to {y}")
    return y


def _step(family: MapFamily, r: float, x: float) -> float:
    if family is MapFamily.LOGISTIC:
        return r * x * (1.0 - x)
    y = r * x
    return y - np.floor(y) if y >= 1.0 else y


@lru_cache(maxsize=4096)
def _check_orbit(family: MapFamily, seed: float, r: float, steps: int) -> None:
    x = seed
    logistic = family is MapFamily.LOGISTIC
    for _ in range(steps):
        if logistic:
            x = r * x * (1.0 - x)
        else:
            x = r * x
            if x >= 1.0:
                x -= 1.0
        if x <= 0.0 or x >= 1.0:
            raise DegenerateOrbitError(f"orbit from seed {seed} degenerates")


class _Orbit:
    """Orbit states with a cached prefix; beyond the cap a forward-only cursor takes over."""

    CACHE_LIMIT = 1 << 22

    def __init__(self, spec: ChaoticCodeSpec):
        self.spec = spec
        self.cache = np.empty(0)
        self.pos = 0  # cursor: number of map applications performed
        self.x = spec.seed

    def _advance(self, x: float, steps: int, out: Optional[np.ndarray] = None) -> float:
        r = self.spec.bifurcation
        logistic = self.spec.map_family is MapFamily.LOGISTIC
        for i in range(steps):
            if logistic:
                x = r * x * (1.0 - x)
            else:
                x = r * x
                if x >= 1.0:
                    x -= 1.0
            if out is not None:
                out[i] = x
        return x

    def states(self, start: int, count: int) -> np.ndarray:
        """States after ``start+1`` .. ``start+count`` map applications."""
        stop = start + count
        if stop <= self.CACHE_LIMIT:
            have = self.cache.size
            if stop > have:
                grow = max(stop, min(2 * have, self.CACHE_LIMIT)) - have
                ext = np.empty(grow)
                self._advance(self.cache[-1] if have else self.spec.seed, grow, ext)
                self.cache = np.concatenate([self.cache, ext])
            out = self.cache[start:stop].copy()
        else:
            if start < self.pos:
                self.pos = 0
                self.x = self.spec.seed
            x = self._advance(self.x, start - self.pos)
            out = np.empty(count)
            self.x = self._advance(x, count, out)
            self.pos = stop
        if count and (out.min() <= 0.0 or out.max() >= 1.0):
            raise DegenerateOrbitError("orbit collapsed while generating chips")
        return out


@lru_cache(maxsize=1024)
def _orbit(spec: ChaoticCodeSpec) -> _Orbit:
    return _Orbit(spec)


def chip_block(spec: ChaoticCodeSpec, start_bit: int, n_bits: int) -> np.ndarray:
    """Chips for bits ``start_bit .. start_bit + n_bits - 1`` as an (n_bits, SL) array."""
    if start_bit < 0 or n_bits < 0:
        raise ValueError("bit indices must be non-negative")
    sl = spec.spreading_length
    states = _orbit(spec).states(spec.burn_in + start_bit * sl, n_bits * sl)
    chips = np.where(states >= 0.5, 1.0, -1.0)
    return chips.reshape(n_bits, sl)


def generate_code(spec: ChaoticCodeSpec, bit_index: int) -> ChipSequence:
    if bit_index < 0:
        raise ValueError("bit_index must be non-negative")
    return ChipSequence(chip_block(spec, bit_index, 1)[0], bit_index)


def correlation(a: ChipSequence | np.ndarray, b: ChipSequence | np.ndarray, lag: int = 0) -> float:
    """Normalised correlation (1/SL) * sum a[t] b[t+lag] over the overlap."""
    a = np.asarray(getattr(a, "chips", a), dtype=float)
    b = np.asarray(getattr(b, "chips", b), dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    sl = a.size
    if abs(lag) >= sl:
        raise ValueError(f"|lag| must be < {sl}")
    if lag >= 0:
        s = np.dot(a[: sl - lag], b[lag:])
    else:
        s = np.dot(a[-lag:], b[: sl + lag])
    return float(s) / sl


def write_chip_dump(path: str | Path, spec: ChaoticCodeSpec, start_bit: int, n_bits: int) -> None:
    """One line per bit; chips as +1/-1 separated by spaces, after a '#' header."""
    block = chip_block(spec, start_bit, n_bits)
    lines = [
        f"# map={spec.map_family.value} seed={spec.seed!r} bifurcation={spec.bifurcation!r} "
        f"sl={spec.spreading_length} burn_in={spec.burn_in} start_bit={start_bit}"
    ]
    for row in block.astype(int):
        lines.append(" ".join(f"{c:+d}" for c in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_chip_dump(path: str | Path) -> tuple[dict, np.ndarray]:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or not text[0].startswith("#"):
        raise ValueError("chip dump must start with a '#' header line")
    header = dict(tok.split("=", 1) for tok in text[0][1:].split())
    rows = [[int(c) for c in line.split()] for line in text[1:] if line.strip()]
    return header, np.array(rows, dtype=float)


def spec_from_header(header: dict) -> ChaoticCodeSpec:
    return ChaoticCodeSpec(
        MapFamily(header["map"]),
        float(header["seed"]),
        int(header["sl"]),
        float(header["bifurcation"]),
        int(header["burn_in"]),
    )


def derive_seed(family_seed: float, index: int) -> float:
    """Deterministic per-node seed inside a family (golden-ratio stride)."""
    x = (family_seed + index * 0.6180339887498949) % 1.0
    # keep clear of the interval ends
    return 0.05 + 0.9 * x


def orbit_states(spec: ChaoticCodeSpec, count: int) -> np.ndarray:
    """Raw orbit states 1..count (no burn-in), for diagnostics and tests."""
    return _orbit(spec).states(0, count)


def mean_abs_cross_correlation(specs: Iterable[tuple[ChaoticCodeSpec, ChaoticCodeSpec]], bit_index: int = 0) -> float:
    vals = [abs(correlation(generate_code(a, bit_index), generate_code(b, bit_index))) for a, b in specs]
    return float(np.mean(vals))


def chips_for(spec: ChaoticCodeSpec, bit_indices: Sequence[int]) -> np.ndarray:
    return np.stack([generate_code(spec, b).chips for b in bit_indices])
