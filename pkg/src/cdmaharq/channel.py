"""Synthetic underwater acoustic links and channel-trace replay.

Gains follow practical spreading plus Thorp absorption.  Waveforms are
superposed at chip rate with integer-chip multipath and complex AWGN.
"""
from __future__ import annotations

import csv
from bisect import bisect_right
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

SOUND_SPEED = 1500.0
SPREADING_EXPONENT = 1.5

TRACE_COLUMNS = ("time_s", "link_id", "tap_delay_chips", "tap_gain_re", "tap_gain_im")

Taps = tuple[tuple[int, complex], ...]
DIRECT_PATH: Taps = ((0, 1.0 + 0j),)


class TraceFormatError(ValueError):
    pass


@dataclass(frozen=True)
class ChannelParams:
    distance: float
    depth_regime: str = "shallow"
    sound_speed: float = SOUND_SPEED
    spreading_exponent: float = SPREADING_EXPONENT
    carrier_freq: float = 11.5  # kHz, centre of the 4-19 kHz band
    noise_psd: float = 1e-9  # W/Hz
    bandwidth: float = 15e3  # Hz
    taps: Taps = DIRECT_PATH
    extra_loss_db: float = 0.0

    def __post_init__(self):
        if self.noise_psd <= 0 or self.bandwidth <= 0:
            raise ValueError("noise PSD and bandwidth must be positive")
        taps = tuple((int(d), complex(g)) for d, g in self.taps)
        if any(d < 0 for d, _ in taps):
            raise ValueError("tap delays must be non-negative")
        if not all(np.isfinite(g) for _, g in taps):
            raise ValueError("tap gains must be finite")
        object.__setattr__(self, "taps", taps)

    @property
    def noise_power(self) -> float:
        return self.noise_psd * self.bandwidth


def thorp_absorption(f_khz: float) -> float:
    """Thorp absorption coefficient in dB/km."""
    f2 = f_khz * f_khz
    return 0.11 * f2 / (1 + f2) + 44 * f2 / (4100 + f2) + 2.75e-4 * f2 + 0.003


def link_gain(params: ChannelParams) -> float:
    d = params.distance
    if d <= 0:
        raise ValueError("distance must be positive")
    absorption = 10 ** (thorp_absorption(params.carrier_freq) * d / 10000.0)
    g = 1.0 / (d ** params.spreading_exponent * absorption)
    return g * 10 ** (-params.extra_loss_db / 10.0)


def propagation_delay(distance: float, sound_speed: float = SOUND_SPEED) -> float:
    if distance < 0:
        raise ValueError("distance must be non-negative")
    return distance / sound_speed


def normalize_taps(taps: Taps) -> Taps:
    energy = sum(abs(g) ** 2 for _, g in taps)
    if energy == 0:
        return taps
    scale = 1.0 / np.sqrt(energy)
    return tuple((d, g * scale) for d, g in taps)


def taps_energy(taps: Taps) -> float:
    return float(sum(abs(g) ** 2 for _, g in taps))


@dataclass
class Transmission:
    """One waveform entering the channel towards a given receiver."""

    waveform: np.ndarray
    power: float
    gain: float
    taps: Taps = DIRECT_PATH
    offset: int = 0

    @property
    def amplitude(self) -> float:
        return float(np.sqrt(self.power * self.gain))


def apply_channel(transmissions: Sequence[Transmission], noise_power: float,
                  rng: Optional[np.random.Generator] = None, length: Optional[int] = None) -> np.ndarray:
    """Superpose sqrt(P g) * (taps * waveform) and add complex AWGN of variance ``noise_power``."""
    if length is None:
        length = 0
        for tx in transmissions:
            max_delay = max(d for d, _ in tx.taps)
            length = max(length, tx.offset + len(tx.waveform) + max_delay)
    out = np.zeros(length, dtype=complex)
    for tx in transmissions:
        w = np.asarray(tx.waveform, dtype=complex) * tx.amplitude
        for d, g in tx.taps:
            start = tx.offset + d
            if start >= length:
                continue
            stop = min(length, start + w.size)
            out[start:stop] += g * w[: stop - start]
    if noise_power > 0:
        if rng is None:
            raise ValueError("an rng is required when noise is enabled")
        out += awgn(length, noise_power, rng)
    return out


def awgn(length: int, noise_power: float, rng: np.random.Generator) -> np.ndarray:
    sigma = np.sqrt(noise_power / 2.0)
    return sigma * (rng.standard_normal(length) + 1j * rng.standard_normal(length))


@dataclass
class ChannelTrace:
    """Per-link tap sets sampled at increasing times."""

    times: list[float] = field(default_factory=list)
    snapshots: list[dict[str, Taps]] = field(default_factory=list)

    def __len__(self):
        return len(self.times)

    def taps_at(self, link_id: str, t: float) -> Optional[Taps]:
        """Most recent tap set for ``link_id`` at or before ``t`` (clamped to the first)."""
        i = max(bisect_right(self.times, t) - 1, 0)
        for j in range(i, -1, -1):
            if link_id in self.snapshots[j]:
                return self.snapshots[j][link_id]
        return None

    def links(self) -> set[str]:
        return {lid for snap in self.snapshots for lid in snap}


def load_channel_trace(path: str | Path) -> ChannelTrace:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise TraceFormatError(f"{path}: empty trace file")
        if tuple(h.strip() for h in header) != TRACE_COLUMNS:
            raise TraceFormatError(f"{path}:1: header must be {','.join(TRACE_COLUMNS)}")
        trace = ChannelTrace()
        pending: dict[str, list] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 5:
                raise TraceFormatError(f"{path}:{lineno}: expected 5 columns, got {len(row)}")
            try:
                t = float(row[0])
                lid = row[1].strip()
                delay = int(row[2])
                g = complex(float(row[3]), float(row[4]))
            except ValueError as exc:
                raise TraceFormatError(f"{path}:{lineno}: {exc}") from None
            if delay < 0 or not np.isfinite(g) or not np.isfinite(t):
                raise TraceFormatError(f"{path}:{lineno}: invalid tap")
            if trace.times and t < trace.times[-1]:
                raise TraceFormatError(f"{path}:{lineno}: timestamps must be non-decreasing")
            if not trace.times or t > trace.times[-1]:
                if trace.times:
                    trace.snapshots[-1] = {k: tuple(v) for k, v in pending.items()}
                trace.times.append(t)
                trace.snapshots.append({})
                pending = {}
            pending.setdefault(lid, []).append((delay, g))
        if not trace.times:
            raise TraceFormatError(f"{path}: trace has no rows")
        trace.snapshots[-1] = {k: tuple(v) for k, v in pending.items()}
    return trace


def save_channel_trace(trace: ChannelTrace, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for t, snap in zip(trace.times, trace.snapshots):
            for lid in sorted(snap):
                for d, g in snap[lid]:
                    w.writerow([repr(t), lid, d, repr(g.real), repr(g.imag)])
