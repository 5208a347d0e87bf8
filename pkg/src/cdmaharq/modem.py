"""Baseband BPSK/QPSK mapping and chaotic DSSS spreading (one sample per chip)."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .chaos import ChaoticCodeSpec, MapFamily, chip_block
from .rs import CodeSpec, bits_to_symbols, rs_decode, rs_encode, symbols_to_bits

SQRT_HALF = np.sqrt(0.5)


class Modulation(str, enum.Enum):
    BPSK = "bpsk"
    QPSK = "qpsk"

    @property
    def bits_per_symbol(self) -> int:
        return 1 if self is Modulation.BPSK else 2


def modulate(bits: Sequence[int], scheme: Modulation | str) -> np.ndarray:
    """BPSK: 0 -> +1, 1 -> -1.  QPSK: Gray-coded diagonal points of unit magnitude."""
    scheme = Modulation(scheme)
    b = np.asarray(bits, dtype=np.int64)
    if scheme is Modulation.BPSK:
        return (1.0 - 2.0 * b).astype(complex)
    if b.size % 2:
        raise ValueError("QPSK needs an even number of bits")
    pairs = b.reshape(-1, 2)
    return SQRT_HALF * ((1.0 - 2.0 * pairs[:, 0]) + 1j * (1.0 - 2.0 * pairs[:, 1]))


def demodulate(symbols: Sequence[complex], scheme: Modulation | str) -> np.ndarray:
    """Minimum-distance hard decisions."""
    scheme = Modulation(scheme)
    s = np.asarray(symbols)
    if scheme is Modulation.BPSK:
        return (np.real(s) < 0).astype(np.int64)
    out = np.empty((s.size, 2), dtype=np.int64)
    out[:, 0] = np.real(s) < 0
    out[:, 1] = np.imag(s) < 0
    return out.reshape(-1)


def code_bits_used(n_symbols: int, scheme: Modulation | str) -> int:
    """Per-bit code indices consumed by a frame of ``n_symbols`` symbols."""
    return n_symbols * Modulation(scheme).bits_per_symbol


def spread(symbols: Sequence[complex], spec: ChaoticCodeSpec, start_bit: int,
           scheme: Modulation | str = Modulation.BPSK) -> np.ndarray:
    """Multiply each symbol by its per-bit chip sequence.

    QPSK spreads the in-phase and quadrature rails with consecutive codes.
    """
    scheme = Modulation(scheme)
    s = np.asarray(symbols, dtype=complex)
    if scheme is Modulation.BPSK:
        chips = chip_block(spec, start_bit, s.size)
        return (s[:, None] * chips).reshape(-1)
    chips = chip_block(spec, start_bit, 2 * s.size).reshape(s.size, 2, -1)
    wave = np.real(s)[:, None] * chips[:, 0] + 1j * np.imag(s)[:, None] * chips[:, 1]
    return wave.reshape(-1)


def despread(received: Sequence[complex], spec: ChaoticCodeSpec, start_bit: int,
             scheme: Modulation | str = Modulation.BPSK) -> np.ndarray:
    """Correlate each SL-chip window with the regenerated code, normalised by SL."""
    scheme = Modulation(scheme)
    r = np.asarray(received, dtype=complex)
    sl = spec.spreading_length
    if r.size % sl:
        raise ValueError(f"received length {r.size} is not a multiple of SL={sl}")
    n = r.size // sl
    windows = r.reshape(n, sl)
    if scheme is Modulation.BPSK:
        chips = chip_block(spec, start_bit, n)
        return (np.real(windows) * chips).sum(axis=1) / sl + 0j
    chips = chip_block(spec, start_bit, 2 * n).reshape(n, 2, sl)
    i = (np.real(windows) * chips[:, 0]).sum(axis=1) / sl
    q = (np.imag(windows) * chips[:, 1]).sum(axis=1) / sl
    return i + 1j * q


def measure_ber(tx_bits: Sequence[int], rx_bits: Sequence[int]) -> float:
    tx = np.asarray(tx_bits)
    rx = np.asarray(rx_bits)
    if tx.shape != rx.shape:
        raise ValueError(f"length mismatch: {tx.shape} vs {rx.shape}")
    if tx.size == 0:
        return 0.0
    return float(np.count_nonzero(tx != rx)) / tx.size


def pad_bits(bits: np.ndarray, scheme: Modulation | str) -> np.ndarray:
    if Modulation(scheme) is Modulation.QPSK and bits.size % 2:
        return np.concatenate([bits, [0]])
    return bits


def transmit_chain(data: Sequence[int], code: CodeSpec, spec: ChaoticCodeSpec,
                   scheme: Modulation | str, start_bit: int = 0) -> tuple[np.ndarray, int]:
    """encode -> bits -> modulate -> spread; returns (waveform, coded bit count)."""
    cw = rs_encode(data, code)
    bits = symbols_to_bits(cw, code.m)
    wave = spread(modulate(pad_bits(bits, scheme), scheme), spec, start_bit, scheme)
    return wave, bits.size


def receive_chain(wave: np.ndarray, code: CodeSpec, spec: ChaoticCodeSpec,
                  scheme: Modulation | str, n_bits: int, start_bit: int = 0):
    """despread -> demodulate -> RS decode; returns data symbols or None."""
    bits = demodulate(despread(wave, spec, start_bit, scheme), scheme)[:n_bits]
    cw = rs_decode(bits_to_symbols(bits, code.m), code)
    return None if cw is None else cw[: code.k]


@dataclass
class GoldenVector:
    code: CodeSpec
    modulation: Modulation
    spec: ChaoticCodeSpec
    payload: np.ndarray
    chips: np.ndarray

    @classmethod
    def build(cls, data: Sequence[int], code: CodeSpec, spec: ChaoticCodeSpec,
              modulation: Modulation | str) -> "GoldenVector":
        wave, _ = transmit_chain(data, code, spec, modulation)
        return cls(code, Modulation(modulation), spec, np.asarray(data, dtype=np.int64), wave)

    def write(self, path: str | Path) -> None:
        hexpay = "".join(f"{int(s):02x}" for s in self.payload)
        lines = [
            f"code={self.code.n},{self.code.k}",
            f"modulation={self.modulation.value}",
            f"sl={self.spec.spreading_length}",
            f"map={self.spec.map_family.value}",
            f"seed={self.spec.seed!r}",
            f"bifurcation={self.spec.bifurcation!r}",
            f"burn_in={self.spec.burn_in}",
            f"payload={hexpay}",
            "chips",
        ]
        for c in self.chips:
            lines.append(f"{c.real:.17g} {c.imag:.17g}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def read(cls, path: str | Path) -> "GoldenVector":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        idx = lines.index("chips")
        head = dict(line.split("=", 1) for line in lines[:idx])
        n, k = (int(v) for v in head["code"].split(","))
        spec = ChaoticCodeSpec(MapFamily(head["map"]), float(head["seed"]), int(head["sl"]),
                               float(head["bifurcation"]), int(head["burn_in"]))
        pay = head["payload"]
        payload = np.array([int(pay[i:i + 2], 16) for i in range(0, len(pay), 2)], dtype=np.int64)
        vals = [[float(t) for t in line.split()] for line in lines[idx + 1:] if line.strip()]
        arr = np.array(vals)
        chips = arr[:, 0] + 1j * arr[:, 1]
        return cls(CodeSpec(n, k), Modulation(head["modulation"]), spec, payload, chips)
