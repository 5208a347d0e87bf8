"""Single-link Monte-Carlo experiments over AWGN: BER, packet error rate, wrong-seed despreading.

SNR is per chip, ``P / (N0 W)``; despreading then adds the processing gain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.stats import binomtest

from . import analytics
from .chaos import ChaoticCodeSpec, MapFamily, chip_block
from .channel import awgn
from .modem import Modulation, demodulate, despread, modulate, pad_bits, spread
from .rs import (CodeSpec, bits_to_symbols, ml_decode_bpsk, rs_decode, rs_encode,
                 symbols_to_bits)


@dataclass
class BerPoint:
    snr_db: float
    sl: int
    bits: int
    errors: int
    packets: int = 0
    packet_errors: int = 0

    @property
    def ber(self) -> float:
        return self.errors / self.bits if self.bits else 0.0

    @property
    def per(self) -> float:
        return self.packet_errors / self.packets if self.packets else 0.0


def ber_point(scheme: Modulation | str, code: CodeSpec, sl: int, snr_db: float, n_bits: int,
              rng: np.random.Generator, family: MapFamily | str = MapFamily.LOGISTIC,
              seed: float = 0.3) -> BerPoint:
    """Raw (pre-FEC) BER and RS packet errors for one (SL, SNR) cell.

    Packets are RS codewords of random data; enough packets are sent to
    cover ``n_bits`` coded bits.
    """
    scheme = Modulation(scheme)
    spec = ChaoticCodeSpec(family, seed, sl)
    cw_bits = code.n * code.m
    n_pk = max(1, math.ceil(n_bits / cw_bits))
    data = rng.integers(0, 1 << code.m, size=(n_pk, code.k))
    cws = np.stack([rs_encode(d, code) for d in data])
    bits = np.concatenate([pad_bits(symbols_to_bits(c, code.m), scheme) for c in cws])
    per_pk = bits.size // n_pk
    wave = spread(modulate(bits, scheme), spec, 0, scheme)
    noise_power = 10 ** (-snr_db / 10.0)
    rx = wave + awgn(wave.size, noise_power, rng)
    hard = demodulate(despread(rx, spec, 0, scheme), scheme)
    errors = int(np.count_nonzero(hard != bits))
    pk_err = 0
    for p in range(n_pk):
        hb = hard[p * per_pk: p * per_pk + cw_bits]
        dec = rs_decode(bits_to_symbols(hb, code.m), code)
        if dec is None or not np.array_equal(dec[: code.k], data[p]):
            pk_err += 1
    return BerPoint(snr_db, sl, int(bits.size), errors, n_pk, pk_err)


def ber_sweep(scheme, code: CodeSpec, sls: Sequence[int], snrs_db: Sequence[float], n_bits: int,
              seed: int = 0) -> list[BerPoint]:
    """Grid of BER cells; each cell has its own keyed generator."""
    out = []
    for i, snr in enumerate(snrs_db):
        for j, sl in enumerate(sls):
            rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i, j)))
            out.append(ber_point(scheme, code, sl, snr, n_bits, rng))
    return out


def wrong_seed_ber(n_bits: int, sl: int, rng: np.random.Generator, true_seed: float = 0.3,
                   wrong_seed: float = 0.7, family: MapFamily | str = MapFamily.LOGISTIC,
                   noise_power: float = 0.0) -> tuple[float, float]:
    """(BER with the wrong seed, BER with the right seed) for BPSK, optionally noiseless."""
    tx = ChaoticCodeSpec(family, true_seed, sl)
    bad = tx.with_seed(wrong_seed)
    bits = rng.integers(0, 2, n_bits)
    wave = spread(modulate(bits, Modulation.BPSK), tx, 0)
    if noise_power > 0:
        wave = wave + awgn(wave.size, noise_power, rng)
    right = demodulate(despread(wave, tx, 0), Modulation.BPSK)
    wrong = demodulate(despread(wave, bad, 0), Modulation.BPSK)
    return float(np.mean(wrong != bits)), float(np.mean(right != bits))


# ---------------------------------------------------------------------------
# packet error rate versus the CDMA bound


def snr_for_bound(target: float, k_bits: int, sl: int, code: CodeSpec) -> float:
    """Per-chip P/J (linear) at which the CDMA bound equals ``target``."""
    from scipy.optimize import brentq

    def f(log_x):
        return analytics.cdma_error_bound(k_bits, 10 ** log_x, 1.0, sl, code.rate, code.d) - target

    return 10 ** brentq(f, -8, 4)


@dataclass
class PerResult:
    snr_linear: float
    bound: float
    packets: int
    errors: int
    decoder: str

    @property
    def per(self) -> float:
        return self.errors / self.packets

    def p_value(self) -> float:
        """One-sided test of 'true PER exceeds the bound'; small values reject dominance."""
        if self.bound >= 1.0:
            return 1.0
        return float(binomtest(self.errors, self.packets, self.bound, alternative="greater").pvalue)


def packet_error_rate(code: CodeSpec, sl: int, snr_linear: float, n_packets: int,
                      rng: np.random.Generator, decoder: str = "ml",
                      spec_seed: float = 0.3) -> PerResult:
    """BPSK, chaotic spreading, AWGN; decoder is 'ml' (soft, exhaustive) or 'hard' (RS algebraic)."""
    spec = ChaoticCodeSpec(MapFamily.LOGISTIC, spec_seed, sl)
    cw_bits = code.n * code.m
    data = rng.integers(0, 1 << code.m, size=(n_packets, code.k))
    bits = np.stack([symbols_to_bits(rs_encode(d, code), code.m) for d in data])
    chips = chip_block(spec, 0, cw_bits)  # same chips for every packet
    tx = (1.0 - 2.0 * bits)[:, :, None] * chips[None, :, :]
    noise_power = 1.0 / snr_linear
    noise = math.sqrt(noise_power / 2.0) * rng.standard_normal(tx.shape)
    soft = ((tx + noise) * chips[None, :, :]).sum(axis=2) / sl
    if decoder == "ml":
        est = ml_decode_bpsk(soft, code)
        errors = int(np.count_nonzero(np.any(est != data, axis=1)))
    elif decoder == "hard":
        hard = (soft < 0).astype(np.int64)
        errors = 0
        for p in range(n_packets):
            dec = rs_decode(bits_to_symbols(hard[p], code.m), code)
            if dec is None or not np.array_equal(dec[: code.k], data[p]):
                errors += 1
    else:
        raise ValueError(f"unknown decoder {decoder!r}")
    bound = analytics.cdma_error_bound(code.k * code.m, snr_linear, 1.0, sl, code.rate, code.d)
    return PerResult(snr_linear, bound, n_packets, errors, decoder)
