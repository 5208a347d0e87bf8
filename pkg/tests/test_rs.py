import itertools

import numpy as np
import pytest

from cdmaharq.rs import (PAPER_CODES, CodeSpec, accumulate_and_decode, bits_to_symbols, codebook,
                         ml_decode_bpsk, rs_decode, rs_encode, select_round_portion, symbols_to_bits)


@pytest.mark.parametrize("n,k", PAPER_CODES)
def test_round_trip_every_code(n, k, rng):
    code = CodeSpec(n, k)
    data = rng.integers(0, n + 1, k)
    cw = rs_encode(data, code)
    np.testing.assert_array_equal(cw[:k], data)
    np.testing.assert_array_equal(rs_decode(cw, code)[:k], data)


def test_zero_data_gives_zero_codeword():
    assert not rs_encode([0, 0, 0], CodeSpec(7, 3)).any()


def test_code_parameters():
    c = CodeSpec(15, 9)
    assert (c.m, c.d, c.t, c.nsym, c.info_bits) == (4, 7, 3, 6, 36)
    assert c.rate == pytest.approx(0.6)
    with pytest.raises(ValueError):
        CodeSpec(10, 3)
    with pytest.raises(ValueError):
        CodeSpec(7, 7)


def test_fifteen_nine_corrects_three_not_four(rng):
    code = CodeSpec(15, 9)
    for _ in range(50):
        data = rng.integers(0, 16, 9)
        cw = rs_encode(data, code)
        bad = cw.copy()
        pos = rng.choice(15, 3, replace=False)
        bad[pos] ^= rng.integers(1, 16, 3)
        np.testing.assert_array_equal(rs_decode(bad, code)[:9], data)
        pos = rng.choice(15, 4, replace=False)
        bad = cw.copy()
        bad[pos] ^= rng.integers(1, 16, 4)
        out = rs_decode(bad, code)
        assert out is None or not np.array_equal(out, cw)


def test_schedule_seven_three_two_rounds():
    code = CodeSpec(7, 3, max_rounds=2)
    assert code.round_positions(1) == (0, 1, 2, 3, 4)
    assert code.round_positions(2) == (5, 6)


def test_single_round_sends_everything():
    assert CodeSpec(15, 9, max_rounds=1).round_positions(1) == tuple(range(15))


@pytest.mark.parametrize("n,k", PAPER_CODES)
@pytest.mark.parametrize("rounds", [1, 2, 3, 4])
def test_portions_partition_codeword(n, k, rounds):
    code = CodeSpec(n, k, max_rounds=rounds)
    sent = [p for r in range(1, rounds + 1) for p in code.round_positions(r)]
    assert sorted(sent) == list(range(n))


def test_round_one_with_one_error_decodes():
    code = CodeSpec(7, 3, max_rounds=2)
    cw = rs_encode([1, 2, 3], code)
    r1 = select_round_portion(cw, code, 1)
    r1[0] ^= 5
    np.testing.assert_array_equal(accumulate_and_decode([r1], code), [1, 2, 3])


def test_round_one_two_errors_then_round_two_rescues():
    code = CodeSpec(7, 3, max_rounds=2)
    cw = rs_encode([6, 0, 4], code)
    r1 = select_round_portion(cw, code, 1)
    r1[0] ^= 1
    r1[3] ^= 2
    early = accumulate_and_decode([r1], code)
    assert early is None or not np.array_equal(early, [6, 0, 4])  # beyond 2e + f < d: fail or miscorrect
    r2 = select_round_portion(cw, code, 2)
    np.testing.assert_array_equal(accumulate_and_decode([r1, r2], code), [6, 0, 4])


def test_exhaustive_errors_and_erasures_boundary_7_3():
    code = CodeSpec(7, 3)
    data = np.array([3, 5, 7])
    cw = rs_encode(data, code)
    violations = 0
    for f in range(5):
        for erased in itertools.combinations(range(7), f):
            rest = [p for p in range(7) if p not in erased]
            for e in range(min(3, len(rest)) + 1):
                for errs in itertools.combinations(rest, e):
                    rx = cw.copy()
                    rx[list(errs)] ^= 1
                    out = rs_decode(rx, code, erasures=erased)
                    ok = out is not None and np.array_equal(out, cw)
                    violations += ok != (2 * e + f < 5)
    assert violations == 0


def test_bit_symbol_conversion():
    sym = np.array([0, 7, 5, 2])
    bits = symbols_to_bits(sym, 3)
    assert bits.tolist() == [0, 0, 0, 1, 1, 1, 1, 0, 1, 0, 1, 0]
    np.testing.assert_array_equal(bits_to_symbols(bits, 3), sym)


def test_codebook_size_and_linearity():
    cb = codebook(7, 3)
    assert cb.shape == (512, 7)
    assert len({tuple(r) for r in cb}) == 512


def test_ml_decoder_noiseless():
    code = CodeSpec(7, 3)
    data = np.array([[1, 2, 3], [7, 0, 4]])
    bits = np.stack([symbols_to_bits(rs_encode(d, code), 3) for d in data])
    np.testing.assert_array_equal(ml_decode_bpsk(1.0 - 2.0 * bits, code), data)
