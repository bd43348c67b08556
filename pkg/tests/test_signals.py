import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from txident.signals import (
    IqBuffer,
    PayloadKind,
    add_awgn,
    concat,
    correlate_detect,
    make_payload,
    make_preamble,
    ofdm_modulate,
    ofdm_demodulate,
    qpsk_modulate,
    zeros,
)

INV_SQRT2 = 1.0 / np.sqrt(2.0)


class TestQpsk:
    def test_gray_mapping_corners(self):
        assert qpsk_modulate([0, 0]).samples[0] == pytest.approx(INV_SQRT2 + 1j * INV_SQRT2)
        assert qpsk_modulate([1, 1]).samples[0] == pytest.approx(-INV_SQRT2 - 1j * INV_SQRT2)
        assert qpsk_modulate([0, 1]).samples[0] == pytest.approx(INV_SQRT2 - 1j * INV_SQRT2)
        assert qpsk_modulate([1, 0]).samples[0] == pytest.approx(-INV_SQRT2 + 1j * INV_SQRT2)

    def test_unit_power_and_length(self):
        bits = np.random.default_rng(1).integers(0, 2, 1120)
        buf = qpsk_modulate(bits)
        assert len(buf) == 560
        assert buf.mean_power() == pytest.approx(1.0, abs=1e-12)

    def test_odd_bit_count_rejected(self):
        with pytest.raises(ValueError, match="odd"):
            qpsk_modulate([0, 1, 0])


class TestMakePayload:
    def test_static_is_deterministic(self):
        a = make_payload(PayloadKind.STATIC, 560, np.random.default_rng(0))
        b = make_payload(PayloadKind.STATIC, 560, np.random.default_rng(99))
        np.testing.assert_array_equal(a.samples, b.samples)

    def test_random_bits_stay_on_constellation(self):
        buf = make_payload(PayloadKind.RANDOM_BITS, 560, np.random.default_rng(3))
        assert len(buf) == 560
        points = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) * INV_SQRT2
        dist = np.abs(buf.samples[:, None] - points[None, :]).min(axis=1)
        assert dist.max() < 1e-12

    def test_noise_payload_unit_power(self):
        # Law of large numbers: empirical mean power over 1e5 samples.
        buf = make_payload(PayloadKind.NOISE, 100_000, np.random.default_rng(4))
        assert buf.mean_power() == pytest.approx(1.0, rel=0.01)

    def test_zero_length_rejected(self):
        with pytest.raises(ValueError):
            make_payload(PayloadKind.STATIC, 0, np.random.default_rng(0))


class TestPreamble:
    def test_constant_modulus(self):
        buf = make_preamble(63)
        np.testing.assert_allclose(np.abs(buf.samples), 1.0, atol=1e-12)

    def test_cyclic_autocorrelation(self):
        # Brute-force oracle over every cyclic lag.
        z = make_preamble(63).samples
        for lag in range(63):
            r = np.vdot(np.roll(z, lag), z)
            if lag == 0:
                assert abs(r) == pytest.approx(63.0, abs=1e-9)
            else:
                assert abs(r) < 1e-9

    def test_deterministic(self):
        np.testing.assert_array_equal(make_preamble(63).samples, make_preamble(63).samples)

    def test_length_validation(self):
        with pytest.raises(ValueError):
            make_preamble(15)
        with pytest.raises(ValueError):
            make_preamble(64)


class TestCorrelateDetect:
    def test_exact_embedded_copy(self):
        pre = make_preamble(63)
        sig = concat([zeros(100), pre, zeros(100)])
        assert correlate_detect(sig, pre, 0.9) == [100]

    def test_amplitude_invariance(self):
        pre = make_preamble(63)
        sig = concat([zeros(100), pre, zeros(100)])
        scaled = IqBuffer(sig.samples * 0.05)
        assert correlate_detect(scaled, pre, 0.9) == [100]

    def test_pure_noise_no_detections(self):
        pre = make_preamble(63)
        total = 0
        for trial in range(100):
            rng = np.random.default_rng(1000 + trial)
            noise = (rng.standard_normal(10_000) + 1j * rng.standard_normal(10_000)) / np.sqrt(2)
            total += len(correlate_detect(IqBuffer(noise), pre, 0.9))
        assert total == 0

    def test_detection_rate_at_10db(self):
        # Monte-Carlo detection-rate oracle: noise at 10 dB below the
        # (unit-power) preamble samples, embedded at offset 500.
        pre = make_preamble(63)
        clean = concat([zeros(500), pre, zeros(200)]).samples
        hits = 0
        for trial in range(1000):
            rng = np.random.default_rng(5000 + trial)
            noise = (rng.standard_normal(len(clean)) + 1j * rng.standard_normal(len(clean)))
            noisy = IqBuffer(clean + noise * np.sqrt(0.1 / 2))
            hits += correlate_detect(noisy, pre, 0.8) == [500]
        assert hits >= 999

    def test_validation(self):
        pre = make_preamble(63)
        with pytest.raises(ValueError):
            correlate_detect(zeros(10), IqBuffer(np.array([])), 0.5)
        with pytest.raises(ValueError):
            correlate_detect(zeros(10), pre, 0.5)
        with pytest.raises(ValueError):
            correlate_detect(concat([pre, pre]), pre, 1.5)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(min_value=0, max_value=64))
    def test_shift_equivariance(self, k):
        pre = make_preamble(63)
        base = concat([zeros(40), pre, zeros(40)])
        shifted = concat([zeros(k), base])
        assert correlate_detect(shifted, pre, 0.9) == [40 + k]


class TestAddAwgn:
    def test_infinite_snr_is_identity(self):
        sig = make_preamble(63)
        out = add_awgn(sig, np.inf, np.random.default_rng(0))
        np.testing.assert_array_equal(out.samples, sig.samples)

    def test_noise_power_at_0db(self):
        rng = np.random.default_rng(7)
        sig = make_payload(PayloadKind.NOISE, 1_000_000, rng)
        out = add_awgn(sig, 0.0, rng)
        noise_power = np.mean(np.abs(out.samples - sig.samples) ** 2)
        assert noise_power == pytest.approx(sig.mean_power(), rel=0.01)

    def test_deterministic_given_seed(self):
        sig = make_preamble(63)
        a = add_awgn(sig, 10.0, np.random.default_rng(42))
        b = add_awgn(sig, 10.0, np.random.default_rng(42))
        np.testing.assert_array_equal(a.samples, b.samples)

    def test_empirical_snr_within_tenth_db(self):
        rng = np.random.default_rng(11)
        sig = make_payload(PayloadKind.RANDOM_BITS, 100_000, rng)
        for snr_db in (0.0, 7.0, 20.0):
            out = add_awgn(sig, snr_db, np.random.default_rng(123))
            noise_power = np.mean(np.abs(out.samples - sig.samples) ** 2)
            measured = 10 * np.log10(sig.mean_power() / noise_power)
            assert abs(measured - snr_db) < 0.1

    def test_zero_power_rejected(self):
        with pytest.raises(ValueError, match="zero-power"):
            add_awgn(zeros(100), 10.0, np.random.default_rng(0))


class TestOfdm:
    def test_round_trip_identity(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            bits = rng.integers(0, 2, 48)
            np.testing.assert_array_equal(ofdm_demodulate(ofdm_modulate(bits)), bits)

    def test_symbol_length(self):
        assert len(ofdm_modulate(np.zeros(48, dtype=int))) == 80
        assert len(ofdm_modulate(np.zeros(96, dtype=int))) == 160

    def test_unit_core_power(self):
        bits = np.random.default_rng(5).integers(0, 2, 48)
        sym = ofdm_modulate(bits).samples
        core_power = np.mean(np.abs(sym[16:]) ** 2)
        assert core_power == pytest.approx(1.0, abs=1e-12)
        # CP repeats part of the core, so full-symbol power is only close.
        assert np.mean(np.abs(sym) ** 2) == pytest.approx(1.0, rel=0.25)

    def test_bit_count_validation(self):
        with pytest.raises(ValueError):
            ofdm_modulate(np.zeros(47, dtype=int))
        with pytest.raises(ValueError):
            ofdm_modulate(np.zeros(0, dtype=int))
        with pytest.raises(ValueError):
            ofdm_demodulate(zeros(79))

    def test_ber_zero_at_20db(self):
        # Monte-Carlo BER run: 1000 seeded 48-bit headers through AWGN.
        rng = np.random.default_rng(8)
        errors = 0
        for trial in range(1000):
            bits = rng.integers(0, 2, 48)
            sym = ofdm_modulate(bits)
            noisy = add_awgn(sym, 20.0, np.random.default_rng(9000 + trial))
            errors += int(np.sum(ofdm_demodulate(noisy) != bits))
        assert errors == 0


class TestIqBuffer:
    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="finite"):
            IqBuffer(np.array([1.0, np.nan]))
        with pytest.raises(ValueError, match="finite"):
            IqBuffer(np.array([1.0, np.inf * 1j]))

    def test_rejects_bad_rate(self):
        with pytest.raises(ValueError):
            IqBuffer(np.array([1.0]), sample_rate_hz=0)

    def test_concat_rate_mismatch(self):
        with pytest.raises(ValueError, match="sample rates"):
            concat([zeros(3, 5e6), zeros(3, 1e6)])
