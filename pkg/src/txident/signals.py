"""Elementary complex-baseband DSP: buffers, modulation, detection, noise.

Everything downstream (impairment models, channel, framing) moves samples
around as :class:`IqBuffer` objects. Bit sequences are plain integer numpy
arrays with values in {0, 1}.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

DEFAULT_SAMPLE_RATE_HZ = 5e6

# Static payload pattern: the chip sequence a 2.4 GHz 802.15.4 radio emits
# during its preamble (the all-zero preamble octets spread by the symbol-0
# PN sequence). A fixed, full-bandwidth pattern every such radio transmits.
STATIC_PAYLOAD_BITS = np.array(
    [1, 1, 0, 1, 1, 0, 0, 1, 1, 1, 0, 0, 0, 0, 1, 1,
     0, 1, 0, 1, 0, 0, 1, 0, 0, 0, 1, 0, 1, 1, 1, 0], dtype=np.int64
)

# OFDM numerology used by the frame header: 64-point transform, 16-sample
# cyclic prefix, 48 BPSK data subcarriers at bins +/-1..26 excluding the
# classic pilot slots +/-7 and +/-21.
OFDM_NFFT = 64
OFDM_CP = 16
OFDM_SYMBOL_LEN = OFDM_NFFT + OFDM_CP
OFDM_DATA_BINS = np.array(
    [k % OFDM_NFFT for k in list(range(-26, 0)) + list(range(1, 27)) if abs(k) not in (7, 21)]
)
OFDM_BITS_PER_SYMBOL = len(OFDM_DATA_BINS)  # 48

# Scale so each OFDM symbol has unit mean power regardless of bit content.
_OFDM_SCALE = OFDM_NFFT / np.sqrt(OFDM_BITS_PER_SYMBOL)

# Fixed +/-1 scrambling cover over the data bins. Whitens the subcarrier
# pattern so that no bit combination (emitter ids are highly structured)
# produces a peaky symbol; worst-case peak over all 256 header ids is 2.38
# at unit mean power, safely inside every amplifier's monotonic region.
_OFDM_COVER = np.where(
    np.random.default_rng(3302).integers(0, 2, OFDM_BITS_PER_SYMBOL) == 0, 1.0, -1.0
)


class PayloadKind(str, Enum):
    """What the frame payload carries. None of them encode the emitter id."""

    STATIC = "static"
    RANDOM_BITS = "random_bits"
    NOISE = "noise"


@dataclass
class IqBuffer:
    """A run of complex baseband samples at a fixed sample rate."""

    samples: np.ndarray
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.complex128)
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        if self.samples.size and not np.all(np.isfinite(self.samples.view(np.float64))):
            raise ValueError("IqBuffer contains non-finite samples")

    def __len__(self) -> int:
        return len(self.samples)

    def mean_power(self) -> float:
        """Average of |s|^2 over the buffer."""
        return float(np.mean(np.abs(self.samples) ** 2)) if len(self) else 0.0


def zeros(n: int, sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ) -> IqBuffer:
    return IqBuffer(np.zeros(n, dtype=np.complex128), sample_rate_hz)


def concat(buffers: list[IqBuffer]) -> IqBuffer:
    """Concatenate buffers; they must agree on sample rate."""
    rates = {b.sample_rate_hz for b in buffers}
    if len(rates) != 1:
        raise ValueError(f"mismatched sample rates: {sorted(rates)}")
    return IqBuffer(np.concatenate([b.samples for b in buffers]), rates.pop())


def qpsk_modulate(bits: np.ndarray, sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ) -> IqBuffer:
    """Gray-mapped QPSK at one symbol per sample, unit average power.

    Bit pair (b0, b1) maps to ((1 - 2*b0) + 1j*(1 - 2*b1)) / sqrt(2), so
    every output sample sits on the unit circle.
    """
    bits = np.asarray(bits)
    if len(bits) % 2 != 0:
        raise ValueError("odd bit length")
    pairs = bits.reshape(-1, 2)
    symbols = ((1 - 2 * pairs[:, 0]) + 1j * (1 - 2 * pairs[:, 1])) / np.sqrt(2)
    return IqBuffer(symbols, sample_rate_hz)


def make_payload(
    kind: PayloadKind,
    length_samples: int,
    rng: np.random.Generator,
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ,
) -> IqBuffer:
    """Build one frame payload of the requested kind.

    Static tiles the fixed 802.15.4-preamble bit pattern; random draws fresh
    bits from ``rng``; noise draws i.i.d. samples with real and imaginary
    parts uniform on [-sqrt(3/2), +sqrt(3/2)] (unit mean power). All three
    kinds therefore have the same nominal power.
    """
    if length_samples <= 0:
        raise ValueError("length_samples must be positive")
    if kind == PayloadKind.STATIC:
        n_bits = 2 * length_samples
        reps = -(-n_bits // len(STATIC_PAYLOAD_BITS))
        bits = np.tile(STATIC_PAYLOAD_BITS, reps)[:n_bits]
        return qpsk_modulate(bits, sample_rate_hz)
    if kind == PayloadKind.RANDOM_BITS:
        return qpsk_modulate(rng.integers(0, 2, 2 * length_samples), sample_rate_hz)
    if kind == PayloadKind.NOISE:
        lim = np.sqrt(1.5)
        parts = rng.uniform(-lim, lim, (2, length_samples))
        return IqBuffer(parts[0] + 1j * parts[1], sample_rate_hz)
    raise ValueError(f"unknown payload kind: {kind!r}")


def make_preamble(
    length_samples: int = 63, sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ
) -> IqBuffer:
    """Zadoff-Chu detection preamble (root 1, odd length).

    Constant modulus with ideal cyclic autocorrelation, which makes the
    correlator's timing estimate sharp and testable.
    """
    if length_samples < 16:
        raise ValueError("preamble length must be >= 16")
    if length_samples % 2 == 0:
        raise ValueError("preamble length must be odd")
    n = np.arange(length_samples)
    seq = np.exp(-1j * np.pi * n * (n + 1) / length_samples)
    return IqBuffer(seq, sample_rate_hz)


def correlate_detect(
    signal: IqBuffer, reference: IqBuffer, threshold_ratio: float
) -> list[int]:
    """Find where ``reference`` occurs in ``signal`` by normalized correlation.

    Returns sample offsets where |<signal[k:k+L], reference>| divided by
    ||signal[k:k+L]|| * ||reference|| exceeds ``threshold_ratio``, keeping
    only local maxima separated by at least the reference length. The
    normalization makes the threshold amplitude-invariant.
    """
    if len(reference) == 0:
        raise ValueError("empty reference")
    if len(reference) > len(signal):
        raise ValueError("reference longer than signal")
    if not 0 < threshold_ratio <= 1:
        raise ValueError("threshold_ratio must be in (0, 1]")
    s, r = signal.samples, reference.samples
    L = len(r)
    corr = np.abs(np.correlate(s, r, mode="valid"))
    csum = np.concatenate([[0.0], np.cumsum(np.abs(s) ** 2)])
    window_energy = np.maximum(csum[L:] - csum[:-L], 0.0)
    denom = np.sqrt(window_energy) * np.linalg.norm(r)
    metric = np.divide(corr, denom, out=np.zeros_like(corr), where=denom > 0)

    candidates = np.flatnonzero(metric > threshold_ratio)
    # Greedy peak picking, strongest first, enforcing >= L separation.
    order = candidates[np.argsort(-metric[candidates], kind="stable")]
    accepted: list[int] = []
    for k in order:
        if all(abs(k - a) >= L for a in accepted):
            accepted.append(int(k))
    return sorted(accepted)


def add_awgn(signal: IqBuffer, snr_db: float, rng: np.random.Generator) -> IqBuffer:
    """Add complex white Gaussian noise at the given SNR.

    Noise variance is signal mean power / 10^(snr_db/10), split equally
    between the real and imaginary parts. ``snr_db=inf`` is the "no noise"
    sentinel and returns a copy of the input.
    """
    if np.isinf(snr_db) and snr_db > 0:
        return IqBuffer(signal.samples.copy(), signal.sample_rate_hz)
    power = signal.mean_power()
    if power == 0.0:
        raise ValueError("zero-power signal")
    var = power / 10 ** (snr_db / 10)
    parts = rng.standard_normal((2, len(signal)))
    noise = (parts[0] + 1j * parts[1]) * np.sqrt(var / 2)
    return IqBuffer(signal.samples + noise, signal.sample_rate_hz)


def ofdm_modulate(bits: np.ndarray, sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ) -> IqBuffer:
    """BPSK-OFDM modulate; one symbol per 48 bits, 80 samples per symbol.

    Each symbol carries bit j on data bin j after the fixed scrambling
    cover, scaled so the 64-sample transform core has exactly unit mean
    power (the cyclic prefix repeats part of the core).
    """
    bits = np.asarray(bits)
    if len(bits) == 0 or len(bits) % OFDM_BITS_PER_SYMBOL != 0:
        raise ValueError(f"bit count must be a positive multiple of {OFDM_BITS_PER_SYMBOL}")
    out = []
    for sym_bits in bits.reshape(-1, OFDM_BITS_PER_SYMBOL):
        spectrum = np.zeros(OFDM_NFFT, dtype=np.complex128)
        spectrum[OFDM_DATA_BINS] = (1.0 - 2.0 * sym_bits) * _OFDM_COVER
        sym = np.fft.ifft(spectrum) * _OFDM_SCALE
        out.append(np.concatenate([sym[-OFDM_CP:], sym]))
    return IqBuffer(np.concatenate(out), sample_rate_hz)


def ofdm_demodulate(samples: IqBuffer) -> np.ndarray:
    """Invert :func:`ofdm_modulate` by hard BPSK decisions per data bin."""
    if len(samples) == 0 or len(samples) % OFDM_SYMBOL_LEN != 0:
        raise ValueError(f"buffer length must be a positive multiple of {OFDM_SYMBOL_LEN}")
    bits = []
    for sym in samples.samples.reshape(-1, OFDM_SYMBOL_LEN):
        spectrum = np.fft.fft(sym[OFDM_CP:]) / _OFDM_SCALE
        vals = spectrum[OFDM_DATA_BINS] * _OFDM_COVER
        bits.append((vals.real < 0).astype(np.int64))
    return np.concatenate(bits)
