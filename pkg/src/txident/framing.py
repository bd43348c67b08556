"""Frame structure, the millisecond scheduler, and the packet pipeline.

A frame is laid out as wake-up zeros | preamble | header | guard | payload.
The header is a single OFDM symbol carrying the emitter id protected by a
CRC so that a corrupted header can never silently mislabel a recording.
The receiver correlates for the preamble, least-squares-estimates the
channel response from it, equalizes and decodes the header, and slices the
fixed 600-sample payload window the classifier consumes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelState, ScenarioConfig, payload_amplitude, propagate
from .impairments import EmitterProfile, apply_emitter_chain
from .signals import (
    OFDM_BITS_PER_SYMBOL,
    OFDM_CP,
    OFDM_DATA_BINS,
    OFDM_NFFT,
    OFDM_SYMBOL_LEN,
    _OFDM_COVER,
    _OFDM_SCALE,
    IqBuffer,
    PayloadKind,
    add_awgn,
    concat,
    correlate_detect,
    make_payload,
    make_preamble,
    ofdm_modulate,
    zeros,
)

# Header transmitted 3 dB below the payload: bounds its OFDM peaks inside
# the amplifier's monotonic region for every possible emitter id.
HEADER_AMPLITUDE = 1.0 / np.sqrt(2.0)

# Silence appended after the burst (amplifier off) so the receiver's payload
# window and the channel tail always fit inside the capture.
POST_BURST_SILENCE = 40

DETECT_THRESHOLD = 0.6
CIR_ESTIMATE_TAPS = 8

WINDOW_LEN = 600
WINDOW_PREROLL = 20  # window starts 20 samples before the nominal payload start


def crc16_ccitt(data: bytes) -> int:
    """CRC-16/CCITT-FALSE: polynomial 0x1021, init 0xFFFF, no reflection."""
    crc = 0xFFFF
    for byte in data:
        crc ^= byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x1021) & 0xFFFF if crc & 0x8000 else (crc << 1) & 0xFFFF
    return crc


@dataclass(frozen=True)
class FrameLayout:
    """Sample counts for each frame section."""

    wakeup_zeros: int = 200
    preamble_len: int = 63
    guard_gap: int = 100
    payload_len: int = 560

    @property
    def header_len(self) -> int:
        return OFDM_SYMBOL_LEN

    @property
    def frame_len(self) -> int:
        return (
            self.wakeup_zeros
            + self.preamble_len
            + self.header_len
            + self.guard_gap
            + self.payload_len
        )

    def payload_start(self, detect_offset: int) -> int:
        """Nominal payload start given the detected preamble offset."""
        return detect_offset + self.preamble_len + self.header_len + self.guard_gap


DEFAULT_LAYOUT = FrameLayout()


@dataclass
class Frame:
    wakeup_zeros: int
    preamble: IqBuffer
    header: IqBuffer
    guard_gap: int
    payload: IqBuffer

    def serialize(self) -> IqBuffer:
        rate = self.payload.sample_rate_hz
        return concat(
            [
                zeros(self.wakeup_zeros, rate),
                self.preamble,
                self.header,
                zeros(self.guard_gap, rate),
                self.payload,
            ]
        )


@dataclass(frozen=True)
class ScheduleEvent:
    time_s: float
    emitter_id: int


@dataclass
class ReceivedPacket:
    """Receiver output for one capture; ``emitter_id_decoded`` is None when
    the header CRC failed (the packet is flagged and excluded downstream)."""

    emitter_id_decoded: int | None
    payload_window: IqBuffer
    detect_offset: int
    rx_time_s: float


def header_bits(emitter_id: int) -> np.ndarray:
    """8-bit id, 16-bit CRC over the id byte, zero padding to 48 bits."""
    if not 0 <= emitter_id <= 0xFF:
        raise ValueError("emitter_id must fit in 8 bits")
    crc = crc16_ccitt(bytes([emitter_id]))
    id_bits = [(emitter_id >> (7 - i)) & 1 for i in range(8)]
    crc_bits = [(crc >> (15 - i)) & 1 for i in range(16)]
    pad = [0] * (OFDM_BITS_PER_SYMBOL - 24)
    return np.array(id_bits + crc_bits + pad, dtype=np.int64)


def schedule(
    n_emitters: int, duration_s: float, rng: np.random.Generator
) -> list[ScheduleEvent]:
    """One event per millisecond, emitter chosen uniformly at random."""
    if n_emitters < 2:
        raise ValueError("need at least 2 emitters")
    if duration_s <= 0:
        raise ValueError("duration_s must be positive")
    n_events = int(round(duration_s * 1000))
    ids = rng.integers(0, n_emitters, n_events)
    return [ScheduleEvent(time_s=k * 1e-3, emitter_id=int(ids[k])) for k in range(n_events)]


def build_frame(
    emitter_id: int, payload: IqBuffer, layout: FrameLayout = DEFAULT_LAYOUT
) -> Frame:
    if len(payload) != layout.payload_len:
        raise ValueError(f"payload must be {layout.payload_len} samples, got {len(payload)}")
    header = ofdm_modulate(header_bits(emitter_id), payload.sample_rate_hz)
    header = IqBuffer(header.samples * HEADER_AMPLITUDE, header.sample_rate_hz)
    return Frame(
        wakeup_zeros=layout.wakeup_zeros,
        preamble=make_preamble(layout.preamble_len, payload.sample_rate_hz),
        header=header,
        guard_gap=layout.guard_gap,
        payload=payload,
    )


def transmit_packet(
    event: ScheduleEvent,
    profile: EmitterProfile,
    link: ChannelState,
    scenario: ScenarioConfig,
    payload_kind: PayloadKind,
    rng: np.random.Generator,
    layout: FrameLayout = DEFAULT_LAYOUT,
) -> tuple[IqBuffer, ChannelState]:
    """One scheduled emission, end to end: frame -> hardware -> channel -> noise.

    The per-payload amplitude scales the whole frame (samples are scaled
    before they reach the radio). Returns the air capture and the possibly
    advanced channel state.
    """
    payload = make_payload(payload_kind, layout.payload_len, rng)
    frame = build_frame(event.emitter_id, payload, layout)
    burst = frame.serialize()
    amp = payload_amplitude(scenario, rng)
    burst = IqBuffer(burst.samples * amp, burst.sample_rate_hz)
    burst = apply_emitter_chain(burst, profile, t0_s=event.time_s)
    burst = concat([burst, zeros(POST_BURST_SILENCE, burst.sample_rate_hz)])
    air, link = propagate(burst, link, rng)
    air = add_awgn(air, scenario.snr_db, rng)
    return air, link


def _estimate_cir(air: np.ndarray, ref: np.ndarray, offset: int, n_taps: int) -> np.ndarray:
    """Least-squares channel impulse response from the received preamble.

    Uses only the fully-supported region of the preamble convolution
    (n = n_taps-1 .. L-1), which is free of wake-up-zero and header energy.
    """
    L = len(ref)
    rows = L - n_taps + 1
    a = np.empty((rows, n_taps), dtype=np.complex128)
    for j in range(n_taps):
        a[:, j] = ref[n_taps - 1 - j : L - j]
    y = air[offset + n_taps - 1 : offset + L]
    h, *_ = np.linalg.lstsq(a, y, rcond=None)
    return h


def receive_packet(
    air: IqBuffer,
    reference_preamble: IqBuffer,
    layout: FrameLayout = DEFAULT_LAYOUT,
    threshold_ratio: float = DETECT_THRESHOLD,
    t0_s: float = 0.0,
) -> ReceivedPacket | None:
    """Detect, decode, and slice one frame out of a capture.

    Returns None when no preamble is detected or the capture is too short
    to contain a complete frame at the detected offset ("no frame"). A
    detected frame whose header fails the CRC comes back with
    ``emitter_id_decoded=None``.
    """
    offsets = correlate_detect(air, reference_preamble, threshold_ratio)
    if not offsets:
        return None
    k = offsets[0]
    s = air.samples
    window_start = layout.payload_start(k) - WINDOW_PREROLL
    window_end = window_start + WINDOW_LEN
    if window_start < 0 or window_end > len(s):
        return None

    # Equalize the header with the preamble-derived channel estimate, then
    # decide each BPSK bin by matched filter (no division by faded bins).
    h = _estimate_cir(s, reference_preamble.samples, k, CIR_ESTIMATE_TAPS)
    h_freq = np.fft.fft(h, OFDM_NFFT)
    hdr = s[k + layout.preamble_len : k + layout.preamble_len + layout.header_len]
    spectrum = np.fft.fft(hdr[OFDM_CP:]) / _OFDM_SCALE
    metric = (spectrum[OFDM_DATA_BINS] * np.conj(h_freq[OFDM_DATA_BINS])).real * _OFDM_COVER
    bits = (metric < 0).astype(np.int64)

    decoded_id = int(np.polyval(bits[:8], 2))
    crc_rx = int(np.polyval(bits[8:24], 2))
    ok = crc16_ccitt(bytes([decoded_id])) == crc_rx

    return ReceivedPacket(
        emitter_id_decoded=decoded_id if ok else None,
        payload_window=IqBuffer(s[window_start:window_end].copy(), air.sample_rate_hz),
        detect_offset=k,
        rx_time_s=t0_s + k / air.sample_rate_hz,
    )
