"""Transmitter hardware imperfection models.

Each emitter gets an :class:`EmitterProfile` drawn once and held fixed: I/Q
branch gain/phase mismatch, oscillator leakage (a DC term at baseband),
carrier frequency offset with slow thermal drift, and a memoryless cubic
power-amplifier nonlinearity. Applied to otherwise identical payloads, the
profile is the device signature a classifier can learn.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .signals import IqBuffer

DEFAULT_CARRIER_HZ = 433e6

# Uncalibrated parameter ranges, consistent with commodity-SDR tolerances.
IQ_GAIN_MISMATCH_RANGE = (-0.03, 0.03)
IQ_PHASE_ERROR_RANGE = (-0.03, 0.03)
DC_OFFSET_MAG_RANGE = (0.0, 0.01)
CFO_PPM_RANGE = (-2.0, 2.0)
CFO_DRIFT_RANGE = (-0.01, 0.01)
PA_A1_RANGE = (0.95, 1.05)
PA_A3_RANGE = (-0.05, -0.005)
PA_PHASE3_RANGE = (0.0, 0.05)

# Calibration removes I/Q imbalance and DC offset down to small residuals,
# but cannot touch the oscillator or the amplifier.
CALIBRATION_RESIDUAL_FACTOR = 1.0 / 30.0


class PaOverdrivenError(ValueError):
    """Input drove the amplifier model beyond its monotonic region."""


@dataclass(frozen=True)
class EmitterProfile:
    """One emitter's fixed hardware imperfection parameters."""

    emitter_id: int
    iq_gain_mismatch: float
    iq_phase_error_rad: float
    dc_offset: complex
    cfo_ppm: float
    cfo_drift_ppm_per_s: float
    carrier_hz: float
    pa_a1: float
    pa_a3: float
    pa_phase3_rad_per_power: float
    calibrated: bool

    def pa_monotonic_limit(self) -> float:
        """Largest input amplitude where the cubic AM/AM curve still rises."""
        if self.pa_a3 >= 0:
            return np.inf
        return float(np.sqrt(self.pa_a1 / (3.0 * abs(self.pa_a3))))


def sample_profiles(
    n: int, calibrated: bool, rng: np.random.Generator
) -> list[EmitterProfile]:
    """Draw ``n`` independent emitter profiles from the declared ranges."""
    if n < 2:
        raise ValueError("need at least 2 emitters to pose a classification problem")
    resid = CALIBRATION_RESIDUAL_FACTOR if calibrated else 1.0
    eps = rng.uniform(*IQ_GAIN_MISMATCH_RANGE, n) * resid
    phi = rng.uniform(*IQ_PHASE_ERROR_RANGE, n) * resid
    dc_mag = rng.uniform(*DC_OFFSET_MAG_RANGE, n) * resid
    dc_phase = rng.uniform(0.0, 2 * np.pi, n)
    cfo = rng.uniform(*CFO_PPM_RANGE, n)
    drift = rng.uniform(*CFO_DRIFT_RANGE, n)
    a1 = rng.uniform(*PA_A1_RANGE, n)
    a3 = rng.uniform(*PA_A3_RANGE, n)
    k3 = rng.uniform(*PA_PHASE3_RANGE, n)
    return [
        EmitterProfile(
            emitter_id=i,
            iq_gain_mismatch=float(eps[i]),
            iq_phase_error_rad=float(phi[i]),
            dc_offset=complex(dc_mag[i] * np.exp(1j * dc_phase[i])),
            cfo_ppm=float(cfo[i]),
            cfo_drift_ppm_per_s=float(drift[i]),
            carrier_hz=DEFAULT_CARRIER_HZ,
            pa_a1=float(a1[i]),
            pa_a3=float(a3[i]),
            pa_phase3_rad_per_power=float(k3[i]),
            calibrated=calibrated,
        )
        for i in range(n)
    ]


def apply_iq_imbalance(x: IqBuffer, profile: EmitterProfile) -> IqBuffer:
    """Gain/phase mismatch between the I and Q branches, plus LO leakage.

    I' = (1+eps)*I, Q' = (1-eps)*(Q*cos(phi) + I*sin(phi)), then the DC
    offset is added. Neutral parameters are an exact identity.
    """
    eps = profile.iq_gain_mismatch
    phi = profile.iq_phase_error_rad
    i, q = x.samples.real, x.samples.imag
    i_out = (1.0 + eps) * i
    q_out = (1.0 - eps) * (q * np.cos(phi) + i * np.sin(phi))
    return IqBuffer(i_out + 1j * q_out + profile.dc_offset, x.sample_rate_hz)


def apply_pa_nonlinearity(x: IqBuffer, profile: EmitterProfile) -> IqBuffer:
    """Memoryless cubic AM/AM + AM/PM amplifier model.

    y = (a1*|s| + a3*|s|^3) * exp(1j*(arg(s) + k3*|s|^2)), computed in the
    equivalent multiplicative form s * (a1 + a3*|s|^2) * exp(1j*k3*|s|^2).
    Raises if any sample leaves the cubic model's monotonic region.
    """
    r2 = np.abs(x.samples) ** 2
    limit = profile.pa_monotonic_limit()
    if np.isfinite(limit) and r2.size and np.max(r2) > limit**2 * (1 + 1e-9):
        raise PaOverdrivenError(
            f"PA overdriven: peak amplitude {np.sqrt(np.max(r2)):.3f} "
            f"exceeds monotonic limit {limit:.3f}"
        )
    gain = profile.pa_a1 + profile.pa_a3 * r2
    rotation = np.exp(1j * (profile.pa_phase3_rad_per_power * r2))
    return IqBuffer(x.samples * gain * rotation, x.sample_rate_hz)


def apply_cfo(x: IqBuffer, profile: EmitterProfile, t0_s: float) -> IqBuffer:
    """Carrier frequency offset as a baseband phase ramp.

    The offset is carrier_hz * (cfo_ppm + drift * t0_s) * 1e-6, evaluated
    once per packet (drift over one packet is negligible). The phase ramp
    runs on the experiment clock, t0_s + n/fs, so packets sent later start
    at a different carrier phase, as they would on hardware.
    """
    if t0_s < 0:
        raise ValueError("t0_s must be non-negative")
    f = profile.carrier_hz * (profile.cfo_ppm + profile.cfo_drift_ppm_per_s * t0_s) * 1e-6
    if f == 0.0:
        return IqBuffer(x.samples.copy(), x.sample_rate_hz)
    t = t0_s + np.arange(len(x)) / x.sample_rate_hz
    return IqBuffer(x.samples * np.exp(2j * np.pi * f * t), x.sample_rate_hz)


def apply_emitter_chain(x: IqBuffer, profile: EmitterProfile, t0_s: float) -> IqBuffer:
    """Full transmit path: baseband mismatch, then amplifier, then up-conversion error."""
    y = apply_iq_imbalance(x, profile)
    y = apply_pa_nonlinearity(y, profile)
    return apply_cfo(y, profile, t0_s)


def save_profiles(profiles: list[EmitterProfile], path: str | Path) -> None:
    """Write profiles to JSON, one object per emitter, field names as-is."""
    records = []
    for p in profiles:
        rec = asdict(p)
        rec["dc_offset"] = [p.dc_offset.real, p.dc_offset.imag]
        records.append(rec)
    Path(path).write_text(json.dumps(records, indent=2, sort_keys=True) + "\n")


def load_profiles(path: str | Path) -> list[EmitterProfile]:
    records = json.loads(Path(path).read_text())
    out = []
    for rec in records:
        rec = dict(rec)
        re_im = rec.pop("dc_offset")
        out.append(EmitterProfile(dc_offset=complex(re_im[0], re_im[1]), **rec))
    return out
