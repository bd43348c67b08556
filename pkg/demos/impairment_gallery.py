"""
Hardware impairment gallery
===========================

What each transmitter imperfection does to a QPSK constellation, one panel
per effect, plus the combined chain for two different emitters. The
combined panels are the "fingerprint": same payload in, visibly different
clouds out.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from txident.impairments import (
    EmitterProfile,
    apply_cfo,
    apply_emitter_chain,
    apply_iq_imbalance,
    apply_pa_nonlinearity,
    sample_profiles,
)
from txident.signals import PayloadKind, make_payload

rng = np.random.default_rng(0)
payload = make_payload(PayloadKind.RANDOM_BITS, 2000, rng)

neutral = dict(
    emitter_id=0, iq_gain_mismatch=0.0, iq_phase_error_rad=0.0, dc_offset=0j,
    cfo_ppm=0.0, cfo_drift_ppm_per_s=0.0, carrier_hz=433e6,
    pa_a1=1.0, pa_a3=0.0, pa_phase3_rad_per_power=0.0, calibrated=False,
)

panels = [
    ("clean QPSK", payload),
    (
        "IQ imbalance (exaggerated)",
        apply_iq_imbalance(payload, EmitterProfile(**{**neutral, "iq_gain_mismatch": 0.2,
                                                      "iq_phase_error_rad": 0.15})),
    ),
    (
        "DC offset / LO leakage",
        apply_iq_imbalance(payload, EmitterProfile(**{**neutral, "dc_offset": 0.15 + 0.1j})),
    ),
    (
        "PA compression (AM/AM + AM/PM)",
        apply_pa_nonlinearity(payload, EmitterProfile(**{**neutral, "pa_a1": 1.0,
                                                         "pa_a3": -0.25,
                                                         "pa_phase3_rad_per_power": 0.4})),
    ),
    (
        "carrier frequency offset",
        apply_cfo(payload, EmitterProfile(**{**neutral, "cfo_ppm": 40.0}), t0_s=0.0),
    ),
]

# Two realistic (uncalibrated) emitters on the same payload.
emitters = sample_profiles(2, calibrated=False, rng=np.random.default_rng(7))
for p in emitters:
    panels.append((f"emitter {p.emitter_id} full chain", apply_emitter_chain(payload, p, t0_s=0.0)))

fig, axes = plt.subplots(2, 4, figsize=(14, 7), sharex=True, sharey=True)
for ax, (title, buf) in zip(axes.flat, panels):
    ax.scatter(buf.samples.real, buf.samples.imag, s=2, alpha=0.4)
    ax.set_title(title, fontsize=9)
    ax.grid(alpha=0.3)
    ax.set_aspect("equal")
axes.flat[-1].axis("off")
fig.suptitle("Transmitter impairments on a QPSK payload")
fig.tight_layout()
fig.savefig("demos_impairment_gallery.png", dpi=130)
print("wrote demos_impairment_gallery.png")
