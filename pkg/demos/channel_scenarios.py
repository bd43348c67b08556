"""
Channel scenarios and the environment change
============================================

Left: the same emitter's recorded windows under the three scenarios --
plain (fixed amplitude, fixed room), varying amplitude, and robot (one
reflection wandering per packet). Right: each link's frequency response
before and after the "metallic stool" perturbation that the resilience
study uses.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from txident.channel import (
    Scenario,
    ScenarioConfig,
    draw_environment_change,
    make_links,
    perturb_environment,
)
from txident.framing import ScheduleEvent, receive_packet, transmit_packet
from txident.impairments import sample_profiles
from txident.signals import PayloadKind, make_preamble

profiles = sample_profiles(4, calibrated=True, rng=np.random.default_rng(1))
reference = make_preamble(63)

fig, (left, right) = plt.subplots(1, 2, figsize=(13, 5))

offset = 0.0
for scen in (Scenario.PLAIN, Scenario.VARYING, Scenario.ROBOT):
    cfg = ScenarioConfig(scenario=scen, snr_db=20.0)
    rng = np.random.default_rng(5)
    links = make_links(profiles, cfg, np.random.default_rng(2))
    magnitudes = []
    for k in range(6):
        event = ScheduleEvent(time_s=k * 1e-3, emitter_id=0)
        air, links[0] = transmit_packet(event, profiles[0], links[0], cfg, PayloadKind.STATIC, rng)
        packet = receive_packet(air, reference)
        magnitudes.append(np.abs(packet.payload_window.samples))
    trace = np.concatenate(magnitudes)
    left.plot(trace + offset, lw=0.5, label=scen.value)
    offset += 1.5
left.set_title("six consecutive windows, emitter 0 (traces offset)")
left.set_xlabel("sample")
left.set_ylabel("|window|")
left.legend(loc="upper right")

links = make_links(profiles, ScenarioConfig(scenario=Scenario.PLAIN), np.random.default_rng(2))
rng_env = np.random.default_rng(9)
change = draw_environment_change(rng_env)
freqs = np.linspace(0, 1, 256)
for i, link in enumerate(links):
    before = np.abs(np.fft.fft(link.taps, 256))
    after_link = perturb_environment(link, rng_env, change)
    after = np.abs(np.fft.fft(after_link.taps, 256))
    right.plot(freqs, before, color=f"C{i}", lw=1.0, label=f"link {i} before" if i == 0 else None)
    right.plot(freqs, after, color=f"C{i}", lw=1.0, ls="--", label=f"link {i} after" if i == 0 else None)
right.set_title(f"stool adds a tap at delay {change.delay} (mag {change.magnitude:.2f}) to every link")
right.set_xlabel("normalized frequency")
right.set_ylabel("|H(f)|")
right.legend(loc="lower right")

fig.tight_layout()
fig.savefig("demos_channel_scenarios.png", dpi=130)
print("wrote demos_channel_scenarios.png")
