"""Propagation between each emitter and the receiver, per scenario.

Three regimes of increasing channel randomness:

* plain -- static multipath and gain per link, every payload at amplitude 1;
* varying -- same static channel, but each payload is scaled by a fresh
  uniform amplitude draw;
* robot -- varying amplitudes plus one reflection tap doing a clamped
  complex random walk, one step per packet.

A one-time "metallic stool" style environment change is modeled by adding a
common extra tap to every link and bumping the link's environment epoch.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .impairments import EmitterProfile
from .signals import IqBuffer


class Scenario(str, Enum):
    PLAIN = "plain"
    VARYING = "varying"
    ROBOT = "robot"


# Tap k magnitude is e^{-k} with a random phase; 3 taps at consecutive
# sample delays. The fast decay bounds the channel's worst spectral notch
# (min |H| >= 0.46 after normalization), which keeps frame headers
# decodable for every possible phase draw.
TAP_COUNT = 3
TAP_DECAY = 1.0
STATIC_GAIN_RANGE = (0.5, 1.0)

ROBOT_WALK_SIGMA = 0.02
ROBOT_TAP_CLAMP = 0.5  # moving tap magnitude <= 0.5 x dominant tap

ENV_TAP_MAG_RANGE = (0.1, 0.3)
ENV_TAP_DELAY_RANGE = (1, 4)  # inclusive


@dataclass
class ScenarioConfig:
    scenario: Scenario
    amplitude_range: tuple[float, float] = (0.2, 1.0)
    snr_db: float = 20.0
    seed: int = 0

    def __post_init__(self):
        self.scenario = Scenario(self.scenario)
        a_min, a_max = self.amplitude_range
        if not 0 < a_min <= a_max:
            raise ValueError("amplitude_range must satisfy 0 < a_min <= a_max")


@dataclass
class ChannelState:
    """One emitter-to-receiver link.

    ``taps`` is a dense complex FIR (index = delay in samples) with unit L2
    norm at creation; path loss is carried by ``static_gain``. For the robot
    scenario, ``moving_tap_index`` marks the tap whose current value is the
    random-walk state.
    """

    taps: np.ndarray
    static_gain: float
    scenario: Scenario
    moving_tap_index: int | None = None
    env_epoch: int = 0


def make_links(
    profiles: list[EmitterProfile],
    scenario: ScenarioConfig,
    rng: np.random.Generator,
) -> list[ChannelState]:
    """Draw one link per emitter: decaying tap magnitudes, random phases."""
    if not profiles:
        raise ValueError("need at least one emitter profile")
    mags = np.exp(-TAP_DECAY * np.arange(TAP_COUNT))
    links = []
    for _ in profiles:
        phases = rng.uniform(0.0, 2 * np.pi, TAP_COUNT)
        taps = mags * np.exp(1j * phases)
        taps /= np.linalg.norm(taps)
        gain = float(rng.uniform(*STATIC_GAIN_RANGE))
        moving = TAP_COUNT - 1 if scenario.scenario == Scenario.ROBOT else None
        links.append(
            ChannelState(
                taps=taps,
                static_gain=gain,
                scenario=scenario.scenario,
                moving_tap_index=moving,
            )
        )
    return links


def payload_amplitude(scenario: ScenarioConfig, rng: np.random.Generator) -> float:
    """Per-payload emission amplitude; fresh uniform draw outside plain."""
    if scenario.scenario == Scenario.PLAIN:
        return 1.0
    return float(rng.uniform(*scenario.amplitude_range))


def propagate(
    x: IqBuffer, link: ChannelState, rng: np.random.Generator
) -> tuple[IqBuffer, ChannelState]:
    """Convolve with the link FIR and apply the static gain.

    For a robot link the moving tap first advances by one complex Gaussian
    random-walk step (clamped relative to the dominant tap); the updated
    state is returned. Other scenarios return the state unchanged.
    """
    if link.moving_tap_index is not None:
        step = ROBOT_WALK_SIGMA * (rng.standard_normal() + 1j * rng.standard_normal())
        taps = link.taps.copy()
        moved = taps[link.moving_tap_index] + step
        lim = ROBOT_TAP_CLAMP * np.abs(taps[0])
        if np.abs(moved) > lim:
            moved *= lim / np.abs(moved)
        taps[link.moving_tap_index] = moved
        link = replace(link, taps=taps)
    y = np.convolve(x.samples, link.taps) * link.static_gain
    return IqBuffer(y, x.sample_rate_hz), link


@dataclass(frozen=True)
class EnvironmentChange:
    """A new static reflector, shared by every link in the room."""

    delay: int
    magnitude: float


def draw_environment_change(rng: np.random.Generator) -> EnvironmentChange:
    delay = int(rng.integers(ENV_TAP_DELAY_RANGE[0], ENV_TAP_DELAY_RANGE[1] + 1))
    return EnvironmentChange(delay=delay, magnitude=float(rng.uniform(*ENV_TAP_MAG_RANGE)))


def perturb_environment(
    link: ChannelState,
    rng: np.random.Generator,
    change: EnvironmentChange | None = None,
) -> ChannelState:
    """Add one static tap and re-normalize, modeling an object placed in the room.

    The same ``change`` (delay and magnitude) should be passed for every
    link so the room changes identically for all emitters; the reflection
    phase is drawn per link from ``rng``.
    """
    if change is None:
        change = draw_environment_change(rng)
    phase = rng.uniform(0.0, 2 * np.pi)
    taps = link.taps.copy()
    if change.delay >= len(taps):
        taps = np.concatenate([taps, np.zeros(change.delay + 1 - len(taps), dtype=complex)])
    taps[change.delay] += change.magnitude * np.exp(1j * phase)
    taps /= np.linalg.norm(taps)
    return replace(link, taps=taps, env_epoch=link.env_epoch + 1)
