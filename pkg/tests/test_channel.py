import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from txident.channel import (
    ChannelState,
    EnvironmentChange,
    Scenario,
    ScenarioConfig,
    draw_environment_change,
    make_links,
    payload_amplitude,
    perturb_environment,
    propagate,
)
from txident.impairments import sample_profiles
from txident.signals import IqBuffer


def scenario_cfg(kind=Scenario.PLAIN, amp=(0.2, 1.0)) -> ScenarioConfig:
    return ScenarioConfig(scenario=kind, amplitude_range=amp, snr_db=20.0, seed=0)


def profiles(n=21):
    return sample_profiles(n, True, np.random.default_rng(1))


class TestMakeLinks:
    def test_unit_norm_taps(self):
        links = make_links(profiles(21), scenario_cfg(), np.random.default_rng(2))
        assert len(links) == 21
        for link in links:
            assert np.linalg.norm(link.taps) == pytest.approx(1.0, abs=1e-12)

    def test_deterministic(self):
        a = make_links(profiles(3), scenario_cfg(), np.random.default_rng(5))
        b = make_links(profiles(3), scenario_cfg(), np.random.default_rng(5))
        for la, lb in zip(a, b):
            np.testing.assert_array_equal(la.taps, lb.taps)
            assert la.static_gain == lb.static_gain

    def test_dominant_tap_is_first(self):
        links = make_links(profiles(1000), scenario_cfg(), np.random.default_rng(3))
        for link in links:
            assert int(np.argmax(np.abs(link.taps))) == 0

    def test_robot_links_have_moving_tap(self):
        links = make_links(profiles(4), scenario_cfg(Scenario.ROBOT), np.random.default_rng(0))
        assert all(link.moving_tap_index == len(link.taps) - 1 for link in links)
        plain = make_links(profiles(4), scenario_cfg(), np.random.default_rng(0))
        assert all(link.moving_tap_index is None for link in plain)

    def test_empty_profiles_rejected(self):
        with pytest.raises(ValueError):
            make_links([], scenario_cfg(), np.random.default_rng(0))


class TestPayloadAmplitude:
    def test_plain_always_unity(self):
        rng = np.random.default_rng(0)
        assert all(payload_amplitude(scenario_cfg(), rng) == 1.0 for _ in range(100))

    def test_varying_uniform_mean(self):
        rng = np.random.default_rng(1)
        cfg = scenario_cfg(Scenario.VARYING)
        draws = np.array([payload_amplitude(cfg, rng) for _ in range(100_000)])
        assert draws.mean() == pytest.approx(0.6, rel=0.01)

    def test_robot_draws_in_range(self):
        rng = np.random.default_rng(2)
        cfg = scenario_cfg(Scenario.ROBOT)
        draws = np.array([payload_amplitude(cfg, rng) for _ in range(10_000)])
        assert draws.min() >= 0.2 and draws.max() <= 1.0

    def test_draws_are_iid(self):
        # Lag-1 autocorrelation of the amplitude stream stays near zero.
        rng = np.random.default_rng(3)
        cfg = scenario_cfg(Scenario.VARYING)
        draws = np.array([payload_amplitude(cfg, rng) for _ in range(100_000)])
        centered = draws - draws.mean()
        rho = np.mean(centered[1:] * centered[:-1]) / np.var(draws)
        assert abs(rho) < 0.01

    def test_bad_range_rejected(self):
        with pytest.raises(ValueError):
            scenario_cfg(amp=(0.0, 1.0))
        with pytest.raises(ValueError):
            scenario_cfg(amp=(0.5, 0.2))


class TestPropagate:
    def test_single_tap_identity(self):
        link = ChannelState(
            taps=np.array([1.0 + 0j]), static_gain=1.0, scenario=Scenario.PLAIN
        )
        x = IqBuffer(np.arange(1, 6, dtype=complex))
        y, out_link = propagate(x, link, np.random.default_rng(0))
        np.testing.assert_array_equal(y.samples, x.samples)
        assert out_link is link

    def test_impulse_reveals_taps(self):
        taps = np.array([1.0, 0.5j])
        taps = taps / np.linalg.norm(taps)
        link = ChannelState(taps=taps, static_gain=1.0, scenario=Scenario.PLAIN)
        impulse = IqBuffer(np.array([1.0 + 0j]))
        y, _ = propagate(impulse, link, np.random.default_rng(0))
        np.testing.assert_allclose(y.samples, taps, atol=1e-15)

    def test_output_length_includes_tail(self):
        links = make_links(profiles(2), scenario_cfg(), np.random.default_rng(4))
        x = IqBuffer(np.ones(100, dtype=complex))
        y, _ = propagate(x, links[0], np.random.default_rng(0))
        assert len(y) == 100 + len(links[0].taps) - 1

    @settings(max_examples=20, deadline=None)
    @given(st.integers(min_value=0, max_value=2**31))
    def test_linearity(self, seed):
        rng = np.random.default_rng(seed)
        link = make_links(profiles(2), scenario_cfg(), np.random.default_rng(6))[0]
        x = rng.standard_normal(50) + 1j * rng.standard_normal(50)
        y = rng.standard_normal(50) + 1j * rng.standard_normal(50)
        a, b = complex(rng.standard_normal()), complex(rng.standard_normal())
        lhs, _ = propagate(IqBuffer(a * x + b * y), link, np.random.default_rng(0))
        fx, _ = propagate(IqBuffer(x), link, np.random.default_rng(0))
        fy, _ = propagate(IqBuffer(y), link, np.random.default_rng(0))
        np.testing.assert_allclose(lhs.samples, a * fx.samples + b * fy.samples, atol=1e-12)

    def test_robot_walk_clamped_and_moving(self):
        link = make_links(profiles(2), scenario_cfg(Scenario.ROBOT), np.random.default_rng(7))[0]
        rng = np.random.default_rng(8)
        x = IqBuffer(np.ones(4, dtype=complex))
        values = []
        for _ in range(10_000):
            _, link = propagate(x, link, rng)
            moving = link.taps[link.moving_tap_index]
            values.append(moving)
            assert np.abs(moving) <= 0.5 * np.abs(link.taps[0]) + 1e-12
        values = np.array(values)
        assert np.all(values[1:] != values[:-1])

    def test_plain_state_unchanged(self):
        link = make_links(profiles(2), scenario_cfg(), np.random.default_rng(9))[0]
        before = link.taps.copy()
        _, after = propagate(IqBuffer(np.ones(8, dtype=complex)), link, np.random.default_rng(0))
        np.testing.assert_array_equal(after.taps, before)


class TestPerturbEnvironment:
    def test_epoch_increments(self):
        link = make_links(profiles(2), scenario_cfg(), np.random.default_rng(10))[0]
        out = perturb_environment(link, np.random.default_rng(11))
        assert out.env_epoch == link.env_epoch + 1

    def test_taps_change_and_stay_normalized(self):
        link = make_links(profiles(2), scenario_cfg(), np.random.default_rng(12))[0]
        out = perturb_environment(link, np.random.default_rng(13))
        assert not np.array_equal(out.taps[: len(link.taps)], link.taps)
        assert np.linalg.norm(out.taps) == pytest.approx(1.0, abs=1e-12)

    def test_shared_change_across_links(self):
        # The stool changes the room for everyone: same delay and magnitude
        # on all 21 links, only the reflection phase is per-link.
        links = make_links(profiles(21), scenario_cfg(), np.random.default_rng(14))
        rng = np.random.default_rng(15)
        change = draw_environment_change(rng)
        perturbed = [perturb_environment(link, rng, change) for link in links]
        phases = []
        for before, after in zip(links, perturbed):
            padded = np.concatenate(
                [before.taps, np.zeros(len(after.taps) - len(before.taps), dtype=complex)]
            )
            # Tap 0 is never the perturbed delay; it recovers the
            # re-normalization scale, which exposes the added component.
            scale = np.abs(padded[0] / after.taps[0])
            delta = after.taps * scale - padded
            support = np.flatnonzero(np.abs(delta) > 1e-9)
            assert list(support) == [change.delay]
            assert np.abs(delta[change.delay]) == pytest.approx(change.magnitude, rel=1e-9)
            phases.append(np.angle(delta[change.delay]))
        assert len({round(p, 6) for p in phases}) > 1  # per-link random phase

    def test_deterministic_given_seed(self):
        link = make_links(profiles(2), scenario_cfg(), np.random.default_rng(16))[0]
        a = perturb_environment(link, np.random.default_rng(17))
        b = perturb_environment(link, np.random.default_rng(17))
        np.testing.assert_array_equal(a.taps, b.taps)

    def test_delay_beyond_existing_taps_extends_fir(self):
        link = ChannelState(
            taps=np.array([1.0 + 0j]), static_gain=1.0, scenario=Scenario.PLAIN
        )
        out = perturb_environment(
            link, np.random.default_rng(0), EnvironmentChange(delay=4, magnitude=0.2)
        )
        assert len(out.taps) == 5
        assert abs(out.taps[4]) > 0
