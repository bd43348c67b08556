"""Simulated RF transmitter fingerprinting.

Impairment-bearing emitters, channel-randomized dataset generation, and a
from-scratch CNN classifier over raw IQ payload windows.
"""

from .channel import ChannelState, Scenario, ScenarioConfig
from .dataset import Dataset, Split, batch_iter, load_dataset, split_shuffle, write_dataset
from .experiment import ExperimentConfig, ResultTable, Seeds
from .framing import Frame, FrameLayout, ReceivedPacket, ScheduleEvent
from .impairments import EmitterProfile, sample_profiles
from .network import Arch, NetworkParams, TrainConfig
from .signals import IqBuffer, PayloadKind

__all__ = [
    "Arch",
    "ChannelState",
    "Dataset",
    "EmitterProfile",
    "ExperimentConfig",
    "Frame",
    "FrameLayout",
    "IqBuffer",
    "NetworkParams",
    "PayloadKind",
    "ReceivedPacket",
    "ResultTable",
    "Scenario",
    "ScenarioConfig",
    "ScheduleEvent",
    "Seeds",
    "Split",
    "TrainConfig",
    "batch_iter",
    "load_dataset",
    "sample_profiles",
    "split_shuffle",
    "write_dataset",
]
