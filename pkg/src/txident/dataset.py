"""Recording, storage, and batching of labeled payload windows.

On disk a dataset is one ``emitter_<id>.iq`` file per emitter -- raw
little-endian float32, interleaved I,Q, 600-sample windows back to back
(4800 bytes per window) -- plus a ``manifest.json`` describing how it was
generated. The format matches common SDR file-sink conventions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .framing import WINDOW_LEN, ReceivedPacket

MANIFEST_NAME = "manifest.json"

TRAIN_FRACTION = 0.7
VAL_FRACTION = 0.1

# Above this total size, windows are gathered lazily from the memory-mapped
# files instead of being stacked in RAM.
_PRELOAD_LIMIT_BYTES = 1 << 30


class DatasetWriter:
    """Streams received packets into per-emitter recording files."""

    def __init__(self, directory: str | Path, n_emitters: int):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.n_emitters = n_emitters
        self.counts = [0] * n_emitters
        self.header_failures = 0
        self.no_frames = 0
        self._files = [
            open(self.directory / f"emitter_{i}.iq", "wb") for i in range(n_emitters)
        ]

    def add(self, packet: ReceivedPacket | None) -> None:
        if packet is None:
            self.no_frames += 1
            return
        eid = packet.emitter_id_decoded
        if eid is None or not 0 <= eid < self.n_emitters:
            self.header_failures += 1
            return
        window = packet.payload_window.samples.astype("<c8")
        self._files[eid].write(window.tobytes())
        self.counts[eid] += 1

    def close(self, meta: dict) -> dict:
        """Finalize files and write the manifest; returns the manifest dict."""
        for f in self._files:
            f.close()
        manifest = {
            **meta,
            "n_emitters": self.n_emitters,
            "counts": self.counts,
            "header_failures": self.header_failures,
            "no_frames": self.no_frames,
            "window_len": WINDOW_LEN,
        }
        (self.directory / MANIFEST_NAME).write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n"
        )
        return manifest


def write_dataset(
    packets: Iterable[ReceivedPacket | None],
    directory: str | Path,
    n_emitters: int,
    meta: dict | None = None,
) -> dict:
    """Record a packet stream; flagged/undetected packets are skipped and counted."""
    writer = DatasetWriter(directory, n_emitters)
    for packet in packets:
        writer.add(packet)
    return writer.close(meta or {})


@dataclass
class Dataset:
    """Loaded recordings: one (n_i, window) complex64 array per emitter."""

    per_emitter: list[np.ndarray]
    manifest: dict
    directory: Path | None = None

    @property
    def n_classes(self) -> int:
        return len(self.per_emitter)

    @property
    def counts(self) -> list[int]:
        return [len(w) for w in self.per_emitter]

    @property
    def n_examples(self) -> int:
        return sum(self.counts)

    def class_offsets(self) -> np.ndarray:
        """Start of each emitter's block in the global example index space."""
        return np.concatenate([[0], np.cumsum(self.counts)])

    def labels(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_classes), self.counts)

    def gather(self, indices: np.ndarray) -> np.ndarray:
        """Windows for global indices as (n, window, 2) float32 (I, Q)."""
        if not hasattr(self, "_stacked"):
            total_bytes = self.n_examples * WINDOW_LEN * 8
            self._stacked = (
                np.concatenate(self.per_emitter) if total_bytes <= _PRELOAD_LIMIT_BYTES else None
            )
        if self._stacked is not None:
            w = self._stacked[indices]
        else:
            offsets = self.class_offsets()
            cls = np.searchsorted(offsets, indices, side="right") - 1
            w = np.stack(
                [self.per_emitter[c][i - offsets[c]] for c, i in zip(cls, indices)]
            )
        return np.stack([w.real, w.imag], axis=-1).astype(np.float32)


def load_dataset(directory: str | Path) -> Dataset:
    """Memory-map a recorded dataset, verifying the manifest against file sizes."""
    directory = Path(directory)
    manifest = json.loads((directory / MANIFEST_NAME).read_text())
    window_len = manifest.get("window_len", WINDOW_LEN)
    per_emitter = []
    for i, count in enumerate(manifest["counts"]):
        path = directory / f"emitter_{i}.iq"
        expected = count * window_len * 8
        actual = path.stat().st_size if path.exists() else -1
        if actual != expected:
            raise ValueError(
                f"{path.name}: size {actual} does not match manifest count {count}"
            )
        mm = np.memmap(path, dtype="<c8", mode="r")
        per_emitter.append(mm.reshape(count, window_len))
    return Dataset(per_emitter=per_emitter, manifest=manifest, directory=directory)


@dataclass
class Split:
    """Disjoint, exhaustive, per-emitter-stratified index sets."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def part(self, name: str) -> np.ndarray:
        try:
            return getattr(self, name)
        except AttributeError:
            raise ValueError(f"unknown split part {name!r}") from None


def split_shuffle(ds: Dataset, seed: int) -> Split:
    """Shuffle each emitter's examples and split 70/10/20."""
    rng = np.random.default_rng(seed)
    offsets = ds.class_offsets()
    train, val, test = [], [], []
    for c, n in enumerate(ds.counts):
        perm = rng.permutation(n) + offsets[c]
        n_train = int(round(TRAIN_FRACTION * n))
        n_val = int(round(VAL_FRACTION * n))
        train.append(perm[:n_train])
        val.append(perm[n_train : n_train + n_val])
        test.append(perm[n_train + n_val :])
    return Split(
        train=np.concatenate(train),
        val=np.concatenate(val),
        test=np.concatenate(test),
    )


def batch_iter(
    ds: Dataset,
    split: Split,
    part: str,
    batch_size: int,
    epoch_seed: int | None = None,
    normalize: bool = False,
) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield (batch, window, 2) float32 inputs with integer labels.

    The train part is reshuffled from ``epoch_seed``; other parts keep their
    split order. The final short batch is included. Inputs are raw I/Q;
    ``normalize`` optionally applies per-window RMS normalization (ablation
    knob, off by default because amplitude is part of the experiment).
    """
    indices = split.part(part)
    labels = ds.labels()
    if part == "train" and epoch_seed is not None:
        indices = indices[np.random.default_rng(epoch_seed).permutation(len(indices))]
    for start in range(0, len(indices), batch_size):
        batch_idx = indices[start : start + batch_size]
        x = ds.gather(batch_idx)
        if normalize:
            rms = np.sqrt(np.mean(x**2, axis=(1, 2), keepdims=True))
            x = x / np.maximum(rms, 1e-12)
        yield x, labels[batch_idx]
