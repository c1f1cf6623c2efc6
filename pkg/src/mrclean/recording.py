"""Multichannel recording and marker containers.

Recordings are immutable: every processing step returns a new instance
with a fresh, read-only data array.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Sequence, Union

import numpy as np

# Acquisition constants of the reference setup.
DEFAULT_RATE_HZ = 5000.0
SCANNER_TR_S = 0.00505
EEG_NAMES = ("C3", "C4", "F3", "F4", "FPz", "O1", "O2", "M1", "M2")
EOG_NAMES = ("EOG1", "EOG2")
EMG_NAMES = ("EMG1", "EMG2", "EMG3")
ECG_NAMES = ("ECG",)


class Modality(str, enum.Enum):
    EEG = "EEG"
    EOG = "EOG"
    EMG = "EMG"
    ECG = "ECG"
    OTHER = "OTHER"


@dataclass(frozen=True)
class ChannelInfo:
    name: str
    modality: Modality = Modality.EEG
    unit: str = "uV"

    def __post_init__(self):
        if not self.name:
            raise ValueError("channel name must be nonempty")
        # accept plain strings for convenience
        object.__setattr__(self, "modality", Modality(self.modality))

    def to_dict(self):
        return {"name": self.name, "modality": self.modality.value, "unit": self.unit}


@dataclass(frozen=True)
class Marker:
    sample: int
    label: str = ""

    def __post_init__(self):
        if int(self.sample) < 0:
            raise ValueError(f"marker sample must be non-negative, got {self.sample}")
        object.__setattr__(self, "sample", int(self.sample))


def _label_matches(label: str, selector: str) -> bool:
    return label == selector or label.startswith(selector + "/")


class MarkerList(Sequence[Marker]):
    """Ordered, immutable list of markers.

    Sorting is stable, so markers sharing a sample keep their insertion
    order.

    Parameters
    ----------
    markers : iterable of Marker or (sample, label) pairs
    sort : bool
        If False, the input must already be non-decreasing in sample and a
        ``ValueError`` is raised otherwise.
    """

    def __init__(self, markers: Iterable = (), sort: bool = True):
        items = [m if isinstance(m, Marker) else Marker(int(m[0]), str(m[1])) for m in markers]
        if sort:
            items.sort(key=lambda m: m.sample)
        elif any(b.sample < a.sample for a, b in zip(items, items[1:])):
            raise ValueError("markers are not sorted by sample")
        self._items = tuple(items)

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return MarkerList(self._items[idx], sort=False)
        return self._items[idx]

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self) -> Iterator[Marker]:
        return iter(self._items)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MarkerList):
            return NotImplemented
        return [(m.sample, m.label) for m in self] == [(m.sample, m.label) for m in other]

    def __repr__(self) -> str:
        head = ", ".join(f"({m.sample}, {m.label!r})" for m in self._items[:4])
        more = ", ..." if len(self) > 4 else ""
        return f"MarkerList([{head}{more}], n={len(self)})"

    @property
    def samples(self) -> np.ndarray:
        return np.array([m.sample for m in self._items], dtype=np.int64)

    @property
    def labels(self) -> list:
        return [m.label for m in self._items]

    def select(self, label: Union[str, Sequence[str], None]) -> "MarkerList":
        """Markers whose label equals ``label`` or starts with ``label + '/'``."""
        if label is None:
            return self
        selectors = [label] if isinstance(label, str) else list(label)
        return MarkerList(
            (m for m in self._items if any(_label_matches(m.label, s) for s in selectors)),
            sort=False,
        )

    def drop(self, label: Union[str, Sequence[str]]) -> "MarkerList":
        selectors = [label] if isinstance(label, str) else list(label)
        return MarkerList(
            (m for m in self._items if not any(_label_matches(m.label, s) for s in selectors)),
            sort=False,
        )

    def shift(self, k: int) -> "MarkerList":
        return MarkerList((Marker(m.sample + k, m.label) for m in self._items), sort=False)

    def merge(self, other: Iterable[Marker]) -> "MarkerList":
        return MarkerList(list(self._items) + list(other))

    @classmethod
    def from_samples(cls, samples, label: str) -> "MarkerList":
        return cls((Marker(int(s), label) for s in samples))


@dataclass(frozen=True, eq=False)
class Recording:
    """Uniformly sampled multichannel recording.

    Parameters
    ----------
    rate_hz : float
        Sampling rate in Hz.
    channels : sequence of ChannelInfo
        One entry per data row; names must be unique.
    data : array_like, shape (n_channels, n_samples)
        Sample values in microvolts. Stored as a read-only float64 copy.
    markers : MarkerList
        Events, each with a sample index inside the recording.
    """

    rate_hz: float
    channels: tuple
    data: np.ndarray
    markers: MarkerList = field(default_factory=MarkerList)

    def __post_init__(self):
        rate = float(self.rate_hz)
        if not rate > 0:
            raise ValueError(f"rate_hz must be positive, got {self.rate_hz}")
        channels = tuple(
            c if isinstance(c, ChannelInfo) else ChannelInfo(**c) for c in self.channels
        )
        names = [c.name for c in channels]
        if len(set(names)) != len(names):
            raise ValueError(f"channel names must be unique, got {names}")
        data = np.array(self.data, dtype=np.float64, copy=True)
        if data.ndim == 1:
            data = data[np.newaxis, :]
        if data.ndim != 2:
            raise ValueError(f"data must be 2-D (channels x samples), got shape {data.shape}")
        if data.shape[0] != len(channels):
            raise ValueError(
                f"data has {data.shape[0]} rows but {len(channels)} channels were given"
            )
        markers = self.markers if isinstance(self.markers, MarkerList) else MarkerList(self.markers)
        n = data.shape[1]
        bad = [m for m in markers if m.sample >= n]
        if bad:
            raise ValueError(f"marker {bad[0]} outside recording of {n} samples")
        data.flags.writeable = False
        object.__setattr__(self, "rate_hz", rate)
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "markers", markers)

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.rate_hz

    @property
    def ch_names(self) -> list:
        return [c.name for c in self.channels]

    @property
    def modalities(self) -> list:
        return [c.modality for c in self.channels]

    def channel_index(self, name: str) -> int:
        try:
            return self.ch_names.index(name)
        except ValueError:
            raise KeyError(f"no channel named {name!r}") from None

    def picks(self, selector=None) -> np.ndarray:
        """Row indices matched by ``selector`` (see :func:`select_channels`)."""
        return _resolve_selector(self, selector)

    def with_data(self, data, markers=None) -> "Recording":
        return replace(self, data=data, markers=self.markers if markers is None else markers)

    def with_markers(self, markers) -> "Recording":
        return replace(self, markers=MarkerList(markers))

    def equals(self, other: "Recording") -> bool:
        return (
            self.rate_hz == other.rate_hz
            and self.channels == other.channels
            and self.markers == other.markers
            and np.array_equal(self.data, other.data)
        )


def _resolve_selector(rec: Recording, selector) -> np.ndarray:
    if selector is None or (isinstance(selector, str) and selector.lower() == "all"):
        return np.arange(rec.n_channels)
    if isinstance(selector, (str, Modality, int, np.integer)):
        selector = [selector]
    idx = []
    modality_values = {m.value for m in Modality}
    for item in selector:
        if isinstance(item, Modality) or item in modality_values:
            mod = Modality(item)
            idx.extend(i for i, c in enumerate(rec.channels) if c.modality == mod)
        elif isinstance(item, (int, np.integer)) and not isinstance(item, bool):
            if not 0 <= item < rec.n_channels:
                raise IndexError(f"channel index {item} out of range [0, {rec.n_channels})")
            idx.append(int(item))
        else:
            idx.append(rec.channel_index(item))
    # preserve recording order, drop duplicates
    picked = np.array(sorted(set(idx)), dtype=int)
    if picked.size == 0:
        raise ValueError(f"selector {selector!r} matched no channels")
    return picked


def select_channels(rec: Recording, selector) -> Recording:
    """Sub-recording with the channels matched by ``selector``.

    ``selector`` may be a modality (``"EEG"`` or :class:`Modality`), a
    channel name, a list mixing both, or ``"all"``. Channel order follows
    the source recording; rate and markers are preserved.
    """
    picks = _resolve_selector(rec, selector)
    return Recording(
        rec.rate_hz,
        [rec.channels[i] for i in picks],
        rec.data[picks],
        rec.markers,
    )


def default_montage() -> list:
    """The 15-channel montage: 9 EEG, 2 EOG, 3 EMG, 1 ECG."""
    return (
        [ChannelInfo(n, Modality.EEG) for n in EEG_NAMES]
        + [ChannelInfo(n, Modality.EOG) for n in EOG_NAMES]
        + [ChannelInfo(n, Modality.EMG) for n in EMG_NAMES]
        + [ChannelInfo(n, Modality.ECG) for n in ECG_NAMES]
    )
