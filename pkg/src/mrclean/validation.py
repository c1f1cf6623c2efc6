"""Input validation helpers shared by the estimators and operations."""

import numpy as np

from .recording import Modality, Recording


class NotARecordingError(TypeError):
    pass


def check_recording(rec, min_samples: int = 1, finite: bool = False) -> Recording:
    """Raise unless ``rec`` is a :class:`Recording` with enough samples."""
    if not isinstance(rec, Recording):
        raise NotARecordingError(
            f"expected a Recording, got {type(rec).__name__}; wrap arrays with "
            "mrclean.Recording(rate_hz, channels, data)"
        )
    if rec.n_samples < min_samples:
        raise ValueError(f"recording has {rec.n_samples} samples, need at least {min_samples}")
    if finite and not np.all(np.isfinite(rec.data)):
        raise ValueError("recording contains non-finite values")
    return rec


def check_same_shape(a: Recording, b: Recording) -> None:
    if a.data.shape != b.data.shape:
        raise ValueError(f"shape mismatch: {a.data.shape} vs {b.data.shape}")


def single_channel_of(rec: Recording, modality: Modality) -> int:
    """Index of the one channel of ``modality``; raises if absent or ambiguous."""
    idx = [i for i, c in enumerate(rec.channels) if c.modality == Modality(modality)]
    if not idx:
        raise ValueError(f"no {Modality(modality).value} channel in recording")
    if len(idx) > 1:
        names = [rec.channels[i].name for i in idx]
        raise ValueError(f"expected exactly one {Modality(modality).value} channel, got {names}")
    return idx[0]


def check_indices(indices, upper: int, what: str = "index") -> np.ndarray:
    idx = np.asarray(list(indices), dtype=np.int64)
    bad = idx[(idx < 0) | (idx >= upper)]
    if bad.size:
        raise IndexError(f"{what} {int(bad[0])} out of range [0, {upper})")
    return idx
