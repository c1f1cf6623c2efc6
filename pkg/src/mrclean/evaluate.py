"""Evaluation metrics: epoching and ERPs, spectra, artifact attenuation,
clock drift and image ROI SNR."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy import signal

from .io import write_table
from .recording import MarkerList, Recording

ATTENUATION_CAP_DB = 120.0
HANN_ENBW_BINS = 1.5
FRAME_PERIOD_S = 0.0101


@dataclass(frozen=True, eq=False)
class EpochSet:
    """Trials cut around markers.

    ``data`` has shape (trials, channels, samples); sample ``pre`` of each
    trial is the marker sample, with ``pre = round(window_s[0] * rate_hz)``.
    """

    data: np.ndarray
    window_s: tuple
    rate_hz: float
    trial_labels: list
    trial_samples: np.ndarray
    ch_names: list
    n_dropped: int = 0

    @property
    def n_trials(self) -> int:
        return self.data.shape[0]

    @property
    def pre_samples(self) -> int:
        return int(round(self.window_s[0] * self.rate_hz))

    @property
    def times_s(self) -> np.ndarray:
        return (np.arange(self.data.shape[2]) - self.pre_samples) / self.rate_hz


def epoch(rec: Recording, label=None, pre_s: float = 1.0, post_s: float = 1.0,
          markers: Optional[MarkerList] = None) -> EpochSet:
    """Cut ``[m - pre_s, m + post_s)`` around each selected marker.

    Markers come from ``markers`` if given, else from ``rec.markers``; both
    are filtered by ``label`` (exact match or ``label/...`` prefix). Trials
    whose window leaves the recording are dropped and counted in
    ``n_dropped``. No baseline correction is applied.
    """
    if pre_s < 0 or post_s <= 0:
        raise ValueError(f"need pre_s >= 0 and post_s > 0, got {pre_s}, {post_s}")
    source = rec.markers if markers is None else MarkerList(markers)
    selected = source.select(label)
    pre = int(round(pre_s * rec.rate_hz))
    post = int(round(post_s * rec.rate_hz))
    keep = [m for m in selected if m.sample - pre >= 0 and m.sample + post <= rec.n_samples]
    if not keep:
        raise ValueError(f"zero usable trials for label {label!r} ({len(selected)} out of range)")
    samples = np.array([m.sample for m in keep])
    idx = samples[:, None] + np.arange(-pre, post)[None, :]
    data = np.transpose(rec.data[:, idx], (1, 0, 2))
    return EpochSet(data, (float(pre_s), float(post_s)), rec.rate_hz,
                    [m.label for m in keep], samples, rec.ch_names,
                    n_dropped=len(selected) - len(keep))


def average_erp(epochs: EpochSet, baseline: Optional[tuple] = None) -> np.ndarray:
    """Trial average, shape (channels, samples).

    ``baseline=(start_s, end_s)`` relative to the marker removes each
    trial's mean over that interval first.
    """
    data = epochs.data
    if data.shape[0] < 1:
        raise ValueError("no trials to average")
    if baseline is not None:
        start_s, end_s = baseline
        pre, post = epochs.window_s
        if start_s < -pre or end_s > post or end_s <= start_s:
            raise ValueError(f"baseline {baseline} outside epoch window (-{pre}, {post})")
        a = epochs.pre_samples + int(round(start_s * epochs.rate_hz))
        b = epochs.pre_samples + int(round(end_s * epochs.rate_hz))
        data = data - data[:, :, a:b].mean(axis=2, keepdims=True)
    return data.mean(axis=0)


@dataclass(frozen=True, eq=False)
class CorrelationSummary:
    r: np.ndarray
    mean: float
    sd: float

    @property
    def n_valid(self) -> int:
        return int(np.sum(~np.isnan(self.r)))


def erp_channel_correlation(erp_a, erp_b) -> CorrelationSummary:
    """Per-channel Pearson r of two (channels, samples) arrays.

    Channels with zero variance in either input get ``nan`` and are
    excluded from the mean and (population) standard deviation.
    """
    a = np.atleast_2d(np.asarray(erp_a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(erp_b, dtype=np.float64))
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    a = a - a.mean(axis=1, keepdims=True)
    b = b - b.mean(axis=1, keepdims=True)
    na, nb = np.linalg.norm(a, axis=1), np.linalg.norm(b, axis=1)
    r = np.full(a.shape[0], np.nan)
    ok = (na > 0) & (nb > 0)
    r[ok] = np.sum(a[ok] * b[ok], axis=1) / (na[ok] * nb[ok])
    r = np.clip(r, -1.0, 1.0)
    valid = r[~np.isnan(r)]
    if valid.size == 0:
        return CorrelationSummary(r, float("nan"), float("nan"))
    return CorrelationSummary(r, float(valid.mean()), float(valid.std()))


@dataclass(frozen=True, eq=False)
class Spectrum:
    """One-sided magnitude spectrum; a unit sinusoid on a bin center reads 1."""

    freqs_hz: np.ndarray
    magnitude: np.ndarray
    window: str
    n_fft: int
    rate_hz: float
    n_segments: int

    @property
    def resolution_hz(self) -> float:
        return self.rate_hz / self.n_fft

    def total_power(self) -> float:
        """Mean-square signal power implied by the spectrum (Parseval)."""
        scale = np.full(self.magnitude.size, 2.0)
        scale[0] = 1.0
        if self.n_fft % 2 == 0:
            scale[-1] = 1.0
        return float(np.sum(self.magnitude ** 2 / scale) / HANN_ENBW_BINS)


def magnitude_spectrum(x, rate_hz: float, n_fft: int, window: str = "hann") -> Spectrum:
    """Hann-windowed, 50%-overlap averaged magnitude spectrum.

    Segment power spectra are averaged and the square root taken, so the
    spectrum stays consistent with the signal's mean-square power.
    """
    if window.lower() != "hann":
        raise ValueError(f"only the Hann window is supported, got {window!r}")
    if n_fft < 16:
        raise ValueError(f"n_fft must be >= 16, got {n_fft}")
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size < n_fft:
        raise ValueError(f"series of {x.size} samples is shorter than n_fft={n_fft}")
    freqs, pxx = signal.welch(x, fs=rate_hz, window="hann", nperseg=n_fft,
                              noverlap=n_fft // 2, detrend=False, scaling="spectrum")
    scale = np.full(pxx.size, 2.0)
    scale[0] = 1.0
    if n_fft % 2 == 0:
        scale[-1] = 1.0
    n_segments = 1 + (x.size - n_fft) // (n_fft - n_fft // 2)
    return Spectrum(freqs, np.sqrt(pxx * scale), "HANN", int(n_fft), float(rate_hz), n_segments)


def harmonic_bins(spec: Spectrum, f0_hz: float, n_harmonics: int) -> np.ndarray:
    if f0_hz <= 0 or n_harmonics < 1:
        raise ValueError("f0_hz must be positive and n_harmonics >= 1")
    nyquist = spec.rate_hz / 2
    if n_harmonics * f0_hz >= nyquist:
        raise ValueError(f"band out of range: {n_harmonics} x {f0_hz} Hz >= Nyquist {nyquist} Hz")
    centers = np.rint(np.arange(1, n_harmonics + 1) * f0_hz / spec.resolution_hz).astype(int)
    if centers[-1] + 1 >= spec.magnitude.size:
        raise ValueError("band out of range: top harmonic band exceeds the spectrum")
    bins = (centers[:, None] + np.array([-1, 0, 1])[None, :]).ravel()
    return np.unique(bins[bins >= 0])


def harmonic_power(spec: Spectrum, f0_hz: float, n_harmonics: int) -> float:
    """Sum of squared magnitudes within +/-1 bin of each harmonic k*f0."""
    return float(np.sum(spec.magnitude[harmonic_bins(spec, f0_hz, n_harmonics)] ** 2))


def cardiac_locked_average(data, peaks, rate_hz: float, pre_s: float = 0.0,
                           post_s: float = 0.8) -> np.ndarray:
    """Average of ``data[..., p - pre : p + post]`` over in-range peaks."""
    x = np.atleast_2d(np.asarray(data, dtype=np.float64))
    p = peaks.samples if isinstance(peaks, MarkerList) else np.asarray(peaks, dtype=np.int64)
    pre, post = int(round(pre_s * rate_hz)), int(round(post_s * rate_hz))
    p = p[(p - pre >= 0) & (p + post <= x.shape[1])]
    if p.size == 0:
        raise ValueError("no peaks with a complete window")
    idx = p[:, None] + np.arange(-pre, post)[None, :]
    return x[:, idx].mean(axis=1)


@dataclass(frozen=True)
class HarmonicBands:
    """Artifact power = harmonic power of each channel's spectrum."""

    f0_hz: float
    n_harmonics: int
    n_fft: int


@dataclass(frozen=True, eq=False)
class CardiacLock:
    """Artifact power = mean square of the cardiac-locked average.

    ``reference`` (e.g. known non-cardiac signal content) is subtracted
    from both recordings before averaging.
    """

    peaks: object
    pre_s: float = 0.0
    post_s: float = 0.8
    reference: object = None


def _ratio_db(p_before: np.ndarray, p_after: np.ndarray) -> np.ndarray:
    out = np.zeros_like(p_before, dtype=np.float64)
    for i, (b, a) in enumerate(zip(p_before, p_after)):
        if b == 0:
            out[i] = 0.0
        elif a == 0:
            out[i] = ATTENUATION_CAP_DB
        else:
            out[i] = min(10.0 * np.log10(b / a), ATTENUATION_CAP_DB)
    return out


def artifact_attenuation(before: Recording, after: Recording,
                         spec: Union[HarmonicBands, CardiacLock, Recording, np.ndarray],
                         channels=None) -> np.ndarray:
    """Per-channel artifact attenuation ``10 log10(P_before / P_after)`` in dB.

    ``spec`` selects how artifact power is measured: :class:`HarmonicBands`
    (gradient artifact), :class:`CardiacLock` (pulse artifact) or a ground
    truth recording/array, in which case P is the mean-square deviation
    from the truth. A perfect result is capped at 120 dB.
    """
    if before.data.shape != after.data.shape:
        raise ValueError(f"shape mismatch: {before.data.shape} vs {after.data.shape}")
    picks = before.picks(channels)
    xb, xa = before.data[picks], after.data[picks]
    if isinstance(spec, HarmonicBands):
        def power(x):
            return np.array([
                harmonic_power(magnitude_spectrum(row, before.rate_hz, spec.n_fft),
                               spec.f0_hz, spec.n_harmonics)
                for row in x
            ])
    elif isinstance(spec, CardiacLock):
        ref = 0.0 if spec.reference is None else _truth_rows(spec.reference, picks, xb.shape)

        def power(x):
            avg = cardiac_locked_average(x - ref, spec.peaks, before.rate_hz,
                                         spec.pre_s, spec.post_s)
            return np.mean(avg ** 2, axis=1)
    else:
        truth = _truth_rows(spec, picks, xb.shape)

        def power(x):
            return np.mean((x - truth) ** 2, axis=1)
    return _ratio_db(power(xb), power(xa))


def _truth_rows(truth, picks, shape) -> np.ndarray:
    t = truth.data if isinstance(truth, Recording) else np.atleast_2d(np.asarray(truth, float))
    if t.shape[0] != shape[0]:
        t = t[picks]
    if t.shape != shape:
        raise ValueError(f"shape mismatch: truth {t.shape} vs data {shape}")
    return t


def estimate_drift(mri_frames: int, frame_period_s: float, eeg_trigger_span_s: float,
                   reference: str = "mri") -> float:
    """Duration mismatch between the MRI video and the EEG trigger span, in ms/s.

    ``|frames * frame_period - span|`` divided by the MRI video duration
    (``reference="mri"``, default) or by the EEG trigger span
    (``reference="eeg"``), times 1000.
    """
    if mri_frames <= 0 or frame_period_s <= 0:
        raise ValueError("mri_frames and frame_period_s must be positive")
    if eeg_trigger_span_s <= 0:
        raise ValueError("zero span: EEG trigger span must be positive")
    video_s = mri_frames * frame_period_s
    if reference == "mri":
        denom = video_s
    elif reference == "eeg":
        denom = eeg_trigger_span_s
    else:
        raise ValueError(f"reference must be 'mri' or 'eeg', got {reference!r}")
    return abs(video_s - eeg_trigger_span_s) / denom * 1000.0


def drift_exceeds_frame(drift_ms_per_s: float, frame_period_s: float = FRAME_PERIOD_S) -> bool:
    """True when the drift is larger than one video frame (10.1 ms by default)."""
    return drift_ms_per_s > frame_period_s * 1000.0


def roi_snr(image, roi_mask, noise_mask) -> float:
    """Mean over the ROI divided by the (population) standard deviation of
    the noise region."""
    img = np.asarray(image, dtype=np.float64)
    roi = np.asarray(roi_mask, dtype=bool)
    noise = np.asarray(noise_mask, dtype=bool)
    if img.ndim != 2:
        raise ValueError(f"image must be 2-D, got shape {img.shape}")
    if roi.shape != img.shape or noise.shape != img.shape:
        raise ValueError("masks must match the image shape")
    if not roi.any() or not noise.any():
        raise ValueError("ROI and noise masks must be nonempty")
    if np.any(roi & noise):
        raise ValueError("ROI and noise masks must be disjoint")
    sd = float(np.std(img[noise]))
    if sd == 0:
        raise ValueError("zero noise deviation")
    return float(np.mean(img[roi]) / sd)


def erp_peak_amplitude(erp: np.ndarray) -> float:
    """Largest absolute value of an ERP array."""
    return float(np.max(np.abs(erp)))


# CSV emitters ---------------------------------------------------------------

def write_erp_csv(path, erp: np.ndarray, times_s: np.ndarray, ch_names: Sequence[str]) -> None:
    cols = {"time_s": times_s}
    cols.update({name: erp[i] for i, name in enumerate(ch_names)})
    write_table(path, cols)


def write_spectra_csv(path, spectra: dict) -> None:
    first = next(iter(spectra.values()))
    cols = {"freq_hz": first.freqs_hz}
    cols.update({name: s.magnitude for name, s in spectra.items()})
    write_table(path, cols)


def write_correlation_csv(path, summary: CorrelationSummary, ch_names: Sequence[str]) -> None:
    write_table(path, {
        "channel": list(ch_names) + ["mean", "sd"],
        "r": list(summary.r) + [summary.mean, summary.sd],
    })


def write_attenuation_csv(path, db: np.ndarray, ch_names: Sequence[str]) -> None:
    write_table(path, {"channel": list(ch_names), "attenuation_db": db})
