"""R-peak detection and cardiac-locked (BCG) artifact subtraction."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import signal
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import _aas
from .filters import lowpass_array
from .recording import MarkerList, Modality, Recording
from .validation import check_recording, single_channel_of

PEAK_LABEL = "R_PEAK"
ECG_CUTOFF_HZ = 15.0
REFRACTORY_S = 0.3
THRESHOLD_FRACTION = 0.6
THRESHOLD_PERCENTILE = 98.0
THRESHOLD_WINDOW_S = 10.0
MIN_DURATION_S = 5.0
RR_TOLERANCE = 0.25
# the detection threshold already sits near half the typical peak height
LOW_AMPLITUDE_FRACTION = 0.7
_RR_MEDIAN_BEATS = 9

RR_TOO_SHORT = "RR_TOO_SHORT"
RR_TOO_LONG = "RR_TOO_LONG"
LOW_AMPLITUDE = "LOW_AMPLITUDE"


class NoPeaksError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RPeakReport:
    """Detected R-peaks with automatically flagged beats for manual review.

    ``suspects`` holds ``(peak_index, reason)`` pairs where ``peak_index``
    indexes ``peaks``.
    """

    peaks: MarkerList
    rr_median_s: float
    suspects: list = field(default_factory=list)
    amplitudes: np.ndarray = None


@dataclass(frozen=True)
class BcgParams:
    delay_s: float = 0.21
    span_fraction: float = 1.0
    window_beats: int = 21
    method: str = "mean"

    def __post_init__(self):
        if not self.delay_s >= 0:
            raise ValueError(f"delay_s must be non-negative, got {self.delay_s}")
        if not 0 < self.span_fraction <= 1.5:
            raise ValueError(
                f"span exceeds median RR x 1.5 (span_fraction={self.span_fraction}); "
                "must lie in (0, 1.5]"
            )
        if int(self.window_beats) != self.window_beats or self.window_beats < 3 or self.window_beats % 2 == 0:
            raise ValueError(f"window_beats must be an odd integer >= 3, got {self.window_beats}")
        if self.method not in ("mean", "median"):
            raise ValueError(f"method must be 'mean' or 'median', got {self.method!r}")

    def to_dict(self):
        return asdict(self)


def _running_threshold(x: np.ndarray, rate_hz: float) -> np.ndarray:
    n = x.size
    hop = max(int(rate_hz), 1)
    half = int(THRESHOLD_WINDOW_S * rate_hz / 2)
    centers = np.arange(0, n, hop) + min(hop // 2, n - 1)
    levels = np.array([
        np.percentile(x[max(0, c - half):min(n, c + half)], THRESHOLD_PERCENTILE)
        for c in centers
    ])
    return THRESHOLD_FRACTION * np.interp(np.arange(n), centers, levels)


def _running_median(values: np.ndarray, width: int) -> np.ndarray:
    half = width // 2
    return np.array([
        np.median(values[max(0, i - half):i + half + 1]) for i in range(values.size)
    ])


def detect_r_peaks(rec: Recording) -> RPeakReport:
    """Detect R-peaks on the recording's single ECG channel.

    The ECG is low-passed at 15 Hz (zero phase) and referenced to its
    median. Peaks are local maxima above 0.6 times a running 98th
    percentile computed over 10 s windows, at least 0.3 s apart. If the
    negative deflections dominate, the trace is inverted first.

    Beats whose preceding RR interval deviates by more than 25% from the
    running median, or whose filtered amplitude is below 0.7 times the
    median peak amplitude, are listed in ``suspects``.

    Raises
    ------
    ValueError
        No (or more than one) ECG channel, or less than 5 s of data.
    NoPeaksError
        Nothing crossed the threshold.
    """
    check_recording(rec)
    ecg = single_channel_of(rec, Modality.ECG)
    if rec.duration_s < MIN_DURATION_S:
        raise ValueError(f"need at least {MIN_DURATION_S} s of ECG, got {rec.duration_s:.2f} s")
    x = lowpass_array(rec.data[ecg], ECG_CUTOFF_HZ, rec.rate_hz)
    x = x - np.median(x)
    if np.percentile(-x, 99.5) > np.percentile(x, 99.5):
        x = -x
    thr = _running_threshold(x, rec.rate_hz)
    height = np.where(thr > 0, thr, np.inf)
    peaks, props = signal.find_peaks(
        x, height=height, distance=max(int(round(REFRACTORY_S * rec.rate_hz)), 1)
    )
    if peaks.size == 0:
        raise NoPeaksError("zero peaks found on the ECG channel")
    amplitudes = props["peak_heights"]

    suspects = []
    if peaks.size >= 2:
        rr = np.diff(peaks) / rec.rate_hz
        rr_median = float(np.median(rr))
        local = _running_median(rr, _RR_MEDIAN_BEATS)
        for i, (value, ref) in enumerate(zip(rr, local)):
            if value > (1 + RR_TOLERANCE) * ref:
                suspects.append((i + 1, RR_TOO_LONG))
            elif value < (1 - RR_TOLERANCE) * ref:
                suspects.append((i + 1, RR_TOO_SHORT))
    else:
        rr_median = float("nan")
    low = np.flatnonzero(amplitudes < LOW_AMPLITUDE_FRACTION * np.median(amplitudes))
    suspects.extend((int(i), LOW_AMPLITUDE) for i in low)
    suspects.sort()
    return RPeakReport(MarkerList.from_samples(peaks, PEAK_LABEL), rr_median, suspects, amplitudes)


def _peak_samples(peaks) -> np.ndarray:
    if isinstance(peaks, RPeakReport):
        peaks = peaks.peaks
    if isinstance(peaks, MarkerList):
        return np.unique(peaks.samples)
    return np.unique(np.asarray(peaks, dtype=np.int64))


def _correctable(rec: Recording, channels) -> np.ndarray:
    picks = rec.picks(channels)
    # the ECG is the timing reference and stays untouched
    return np.array([i for i in picks if rec.channels[i].modality != Modality.ECG], dtype=int)


def pulse_template_stream(rec: Recording, peaks, params: BcgParams = BcgParams(),
                          channels=Modality.EEG) -> np.ndarray:
    """Cardiac-locked artifact estimate, shaped like ``rec.data``.

    Segment ``b`` spans ``[peak_b + delay, peak_b + delay + span)`` with
    ``span = span_fraction * median RR``. Its template averages the
    ``window_beats`` segments centered on ``b`` after demeaning each.
    Where a segment would run into the next one it is cut at the next
    segment's start.
    """
    check_recording(rec)
    p = _peak_samples(peaks)
    if p.size < 3:
        raise ValueError(f"at least 3 R-peaks are required, got {p.size}")
    rr = float(np.median(np.diff(p)))
    span = int(round(params.span_fraction * rr))
    if span < 1:
        raise ValueError("segment span is shorter than one sample")
    starts = p + int(round(params.delay_s * rec.rate_hz))
    stream = np.zeros_like(rec.data)
    for ch in _correctable(rec, channels):
        seg = _aas.extract_segments(rec.data[ch], starts, span)
        templates = _aas.sliding_templates(seg, params.window_beats, demean=True,
                                           method=params.method)
        stream[ch] = _aas.template_stream(templates, starts, rec.n_samples)
    return stream


def subtract_pulse_artifact(rec: Recording, peaks, params: BcgParams = BcgParams(),
                            channels=Modality.EEG) -> Recording:
    """Subtract the ballistocardiogram artifact from ``channels`` (default EEG)."""
    stream = pulse_template_stream(rec, peaks, params, channels)
    return rec.with_data(rec.data - stream)


class PulseArtifactCorrector(TransformerMixin, BaseEstimator):
    """Estimator wrapper around R-peak detection and BCG subtraction.

    ``fit`` detects R-peaks on the ECG channel unless ``peaks`` (e.g. a
    manually reviewed marker list) is passed.

    Attributes
    ----------
    peaks_ : MarkerList
    report_ : RPeakReport or None
        None when peaks were supplied.
    """

    def __init__(self, delay_s=0.21, span_fraction=1.0, window_beats=21, method="mean",
                 channels="EEG"):
        self.delay_s = delay_s
        self.span_fraction = span_fraction
        self.window_beats = window_beats
        self.method = method
        self.channels = channels

    def _params(self) -> BcgParams:
        return BcgParams(self.delay_s, self.span_fraction, self.window_beats, self.method)

    def fit(self, X: Recording, y=None, peaks=None):
        self._params()
        check_recording(X)
        if peaks is None:
            self.report_ = detect_r_peaks(X)
            self.peaks_ = self.report_.peaks
        else:
            self.report_ = None
            self.peaks_ = (peaks if isinstance(peaks, MarkerList)
                           else MarkerList.from_samples(peaks, PEAK_LABEL))
        return self

    def transform(self, X: Recording) -> Recording:
        check_is_fitted(self, "peaks_")
        return subtract_pulse_artifact(X, self.peaks_, self._params(), self.channels)
