"""Gradient artifact onset detection and sliding-window average subtraction."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import _aas
from .recording import MarkerList, Recording
from .validation import check_recording

ONSET_LABEL = "GA_ONSET"
# fraction of events that must recur one period later
_PERIOD_MATCH_FRACTION = 0.8
_MAX_PERIOD_CANDIDATES = 400
# repetitions must resemble their mean this closely before alignment is attempted
_ALIGN_MIN_CORRELATION = 0.5


class PeriodMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class GaParams:
    """Gradient artifact correction settings.

    ``threshold_factor`` is in multiples of the median absolute first
    difference of the detection channel. ``align_search`` bounds both the
    interval tolerance during detection and the per-repetition alignment
    shift before subtraction.
    """

    detection_channel: str = "auto"
    threshold_factor: float = 10.0
    expected_period_s: Optional[float] = None
    window_reps: int = 21
    align_search: int = 2
    demean: bool = True

    def __post_init__(self):
        if not self.threshold_factor > 0:
            raise ValueError(f"threshold_factor must be > 0, got {self.threshold_factor}")
        if int(self.window_reps) != self.window_reps or self.window_reps < 3 or self.window_reps % 2 == 0:
            raise ValueError(f"window_reps must be an odd integer >= 3, got {self.window_reps}")
        if int(self.align_search) != self.align_search or self.align_search < 0:
            raise ValueError(f"align_search must be a non-negative integer, got {self.align_search}")
        if self.expected_period_s is not None and not self.expected_period_s > 0:
            raise ValueError(f"expected_period_s must be positive, got {self.expected_period_s}")

    def to_dict(self):
        return asdict(self)


def pick_detection_channel(rec: Recording, params: GaParams) -> int:
    """Index of the detection channel; "auto" takes the channel with the
    largest 99th-percentile absolute first difference."""
    if params.detection_channel != "auto":
        return rec.channel_index(params.detection_channel)
    if rec.n_samples < 2:
        return 0
    p99 = np.percentile(np.abs(np.diff(rec.data, axis=1)), 99, axis=1)
    return int(np.argmax(p99))


def _threshold_events(x: np.ndarray, factor: float, merge_gap: int) -> np.ndarray:
    d = np.abs(np.diff(x))
    if d.size == 0:
        return np.empty(0, dtype=np.int64)
    base = np.median(d)
    if base == 0:
        base = d.mean()
    above = np.flatnonzero(d > factor * base)
    if above.size == 0:
        return above.astype(np.int64)
    # a transition between i and i+1 marks sample i+1; nearby crossings form one event
    starts = np.concatenate([[0], np.flatnonzero(np.diff(above) > merge_gap) + 1])
    return (above[starts] + 1).astype(np.int64)


def _nearest_distance(sorted_events: np.ndarray, targets: np.ndarray) -> np.ndarray:
    pos = np.searchsorted(sorted_events, targets)
    left = sorted_events[np.clip(pos - 1, 0, sorted_events.size - 1)]
    right = sorted_events[np.clip(pos, 0, sorted_events.size - 1)]
    return np.minimum(np.abs(targets - left), np.abs(right - targets))


def estimate_period(events: np.ndarray, tol: int, min_lag: int = 1) -> Optional[int]:
    """Smallest lag at which the event pattern repeats.

    A lag qualifies when at least 80% of the events that have room for a
    successor find another event within ``tol`` samples of ``event + lag``.
    """
    if events.size < 2:
        return None
    span = min(events.size - 1, 8)
    diffs = np.concatenate([events[k:] - events[:-k] for k in range(1, span + 1)])
    candidates = np.unique(diffs[diffs > max(min_lag, 2 * tol)])[:_MAX_PERIOD_CANDIDATES]
    for lag in candidates:
        src = events[events + lag <= events[-1] + tol]
        if src.size == 0:
            continue
        hit = _nearest_distance(events, src + lag) <= tol
        if hit.mean() >= _PERIOD_MATCH_FRACTION:
            return int(lag)
    return None


def _chain_onsets(events: np.ndarray, period: int, tol: int) -> np.ndarray:
    onsets = []
    current = int(events[0])
    last = int(events[-1])
    while True:
        onsets.append(current)
        target = current + period
        if target > last + tol:
            break
        d = np.abs(events - target)
        j = int(np.argmin(d))
        if d[j] <= tol:
            current = int(events[j])
            continue
        # missed event: keep the cadence if the artifact continues afterwards
        later = events[(events > target + tol) & (events <= target + period + tol)]
        if later.size:
            current = target
            continue
        rest = events[events > target + tol]
        if rest.size == 0:
            break
        current = int(rest[0])
    return np.asarray(onsets, dtype=np.int64)


def _trim_quiet_edges(x: np.ndarray, onsets: np.ndarray, period: int) -> np.ndarray:
    # the transition back to baseline after the last repetition looks like an onset
    def p2p(o):
        seg = x[o:o + period]
        return float(np.ptp(seg)) if seg.size else 0.0

    while onsets.size >= 2 and p2p(onsets[-1]) < 0.5 * p2p(onsets[-2]):
        onsets = onsets[:-1]
    while onsets.size >= 2 and p2p(onsets[0]) < 0.5 * p2p(onsets[1]):
        onsets = onsets[1:]
    # an artifact already running at sample 0 has no leading transition
    while onsets.size and onsets[0] - period >= 0 and p2p(onsets[0] - period) >= 0.5 * p2p(onsets[0]):
        onsets = np.concatenate([[onsets[0] - period], onsets])
    return onsets


def detect_gradient_onsets(rec: Recording, params: GaParams = GaParams()) -> MarkerList:
    """Find the first sample of every gradient artifact repetition.

    Samples where the absolute first difference of the detection channel
    exceeds ``threshold_factor`` times its median are grouped into events.
    The repetition period is the smallest integer lag at which the event
    pattern recurs; onsets are then chained one period apart starting at the
    first event, each snapped to the nearest event within ``align_search``
    samples.

    Returns
    -------
    MarkerList
        ``GA_ONSET`` markers; empty when nothing crosses the threshold.

    Raises
    ------
    PeriodMismatchError
        If ``expected_period_s`` is set and the detected period differs by
        more than 10%.
    """
    check_recording(rec)
    ch = pick_detection_channel(rec, params)
    tol = max(int(params.align_search), 1)
    events = _threshold_events(rec.data[ch], params.threshold_factor, merge_gap=max(2, tol))
    if events.size == 0:
        return MarkerList()
    if events.size == 1:
        return MarkerList.from_samples(events, ONSET_LABEL)
    period = estimate_period(events, tol)
    if period is None:
        # aperiodic crossings: report them as they are
        onsets = events
    else:
        onsets = _trim_quiet_edges(rec.data[ch], _chain_onsets(events, period, tol), period)
    if params.expected_period_s is not None and onsets.size >= 2:
        expected = params.expected_period_s * rec.rate_hz
        detected = float(np.median(np.diff(onsets)))
        if abs(detected - expected) > 0.1 * expected:
            raise PeriodMismatchError(
                f"period mismatch: detected {detected:.2f} samples, expected {expected:.2f}"
            )
    return MarkerList.from_samples(onsets, ONSET_LABEL)


def repetition_length(onsets: np.ndarray) -> int:
    """Median inter-onset interval; raises when intervals vary by more than 10%."""
    if onsets.size < 3:
        raise ValueError(f"at least 3 onsets are required, got {onsets.size}")
    intervals = np.diff(onsets)
    length = int(round(float(np.median(intervals))))
    if length <= 0:
        raise ValueError("onsets must be strictly increasing")
    spread = np.max(np.abs(intervals - length)) / length
    if spread > 0.1:
        raise ValueError(
            f"repetition length varies by {100 * spread:.1f}% (> 10%) across the recording"
        )
    return length


def _onset_samples(onsets) -> np.ndarray:
    if isinstance(onsets, MarkerList):
        return onsets.samples
    return np.asarray(onsets, dtype=np.int64)


def _median_correlation(segments: np.ndarray, ref: np.ndarray) -> float:
    norms = np.linalg.norm(segments, axis=1) * np.linalg.norm(ref)
    ok = norms > 0
    if not np.any(ok):
        return 0.0
    return float(np.median(segments[ok] @ ref / norms[ok]))


def gradient_template_stream(rec: Recording, onsets, params: GaParams = GaParams(),
                             channels=None) -> np.ndarray:
    """The artifact estimate that :func:`subtract_gradient_artifact` removes.

    Returns an array shaped like ``rec.data``; rows not in ``channels`` are
    zero.
    """
    check_recording(rec)
    starts = np.unique(_onset_samples(onsets))
    length = repetition_length(starts)
    picks = rec.picks(channels)
    stream = np.zeros_like(rec.data)
    for ch in picks:
        x = rec.data[ch]
        aligned = starts
        if params.align_search > 0:
            seg = _aas.extract_segments(x, starts, length)
            full = ~np.any(np.isnan(seg), axis=1)
            if np.any(full):
                centered = seg[full] - seg[full].mean(axis=1, keepdims=True)
                ref = centered.mean(axis=0)
                # shifting only makes sense where the repeating artifact dominates;
                # on artifact-free data the search would just fit noise
                if _median_correlation(centered, ref) >= _ALIGN_MIN_CORRELATION:
                    aligned = starts + _aas.best_shifts(x, starts, length, params.align_search, ref)
        seg = _aas.extract_segments(x, aligned, length)
        templates = _aas.sliding_templates(seg, params.window_reps, demean=params.demean)
        stream[ch] = _aas.template_stream(templates, aligned, rec.n_samples)
    return stream


def subtract_gradient_artifact(rec: Recording, onsets, params: GaParams = GaParams(),
                               channels=None) -> Recording:
    """Remove the gradient artifact by centered sliding-window template subtraction.

    Parameters
    ----------
    rec : Recording
    onsets : MarkerList or array of int
        Repetition onsets, typically from :func:`detect_gradient_onsets`.
    params : GaParams
    channels : selector, optional
        Channels to correct (default: all).
    """
    stream = gradient_template_stream(rec, onsets, params, channels)
    return rec.with_data(rec.data - stream)


class GradientArtifactCorrector(TransformerMixin, BaseEstimator):
    """Estimator wrapper: ``fit`` detects onsets, ``transform`` subtracts.

    Parameters mirror :class:`GaParams`. If ``onsets`` is given to ``fit``
    the detection step is skipped.

    Attributes
    ----------
    onsets_ : MarkerList
    period_samples_ : int
    """

    def __init__(self, detection_channel="auto", threshold_factor=10.0,
                 expected_period_s=None, window_reps=21, align_search=2, demean=True,
                 channels=None):
        self.detection_channel = detection_channel
        self.threshold_factor = threshold_factor
        self.expected_period_s = expected_period_s
        self.window_reps = window_reps
        self.align_search = align_search
        self.demean = demean
        self.channels = channels

    def _params(self) -> GaParams:
        return GaParams(self.detection_channel, self.threshold_factor, self.expected_period_s,
                        self.window_reps, self.align_search, self.demean)

    def fit(self, X: Recording, y=None, onsets=None):
        params = self._params()
        check_recording(X)
        if onsets is None:
            onsets = detect_gradient_onsets(X, params)
        elif not isinstance(onsets, MarkerList):
            onsets = MarkerList.from_samples(onsets, ONSET_LABEL)
        self.onsets_ = onsets
        self.period_samples_ = repetition_length(onsets.samples)
        return self

    def transform(self, X: Recording) -> Recording:
        check_is_fitted(self, "onsets_")
        return subtract_gradient_artifact(X, self.onsets_, self._params(), self.channels)
