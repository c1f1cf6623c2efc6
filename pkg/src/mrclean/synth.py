"""Synthetic multimodal sessions with retained ground truth.

A session is built additively: clean EEG (autoregressive background plus
stimulus-locked ERPs), then myogenic and ocular contamination, ECG and
ballistocardiogram, and finally the gradient artifact. Every addend is
kept, so ``contaminated == base + sum(addends)`` exactly.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import signal

from .recording import (
    DEFAULT_RATE_HZ,
    EEG_NAMES,
    ChannelInfo,
    Marker,
    MarkerList,
    Modality,
    Recording,
    default_montage,
)

VCV_WORDS = ("apa", "ata", "aka", "asa", "asha", "ala", "afa", "ara", "aha",
             "awa", "aya", "aba", "ada", "aga", "atha", "ama", "ana", "ava")


# Protocol -------------------------------------------------------------------

@dataclass(frozen=True)
class ProtocolConfig:
    n_trials: int = 12
    words: tuple = VCV_WORDS
    jitter_choices_s: tuple = (0.5, 0.75, 1.0)
    fixation_s: float = 0.5
    word_s: float = 1.0
    go_s: float = 2.0
    blank_s: float = 0.5
    rest_s: float = 60.0
    seed: int = 0

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError("n_trials must be positive")
        if not self.words:
            raise ValueError("words must be nonempty")
        if not self.jitter_choices_s:
            raise ValueError("jitter_choices_s must be nonempty")
        durations = (self.fixation_s, self.word_s, self.go_s, self.blank_s, self.rest_s,
                     *self.jitter_choices_s)
        if any(d <= 0 for d in durations):
            raise ValueError("all durations must be positive")


def _protocol_times(cfg: ProtocolConfig):
    rng = np.random.default_rng(cfg.seed)
    words = []
    while len(words) < cfg.n_trials:
        words.extend(cfg.words[i] for i in rng.permutation(len(cfg.words)))
    words = words[:cfg.n_trials]
    jitters = rng.choice(np.asarray(cfg.jitter_choices_s, dtype=float), size=cfg.n_trials)
    events = [(0.0, "REST_START"), (cfg.rest_s, "REST_END")]
    t = cfg.rest_s
    for word, iti in zip(words, jitters):
        events.append((t, "ITI_START"))
        t += iti
        events.append((t, "FIX"))
        t += cfg.fixation_s
        events.append((t, f"STIM/{word}"))
        t += cfg.word_s
        events.append((t, "GO"))
        t += cfg.go_s
        events.append((t, "BLANK"))
        t += cfg.blank_s
    return events, t


def generate_protocol(cfg: ProtocolConfig = ProtocolConfig(),
                      rate_hz: float = DEFAULT_RATE_HZ) -> MarkerList:
    """Marker timeline of a resting period followed by ``n_trials`` trials.

    Each trial is ITI_START (jittered duration), FIX, STIM/<word>, GO,
    BLANK. Word order is a seeded permutation (repeated if more trials than
    words); jitters are drawn uniformly from ``jitter_choices_s``.
    """
    events, _ = _protocol_times(cfg)
    return MarkerList(((int(round(t * rate_hz)), label) for t, label in events), sort=False)


def protocol_duration_s(cfg: ProtocolConfig = ProtocolConfig()) -> float:
    """Total duration of the timeline: rest plus every trial, end of the last BLANK."""
    return _protocol_times(cfg)[1]


# Clean EEG ------------------------------------------------------------------

_DEFAULT_ERP_GAINS = {"C3": 1.0, "C4": 0.55, "F3": 0.9, "F4": 0.5, "FPz": 0.6,
                      "O1": 0.35, "O2": 0.3, "M1": -0.3, "M2": -0.25}


@dataclass(frozen=True)
class CleanEegConfig:
    rate_hz: float = DEFAULT_RATE_HZ
    n_samples: Optional[int] = None
    channel_names: tuple = EEG_NAMES
    background_rms_uv: float = 10.0
    ar_coef: float = 0.98
    erp_peak_uv: float = 8.0
    erp_duration_s: float = 0.4
    erp_label: str = "STIM"
    erp_gains: Optional[dict] = None
    # background = n_latent cortical sources through fixed topographies + sensor noise
    n_latent: int = 3
    sensor_noise_uv: float = 2.0
    seed: int = 0


def erp_template(rate_hz: float, duration_s: float = 0.4, peak_uv: float = 8.0) -> np.ndarray:
    """Damped sinusoid completing one cycle over ``duration_s``, peak ``peak_uv``."""
    t = np.arange(int(round(duration_s * rate_hz))) / rate_hz
    wave = np.sin(2 * np.pi * t / duration_s) * np.exp(-t / (0.4 * duration_s))
    return peak_uv * wave / np.max(np.abs(wave))


def _ar_sources(rng, n_sources, n_samples, coef):
    # unit-variance stationary AR(1), including the initial state
    innov = rng.standard_normal((n_sources, n_samples)) * np.sqrt(1 - coef ** 2)
    zi = (coef * rng.standard_normal(n_sources))[:, None]
    out, _ = signal.lfilter([1.0], [1.0, -coef], innov, axis=1, zi=zi)
    return out


# occipital alpha and lateral (mu-like) patterns over EEG_NAMES
_DEFAULT_TOPOGRAPHIES = np.array([
    [0.30, 0.30, 0.10, 0.10, 0.05, 1.00, 1.00, 0.40, 0.40],
    [0.80, -0.80, 0.30, -0.30, 0.00, 0.20, -0.20, 0.10, -0.10],
]).T


def latent_topographies(erp_gains: np.ndarray, n_latent: int, rng,
                        default: bool = False) -> np.ndarray:
    """Spatial patterns of the background sources, one column each.

    The first column is the ERP topography, so the evoked source also has
    ongoing activity. With ``default`` (the standard montage) the next
    columns are fixed occipital and lateral patterns; any further columns
    are seeded Gaussian patterns.
    """
    cols = [erp_gains / max(np.linalg.norm(erp_gains), 1e-300)]
    fixed = list(_DEFAULT_TOPOGRAPHIES.T) if default else []
    while len(cols) < n_latent:
        g = fixed.pop(0) if fixed else rng.standard_normal(erp_gains.size)
        cols.append(g / np.linalg.norm(g))
    return np.column_stack(cols)[:, :n_latent]


def _background(rng, gains, n_samples, cfg):
    n_ch = gains.size
    if cfg.sensor_noise_uv > cfg.background_rms_uv:
        raise ValueError("sensor_noise_uv exceeds background_rms_uv")
    if cfg.n_latent < 1:
        return cfg.background_rms_uv * _ar_sources(rng, n_ch, n_samples, cfg.ar_coef)
    topo = latent_topographies(gains, cfg.n_latent, rng,
                               default=tuple(cfg.channel_names) == tuple(EEG_NAMES))
    # rescale rows so every channel carries the configured total RMS
    latent_var = cfg.background_rms_uv ** 2 - cfg.sensor_noise_uv ** 2
    topo = topo * np.sqrt(latent_var / np.sum(topo ** 2, axis=1))[:, None]
    out = topo @ _ar_sources(rng, cfg.n_latent, n_samples, cfg.ar_coef)
    if cfg.sensor_noise_uv > 0:
        out += cfg.sensor_noise_uv * _ar_sources(rng, n_ch, n_samples, cfg.ar_coef)
    return out


def synth_clean_eeg(protocol: MarkerList, cfg: CleanEegConfig = CleanEegConfig()) -> Recording:
    """Ground-truth EEG: AR(1) background plus an ERP at every STIM marker.

    The background mixes ``n_latent`` unit AR(1) sources through spatial
    topographies and adds independent AR(1) sensor noise, scaled so every
    channel has ``background_rms_uv``.
    """
    n = cfg.n_samples
    if n is None:
        n = (protocol.samples.max() + 1) if len(protocol) else 0
    gains_map = dict(_DEFAULT_ERP_GAINS if cfg.erp_gains is None else cfg.erp_gains)
    gains = np.array([gains_map.get(name, 0.5) for name in cfg.channel_names])
    rng = np.random.default_rng(cfg.seed)
    data = np.zeros((len(cfg.channel_names), n))
    if cfg.background_rms_uv > 0:
        data += _background(rng, gains, n, cfg)
    erp = erp_template(cfg.rate_hz, cfg.erp_duration_s, cfg.erp_peak_uv)
    for m in protocol.select(cfg.erp_label):
        stop = min(m.sample + erp.size, n)
        data[:, m.sample:stop] += gains[:, None] * erp[None, :stop - m.sample]
    markers = MarkerList(m for m in protocol if m.sample < n)
    channels = [ChannelInfo(name, Modality.EEG) for name in cfg.channel_names]
    return Recording(cfg.rate_hz, channels, data, markers)


# Gradient artifact ------------------------------------------------------------

@dataclass(frozen=True)
class GradientConfig:
    period_samples: int = 101
    amplitude_uv: float = 5000.0
    shape: str = "sawtooth"
    drift_rate: float = 0.001
    start_s: float = 0.2
    stop_margin_s: float = 0.2
    gains: Optional[tuple] = None
    seed: int = 0


def gradient_waveform(period: int, shape: str = "sawtooth", seed: int = 0) -> np.ndarray:
    """Zero-mean repetition waveform with unit peak magnitude.

    ``sawtooth`` jumps to +1 at the onset and ramps linearly to -1;
    ``multiharmonic`` sums 12 harmonics of the period with 1/k amplitudes
    and seeded phases.
    """
    if shape == "sawtooth":
        wave = np.linspace(1.0, -1.0, period)
    elif shape == "multiharmonic":
        rng = np.random.default_rng(seed)
        t = np.arange(period) / period
        phases = rng.uniform(0, 2 * np.pi, 12)
        wave = sum(np.sin(2 * np.pi * k * t + phases[k - 1]) / k for k in range(1, 13))
    else:
        raise ValueError(f"unknown gradient shape {shape!r}")
    wave = wave - wave.mean()
    return wave / np.max(np.abs(wave))


def add_gradient_artifact(rec: Recording, period_samples: int = 101,
                          amplitude_uv: float = 5000.0, shape: str = "sawtooth",
                          drift_rate: float = 0.001, start_sample: Optional[int] = None,
                          stop_sample: Optional[int] = None, gains=None, seed: int = 0):
    """Add a periodic gradient artifact to every channel.

    Repetition ``r`` is ``amplitude_uv * (1 + drift_rate * r) * gain_c *
    waveform``; only whole repetitions fitting in ``[start, stop)`` are
    planted.

    Returns
    -------
    (Recording, MarkerList, ndarray)
        Contaminated recording (with SCAN_START/SCAN_STOP markers), true
        GA_ONSET markers, and the added artifact.
    """
    if period_samples < 10:
        raise ValueError(f"period must be >= 10 samples, got {period_samples}")
    if not amplitude_uv > 0:
        raise ValueError(f"amplitude must be positive, got {amplitude_uv}")
    n = rec.n_samples
    start = int(round(0.2 * rec.rate_hz)) if start_sample is None else int(start_sample)
    stop = n - int(round(0.2 * rec.rate_hz)) if stop_sample is None else int(stop_sample)
    rng = np.random.default_rng(seed)
    if gains is None:
        gains = rng.uniform(0.6, 1.0, rec.n_channels)
    gains = np.asarray(gains, dtype=float)
    wave = gradient_waveform(period_samples, shape, seed)
    n_reps = max((stop - start) // period_samples, 0)
    onsets = start + period_samples * np.arange(n_reps)
    scale = amplitude_uv * (1.0 + drift_rate * np.arange(n_reps))
    trace = np.zeros(n)
    if n_reps:
        trace[start:start + n_reps * period_samples] = (scale[:, None] * wave[None, :]).ravel()
    artifact = gains[:, None] * trace[None, :]
    truth = MarkerList.from_samples(onsets, "GA_ONSET")
    scan = []
    if n_reps:
        scan = [Marker(start, "SCAN_START"),
                Marker(min(start + n_reps * period_samples, n - 1), "SCAN_STOP")]
    out = Recording(rec.rate_hz, rec.channels, rec.data + artifact, rec.markers.merge(scan))
    return out, truth, artifact


# ECG and ballistocardiogram ------------------------------------------------------

_DEFAULT_BCG_GAINS = {"C3": 0.8, "C4": -0.8, "F3": 0.7, "F4": -0.7, "FPz": 0.7,
                      "O1": 0.9, "O2": -0.9, "M1": 1.0, "M2": -1.0}

# (offset s, amplitude, width s) of the P, Q, R, S, T waves
_ECG_WAVES = ((-0.20, 0.12, 0.025), (-0.03, -0.15, 0.008), (0.0, 1.0, 0.010),
              (0.03, -0.15, 0.008), (0.25, 0.30, 0.040))


@dataclass(frozen=True)
class CardiacConfig:
    bpm: float = 60.0
    hrv_jitter: float = 0.05
    ecg_amplitude_uv: float = 1000.0
    noise_snr_db: float = 20.0
    bcg_amplitude_uv: float = 100.0
    bcg_duration_s: float = 0.5
    delay_s: float = 0.21
    amp_jitter: float = 0.0
    latency_jitter_s: float = 0.0
    gains: Optional[dict] = None
    seed: int = 0


def bcg_waveform(rate_hz: float, duration_s: float = 0.5) -> np.ndarray:
    """Zero-mean, Hann-tapered 4 Hz oscillation with unit peak magnitude."""
    n = int(round(duration_s * rate_hz))
    t = np.arange(n) / rate_hz
    taper = np.hanning(n)
    wave = taper * np.sin(2 * np.pi * 4.0 * t)
    wave = wave - taper * (wave.sum() / taper.sum())
    return wave / np.max(np.abs(wave))


def ecg_beat(rate_hz: float) -> tuple:
    """One ECG complex (unit R amplitude) and the index of the R peak in it."""
    half = int(round(0.45 * rate_hz))
    t = np.arange(-half, half + 1) / rate_hz
    beat = sum(a * np.exp(-0.5 * ((t - mu) / w) ** 2) for mu, a, w in _ECG_WAVES)
    return beat, half


def r_peak_times(n_samples: int, rate_hz: float, bpm: float, hrv_jitter: float,
                 rng, first_s: float = 0.5) -> np.ndarray:
    rr = 60.0 / bpm
    t = first_s + rng.uniform(0, 0.25 * rr)
    out = []
    limit = n_samples / rate_hz - 0.5
    while t < limit:
        out.append(t)
        t += rr * (1.0 + hrv_jitter * rng.uniform(-1, 1))
    return np.round(np.asarray(out) * rate_hz).astype(np.int64)


def synth_ecg_and_bcg(rec: Recording, bpm: float = 60.0, hrv_jitter: float = 0.05,
                      bcg_template: Optional[np.ndarray] = None, delay_s: float = 0.21,
                      per_channel_gains=None, cfg: CardiacConfig = CardiacConfig()):
    """Write a synthetic ECG into the ECG channel and add BCG to the EEG.

    R-peak intervals are ``60 / bpm * (1 + hrv_jitter * U(-1, 1))``. Each
    EEG channel receives ``bcg_template`` at ``R + delay_s`` (plus the
    per-beat latency jitter of ``cfg``) scaled by its gain; M1 and M2 have
    opposite signs by default.

    Returns
    -------
    (Recording, MarkerList, ndarray, ndarray)
        Recording, true R_PEAK markers, ECG addend and BCG addend.
    """
    if not 30 <= bpm <= 180:
        raise ValueError(f"bpm must lie in [30, 180], got {bpm}")
    rng = np.random.default_rng(cfg.seed)
    rate, n = rec.rate_hz, rec.n_samples
    peaks = r_peak_times(n, rate, bpm, hrv_jitter, rng)

    ecg_add = np.zeros_like(rec.data)
    ecg_rows = [i for i, c in enumerate(rec.channels) if c.modality == Modality.ECG]
    if ecg_rows:
        beat, center = ecg_beat(rate)
        clean = np.zeros(n)
        _stamp(clean, peaks - center, cfg.ecg_amplitude_uv * beat)
        noise_sd = np.sqrt(np.mean(clean ** 2)) / 10 ** (cfg.noise_snr_db / 20)
        ecg_add[ecg_rows[0]] = clean + noise_sd * rng.standard_normal(n)

    template = bcg_waveform(rate, cfg.bcg_duration_s) if bcg_template is None else np.asarray(bcg_template, float)
    gains_map = dict(_DEFAULT_BCG_GAINS if per_channel_gains is None else per_channel_gains)
    bcg_add = np.zeros_like(rec.data)
    amp = 1.0 + cfg.amp_jitter * rng.uniform(-1, 1, peaks.size)
    lat = np.round(cfg.latency_jitter_s * rng.uniform(-1, 1, peaks.size) * rate).astype(np.int64)
    onsets = peaks + int(round(delay_s * rate)) + lat
    trace = np.zeros(n)
    for o, a in zip(onsets, amp):
        _stamp(trace, np.array([o]), a * cfg.bcg_amplitude_uv * template)
    for i, c in enumerate(rec.channels):
        if c.modality == Modality.EEG:
            bcg_add[i] = gains_map.get(c.name, 0.0) * trace

    out = rec.with_data(rec.data + ecg_add + bcg_add)
    return out, MarkerList.from_samples(peaks, "R_PEAK"), ecg_add, bcg_add


def _stamp(x: np.ndarray, starts: np.ndarray, wave: np.ndarray) -> None:
    for s in starts:
        a, b = max(s, 0), min(s + wave.size, x.size)
        if b > a:
            x[a:b] += wave[a - s:b - s]


# Myogenic and ocular contamination -------------------------------------------

@dataclass(frozen=True)
class BurstSpec:
    """EMG bursts following each GO marker, from ``n_sources`` muscles."""

    n_sources: int = 2
    latency_s: float = 0.25
    duration_s: float = 0.7
    band_hz: tuple = (20.0, 450.0)
    amplitude_uv: float = 40.0
    ref_noise_uv: float = 2.0
    # sustained muscle tone between bursts, as a fraction of burst amplitude
    tonic_level: float = 0.2
    label: str = "GO"


@dataclass(frozen=True)
class BlinkSpec:
    """Blinks at random times: one per trial at a random latency after GO,
    plus Poisson background blinks."""

    amplitude_uv: float = 150.0
    duration_s: float = 0.3
    task_latency_s: tuple = (0.1, 0.5)
    background_rate_hz: float = 0.3
    ref_noise_uv: float = 3.0
    label: str = "GO"


# rows: EEG channels in EEG_NAMES order; cols: EMG source 1, EMG source 2, blinks
_DEFAULT_MIXING = np.array([
    [0.55, 0.20, 0.15],   # C3
    [0.20, 0.55, 0.15],   # C4
    [0.60, 0.25, 0.45],   # F3
    [0.25, 0.60, 0.45],   # F4
    [0.35, 0.35, 1.00],   # FPz
    [0.05, 0.10, 0.02],   # O1
    [0.10, 0.05, 0.02],   # O2
    [0.80, 0.30, 0.05],   # M1
    [0.30, 0.80, 0.05],   # M2
])
# reference electrodes sit on the source, so they see it more strongly than the scalp
_DEFAULT_EMG_REF_GAINS = np.array([[3.0, 1.0], [1.0, 3.0], [2.0, 2.0]])
_DEFAULT_EOG_REF_GAINS = np.array([[1.5], [1.0]])


def blink_waveform(rate_hz: float, duration_s: float = 0.3) -> np.ndarray:
    n = int(round(duration_s * rate_hz))
    return np.sin(np.pi * np.arange(n) / n) ** 2


def add_myogenic_ocular(rec: Recording, burst_spec: BurstSpec = BurstSpec(),
                        blink_spec: BlinkSpec = BlinkSpec(), mixing=None, seed: int = 0,
                        scale: float = 1.0):
    """Plant EMG bursts and blinks in the reference channels and mix them into EEG.

    Latent sources are ``burst_spec.n_sources`` band-limited noise bursts
    locked to GO markers and one blink train. Reference channels observe
    them through fixed gains plus independent noise; EEG channels receive
    ``mixing @ sources``. ``scale`` multiplies the whole contribution.

    Returns
    -------
    (Recording, dict)
        The dict holds ``sources``, ``mixing``, ``emg_gains``,
        ``eog_gains``, the ``myogenic`` and ``ocular`` addends and the
        ``events`` marker list.
    """
    rng = np.random.default_rng(seed)
    rate, n = rec.rate_hz, rec.n_samples
    eeg = [i for i, c in enumerate(rec.channels) if c.modality == Modality.EEG]
    emg = [i for i, c in enumerate(rec.channels) if c.modality == Modality.EMG]
    eog = [i for i, c in enumerate(rec.channels) if c.modality == Modality.EOG]
    n_src = burst_spec.n_sources + 1
    if mixing is None:
        mixing = _DEFAULT_MIXING if len(eeg) == 9 and n_src == 3 else rng.uniform(0, 1, (len(eeg), n_src))
    mixing = np.asarray(mixing, dtype=float)
    if mixing.shape != (len(eeg), n_src):
        raise ValueError(f"mixing must have shape {(len(eeg), n_src)}, got {mixing.shape}")

    events = []
    sources = np.zeros((n_src, n))
    go = rec.markers.select(burst_spec.label).samples
    sos = signal.butter(4, burst_spec.band_hz, btype="band", fs=rate, output="sos")
    dur = int(round(burst_spec.duration_s * rate))
    envelope = signal.windows.tukey(dur, 0.3)
    for k in range(burst_spec.n_sources):
        noise = signal.sosfiltfilt(sos, rng.standard_normal(n))
        noise /= np.std(noise)
        env = np.full(n, float(burst_spec.tonic_level))
        for g in go:
            s = g + int(round((burst_spec.latency_s + rng.uniform(-0.05, 0.05)) * rate))
            a, b = max(s, 0), min(s + dur, n)
            if b > a:
                env[a:b] += envelope[a - s:b - s]
                if k == 0:
                    events += [Marker(a, "EMG_BURST_START"), Marker(b - 1, "EMG_BURST_END")]
        sources[k] = burst_spec.amplitude_uv * env * noise

    blink = blink_waveform(rate, blink_spec.duration_s)
    times = [g + int(round(rng.uniform(*blink_spec.task_latency_s) * rate))
             for g in rec.markers.select(blink_spec.label).samples]
    if blink_spec.background_rate_hz > 0:
        n_bg = rng.poisson(blink_spec.background_rate_hz * n / rate)
        times += list(rng.integers(0, max(n - blink.size, 1), n_bg))
    for t in sorted(times):
        _stamp(sources[-1], np.array([t]), blink_spec.amplitude_uv * blink)
        if t < n:
            events.append(Marker(int(t), "BLINK"))

    emg_gains = _DEFAULT_EMG_REF_GAINS[: len(emg), : burst_spec.n_sources]
    if emg_gains.shape != (len(emg), burst_spec.n_sources):
        emg_gains = rng.uniform(0.3, 1.0, (len(emg), burst_spec.n_sources))
    eog_gains = _DEFAULT_EOG_REF_GAINS[: len(eog)]
    if eog_gains.shape != (len(eog), 1):
        eog_gains = rng.uniform(0.5, 1.2, (len(eog), 1))

    myogenic = np.zeros_like(rec.data)
    ocular = np.zeros_like(rec.data)
    myogenic[eeg] = mixing[:, :-1] @ sources[:-1]
    ocular[eeg] = mixing[:, -1:] @ sources[-1:]
    if emg:
        myogenic[emg] = emg_gains @ sources[:-1] + burst_spec.ref_noise_uv * rng.standard_normal((len(emg), n))
    if eog:
        ocular[eog] = eog_gains @ sources[-1:] + blink_spec.ref_noise_uv * rng.standard_normal((len(eog), n))
    myogenic *= scale
    ocular *= scale

    out = rec.with_data(rec.data + myogenic + ocular)
    truth = {"sources": scale * sources, "mixing": mixing, "emg_gains": emg_gains,
             "eog_gains": eog_gains, "myogenic": myogenic, "ocular": ocular,
             "events": MarkerList(events)}
    return out, truth


# Whole sessions ----------------------------------------------------------------

@dataclass(frozen=True)
class SessionConfig:
    rate_hz: float = DEFAULT_RATE_HZ
    protocol: ProtocolConfig = ProtocolConfig()
    clean: CleanEegConfig = CleanEegConfig()
    gradient: GradientConfig = GradientConfig()
    cardiac: CardiacConfig = CardiacConfig()
    bursts: BurstSpec = BurstSpec()
    blinks: BlinkSpec = BlinkSpec()
    # peak |ERP| of clean + myogenic/ocular EEG in GO-locked epochs; None keeps scale 1
    target_contaminated_peak_uv: Optional[float] = 60.0
    epoch_label: str = "GO"
    epoch_pre_s: float = 1.0
    epoch_post_s: float = 1.0
    enable_gradient: bool = True
    enable_cardiac: bool = True
    enable_myogenic: bool = True

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SessionConfig":
        nested = {"protocol": ProtocolConfig, "clean": CleanEegConfig,
                  "gradient": GradientConfig, "cardiac": CardiacConfig,
                  "bursts": BurstSpec, "blinks": BlinkSpec}
        kwargs = {}
        names = {f.name for f in dataclasses.fields(cls)}
        for key, value in d.items():
            if key not in names:
                raise ValueError(f"unknown session config field {key!r}")
            if key in nested and isinstance(value, dict):
                sub = nested[key]
                sub_names = {f.name for f in dataclasses.fields(sub)}
                unknown = set(value) - sub_names
                if unknown:
                    raise ValueError(f"unknown {key} config field(s) {sorted(unknown)}")
                value = sub(**{k: tuple(v) if isinstance(v, list) else v for k, v in value.items()})
            kwargs[key] = value
        return cls(**kwargs)


@dataclass(frozen=True, eq=False)
class SessionTruth:
    """Simulator output.

    ``addends`` maps component names (``myogenic``, ``ocular``, ``ecg``,
    ``bcg``, ``gradient``) to full-montage arrays; ``base`` is the clean
    EEG placed in the EEG rows of the montage.
    """

    contaminated: Recording
    clean_eeg: Recording
    true_onsets: MarkerList
    mixing_truth: dict
    addends: dict
    base: np.ndarray
    config: SessionConfig = field(default_factory=SessionConfig)
    contamination_scale: float = 1.0

    def eeg_rows(self) -> np.ndarray:
        return self.contaminated.picks(Modality.EEG)

    def without(self, *names) -> np.ndarray:
        """Contaminated data with the named addends removed."""
        data = np.array(self.contaminated.data)
        for name in names:
            data = data - self.addends[name]
        return data


def _go_locked_peak(data: np.ndarray, go: np.ndarray, pre: int, post: int) -> float:
    go = go[(go - pre >= 0) & (go + post <= data.shape[1])]
    idx = go[:, None] + np.arange(-pre, post)[None, :]
    return float(np.max(np.abs(data[:, idx].mean(axis=1))))


def _calibrate_scale(clean: np.ndarray, contamination: np.ndarray, go: np.ndarray,
                     pre: int, post: int, target: float) -> float:
    # peak(c) is convex in c, so bisection on the sub-level set is safe
    def peak(c):
        return _go_locked_peak(clean + c * contamination, go, pre, post)

    if peak(0.0) >= target:
        return 0.0
    hi = 1.0
    while peak(hi) < target:
        hi *= 2.0
        if hi > 1e6:
            raise ValueError("contamination too weak to reach the target peak")
    lo = 0.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if peak(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def generate_session(config: SessionConfig = SessionConfig(), seed: int = 0) -> SessionTruth:
    """Simulate a full 15-channel session; deterministic for a given seed.

    All component seeds are derived from ``seed``; the seeds inside the
    nested configs are ignored.
    """
    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(5)]
    rate = config.rate_hz
    protocol_cfg = dataclasses.replace(config.protocol, seed=seeds[0])
    protocol = generate_protocol(protocol_cfg, rate)
    n = int(round(protocol_duration_s(protocol_cfg) * rate))

    clean_cfg = dataclasses.replace(config.clean, rate_hz=rate, n_samples=n, seed=seeds[1])
    clean = synth_clean_eeg(protocol, clean_cfg)
    channels = default_montage()
    base = np.zeros((len(channels), n))
    eeg = [i for i, c in enumerate(channels) if c.modality == Modality.EEG]
    base[eeg] = clean.data
    rec = Recording(rate, channels, base, protocol)
    addends = {}
    mixing_truth = {}
    true_markers = list(protocol)
    scale = 1.0

    if config.enable_myogenic:
        _, unit = add_myogenic_ocular(rec, config.bursts, config.blinks, seed=seeds[2])
        if config.target_contaminated_peak_uv is not None:
            pre = int(round(config.epoch_pre_s * rate))
            post = int(round(config.epoch_post_s * rate))
            go = protocol.select(config.epoch_label).samples
            contamination = (unit["myogenic"] + unit["ocular"])[eeg]
            scale = _calibrate_scale(clean.data, contamination, go, pre, post,
                                     config.target_contaminated_peak_uv)
        rec, truth = add_myogenic_ocular(rec, config.bursts, config.blinks, seed=seeds[2],
                                         scale=scale)
        addends["myogenic"] = truth["myogenic"]
        addends["ocular"] = truth["ocular"]
        mixing_truth.update(myogenic_ocular_mixing=truth["mixing"], emg_ref_gains=truth["emg_gains"],
                            eog_ref_gains=truth["eog_gains"], sources=truth["sources"])
        true_markers += list(truth["events"])

    if config.enable_cardiac:
        cc = dataclasses.replace(config.cardiac, seed=seeds[3])
        rec, peaks, ecg_add, bcg_add = synth_ecg_and_bcg(
            rec, cc.bpm, cc.hrv_jitter, delay_s=cc.delay_s, per_channel_gains=cc.gains, cfg=cc)
        addends["ecg"] = ecg_add
        addends["bcg"] = bcg_add
        gains = dict(_DEFAULT_BCG_GAINS if cc.gains is None else cc.gains)
        mixing_truth["bcg_gains"] = np.array([gains.get(c.name, 0.0) if c.modality == Modality.EEG else 0.0
                                              for c in channels])
        true_markers += list(peaks)

    if config.enable_gradient:
        gc = config.gradient
        rec, onsets, ga_add = add_gradient_artifact(
            rec, gc.period_samples, gc.amplitude_uv, gc.shape, gc.drift_rate,
            start_sample=int(round(gc.start_s * rate)),
            stop_sample=n - int(round(gc.stop_margin_s * rate)),
            gains=gc.gains, seed=seeds[4])
        addends["gradient"] = ga_add
        mixing_truth["gradient_gains"] = ga_add.max(axis=1) / max(np.abs(ga_add).max(), 1e-300)
        true_markers += list(onsets)
        true_markers += [m for m in rec.markers if m.label in ("SCAN_START", "SCAN_STOP")]

    total = base.copy()
    for name in ("myogenic", "ocular", "ecg", "bcg", "gradient"):
        if name in addends:
            total = total + addends[name]
    contaminated = Recording(rate, channels, total, rec.markers)
    return SessionTruth(contaminated, clean, MarkerList(true_markers), mixing_truth, addends,
                        base, config, scale)
