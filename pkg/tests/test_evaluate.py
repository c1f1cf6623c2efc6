import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_recording
from mrclean.evaluate import (
    ATTENUATION_CAP_DB,
    CardiacLock,
    HarmonicBands,
    artifact_attenuation,
    average_erp,
    drift_exceeds_frame,
    epoch,
    erp_channel_correlation,
    estimate_drift,
    harmonic_power,
    magnitude_spectrum,
    roi_snr,
    write_correlation_csv,
)
from mrclean.recording import Marker

RATE = 5000.0


def _rec_with_markers(n_ch=3, n=60000, samples=(), label="STIM", seed=0):
    rng = np.random.default_rng(seed)
    markers = [Marker(int(s), label) for s in samples]
    return make_recording(rng.standard_normal((n_ch, n)), RATE, markers=markers)


def test_epoch_length_and_order():
    rec = _rec_with_markers(samples=[10000, 20000, 30000])
    ep = epoch(rec, "STIM", 1.0, 1.0)
    assert ep.data.shape == (3, 3, 10000)
    assert ep.pre_samples == 5000
    np.testing.assert_array_equal(ep.data[1], rec.data[:, 15000:25000])
    assert ep.times_s[5000] == 0.0


def test_out_of_range_trial_dropped_and_counted():
    rec = _rec_with_markers(samples=[100, 20000, 57000])
    ep = epoch(rec, "STIM", 1.0, 1.0)
    assert ep.n_trials == 1 and ep.n_dropped == 2
    np.testing.assert_array_equal(ep.trial_samples, [20000])


def test_zero_usable_trials_raises():
    with pytest.raises(ValueError, match="zero usable trials"):
        epoch(_rec_with_markers(samples=[100]), "STIM")


def test_twelve_markers_twelve_trials():
    rec = _rec_with_markers(n=200000, samples=np.arange(12) * 15000 + 6000)
    assert epoch(rec, "STIM").n_trials == 12


def test_label_prefix_selection():
    rec = make_recording(np.zeros((1, 50000)), markers=[Marker(10000, "STIM/aba"),
                                                        Marker(30000, "STIM/ata"),
                                                        Marker(20000, "GO")])
    assert epoch(rec, "STIM").trial_labels == ["STIM/aba", "STIM/ata"]


@pytest.mark.parametrize("seed", range(5))
def test_average_matches_loop_oracle(seed):
    rng = np.random.default_rng(seed)
    samples = np.sort(rng.choice(np.arange(3000, 57000), 9, replace=False))
    rec = _rec_with_markers(samples=samples, seed=seed)
    pre, post = 0.3, 0.5
    erp = average_erp(epoch(rec, "STIM", pre, post))
    a, b = int(pre * RATE), int(post * RATE)
    oracle = np.zeros((rec.n_channels, a + b))
    for s in samples:
        for c in range(rec.n_channels):
            for k in range(a + b):
                oracle[c, k] += rec.data[c, s - a + k]
    oracle /= samples.size
    np.testing.assert_allclose(erp, oracle, rtol=0, atol=1e-9)


def test_identical_and_single_trials():
    rng = np.random.default_rng(1)
    trial = rng.standard_normal((2, 1000))
    data = np.zeros((2, 20000))
    for s in (2000, 8000, 14000):
        data[:, s - 500:s + 500] = trial
    rec = make_recording(data, markers=[Marker(s, "S") for s in (2000, 8000, 14000)])
    ep = epoch(rec, "S", 0.1, 0.1)
    np.testing.assert_allclose(average_erp(ep), trial, atol=1e-12)
    single = epoch(make_recording(data, markers=[Marker(8000, "S")]), "S", 0.1, 0.1)
    np.testing.assert_array_equal(average_erp(single), single.data[0])


def test_baseline_correction_and_errors():
    data = np.full((1, 20000), 7.0)
    rec = make_recording(data, markers=[Marker(10000, "S")])
    ep = epoch(rec, "S", 1.0, 1.0)
    np.testing.assert_allclose(average_erp(ep, baseline=(-0.5, 0.0)), 0.0, atol=1e-12)
    with pytest.raises(ValueError, match="outside"):
        average_erp(ep, baseline=(-1.5, 0.0))


def test_correlation_identity_and_negation():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((4, 500))
    np.testing.assert_allclose(erp_channel_correlation(a, a).r, 1.0)
    np.testing.assert_allclose(erp_channel_correlation(a, -a).r, -1.0)
    s = erp_channel_correlation(a, a)
    assert s.mean == pytest.approx(1.0) and s.sd == pytest.approx(0.0, abs=1e-12)


def test_zero_variance_channel_is_missing():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((3, 200))
    b = a.copy()
    b[1] = 5.0
    s = erp_channel_correlation(a, b)
    assert np.isnan(s.r[1]) and s.n_valid == 2
    assert s.mean == pytest.approx(1.0)
    with pytest.raises(ValueError, match="shape"):
        erp_channel_correlation(a, a[:2])


@settings(max_examples=40, deadline=None)
@given(scale=st.floats(0.01, 100.0), offset=st.floats(-1e3, 1e3), seed=st.integers(0, 2**16))
def test_correlation_affine_invariance(scale, offset, seed):
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal((2, 3, 300))
    base = erp_channel_correlation(a, b).r
    np.testing.assert_allclose(erp_channel_correlation(scale * a + offset, b).r, base, atol=1e-9)
    np.testing.assert_allclose(erp_channel_correlation(a, scale * b + offset).r, base, atol=1e-9)


def test_calibration_sinusoid():
    t = np.arange(50000) / RATE
    spec = magnitude_spectrum(np.sin(2 * np.pi * 100.0 * t), RATE, 5000)
    k = int(np.argmax(spec.magnitude))
    assert spec.freqs_hz[k] == pytest.approx(100.0)
    assert spec.magnitude[k] == pytest.approx(1.0, abs=0.05)
    assert np.all(np.diff(spec.freqs_hz) > 0)
    assert spec.freqs_hz[0] == 0.0 and spec.freqs_hz[-1] == pytest.approx(RATE / 2)


def test_white_noise_is_flat():
    x = np.random.default_rng(4).standard_normal(2000 * 60)
    spec = magnitude_spectrum(x, RATE, 4000)
    assert spec.n_segments >= 50
    band = (spec.freqs_hz >= 10) & (spec.freqs_hz <= 2000)
    db = 20 * np.log10(spec.magnitude[band] / np.median(spec.magnitude[band]))
    assert np.all(np.abs(db) <= 3.0)


@pytest.mark.parametrize("seed", range(3))
def test_parseval_total_power(seed):
    rng = np.random.default_rng(seed)
    x = np.convolve(rng.standard_normal(400000), rng.standard_normal(20), mode="same")
    spec = magnitude_spectrum(x, RATE, 2048)
    assert spec.total_power() == pytest.approx(np.mean(x ** 2), rel=0.01)


def test_spectrum_errors():
    with pytest.raises(ValueError, match="16"):
        magnitude_spectrum(np.zeros(100), RATE, 8)
    with pytest.raises(ValueError, match="shorter"):
        magnitude_spectrum(np.zeros(100), RATE, 200)
    with pytest.raises(ValueError):
        magnitude_spectrum(np.zeros(100), RATE, 32, window="boxcar")


def test_harmonic_power_cases():
    t = np.arange(100000) / RATE
    spec = magnitude_spectrum(np.sin(2 * np.pi * 50.0 * t), RATE, 5000)
    total = np.sum(spec.magnitude ** 2)
    assert harmonic_power(spec, 50.0, 1) == pytest.approx(total, rel=1e-6)
    assert harmonic_power(spec, 50.0, 5) == pytest.approx(total, rel=1e-6)
    zero = magnitude_spectrum(np.zeros(10000), RATE, 5000)
    assert harmonic_power(zero, 50.0, 3) == 0.0
    with pytest.raises(ValueError, match="out of range"):
        harmonic_power(spec, 1000.0, 3)


def test_attenuation_identity_and_cap():
    rng = np.random.default_rng(5)
    truth = rng.standard_normal((2, 20000))
    before = make_recording(truth + 3.0 * rng.standard_normal((2, 20000)))
    np.testing.assert_array_equal(artifact_attenuation(before, before, truth), 0.0)
    perfect = make_recording(truth.copy())
    np.testing.assert_array_equal(artifact_attenuation(before, perfect, truth), ATTENUATION_CAP_DB)
    half = make_recording(truth + 0.3 * (before.data - truth))
    np.testing.assert_allclose(artifact_attenuation(before, half, truth), 20 * np.log10(1 / 0.3))
    with pytest.raises(ValueError, match="shape"):
        artifact_attenuation(before, make_recording(truth[:1]), truth)


def test_attenuation_harmonic_and_cardiac_modes():
    rng = np.random.default_rng(6)
    n, period = 101 * 500, 101
    art = np.tile(np.linspace(1, -1, period), n // period) * 100.0
    noise = rng.standard_normal(n)
    before = make_recording(np.vstack([noise + art]))
    after = make_recording(np.vstack([noise + 0.01 * art]))
    db = artifact_attenuation(before, after, HarmonicBands(RATE / period, 20, 10100))
    assert db[0] == pytest.approx(40.0, abs=1.0)
    peaks = np.arange(2000, n - 5000, 5000)
    db = artifact_attenuation(before, after, CardiacLock(peaks, 0.0, 0.8, reference=noise[None, :]))
    assert db[0] == pytest.approx(40.0, abs=1e-6)


def test_drift_anchor_and_flag():
    d = estimate_drift(9900, 0.0101, 99.16)
    assert d == pytest.approx(8.3, abs=0.05)
    assert not drift_exceeds_frame(d)
    assert drift_exceeds_frame(10.2) and not drift_exceeds_frame(10.1)
    assert estimate_drift(1000, 0.01, 10.0) == 0.0
    # literal trigger-span denominator, for reference
    assert estimate_drift(9900, 0.0101, 99.16, reference="eeg") == pytest.approx(8.370, abs=1e-3)


def test_drift_errors():
    with pytest.raises(ValueError, match="zero span"):
        estimate_drift(100, 0.01, 0.0)
    with pytest.raises(ValueError):
        estimate_drift(0, 0.01, 1.0)


def _snr_image(roi_mean, sigma, seed=0):
    rng = np.random.default_rng(seed)
    img = np.zeros((64, 64))
    noise = np.zeros_like(img, dtype=bool)
    noise[:, :16] = True
    vals = rng.standard_normal(noise.sum())
    img[noise] = sigma * (vals - vals.mean()) / vals.std()
    roi = np.zeros_like(noise)
    roi[30:40, 30:40] = True
    img[roi] = roi_mean
    return img, roi, noise


def test_roi_snr_anchor_values():
    img, roi, noise = _snr_image(10.148 * 3.0, 3.0)
    assert roi_snr(img, roi, noise) == pytest.approx(10.148, abs=1e-6)
    img, roi, noise = _snr_image(5.0, 2.0)
    assert roi_snr(img, roi, noise) == pytest.approx(2.5, abs=1e-12)


def test_roi_snr_errors():
    img, roi, noise = _snr_image(5.0, 2.0)
    with pytest.raises(ValueError, match="zero noise deviation"):
        roi_snr(np.ones((64, 64)), roi, noise)
    with pytest.raises(ValueError, match="disjoint"):
        roi_snr(img, roi, roi)
    with pytest.raises(ValueError, match="nonempty"):
        roi_snr(img, np.zeros_like(roi), noise)


def test_correlation_csv(tmp_path):
    a = np.random.default_rng(7).standard_normal((2, 100))
    path = tmp_path / "r.csv"
    write_correlation_csv(path, erp_channel_correlation(a, a), ["C3", "C4"])
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    assert [row["channel"] for row in rows] == ["C3", "C4", "mean", "sd"]
    np.testing.assert_allclose([float(row["r"]) for row in rows[:3]], 1.0)
