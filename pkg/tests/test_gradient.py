import numpy as np
import pytest

from conftest import make_recording
from mrclean.evaluate import harmonic_power, magnitude_spectrum
from mrclean.gradient import (
    GaParams,
    GradientArtifactCorrector,
    PeriodMismatchError,
    detect_gradient_onsets,
    gradient_template_stream,
    repetition_length,
    subtract_gradient_artifact,
)
from mrclean.synth import add_gradient_artifact

RATE = 5000.0
TR_S = 0.00505


def _artifact_recording(n=20000, period=50, start=0, noise_uv=0.0, n_channels=1,
                        drift_rate=0.0, seed=0, shape="sawtooth"):
    rng = np.random.default_rng(seed)
    base = make_recording(noise_uv * rng.standard_normal((n_channels, n)), RATE)
    rec, truth, artifact = add_gradient_artifact(
        base, period_samples=period, amplitude_uv=5000.0, shape=shape,
        drift_rate=drift_rate, start_sample=start, stop_sample=n, seed=seed)
    return rec, truth, artifact, base


def test_all_zero_recording_has_no_onsets():
    assert len(detect_gradient_onsets(make_recording(np.zeros((2, 5000))))) == 0


@pytest.mark.parametrize("n", [20000, 20037, 9999])
def test_sawtooth_period_50_onsets_match_planted(n):
    rec, truth, _, _ = _artifact_recording(n=n, period=50, noise_uv=5.0)
    found = detect_gradient_onsets(rec).samples
    assert found.size == n // 50
    assert np.max(np.abs(found - truth.samples)) <= 2
    assert np.all(found % 50 == found[0] % 50)


def test_onsets_with_leading_quiet_segment():
    rec, truth, _, _ = _artifact_recording(n=30000, period=101, start=1234, noise_uv=10.0)
    found = detect_gradient_onsets(rec).samples
    np.testing.assert_array_equal(found, truth.samples)


def test_inter_onset_interval_is_whole_number_of_repetition_times(session):
    onsets = detect_gradient_onsets(session.contaminated).samples
    intervals_tr = np.diff(onsets) / session.contaminated.rate_hz / TR_S
    np.testing.assert_allclose(intervals_tr, np.round(intervals_tr), atol=1e-9)
    assert np.all(np.round(intervals_tr) >= 1)


def test_detection_is_deterministic():
    rec, _, _, _ = _artifact_recording(noise_uv=5.0)
    a = detect_gradient_onsets(rec).samples
    b = detect_gradient_onsets(rec).samples
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("k", [1, 17, 333])
def test_detection_is_translation_covariant(k):
    rng = np.random.default_rng(3)
    rec, _, _, _ = _artifact_recording(n=25000, period=101, start=500, noise_uv=5.0)
    pad = 5.0 * rng.standard_normal((1, k))
    shifted = make_recording(np.hstack([pad, rec.data]), RATE)
    a = detect_gradient_onsets(rec).samples
    b = detect_gradient_onsets(shifted).samples
    np.testing.assert_array_equal(b, a + k)


def test_expected_period_mismatch_raises():
    rec, _, _, _ = _artifact_recording(period=101)
    detect_gradient_onsets(rec, GaParams(expected_period_s=101 / RATE))
    with pytest.raises(PeriodMismatchError, match="period mismatch"):
        detect_gradient_onsets(rec, GaParams(expected_period_s=2 * 101 / RATE))


@pytest.mark.parametrize("kwargs", [
    {"window_reps": 20}, {"window_reps": 1}, {"threshold_factor": 0.0},
    {"align_search": -1}, {"expected_period_s": -0.01},
])
def test_invalid_params(kwargs):
    with pytest.raises(ValueError):
        GaParams(**kwargs)


def test_repetition_length_errors():
    with pytest.raises(ValueError, match="at least 3"):
        repetition_length(np.array([0, 100]))
    with pytest.raises(ValueError, match="varies"):
        repetition_length(np.array([0, 100, 200, 350, 450]))


@pytest.mark.parametrize("shape", ["sawtooth", "multiharmonic"])
def test_null_case_interior_residual(shape):
    rec, truth, artifact, _ = _artifact_recording(n=30000, period=101, start=0, shape=shape)
    out = subtract_gradient_artifact(rec, truth)
    interior = slice(truth.samples[10], truth.samples[-10])
    resid = np.sqrt(np.mean(out.data[:, interior] ** 2))
    art = np.sqrt(np.mean(artifact[:, interior] ** 2))
    assert resid <= 1e-6 * art


def test_output_plus_template_stream_equals_input():
    rec, truth, _, _ = _artifact_recording(n=20000, period=101, noise_uv=10.0, n_channels=3,
                                           drift_rate=0.01)
    stream = gradient_template_stream(rec, truth)
    out = subtract_gradient_artifact(rec, truth)
    np.testing.assert_allclose(out.data + stream, rec.data, rtol=0, atol=1e-6)
    assert out.data.shape == rec.data.shape


def test_samples_outside_repetitions_unchanged():
    rec, truth, _, _ = _artifact_recording(n=20000, period=101, start=3000, noise_uv=10.0)
    out = subtract_gradient_artifact(rec, truth)
    np.testing.assert_array_equal(out.data[:, :3000], rec.data[:, :3000])


def test_sliding_window_tracks_amplitude_growth_better_than_global_template():
    n, period = 100 * 101, 101
    n_reps = n // period
    # amplitude doubles from the first to the last repetition
    rec, truth, _, base = _artifact_recording(n=n, period=period, noise_uv=10.0,
                                              drift_rate=1.0 / (n_reps - 1))
    sliding = subtract_gradient_artifact(rec, truth, GaParams(window_reps=21))
    global_ = subtract_gradient_artifact(rec, truth, GaParams(window_reps=2 * n_reps + 1))
    err_sliding = np.mean((sliding.data - base.data) ** 2)
    err_global = np.mean((global_.data - base.data) ** 2)
    assert 10 * np.log10(err_global / err_sliding) >= 10.0


def test_second_pass_removes_less_and_never_increases_harmonic_power():
    rec, truth, _, _ = _artifact_recording(n=60000, period=101, noise_uv=10.0, drift_rate=0.001)
    f0 = RATE / 101

    def power(r):
        return harmonic_power(magnitude_spectrum(r.data[0], RATE, 10100), f0, 20)

    once = subtract_gradient_artifact(rec, truth)
    twice = subtract_gradient_artifact(once, truth)
    p0, p1, p2 = power(rec), power(once), power(twice)
    assert p2 <= p1
    assert p1 - p2 <= p0 - p1


def test_channels_are_corrected_independently():
    rec, truth, _, _ = _artifact_recording(n=20000, period=101, noise_uv=10.0, n_channels=2,
                                           drift_rate=0.002)
    both = subtract_gradient_artifact(rec, truth)
    for ch in range(2):
        alone = subtract_gradient_artifact(make_recording(rec.data[ch:ch + 1], RATE), truth)
        np.testing.assert_array_equal(both.data[ch], alone.data[0])


def test_channel_subset_leaves_other_rows():
    rec, truth, _, _ = _artifact_recording(n=20000, period=101, n_channels=2)
    out = subtract_gradient_artifact(rec, truth, channels=["ch1"])
    np.testing.assert_array_equal(out.data[0], rec.data[0])
    assert not np.array_equal(out.data[1], rec.data[1])


def test_estimator_matches_functions():
    rec, truth, _, _ = _artifact_recording(n=20000, period=101, noise_uv=10.0)
    est = GradientArtifactCorrector().fit(rec)
    np.testing.assert_array_equal(est.onsets_.samples, truth.samples)
    assert est.period_samples_ == 101
    np.testing.assert_array_equal(est.transform(rec).data,
                                  subtract_gradient_artifact(rec, truth).data)
