"""Artifact suppression for EEG, EMG, EOG and ECG recorded during real-time MRI.

The pipeline runs in a fixed order: gradient artifact subtraction
(:class:`GradientArtifactCorrector`), pulse artifact subtraction
(:class:`PulseArtifactCorrector`) and reference-based CCA denoising
(:class:`CCADenoiser`). All three are scikit-learn transformers over
:class:`Recording` objects, so they compose in a ``Pipeline``.
"""

from .cca import CCADenoiser, CcaParams, CcaResult, compute_cca, remove_components, select_artifact_components
from .evaluate import (
    artifact_attenuation,
    average_erp,
    epoch,
    erp_channel_correlation,
    estimate_drift,
    harmonic_power,
    magnitude_spectrum,
    roi_snr,
)
from .gradient import (
    GaParams,
    GradientArtifactCorrector,
    PeriodMismatchError,
    detect_gradient_onsets,
    subtract_gradient_artifact,
)
from .io import ContainerError, load_recording, save_recording
from .pulse import BcgParams, NoPeaksError, PulseArtifactCorrector, RPeakReport, detect_r_peaks, subtract_pulse_artifact
from .recording import ChannelInfo, Marker, MarkerList, Modality, Recording, default_montage, select_channels
from .synth import ProtocolConfig, SessionConfig, SessionTruth, generate_protocol, generate_session

__version__ = "0.1.0"

__all__ = [
    "BcgParams", "CCADenoiser", "CcaParams", "CcaResult", "ChannelInfo", "ContainerError",
    "GaParams", "GradientArtifactCorrector", "Marker", "MarkerList", "Modality", "NoPeaksError",
    "PeriodMismatchError", "ProtocolConfig", "PulseArtifactCorrector", "RPeakReport", "Recording",
    "SessionConfig", "SessionTruth", "artifact_attenuation", "average_erp", "compute_cca",
    "default_montage", "detect_gradient_onsets", "detect_r_peaks", "epoch", "erp_channel_correlation",
    "estimate_drift", "generate_protocol", "generate_session", "harmonic_power", "load_recording",
    "magnitude_spectrum", "remove_components", "roi_snr", "save_recording", "select_artifact_components",
    "select_channels", "subtract_gradient_artifact", "subtract_pulse_artifact",
]
