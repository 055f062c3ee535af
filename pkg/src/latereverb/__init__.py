"""Similarity metrics for the late reverberation of room impulse responses."""
from .dsp_core import (
    BandSet,
    EdcCurves,
    Signal,
    Spectrogram,
    band_edc,
    bandpass,
    conv2d_strided,
    decay_time,
    edc_to_db_normalized,
    hann_kernel_2d,
    hann_window,
    power_spectrogram,
    schroeder_edc,
    stft,
    third_octave_centers,
)
from .kernels import BACKEND
from .metrics import (
    EdcConfig,
    EdcMetric,
    EsrMetric,
    Metric,
    MetricKind,
    MetricResult,
    MssConfig,
    MssMetric,
    PcConfig,
    PcMetric,
    build_metric,
    edc_loss,
    esr_loss,
    log_magnitude_loss,
    mss_loss,
    pc_loss,
    spectral_convergence,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BandSet",
    "EdcConfig",
    "EdcCurves",
    "EdcMetric",
    "EsrMetric",
    "Metric",
    "MetricKind",
    "MetricResult",
    "MssConfig",
    "MssMetric",
    "PcConfig",
    "PcMetric",
    "Signal",
    "Spectrogram",
    "band_edc",
    "bandpass",
    "build_metric",
    "conv2d_strided",
    "decay_time",
    "edc_loss",
    "edc_to_db_normalized",
    "esr_loss",
    "hann_kernel_2d",
    "hann_window",
    "log_magnitude_loss",
    "mss_loss",
    "pc_loss",
    "power_spectrogram",
    "schroeder_edc",
    "spectral_convergence",
    "stft",
    "third_octave_centers",
]
