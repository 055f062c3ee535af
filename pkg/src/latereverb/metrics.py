"""Similarity metrics for late reverberation.

Four distances between a reference RIR ``h`` and an analyzed RIR
``h_hat``:

PC
    averaged power convergence on Hann-smoothed power spectrograms.
EDC
    band-averaged, 0 dB-normalized energy-decay-curve convergence.
MSS
    multi-scale spectral loss (spectral convergence + log magnitude).
ESR
    time-domain error-to-signal ratio.

Each metric is available as a plain function and as a :class:`Metric`
object whose :meth:`Metric.features` / :meth:`Metric.distance` split lets
pairwise studies compute per-signal work once.
"""
from __future__ import annotations

import enum
import hashlib
import json
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from . import kernels
from .dsp_core import (
    DEFAULT_FLOOR_DB,
    BandSet,
    band_edc,
    conv2d_strided,
    hann_kernel_2d,
    power_spectrogram,
    stft,
    third_octave_centers,
)
from .errors import DegenerateSignalError, InvalidArgumentError, PairMismatchError


class MetricKind(str, enum.Enum):
    PC = "PC"
    EDC = "EDC"
    MSS = "MSS"
    ESR = "ESR"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class PcConfig:
    stft_window: int = 1024
    stft_hop: int = 256
    kernel_side: int = 64
    stride: int = 4
    epsilon: float = 1e-12

    def __post_init__(self):
        for name in ("stft_window", "stft_hop", "kernel_side", "stride"):
            if int(getattr(self, name)) < 1:
                raise InvalidArgumentError(f"PcConfig.{name} must be >= 1")
        if not self.epsilon > 0:
            raise InvalidArgumentError("PcConfig.epsilon must be > 0")

    def min_length(self):
        """Shortest signal that yields a smoothed map of at least 1x1."""
        frames_needed = self.kernel_side
        bins = self.stft_window // 2 + 1
        if bins < self.kernel_side:
            return None
        return self.stft_window + (frames_needed - 1) * self.stft_hop


@dataclass(frozen=True)
class MssConfig:
    """STFT resolutions as ``(fft_size, hop, window_length)`` triples."""

    resolutions: tuple = ((512, 128, 512), (1024, 256, 1024), (2048, 512, 2048))
    log_epsilon: float = 1e-8

    def __post_init__(self):
        res = tuple(tuple(int(v) for v in r) for r in self.resolutions)
        if not res:
            raise InvalidArgumentError("MssConfig needs at least one resolution")
        for r in res:
            if len(r) != 3:
                raise InvalidArgumentError(f"resolution {r} is not (fft_size, hop, window_length)")
            fft_size, hop, win = r
            if min(r) < 1 or win > fft_size:
                raise InvalidArgumentError(f"invalid resolution {r}")
        if not self.log_epsilon > 0:
            raise InvalidArgumentError("MssConfig.log_epsilon must be > 0")
        object.__setattr__(self, "resolutions", res)


@dataclass(frozen=True)
class EdcConfig:
    bands: BandSet = None
    floor_db: float = DEFAULT_FLOOR_DB
    linear_filter: bool = True

    def __post_init__(self):
        if self.bands is None:
            object.__setattr__(self, "bands", third_octave_centers())


@dataclass(frozen=True)
class MetricResult:
    value: float
    metric: MetricKind
    ref_id: str
    analyzed_id: str
    config_digest: str

    def __post_init__(self):
        if not (np.isfinite(self.value) and self.value >= 0):
            raise InvalidArgumentError(f"metric value must be finite and >= 0, got {self.value}")


def config_digest(obj):
    """Short stable hash of a config dataclass (or any JSON-able value)."""
    payload = asdict(obj) if hasattr(obj, "__dataclass_fields__") else obj
    text = json.dumps(payload, sort_keys=True, default=_json_default)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def _json_default(o):
    if hasattr(o, "__dataclass_fields__"):
        return asdict(o)
    if isinstance(o, enum.Enum):
        return o.value
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not serializable: {type(o).__name__}")


def check_pair(h, h_hat):
    if h.sample_rate != h_hat.sample_rate:
        raise PairMismatchError(f"sample rates differ: {h.sample_rate} vs {h_hat.sample_rate}")
    if len(h) != len(h_hat):
        raise PairMismatchError(f"lengths differ: {len(h)} vs {len(h_hat)}")


def _check_shapes(a, b):
    if a.shape != b.shape:
        raise PairMismatchError(f"shape mismatch: {a.shape} vs {b.shape}")


# -- averaged power convergence ------------------------------------------------


def pc_power_map(signal, cfg=PcConfig()):
    """Power spectrogram smoothed by the strided 2D Hann kernel."""
    need = cfg.min_length()
    if need is None or len(signal) < need:
        raise InvalidArgumentError(
            f"signal of {len(signal)} samples too short for PC (needs {need} samples)"
        )
    power = power_spectrogram(stft(signal, cfg.stft_window, cfg.stft_hop))
    return conv2d_strided(power, hann_kernel_2d(cfg.kernel_side), cfg.stride)


def pc_from_maps(p, p_hat, epsilon=1e-12):
    _check_shapes(p, p_hat)
    ratio = (p - p_hat) / (p * p_hat + epsilon)
    return float(np.sqrt(np.sum(ratio * ratio)))


def pc_loss(h, h_hat, cfg=PcConfig()):
    """Averaged power convergence between reference ``h`` and ``h_hat``.

    Frobenius norm of ``(P - P_hat) / (P * P_hat + eps)`` where ``P`` is the
    smoothed power map of ``h``. Symmetric in its arguments.
    """
    check_pair(h, h_hat)
    return pc_from_maps(pc_power_map(h, cfg), pc_power_map(h_hat, cfg), cfg.epsilon)


# -- energy decay convergence --------------------------------------------------


def edc_from_curves(ref, analyzed):
    """EDC distance between two precomputed :class:`EdcCurves`."""
    if ref.centers != analyzed.centers:
        raise PairMismatchError("EDC curves computed on different band sets")
    _check_shapes(ref.curves, analyzed.curves)
    usable = ~ref.silent & (ref.sq_norms > 0)
    if not usable.all():
        skipped = [c for c, ok in zip(ref.centers, usable) if not ok]
        warnings.warn(f"skipping reference bands without decay energy: {skipped}", stacklevel=2)
    if not usable.any():
        raise DegenerateSignalError("no band of the reference carries energy")
    idx = np.flatnonzero(usable)
    if idx.size == len(usable):
        num = kernels.row_sq_error(ref.curves, analyzed.curves)
    else:
        num = kernels.row_sq_error(ref.curves[idx], analyzed.curves[idx])
    return float(np.mean(num / ref.sq_norms[idx]))


def edc_loss(h, h_hat, bands=None, floor_db=DEFAULT_FLOOR_DB, linear_filter=True):
    """Energy decay convergence averaged over frequency bands.

    Both signals are split into ``bands`` (default: 29 third-octave bands
    from 20 Hz to 12.5 kHz, minus any above Nyquist), Schroeder-integrated,
    normalized to 0 dB and compared by squared dB error relative to the
    reference curve's energy.
    """
    check_pair(h, h_hat)
    return edc_from_curves(band_edc(h, bands, floor_db, linear=linear_filter),
                           band_edc(h_hat, bands, floor_db, linear=linear_filter))


# -- multi-scale spectral loss -------------------------------------------------


def spectral_convergence(mag, mag_hat):
    mag = np.asarray(mag, dtype=np.float64)
    mag_hat = np.asarray(mag_hat, dtype=np.float64)
    _check_shapes(mag, mag_hat)
    denom = np.linalg.norm(mag)
    if not denom > 0:
        raise DegenerateSignalError("reference magnitude spectrogram is all zero")
    return float(np.linalg.norm(mag - mag_hat) / denom)


def log_magnitude_loss(mag, mag_hat, n_frames=None, log_epsilon=1e-8):
    """Mean over frames of the l1 distance between natural-log magnitudes."""
    mag = np.asarray(mag, dtype=np.float64)
    mag_hat = np.asarray(mag_hat, dtype=np.float64)
    _check_shapes(mag, mag_hat)
    if mag.ndim != 2:
        raise InvalidArgumentError("magnitudes must be (frequency, time) matrices")
    if n_frames is None:
        n_frames = mag.shape[1]
    elif n_frames != mag.shape[1]:
        raise InvalidArgumentError(f"n_frames={n_frames} but matrices have {mag.shape[1]} frames")
    return _log_term(np.log(mag + log_epsilon), np.log(mag_hat + log_epsilon), n_frames)


def _log_term(log_mag, log_mag_hat, n_frames):
    return float(np.sum(np.abs(log_mag - log_mag_hat)) / n_frames)


@dataclass(frozen=True, eq=False)
class _MssSpectra:
    mags: tuple
    logs: tuple


def mss_spectra(signal, cfg=MssConfig()):
    mags, logs = [], []
    for fft_size, hop, win in cfg.resolutions:
        mag = stft(signal, win, hop, n_fft=fft_size).magnitude
        mags.append(mag)
        logs.append(np.log(mag + cfg.log_epsilon))
    return _MssSpectra(tuple(mags), tuple(logs))


def mss_from_spectra(ref, analyzed):
    total = 0.0
    for mag, mag_hat, log_mag, log_hat in zip(ref.mags, analyzed.mags, ref.logs, analyzed.logs):
        total += spectral_convergence(mag, mag_hat) + _log_term(log_mag, log_hat, mag.shape[1])
    return total / len(ref.mags)


def mss_loss(h, h_hat, cfg=MssConfig()):
    check_pair(h, h_hat)
    return mss_from_spectra(mss_spectra(h, cfg), mss_spectra(h_hat, cfg))


# -- error-to-signal ratio -----------------------------------------------------


def esr_loss(h, h_hat):
    """Squared error normalized by the reference energy.

    Inputs are expected to be trimmed to the late reverberation already.
    """
    check_pair(h, h_hat)
    return _esr(h.samples, h_hat.samples)


def _esr(x, y):
    _check_shapes(x, y)
    energy = float(np.dot(x, x))
    if not energy > 0:
        raise DegenerateSignalError("reference has zero energy")
    d = x - y
    return float(np.dot(d, d)) / energy


# -- metric objects ------------------------------------------------------------


class Metric:
    """A distance with a reusable per-signal feature stage.

    ``metric(h, h_hat)`` equals ``metric.distance(metric.features(h),
    metric.features(h_hat))``.
    """

    kind = None
    config = None

    @property
    def name(self):
        return str(self.kind)

    @property
    def config_digest(self):
        return config_digest({"metric": self.name, "config": self.config})

    def features(self, signal):
        raise NotImplementedError

    def distance(self, ref_features, analyzed_features):
        raise NotImplementedError

    def __call__(self, h, h_hat):
        check_pair(h, h_hat)
        return self.distance(self.features(h), self.features(h_hat))

    def __repr__(self):
        return f"{type(self).__name__}({self.config!r})"


class PcMetric(Metric):
    kind = MetricKind.PC

    def __init__(self, config=None):
        self.config = config or PcConfig()

    def features(self, signal):
        return pc_power_map(signal, self.config)

    def distance(self, ref_features, analyzed_features):
        return pc_from_maps(ref_features, analyzed_features, self.config.epsilon)


class EdcMetric(Metric):
    kind = MetricKind.EDC

    def __init__(self, config=None):
        self.config = config or EdcConfig()

    def features(self, signal):
        cfg = self.config
        return band_edc(signal, cfg.bands, cfg.floor_db, linear=cfg.linear_filter)

    def distance(self, ref_features, analyzed_features):
        return edc_from_curves(ref_features, analyzed_features)


class MssMetric(Metric):
    kind = MetricKind.MSS

    def __init__(self, config=None):
        self.config = config or MssConfig()

    def features(self, signal):
        return mss_spectra(signal, self.config)

    def distance(self, ref_features, analyzed_features):
        return mss_from_spectra(ref_features, analyzed_features)


class EsrMetric(Metric):
    kind = MetricKind.ESR
    config = {}

    def features(self, signal):
        return signal.samples

    def distance(self, ref_features, analyzed_features):
        return _esr(ref_features, analyzed_features)


class FunctionMetric(Metric):
    """Wraps a plain ``fn(h, h_hat) -> float`` as a :class:`Metric`."""

    def __init__(self, fn, name=None):
        self.fn = fn
        self._name = name or getattr(fn, "__name__", "custom")
        self.config = {"function": self._name}

    @property
    def name(self):
        return self._name

    def features(self, signal):
        return signal

    def distance(self, ref_features, analyzed_features):
        return float(self.fn(ref_features, analyzed_features))


def build_metric(name, pc=None, mss=None, edc=None):
    """Metric object for ``name`` in {PC, EDC, MSS, ESR}."""
    try:
        kind = MetricKind(str(name).upper())
    except ValueError:
        raise InvalidArgumentError(f"unknown metric {name!r}; choose from PC, EDC, MSS, ESR") from None
    if kind is MetricKind.PC:
        return PcMetric(pc)
    if kind is MetricKind.EDC:
        return EdcMetric(edc)
    if kind is MetricKind.MSS:
        return MssMetric(mss)
    return EsrMetric()


def as_metric(metric):
    if isinstance(metric, Metric):
        return metric
    if isinstance(metric, (str, MetricKind)):
        return build_metric(metric)
    if callable(metric):
        return FunctionMetric(metric)
    raise InvalidArgumentError(f"not a metric: {metric!r}")
