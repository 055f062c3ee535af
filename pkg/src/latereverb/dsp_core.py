"""Signal-processing primitives shared by the metrics.

Windows, framing STFT, strided 2D smoothing, a brickwall third-octave
filterbank and Schroeder backward integration. Everything here is a pure
function of its inputs.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.fft import next_fast_len

from . import kernels
from .errors import BandOutOfRangeError, DegenerateSignalError, InvalidArgumentError

DEFAULT_FLOOR_DB = -120.0

# Nominal (preferred-number) third-octave centers, 20 Hz .. 12.5 kHz.
THIRD_OCTAVE_NOMINAL = (
    20.0, 25.0, 31.5, 40.0, 50.0, 63.0, 80.0, 100.0, 125.0, 160.0,
    200.0, 250.0, 315.0, 400.0, 500.0, 630.0, 800.0, 1000.0, 1250.0, 1600.0,
    2000.0, 2500.0, 3150.0, 4000.0, 5000.0, 6300.0, 8000.0, 10000.0, 12500.0,
)
_THIRD_OCTAVE_EXPONENTS = tuple(range(-17, 12))


@dataclass(frozen=True, eq=False)
class Signal:
    """A mono, finite, real-valued signal.

    ``samples`` is copied to a read-only float64 array on construction.
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        if np.ndim(self.samples) != 1:
            raise InvalidArgumentError("signal samples must be one-dimensional")
        x = np.array(self.samples, dtype=np.float64)
        if x.size < 1:
            raise InvalidArgumentError("signal must contain at least one sample")
        if not np.all(np.isfinite(x)):
            raise InvalidArgumentError("signal contains NaN or Inf")
        sr = self.sample_rate
        if isinstance(sr, float) and sr.is_integer():
            sr = int(sr)
        if not isinstance(sr, (int, np.integer)) or isinstance(sr, bool) or sr <= 0:
            raise InvalidArgumentError(f"sample rate must be a positive integer, got {self.sample_rate!r}")
        x.flags.writeable = False
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate", int(sr))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self):
        return len(self) / self.sample_rate

    @property
    def energy(self):
        return float(np.dot(self.samples, self.samples))


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """One-sided complex STFT, shape (frequency, time)."""

    bins: np.ndarray
    window_length: int
    hop: int
    n_fft: int
    one_sided: bool = True

    @property
    def n_frames(self):
        return self.bins.shape[1]

    @property
    def magnitude(self):
        return np.abs(self.bins)


@dataclass(frozen=True)
class BandSet:
    """Fractional-octave bands.

    ``centers`` are the labels reported to users; ``exact_centers`` place
    the band edges at ``exact_center * edge_factor**(-1/+1)``. For the
    default third-octave set the exact centers are base-2 midband
    frequencies, so adjacent edges coincide and the bands tile.
    """

    centers: tuple
    exact_centers: tuple = None
    edge_factor: float = 2.0 ** (1.0 / 6.0)

    def __post_init__(self):
        centers = tuple(float(c) for c in self.centers)
        exact = centers if self.exact_centers is None else tuple(float(c) for c in self.exact_centers)
        if len(exact) != len(centers):
            raise InvalidArgumentError("exact_centers must align with centers")
        if not centers:
            raise InvalidArgumentError("band set is empty")
        if any(c <= 0 for c in exact) or any(b <= a for a, b in zip(exact, exact[1:])):
            raise InvalidArgumentError("band centers must be positive and strictly increasing")
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "exact_centers", exact)

    def __len__(self):
        return len(self.centers)

    def edges(self):
        """(lower, upper) edge pairs in Hz."""
        return [(c / self.edge_factor, c * self.edge_factor) for c in self.exact_centers]

    def below_nyquist(self, sample_rate, warn=True):
        """Drop the bands whose upper edge exceeds ``sample_rate / 2``."""
        nyquist = sample_rate / 2.0
        keep = [i for i, (_, hi) in enumerate(self.edges()) if hi <= nyquist]
        if len(keep) == len(self):
            return self
        if warn:
            dropped = [self.centers[i] for i in range(len(self)) if i not in keep]
            warnings.warn(f"dropping bands above Nyquist ({nyquist:g} Hz): {dropped}", stacklevel=2)
        if not keep:
            raise BandOutOfRangeError(f"no band fits below Nyquist ({nyquist:g} Hz)")
        return BandSet(
            tuple(self.centers[i] for i in keep),
            tuple(self.exact_centers[i] for i in keep),
            self.edge_factor,
        )


@dataclass(frozen=True, eq=False)
class EdcCurves:
    """Per-band energy decay curves in dB, shape (band, time).

    ``band_energy`` holds the total energy of each band before
    normalization; ``silent`` marks bands with no usable energy.
    """

    curves: np.ndarray
    centers: tuple
    normalized: bool = True
    band_energy: np.ndarray = field(default=None, repr=False)
    silent: np.ndarray = field(default=None, repr=False)

    @cached_property
    def sq_norms(self):
        return np.einsum("ij,ij->i", self.curves, self.curves)


def hann_window(length):
    """Periodic Hann window ``0.5 * (1 - cos(2*pi*n/length))``."""
    length = _positive_int(length, "window length")
    n = np.arange(length)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * n / length))


def hann_kernel_2d(side):
    """Separable 2D smoothing kernel: outer product of two periodic Hann windows."""
    w = hann_window(_positive_int(side, "kernel side"))
    return np.outer(w, w)


def stft(signal, window_length, hop, n_fft=None, window=None):
    """One-sided STFT without centering or padding.

    Frames start at sample 0 and advance by ``hop``; a trailing partial
    frame is discarded. Each frame of ``window_length`` samples is weighted
    by a periodic Hann window (or ``window``) and zero-padded to ``n_fft``.
    No amplitude normalization is applied.

    Returns
    -------
    Spectrogram
        ``bins`` has shape (n_fft // 2 + 1, n_frames).
    """
    x = _samples(signal)
    window_length = _positive_int(window_length, "window length")
    hop = _positive_int(hop, "hop")
    n_fft = window_length if n_fft is None else _positive_int(n_fft, "n_fft")
    if n_fft < window_length:
        raise InvalidArgumentError(f"n_fft ({n_fft}) shorter than window ({window_length})")
    if x.shape[0] < window_length:
        raise InvalidArgumentError(
            f"signal of {x.shape[0]} samples is shorter than one window ({window_length})"
        )
    w = hann_window(window_length) if window is None else np.asarray(window, dtype=np.float64)
    if w.shape != (window_length,):
        raise InvalidArgumentError("window must have window_length samples")
    frames = sliding_window_view(x, window_length)[::hop] * w
    bins = np.fft.rfft(frames, n=n_fft, axis=1).T
    return Spectrogram(bins=bins, window_length=window_length, hop=hop, n_fft=n_fft)


def power_spectrogram(spec):
    """Elementwise squared magnitude of a complex spectrogram."""
    bins = spec.bins if isinstance(spec, Spectrogram) else np.asarray(spec)
    return np.square(bins.real) + np.square(bins.imag)


def conv2d_strided(x, kernel, stride=1, backend=None):
    """Valid-region 2D cross-correlation with equal stride on both axes.

    No kernel flip, no padding. Output size per axis is
    ``(n - k) // stride + 1``.
    """
    x = np.asarray(x, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    if x.ndim != 2 or kernel.ndim != 2:
        raise InvalidArgumentError("conv2d_strided expects 2D input and kernel")
    stride = _positive_int(stride, "stride")
    if kernel.shape[0] < 1 or kernel.shape[1] < 1:
        raise InvalidArgumentError("kernel must be non-empty")
    if kernel.shape[0] > x.shape[0] or kernel.shape[1] > x.shape[1]:
        raise InvalidArgumentError(f"kernel {kernel.shape} larger than input {x.shape}")
    return kernels.conv2d_strided(x, kernel, stride, backend=backend)


def third_octave_centers():
    """The 29 third-octave bands from 20 Hz to 12.5 kHz."""
    exact = tuple(1000.0 * 2.0 ** (k / 3.0) for k in _THIRD_OCTAVE_EXPONENTS)
    return BandSet(THIRD_OCTAVE_NOMINAL, exact)


def _band_masks(n, sample_rate, edges):
    freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate)
    return np.stack([(freqs >= lo) & (freqs < hi) for lo, hi in edges])


def _check_edges(edges, sample_rate):
    nyquist = sample_rate / 2.0
    for lo, hi in edges:
        if hi > nyquist:
            raise BandOutOfRangeError(f"band edge {hi:.1f} Hz above Nyquist {nyquist:g} Hz")


def _filter_length(n, linear):
    # zero-padding to >= 2n turns the circular brickwall into a linear one, so
    # the loud start of a decay does not wrap onto its quiet end
    return next_fast_len(2 * n, real=True) if linear else n


def bandpass(signal, center, edge_factor=2.0 ** (1.0 / 6.0), linear=False):
    """Zero-phase brickwall band limitation around ``center`` Hz.

    Keeps FFT bins with ``center/edge_factor <= f < center*edge_factor``.

    Parameters
    ----------
    signal : Signal
    center : float
        Band center in Hz.
    edge_factor : float
        Ratio between the upper edge and the center.
    linear : bool
        By default the mask is applied to the unpadded FFT, i.e. circularly:
        exact for signals periodic in their length, but energy near the start
        of a decay wraps onto its end. With ``True`` the FFT is zero-padded to
        at least twice the signal length and the result cut back (linear
        filtering), at the cost of edge transients for periodic signals.
    """
    if center <= 0:
        raise InvalidArgumentError("band center must be positive")
    edges = [(center / edge_factor, center * edge_factor)]
    _check_edges(edges, signal.sample_rate)
    x = signal.samples
    n_fft = _filter_length(x.shape[0], linear)
    spectrum = np.fft.rfft(x, n_fft)
    spectrum[~_band_masks(n_fft, signal.sample_rate, edges)[0]] = 0.0
    return Signal(np.fft.irfft(spectrum, n=n_fft)[: x.shape[0]], signal.sample_rate)


def band_filter_bank(signal, bands, linear=False):
    """All bands of ``bands`` at once; returns an array of shape (band, time).

    See :func:`bandpass` for ``linear``.
    """
    edges = bands.edges()
    _check_edges(edges, signal.sample_rate)
    x = signal.samples
    n_fft = _filter_length(x.shape[0], linear)
    spectrum = np.fft.rfft(x, n_fft)
    masks = _band_masks(n_fft, signal.sample_rate, edges)
    return np.fft.irfft(spectrum[None, :] * masks, n=n_fft, axis=1)[:, : x.shape[0]]


def schroeder_edc(signal, backend=None):
    """Backward-integrated energy: ``edc[t] = sum(x[t:] ** 2)``."""
    return kernels.backward_energy(_samples(signal), backend=backend)


def edc_to_db_normalized(edc, floor_db=DEFAULT_FLOOR_DB):
    """Energy decay in dB relative to its first sample, clamped at ``floor_db``."""
    edc = np.asarray(edc, dtype=np.float64)
    if edc.ndim != 1 or edc.size == 0:
        raise InvalidArgumentError("edc must be a non-empty vector")
    if not edc[0] > 0:
        raise DegenerateSignalError("energy decay curve has zero total energy")
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(edc / edc[0])
    db = np.maximum(db, floor_db)
    db[0] = 0.0
    return db


def band_edc(signal, bands=None, floor_db=DEFAULT_FLOOR_DB, silence_db=-200.0, linear=True):
    """Normalized per-band EDCs of ``signal``.

    Bands above Nyquist are dropped with a warning. A band whose energy is
    below ``silence_db`` relative to the broadband energy is flagged as
    silent; its curve is the instantaneous-drop limit (0 dB, then floor).
    ``linear`` selects the band filtering mode (see :func:`bandpass`).
    """
    bands = third_octave_centers() if bands is None else bands
    bands = bands.below_nyquist(signal.sample_rate)
    filtered = band_filter_bank(signal, bands, linear)
    curves = np.empty_like(filtered)
    energy = np.empty(len(bands))
    silent = np.zeros(len(bands), dtype=bool)
    threshold = signal.energy * 10.0 ** (silence_db / 10.0)
    for b in range(len(bands)):
        edc = kernels.backward_energy(filtered[b])
        energy[b] = edc[0]
        if not edc[0] > threshold:
            silent[b] = True
            curves[b] = floor_db
            curves[b, 0] = 0.0
            continue
        curves[b] = edc_to_db_normalized(edc, floor_db)
    return EdcCurves(curves, bands.centers, True, energy, silent)


def decay_time(edc_db, sample_rate, start_db=-5.0, stop_db=-35.0):
    """Reverberation time from a normalized dB EDC by line fit.

    The slope of a least-squares line between ``start_db`` and
    ``stop_db`` is extrapolated to 60 dB of decay.
    """
    edc_db = np.asarray(edc_db, dtype=np.float64)
    idx = np.flatnonzero((edc_db <= start_db) & (edc_db >= stop_db))
    if idx.size < 2:
        raise DegenerateSignalError(f"EDC does not span {start_db} to {stop_db} dB")
    t = idx / sample_rate
    slope, _ = np.polyfit(t, edc_db[idx], 1)
    if slope >= 0:
        raise DegenerateSignalError("EDC does not decay")
    return -60.0 / slope


def _samples(signal):
    if isinstance(signal, Signal):
        return signal.samples
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise InvalidArgumentError("expected a non-empty one-dimensional signal")
    return x


def _positive_int(value, what):
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        else:
            raise InvalidArgumentError(f"{what} must be an integer, got {value!r}")
    if value < 1:
        raise InvalidArgumentError(f"{what} must be >= 1, got {value}")
    return int(value)
