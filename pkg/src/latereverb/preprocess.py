"""Reduce raw RIRs to their late reverberation.

The onset is the start of the frame following the largest frame-to-frame
rise in short-time energy; the late part begins ``t_mix_ms`` after it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DegenerateSignalError, InvalidArgumentError, PairMismatchError


@dataclass(frozen=True)
class OnsetConfig:
    frame_length: int = 256
    hop: int = 64

    def __post_init__(self):
        if self.hop < 1:
            raise InvalidArgumentError("onset hop must be >= 1")
        if self.frame_length < 2 * self.hop:
            raise InvalidArgumentError("onset frame_length must be at least twice the hop")


@dataclass(frozen=True)
class TrimSpec:
    onset_sample: int
    t_mix_ms: float
    tail_end: int
    sample_rate: int

    @property
    def t_mix_samples(self):
        return mix_samples(self.t_mix_ms, self.sample_rate)

    @property
    def start(self):
        return self.onset_sample + self.t_mix_samples


@dataclass(frozen=True)
class PreprocessConfig:
    """Shared preprocessing for a study.

    With ``enabled=False`` signals are used as stored (e.g. corpora already
    written by the ``preprocess`` command).
    """

    t_mix_ms: float = 0.0
    onset: OnsetConfig = field(default_factory=OnsetConfig)
    enabled: bool = True

    def __post_init__(self):
        if self.t_mix_ms < 0:
            raise InvalidArgumentError("t_mix_ms must be >= 0")


def mix_samples(t_mix_ms, sample_rate):
    # round half up, independent of banker's rounding
    return int(math.floor(t_mix_ms * sample_rate / 1000.0 + 0.5))


def frame_energy(x, frame_length, hop):
    frames = sliding_window_view(x, frame_length)[::hop]
    return np.einsum("ij,ij->i", frames, frames)


def detect_onset(rir, cfg=OnsetConfig()):
    """Sample index where the direct sound starts.

    Frame energies ``E_k`` are compared with their predecessor, a silent
    frame ``E_{-1} = 0`` standing in before the first one. The onset is the
    first sample of the frame with the largest rise (earliest on ties).
    """
    x = rir.samples
    if x.shape[0] < 2 * cfg.frame_length:
        raise InvalidArgumentError(
            f"signal of {x.shape[0]} samples shorter than two onset frames ({2 * cfg.frame_length})"
        )
    energy = frame_energy(x, cfg.frame_length, cfg.hop)
    if not energy.any():
        raise DegenerateSignalError("cannot detect the onset of an all-zero signal")
    rise = np.diff(energy, prepend=0.0)
    return int(np.argmax(rise)) * cfg.hop


def trim_late_reverb(rir, onset, t_mix_ms):
    """Samples from ``onset + t_mix`` to the end; metadata is preserved."""
    if onset < 0:
        raise InvalidArgumentError("onset must be >= 0")
    start = onset + mix_samples(t_mix_ms, rir.sample_rate)
    if start >= len(rir):
        raise InvalidArgumentError(
            f"trim point {start} is at or beyond the signal end ({len(rir)} samples)"
        )
    return replace(rir, samples=rir.samples[start:])


def preprocess_rir(rir, cfg):
    """Onset detection plus trimming. Returns ``(trimmed, TrimSpec)``."""
    if not cfg.enabled:
        return rir, TrimSpec(0, 0.0, len(rir), rir.sample_rate)
    onset = detect_onset(rir, cfg.onset)
    trimmed = trim_late_reverb(rir, onset, cfg.t_mix_ms)
    return trimmed, TrimSpec(onset, cfg.t_mix_ms, len(rir), rir.sample_rate)


def align_pair(a, b):
    """Truncate both signals to the shorter length."""
    aligned = align_all([a, b])
    return aligned[0], aligned[1]


def align_all(signals):
    """Truncate every signal to the shortest one; sample rates must agree."""
    signals = list(signals)
    if not signals:
        return []
    rates = {s.sample_rate for s in signals}
    if len(rates) > 1:
        raise PairMismatchError(f"sample rates differ: {sorted(rates)}")
    n = min(len(s) for s in signals)
    return [s if len(s) == n else replace(s, samples=s.samples[:n]) for s in signals]
