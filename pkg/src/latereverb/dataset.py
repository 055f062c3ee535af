"""Corpus handling: manifests, WAV I/O, partitions, seeded sampling and
synthetic late-reverberation RIRs.

Manifest format
---------------
UTF-8 CSV with header ``id,path,n_reflective_panels,mic_position`` plus any
extra columns. Lines starting with ``#`` are ignored. Relative paths are
resolved against the manifest's directory.

Randomness
----------
All sampling and synthesis use numpy's ``default_rng`` (PCG64) seeded from
the user-supplied integer seed.
"""
from __future__ import annotations

import csv
import hashlib
import io
import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from ._io import atomic_write_text
from .dsp_core import Signal, band_filter_bank, third_octave_centers
from .errors import (
    InsufficientDataError,
    InvalidArgumentError,
    ManifestFormatError,
    UnsupportedFormatError,
)

MANIFEST_COLUMNS = ("id", "path", "n_reflective_panels", "mic_position")
MAX_PANELS = 55
MIC_POSITIONS = (1, 2, 3, 4, 5)
DEFAULT_BIN_EDGES = tuple((lo, lo + 4) for lo in range(0, 50, 5)) + ((50, 55),)

# ln(10**3): amplitude falls by 60 dB over one T60
_DECAY_60DB = np.log(1000.0)


@dataclass(frozen=True)
class RirEntry:
    id: str
    path: Path
    n_reflective_panels: int
    mic_position: int
    extra: dict = field(default_factory=dict, compare=True, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "path", Path(self.path))


@dataclass(frozen=True, eq=False)
class Rir(Signal):
    """A :class:`Signal` carrying corpus metadata."""

    id: str = ""
    n_reflective_panels: int = None
    mic_position: int = None


@dataclass(frozen=True)
class Partition:
    label: str
    lo: int
    hi: int
    entries: tuple

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True)
class SynthSpec:
    """Exponentially decaying Gaussian noise.

    ``t60_s`` is either one broadband value or a sequence aligned with the
    bands used for synthesis. ``math.inf`` disables the decay.
    ``predelay_s`` of silence precedes the decay; ``noise_floor_db`` adds
    stationary noise at that level relative to the initial amplitude.
    """

    t60_s: object
    length_s: float
    sample_rate: int = 48000
    seed: int = 0
    predelay_s: float = 0.0
    noise_floor_db: float = None

    def __post_init__(self):
        t60 = np.atleast_1d(np.asarray(self.t60_s, dtype=np.float64))
        if t60.ndim != 1 or t60.size == 0 or np.any(~(t60 > 0)):
            raise InvalidArgumentError("t60 values must be > 0")
        if self.length_s < 0.1:
            raise InvalidArgumentError("synthetic RIRs must be at least 0.1 s long")
        if self.sample_rate <= 0 or self.predelay_s < 0:
            raise InvalidArgumentError("invalid sample rate or predelay")

    @property
    def per_band(self):
        return np.ndim(self.t60_s) > 0


# -- manifest ------------------------------------------------------------------


def _parse_int(value, column, row, lo, hi):
    try:
        number = int(str(value).strip())
    except ValueError:
        raise ManifestFormatError(f"{column}={value!r} is not an integer", row) from None
    if not lo <= number <= hi:
        raise ManifestFormatError(f"{column}={number} outside {lo}..{hi}", row)
    return number


def load_manifest(path):
    """Parse a manifest CSV into :class:`RirEntry` objects in file order."""
    path = Path(path)
    base = path.parent
    with open(path, encoding="utf-8", newline="") as fh:
        numbered = [(n, line) for n, line in enumerate(fh, start=1)
                    if line.strip() and not line.lstrip().startswith("#")]
    if not numbered:
        raise ManifestFormatError("manifest has no header")
    rows = list(csv.reader([line for _, line in numbered]))
    header = [h.strip() for h in rows[0]]
    missing = [c for c in MANIFEST_COLUMNS if c not in header]
    if missing:
        raise ManifestFormatError(f"missing column(s) {missing}", numbered[0][0])
    if len(set(header)) != len(header):
        raise ManifestFormatError("duplicate column names", numbered[0][0])
    entries, seen = [], set()
    for (lineno, _), row in zip(numbered[1:], rows[1:]):
        if len(row) != len(header):
            raise ManifestFormatError(f"expected {len(header)} fields, got {len(row)}", lineno)
        record = dict(zip(header, row))
        entry_id = record["id"].strip()
        if not entry_id:
            raise ManifestFormatError("empty id", lineno)
        if entry_id in seen:
            raise ManifestFormatError(f"duplicate id {entry_id!r}", lineno)
        seen.add(entry_id)
        if not record["path"].strip():
            raise ManifestFormatError("empty path", lineno)
        entry_path = Path(record["path"].strip())
        if not entry_path.is_absolute():
            entry_path = base / entry_path
        entries.append(RirEntry(
            id=entry_id,
            path=entry_path,
            n_reflective_panels=_parse_int(record["n_reflective_panels"], "n_reflective_panels",
                                           lineno, 0, MAX_PANELS),
            mic_position=_parse_int(record["mic_position"], "mic_position", lineno,
                                    min(MIC_POSITIONS), max(MIC_POSITIONS)),
            extra={k: v for k, v in record.items() if k not in MANIFEST_COLUMNS},
        ))
    return entries


def manifest_text(entries, base=None):
    """CSV text for ``entries``; paths under ``base`` are written relative to it."""
    extra_cols = []
    for e in entries:
        for k in e.extra:
            if k not in extra_cols:
                extra_cols.append(k)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(MANIFEST_COLUMNS) + extra_cols)
    for e in entries:
        p = e.path
        if base is not None and p.is_absolute():
            try:
                p = Path(os.path.relpath(p, base))
            except ValueError:
                pass
        writer.writerow([e.id, p.as_posix(), e.n_reflective_panels, e.mic_position]
                        + [e.extra.get(k, "") for k in extra_cols])
    return buf.getvalue()


def write_manifest(path, entries):
    path = Path(path)
    atomic_write_text(path, manifest_text(entries, base=path.parent.resolve()))


def manifest_digest(entries):
    text = manifest_text(entries)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


# -- WAV -----------------------------------------------------------------------


def read_wav(path):
    """Mono WAV to ``(samples, sample_rate)``; integer PCM scaled to [-1, 1)."""
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", wavfile.WavFileWarning)
            rate, data = wavfile.read(path)
    except wavfile.WavFileWarning as exc:
        raise OSError(f"{path}: {exc}") from exc
    except (ValueError, EOFError) as exc:
        raise OSError(f"{path}: cannot parse WAV ({exc})") from exc
    if data.ndim == 2:
        if data.shape[1] != 1:
            raise UnsupportedFormatError(f"{path}: {data.shape[1]} channels, expected mono")
        data = data[:, 0]
    if data.dtype == np.uint8:
        samples = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype == np.int16:
        samples = data / 32768.0
    elif data.dtype == np.int32:
        # 24-bit PCM arrives left-justified in int32
        samples = data / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise UnsupportedFormatError(f"{path}: unsupported sample type {data.dtype}")
    return samples, int(rate)


def read_rir(entry):
    samples, rate = read_wav(entry.path)
    return Rir(samples, rate, id=entry.id, n_reflective_panels=entry.n_reflective_panels,
               mic_position=entry.mic_position)


def write_wav(path, signal, sample_format="float32"):
    """Write a mono WAV. ``sample_format`` is ``float32``, ``float64`` or ``pcm16``."""
    x = signal.samples
    if sample_format == "pcm16":
        data = np.clip(np.round(x * 32768.0), -32768, 32767).astype(np.int16)
    elif sample_format in ("float32", "float64"):
        data = x.astype(sample_format)
    else:
        raise InvalidArgumentError(f"unknown sample format {sample_format!r}")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    wavfile.write(path, signal.sample_rate, data)


# -- synthesis -----------------------------------------------------------------


def decay_envelope(t, t60):
    if np.isinf(t60):
        return np.ones_like(t)
    return np.exp(-_DECAY_60DB * t / t60)


def synth_rir(spec, bands=None):
    """Seeded exponentially decaying noise, broadband or per band.

    Per-band mode splits one Gaussian noise sequence with the brickwall
    filterbank and gives each band its own decay envelope.
    """
    rng = np.random.default_rng(spec.seed)
    fs = spec.sample_rate
    n = int(round(spec.length_s * fs))
    t = np.arange(n) / fs
    noise = rng.standard_normal(n)
    if spec.per_band:
        bands = third_octave_centers().below_nyquist(fs) if bands is None else bands
        t60 = np.asarray(spec.t60_s, dtype=np.float64)
        if t60.shape != (len(bands),):
            raise InvalidArgumentError(f"{t60.size} T60 values for {len(bands)} bands")
        split = band_filter_bank(Signal(noise, fs), bands)
        x = np.zeros(n)
        for b in range(len(bands)):
            x += split[b] * decay_envelope(t, t60[b])
    else:
        x = noise * decay_envelope(t, float(spec.t60_s))
    pre = int(round(spec.predelay_s * fs))
    if pre:
        x = np.concatenate([np.zeros(pre), x])
    if spec.noise_floor_db is not None:
        x = x + rng.standard_normal(x.shape[0]) * 10.0 ** (spec.noise_floor_db / 20.0)
    return Rir(x, fs)


# -- partitions and sampling ---------------------------------------------------


def validate_bin_edges(bin_edges, lo=0, hi=MAX_PANELS):
    edges = sorted((int(a), int(b)) for a, b in bin_edges)
    if not edges:
        raise InvalidArgumentError("no partition bins given")
    for a, b in edges:
        if a > b:
            raise InvalidArgumentError(f"bin ({a}, {b}) has lower edge above upper edge")
    for (a0, b0), (a1, b1) in zip(edges, edges[1:]):
        if a1 <= b0:
            raise InvalidArgumentError(f"bins ({a0}, {b0}) and ({a1}, {b1}) overlap")
        if a1 != b0 + 1:
            raise InvalidArgumentError(f"gap between bins ({a0}, {b0}) and ({a1}, {b1})")
    if edges[0][0] > lo or edges[-1][1] < hi:
        raise InvalidArgumentError(f"bins must cover {lo}..{hi}")
    return edges


def partition_label(lo, hi):
    return f"{lo}-{hi}"


def partition_by_panels(entries, bin_edges=DEFAULT_BIN_EDGES):
    """Group entries by panel-count bin; empty bins are dropped."""
    edges = validate_bin_edges(bin_edges)
    parts = []
    for lo, hi in edges:
        members = tuple(e for e in entries if lo <= e.n_reflective_panels <= hi)
        if members:
            parts.append(Partition(partition_label(lo, hi), lo, hi, members))
    return parts


def partition_of(n_panels, bin_edges=DEFAULT_BIN_EDGES):
    for lo, hi in bin_edges:
        if lo <= n_panels <= hi:
            return partition_label(lo, hi)
    raise InvalidArgumentError(f"{n_panels} panels outside every bin")


def sample_subset(partition, per_mic, seed, mics=MIC_POSITIONS):
    """``per_mic`` entries for every mic position, drawn without replacement."""
    entries = partition.entries if isinstance(partition, Partition) else tuple(partition)
    if per_mic < 0:
        raise InvalidArgumentError("per_mic must be >= 0")
    if per_mic == 0:
        return []
    rng = np.random.default_rng(seed)
    chosen = []
    for mic in sorted(mics):
        pool = [e for e in entries if e.mic_position == mic]
        if len(pool) < per_mic:
            raise InsufficientDataError(
                f"mic position {mic} has {len(pool)} entries, {per_mic} required"
            )
        idx = np.sort(rng.choice(len(pool), size=per_mic, replace=False))
        chosen.extend(pool[i] for i in idx)
    return chosen
