import math
import struct

import numpy as np
import pytest
from scipy.io import wavfile

from latereverb.dataset import (
    DEFAULT_BIN_EDGES,
    RirEntry,
    SynthSpec,
    load_manifest,
    manifest_digest,
    partition_by_panels,
    partition_of,
    read_rir,
    read_wav,
    sample_subset,
    synth_rir,
    validate_bin_edges,
    write_manifest,
    write_wav,
)
from latereverb.dsp_core import Signal, edc_to_db_normalized, schroeder_edc
from latereverb.errors import (
    InsufficientDataError,
    InvalidArgumentError,
    ManifestFormatError,
    UnsupportedFormatError,
)

from conftest import FS

HEADER = "id,path,n_reflective_panels,mic_position\n"


def write(tmp_path, text, name="manifest.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestManifest:
    def test_three_rows_in_order(self, tmp_path):
        p = write(tmp_path, HEADER + "c,c.wav,5,1\na,a.wav,0,2\nb,/abs/b.wav,55,5\n")
        entries = load_manifest(p)
        assert [e.id for e in entries] == ["c", "a", "b"]
        assert entries[0].path == tmp_path / "c.wav"
        assert str(entries[2].path) == "/abs/b.wav"
        assert entries[2].n_reflective_panels == 55

    def test_header_only(self, tmp_path):
        assert load_manifest(write(tmp_path, HEADER)) == []

    def test_mic_out_of_range_cites_row(self, tmp_path):
        p = write(tmp_path, HEADER + "a,a.wav,0,1\nb,b.wav,3,9\n")
        with pytest.raises(ManifestFormatError, match="row 3"):
            load_manifest(p)

    def test_comments_keep_line_numbers(self, tmp_path):
        p = write(tmp_path, "# corpus\n" + HEADER + "\na,a.wav,x,1\n")
        with pytest.raises(ManifestFormatError, match="row 4"):
            load_manifest(p)

    @pytest.mark.parametrize("body, match", [
        ("a,a.wav,56,1\n", "n_reflective_panels"),
        ("a,a.wav,-1,1\n", "n_reflective_panels"),
        ("a,a.wav,1,1\na,b.wav,1,1\n", "duplicate id"),
        (",a.wav,1,1\n", "empty id"),
        ("a,,1,1\n", "empty path"),
        ("a,a.wav,1\n", "fields"),
    ])
    def test_invalid_rows(self, tmp_path, body, match):
        with pytest.raises(ManifestFormatError, match=match):
            load_manifest(write(tmp_path, HEADER + body))

    def test_missing_column(self, tmp_path):
        with pytest.raises(ManifestFormatError, match="missing"):
            load_manifest(write(tmp_path, "id,path,mic_position\na,a.wav,1\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_manifest(tmp_path / "nope.csv")

    def test_extra_columns_round_trip(self, tmp_path):
        p = write(tmp_path, "id,path,n_reflective_panels,mic_position,t60_s\na,wav/a.wav,4,2,0.7\n")
        entries = load_manifest(p)
        assert entries[0].extra == {"t60_s": "0.7"}
        out = tmp_path / "copy.csv"
        write_manifest(out, entries)
        assert out.read_text() == p.read_text()
        assert load_manifest(out) == entries
        assert manifest_digest(entries) == manifest_digest(load_manifest(out))


class TestWav:
    def test_pcm16_full_scale(self, tmp_path):
        p = tmp_path / "a.wav"
        wavfile.write(p, FS, np.array([32767, -32768, 0], dtype=np.int16))
        x, rate = read_wav(p)
        assert rate == FS
        assert x[0] == pytest.approx(0.99997, abs=1e-5)
        assert x[1] == -1.0

    def test_float32_bit_exact(self, tmp_path, rng):
        data = rng.standard_normal(100).astype(np.float32)
        p = tmp_path / "f.wav"
        wavfile.write(p, FS, data)
        x, _ = read_wav(p)
        np.testing.assert_array_equal(x, data.astype(np.float64))

    def test_int32_scaling(self, tmp_path):
        p = tmp_path / "i.wav"
        wavfile.write(p, FS, np.array([2**30, -2**31], dtype=np.int32))
        np.testing.assert_array_equal(read_wav(p)[0], [0.5, -1.0])

    def test_uint8_scaling(self, tmp_path):
        p = tmp_path / "u.wav"
        wavfile.write(p, FS, np.array([128, 0, 192], dtype=np.uint8))
        np.testing.assert_array_equal(read_wav(p)[0], [0.0, -1.0, 0.5])

    def test_stereo_rejected(self, tmp_path):
        p = tmp_path / "s.wav"
        wavfile.write(p, FS, np.zeros((10, 2), dtype=np.int16))
        with pytest.raises(UnsupportedFormatError):
            read_wav(p)

    def test_single_column_2d_accepted(self, tmp_path):
        p = tmp_path / "m.wav"
        wavfile.write(p, FS, np.ones((4, 1), dtype=np.float32))
        assert read_wav(p)[0].shape == (4,)

    def test_truncated_file(self, tmp_path):
        p = tmp_path / "t.wav"
        wavfile.write(p, FS, np.zeros(1000, dtype=np.int16))
        p.write_bytes(p.read_bytes()[:-500])
        with pytest.raises(OSError):
            read_wav(p)

    def test_garbage_file(self, tmp_path):
        p = tmp_path / "g.wav"
        p.write_bytes(b"RIFF" + struct.pack("<I", 4) + b"JUNK")
        with pytest.raises(OSError):
            read_wav(p)

    @pytest.mark.parametrize("fmt, tol", [("float32", 1e-7), ("float64", 0.0), ("pcm16", 1 / 32768)])
    def test_write_read_round_trip(self, tmp_path, rng, fmt, tol):
        s = Signal(rng.uniform(-0.9, 0.9, 200), FS)
        p = tmp_path / "sub" / "r.wav"
        write_wav(p, s, fmt)
        np.testing.assert_allclose(read_wav(p)[0], s.samples, atol=tol)

    def test_unknown_format(self, tmp_path):
        with pytest.raises(InvalidArgumentError):
            write_wav(tmp_path / "x.wav", Signal([0.0], FS), "pcm24")

    def test_read_rir_metadata(self, tmp_path):
        p = tmp_path / "r.wav"
        write_wav(p, Signal(np.ones(10), FS))
        rir = read_rir(RirEntry("r", p, 7, 3))
        assert (rir.id, rir.n_reflective_panels, rir.mic_position, len(rir)) == ("r", 7, 3, 10)


class TestSynth:
    def test_t60_one_second(self):
        # EDC of the first 1.5 s of a 2 s signal, dB value at 1.0 s
        drops = []
        for seed in range(20):
            x = synth_rir(SynthSpec(1.0, 2.0, FS, seed)).samples[: int(1.5 * FS)]
            drops.append(-edc_to_db_normalized(schroeder_edc(x))[FS])
        assert np.median(drops) == pytest.approx(60.0, abs=1.0)

    def test_infinite_t60_is_flat(self):
        x = synth_rir(SynthSpec(math.inf, 1.0, FS, 1)).samples
        edc = schroeder_edc(x)
        t = np.arange(len(x))
        slope, intercept = np.polyfit(t, edc, 1)
        resid = edc - (slope * t + intercept)
        assert np.max(np.abs(resid)) < 0.01 * edc[0]

    def test_deterministic(self):
        a = synth_rir(SynthSpec(0.7, 0.5, FS, 42)).samples
        b = synth_rir(SynthSpec(0.7, 0.5, FS, 42)).samples
        assert a.tobytes() == b.tobytes()

    def test_predelay_and_length(self):
        x = synth_rir(SynthSpec(0.7, 0.5, FS, 1, predelay_s=0.01)).samples
        assert len(x) == 480 + 24000
        assert not x[:480].any()
        assert x[480] != 0.0

    def test_noise_floor(self):
        x = synth_rir(SynthSpec(0.2, 1.0, FS, 1, noise_floor_db=-40.0)).samples
        tail = x[-FS // 4:]
        assert 10 * np.log10(np.mean(tail ** 2)) == pytest.approx(-40.0, abs=1.0)

    def test_per_band_t60(self):
        from latereverb.dsp_core import third_octave_centers

        bands = third_octave_centers()
        t60 = np.where(np.array(bands.centers) < 1000, 2.0, 0.3)
        x = synth_rir(SynthSpec(tuple(t60), 1.0, FS, 3)).samples
        assert len(x) == FS
        with pytest.raises(InvalidArgumentError):
            synth_rir(SynthSpec((1.0, 2.0), 1.0, FS, 3))

    @pytest.mark.parametrize("kwargs", [{"t60_s": 0.0}, {"t60_s": -1.0}, {"length_s": 0.01},
                                        {"predelay_s": -0.1}])
    def test_validation(self, kwargs):
        base = {"t60_s": 1.0, "length_s": 1.0}
        base.update(kwargs)
        with pytest.raises(InvalidArgumentError):
            SynthSpec(**base)


def entries_for(panels, mics=(1, 2, 3, 4, 5), per=1):
    out = []
    for p in panels:
        for m in mics:
            for k in range(per):
                out.append(RirEntry(f"p{p}_m{m}_{k}", f"{p}_{m}_{k}.wav", p, m))
    return out


class TestPartitions:
    def test_label(self):
        assert partition_of(20) == "20-24"
        assert partition_of(55) == "50-55"

    def test_default_count(self):
        assert len(DEFAULT_BIN_EDGES) == 11
        parts = partition_by_panels(entries_for(range(56), mics=(1,)))
        assert len(parts) == 11
        assert sum(len(p) for p in parts) == 56

    def test_empty(self):
        assert partition_by_panels([]) == []

    def test_empty_bins_dropped(self):
        parts = partition_by_panels(entries_for([0, 52], mics=(1,)))
        assert [p.label for p in parts] == ["0-4", "50-55"]

    @pytest.mark.parametrize("edges", [
        [(0, 30), (25, 55)],
        [(0, 20), (22, 55)],
        [(0, 20), (21, 50)],
        [(10, 5), (6, 55)],
        [],
    ])
    def test_invalid_edges(self, edges):
        with pytest.raises(InvalidArgumentError):
            validate_bin_edges(edges)


class TestSampleSubset:
    def test_full_scale(self):
        part = partition_by_panels(entries_for([20, 21, 22], per=3))[0]
        chosen = sample_subset(part, 5, seed=0)
        assert len(chosen) == 25
        assert all(sum(e.mic_position == m for e in chosen) == 5 for m in range(1, 6))
        assert len({e.id for e in chosen}) == 25

    def test_zero(self):
        assert sample_subset(entries_for([1]), 0, seed=0) == []

    def test_deterministic(self):
        pool = entries_for([1, 2, 3], per=4)
        assert sample_subset(pool, 3, seed=9) == sample_subset(pool, 3, seed=9)
        assert sample_subset(pool, 3, seed=9) != sample_subset(pool, 3, seed=10)

    def test_missing_mic(self):
        with pytest.raises(InsufficientDataError, match="mic position 5"):
            sample_subset(entries_for([1], mics=(1, 2, 3, 4)), 1, seed=0)

    def test_negative(self):
        with pytest.raises(InvalidArgumentError):
            sample_subset(entries_for([1]), -1, seed=0)
