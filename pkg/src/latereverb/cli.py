"""Command-line harness.

Subcommands: ``synth``, ``preprocess``, ``compute``, ``aggregate``, ``sweep``.
Exit status is 0 on success, 1 when a stage fails and 2 for usage or
configuration errors.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import io
import logging
import math
import os
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from ._io import atomic_write_text
from .config import (
    OUTPUT_DIR_ENV,
    load_config,
    parse_panel_range,
    with_overrides,
)
from .dataset import (
    MAX_PANELS,
    RirEntry,
    SynthSpec,
    load_manifest,
    partition_by_panels,
    read_rir,
    sample_subset,
    synth_rir,
    write_manifest,
    write_wav,
)
from .errors import ConfigError, InvalidArgumentError, LateReverbError
from .evaluation import (
    entry_labels,
    load_signals,
    median_by_group,
    normalize_min_max,
    pairwise_from_signals,
    panel_range_filter,
    read_results_csv,
    study_from_rows,
    sweep_from_signals,
    select_sweep_entries,
    write_median_matrix_csv,
    write_results_csv,
    write_sweep_csv,
)
from .preprocess import PreprocessConfig, detect_onset, trim_late_reverb
from .svg import heatmaps, shared_limits, sweep_plot

log = logging.getLogger("latereverb")


class StageError(Exception):
    def __init__(self, stage, exc):
        self.stage = stage
        self.exc = exc
        super().__init__(f"{stage}: {exc}")


@contextlib.contextmanager
def stage(name):
    try:
        yield
    except ConfigError:
        raise
    except (LateReverbError, OSError, ValueError) as exc:
        raise StageError(name, exc) from exc


def panels_for_groups(n_groups):
    """Evenly spread panel counts over 0..55 for ``n_groups`` groups."""
    if n_groups == 1:
        return [0]
    return [int(math.floor(g * MAX_PANELS / (n_groups - 1) + 0.5)) for g in range(n_groups)]


def t60_for_panels(panels, t60_min, t60_max):
    """Monotone panel-count to T60 map, log-linear from ``t60_min`` (0 panels)
    to ``t60_max`` (55 panels)."""
    return t60_min * (t60_max / t60_min) ** (panels / MAX_PANELS)


def synth_corpus(output_dir, groups=11, per_group=25, mics=5, t60_min=0.5, t60_max=2.0,
                 length_s=1.0, sample_rate=48000, predelay_ms=5.0, mic_delay_ms=1.0,
                 noise_floor_db=None, seed=0, sample_format="float32"):
    """Write a synthetic corpus and its manifest; returns the entries.

    Group ``g`` gets an evenly spaced panel count and the matching T60;
    microphones are assigned round-robin and each adds ``mic_delay_ms`` of
    propagation delay.
    """
    if groups < 1:
        raise InvalidArgumentError("at least one group is required")
    if groups > MAX_PANELS + 1:
        raise InvalidArgumentError(f"at most {MAX_PANELS + 1} distinct panel counts")
    if per_group < 1 or not 1 <= mics <= 5:
        raise InvalidArgumentError("per_group must be >= 1 and mics within 1..5")
    output_dir = Path(output_dir)
    wav_dir = output_dir / "wav"
    entries = []
    for g, panels in enumerate(panels_for_groups(groups)):
        t60 = t60_for_panels(panels, t60_min, t60_max)
        for i in range(per_group):
            mic = i % mics + 1
            file_seed = int(np.random.SeedSequence([seed, g, i]).generate_state(1)[0])
            spec = SynthSpec(t60, length_s, sample_rate, file_seed,
                             (predelay_ms + (mic - 1) * mic_delay_ms) / 1000.0, noise_floor_db)
            rid = f"g{g:02d}_p{panels:02d}_m{mic}_{i:03d}"
            path = wav_dir / f"{rid}.wav"
            write_wav(path, synth_rir(spec), sample_format)
            entries.append(RirEntry(rid, path.resolve(), panels, mic, {"t60_s": repr(round(t60, 6))}))
    write_manifest(output_dir / "manifest.csv", entries)
    return entries


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# -- commands --------------------------------------------------------------------


def cmd_synth(args):
    out = _output_dir(args.output_dir)
    with stage("synth"):
        entries = synth_corpus(out, args.groups, args.per_group, args.mics, args.t60_min,
                               args.t60_max, args.length_s, args.sample_rate, args.predelay_ms,
                               args.mic_delay_ms, args.noise_floor_db, args.seed, args.format)
    print(f"wrote {len(entries)} RIRs and {out / 'manifest.csv'}")
    return 0


def _run_config(args):
    cfg = load_config(getattr(args, "config", None))
    overrides = {
        "seed": getattr(args, "seed", None),
        "jobs": getattr(args, "jobs", None),
        "metrics": getattr(args, "metrics", None),
        "output_dir": getattr(args, "output_dir", None),
        "manifest": getattr(args, "manifest", None),
    }
    cfg = with_overrides(cfg, **overrides)
    if getattr(args, "no_preprocess", False):
        cfg = with_overrides(cfg, preprocess=PreprocessConfig(enabled=False))
    elif getattr(args, "t_mix_ms", None) is not None:
        onset = cfg.preprocess.onset if cfg.preprocess else PreprocessConfig().onset
        cfg = with_overrides(cfg, preprocess=PreprocessConfig(args.t_mix_ms, onset))
    return cfg


def _manifest(cfg):
    if cfg.manifest is None:
        raise ConfigError("no manifest given (config 'manifest' or --manifest)")
    with stage("load manifest"):
        return load_manifest(cfg.manifest)


def cmd_preprocess(args):
    cfg = _run_config(args)
    pre = cfg.require_preprocess()
    entries = _manifest(cfg)
    out = cfg.resolved_output_dir()
    rows, trimmed_entries = [], []
    for e in entries:
        with stage(f"preprocess {e.id}"):
            rir = read_rir(e)
            onset = detect_onset(rir, pre.onset) if pre.enabled else 0
            t_mix = pre.t_mix_ms if pre.enabled else 0.0
            late = trim_late_reverb(rir, onset, t_mix)
            path = out / "trimmed" / f"{e.id}.wav"
            write_wav(path, late, "float64")
        rows.append([e.id, onset, len(rir) - len(late), len(rir), len(late)])
        trimmed_entries.append(RirEntry(e.id, path.resolve(), e.n_reflective_panels,
                                        e.mic_position, dict(e.extra)))
    atomic_write_text(out / "onsets.csv",
                      _csv(["id", "onset_sample", "trim_sample", "original_length", "trimmed_length"], rows))
    write_manifest(out / "manifest.csv", trimmed_entries)
    print(f"trimmed {len(rows)} RIRs into {out}")
    return 0


def select_entries(cfg, entries):
    """Apply the configured per-partition, per-mic subsampling (if any)."""
    if cfg.sampling.per_mic is None:
        return list(entries)
    chosen = []
    for k, part in enumerate(partition_by_panels(entries, cfg.bin_edges)):
        part_seed = int(np.random.SeedSequence([cfg.seed, k]).generate_state(1)[0])
        with stage(f"sample partition {part.label}"):
            chosen.extend(sample_subset(part, cfg.sampling.per_mic, part_seed, cfg.sampling.mics))
    return chosen


def cmd_compute(args):
    t0 = time.perf_counter()
    cfg = _run_config(args)
    pre = cfg.require_preprocess()
    metrics = cfg.build_metrics()
    entries = select_entries(cfg, _manifest(cfg))
    out = cfg.resolved_output_dir()
    with stage("load and preprocess"):
        signals = load_signals(entries, pre)
    labels = entry_labels(entries, cfg.bin_edges)
    studies = []
    for metric in metrics:
        with stage(f"compute {metric.name}"), warnings.catch_warnings():
            warnings.simplefilter("ignore")
            studies.append(pairwise_from_signals(signals, metric, labels, cfg.seed, cfg.jobs))
    with stage("write results"):
        write_results_csv(out / "results_raw.csv", studies)
        write_results_csv(out / "results_std.csv", studies, standardized=True)
        write_manifest(out / "subset.csv", entries)
    n_pairs = sum(len(s.results) + len(s.errors) for s in studies)
    n_err = sum(len(s.errors) for s in studies)
    print(f"pairs: {n_pairs}  errors: {n_err}  metrics: {','.join(cfg.metrics)}  "
          f"wall time: {time.perf_counter() - t0:.2f} s")
    return 0


def cmd_aggregate(args):
    cfg = _run_config(args)
    out = cfg.resolved_output_dir()
    results_path = Path(args.results) if args.results else out / "results_std.csv"
    group_by = args.group_by or cfg.aggregate.group_by
    if group_by not in ("partition", "mic_position"):
        raise ConfigError("--group-by must be 'partition' or 'mic_position'")
    panel_range = parse_panel_range(args.panel_range) if args.panel_range else cfg.aggregate.panel_range
    include_self = cfg.aggregate.include_self_pairs and not args.exclude_self_pairs
    entries = _manifest(cfg)
    index = entry_labels(entries, cfg.bin_edges)
    with stage("read results"):
        parsed = read_results_csv(results_path)
    suffix = f"_p{panel_range[0]}-{panel_range[1]}" if panel_range else ""
    matrices = []
    for metric, rows in parsed.items():
        with stage(f"aggregate {metric}"):
            study, std = study_from_rows(metric, rows, index, cfg.seed)
            keep = panel_range_filter(index, *panel_range) if panel_range else None
            matrix = median_by_group(study, group_by, keep, include_self, std)
            write_median_matrix_csv(out / f"median_{metric}_{group_by}{suffix}.csv", matrix)
        matrices.append(matrix)
    if args.svg and matrices:
        vmin, vmax = shared_limits(matrices)
        atomic_write_text(out / f"median_{group_by}{suffix}.svg", heatmaps(matrices, vmin, vmax))
    print(f"wrote {len(matrices)} median matrices to {out}")
    return 0


def cmd_sweep(args):
    cfg = _run_config(args)
    pre = cfg.require_preprocess()
    target_id = args.target or cfg.sweep.target
    if not target_id:
        raise ConfigError("no sweep target given (--target or sweep.target)")
    n_per_group = args.n_per_group or cfg.sweep.n_per_group
    entries = _manifest(cfg)
    by_id = {e.id: e for e in entries}
    if target_id not in by_id:
        raise StageError("sweep", InvalidArgumentError(f"target {target_id!r} not in manifest"))
    target = by_id[target_id]
    out = cfg.resolved_output_dir()
    with stage("select sweep entries"):
        chosen = select_sweep_entries(target, entries, n_per_group, cfg.seed)
        needed = [target] + [e for members in chosen.values() for e in members if e.id != target.id]
    with stage("load and preprocess"):
        signals = load_signals(needed, pre)
    curves = []
    for metric in cfg.build_metrics():
        with stage(f"sweep {metric.name}"):
            curve = normalize_min_max(sweep_from_signals(target, chosen, signals, metric))
            write_sweep_csv(out / f"sweep_{metric.name}.csv", curve)
        curves.append(curve)
    atomic_write_text(out / "sweep.svg", sweep_plot(curves))
    print(f"wrote {len(curves)} sweep curves to {out}")
    return 0


def _output_dir(value):
    return Path(value or os.environ.get(OUTPUT_DIR_ENV, "latereverb-out"))


# -- argument parsing ------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="latereverb",
        description="Similarity metrics for late reverberation: corpus tools and evaluation protocol.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, metrics=True, preprocess=True):
        p.add_argument("--config", help="YAML run configuration")
        p.add_argument("--manifest", help="manifest CSV (overrides the config)")
        p.add_argument("--seed", type=int, help="random seed")
        p.add_argument("--jobs", type=int, help="worker threads for pair computation")
        p.add_argument("--output-dir", help=f"output directory (default: ${OUTPUT_DIR_ENV} or ./latereverb-out)")
        if metrics:
            p.add_argument("--metrics", help="comma-separated subset of PC,EDC,MSS,ESR")
        if preprocess:
            g = p.add_mutually_exclusive_group()
            g.add_argument("--t-mix-ms", type=float, help="mixing time after the onset, in ms")
            g.add_argument("--no-preprocess", action="store_true",
                           help="use signals as stored (already trimmed)")

    p = sub.add_parser("synth", help="write a synthetic decaying-noise corpus and manifest")
    p.add_argument("--output-dir")
    p.add_argument("--groups", type=int, default=11, help="number of panel-count groups")
    p.add_argument("--per-group", type=int, default=25, help="RIRs per group")
    p.add_argument("--mics", type=int, default=5, help="microphone positions (round-robin)")
    p.add_argument("--t60-min", type=float, default=0.5, help="T60 at 0 reflective panels, s")
    p.add_argument("--t60-max", type=float, default=2.0, help="T60 at 55 reflective panels, s")
    p.add_argument("--length-s", type=float, default=1.0, help="decay length, s")
    p.add_argument("--sample-rate", type=int, default=48000)
    p.add_argument("--predelay-ms", type=float, default=5.0)
    p.add_argument("--mic-delay-ms", type=float, default=1.0, help="extra delay per mic index")
    p.add_argument("--noise-floor-db", type=float, default=None)
    p.add_argument("--format", choices=["float32", "float64", "pcm16"], default="float32")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preprocess", help="detect onsets, trim to late reverberation, write WAVs")
    common(p, metrics=False)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("compute", help="pairwise metric study; writes raw and standardized CSVs")
    common(p)
    p.set_defaults(func=cmd_compute)

    p = sub.add_parser("aggregate", help="median matrices by partition or mic position")
    common(p, metrics=False, preprocess=False)
    p.add_argument("--results", help="results CSV (default: <output-dir>/results_std.csv)")
    p.add_argument("--group-by", choices=["partition", "mic_position"])
    p.add_argument("--panel-range", help="keep pairs with both RIRs in this panel range, e.g. 35-49")
    p.add_argument("--exclude-self-pairs", action="store_true")
    p.add_argument("--svg", action="store_true", help="also write a heatmap SVG")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("sweep", help="distance from a target RIR across panel counts")
    common(p)
    p.add_argument("--target", help="target RIR id")
    p.add_argument("--n-per-group", type=int, help="RIRs drawn per panel count")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"latereverb {args.command}: config error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"latereverb {args.command}: error in stage '{exc.stage}': {exc.exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
