"""Objective evaluation protocol.

Pairwise metric studies over a set of RIRs, standardization, median
matrices grouped by panel partition or microphone position, and the
gradual-difference sweep against a single target RIR.
"""
from __future__ import annotations

import csv
import io
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ._io import atomic_write_text
from .dataset import DEFAULT_BIN_EDGES, partition_of, read_rir
from .errors import (
    DegenerateDistributionError,
    InsufficientDataError,
    InvalidArgumentError,
    LateReverbError,
)
from .metrics import MetricResult, as_metric
from .preprocess import PreprocessConfig, align_all, preprocess_rir

log = logging.getLogger(__name__)

GROUP_KEYS = ("partition", "mic_position")


class EntryLabel(NamedTuple):
    partition: str
    mic_position: int
    n_reflective_panels: int


@dataclass
class PairwiseStudy:
    """All ordered-pair results of one metric over a sampled set of RIRs.

    ``errors`` maps ``(ref_id, analyzed_id)`` to the message of pairs whose
    metric evaluation failed; those pairs are absent from ``results``.
    """

    results: list
    index: dict
    metric: str
    seed: int = None
    errors: dict = field(default_factory=dict)

    @property
    def ids(self):
        return list(self.index)

    def values(self):
        return np.array([r.value for r in self.results], dtype=np.float64)

    def standardized(self):
        return standardize(self.values())


@dataclass
class MedianMatrix:
    """Cell ``(i, j)``: median over pairs whose reference is in row group
    ``i`` and analyzed RIR in column group ``j``. Missing cells are NaN."""

    row_labels: list
    col_labels: list
    values: np.ndarray
    counts: np.ndarray
    metric: str = ""
    group_key: str = "partition"


@dataclass
class SweepCurve:
    delta: np.ndarray
    median: np.ndarray
    std: np.ndarray
    n: np.ndarray
    normalized: bool = False
    metric: str = ""


# -- preparation ---------------------------------------------------------------


def load_signals(entries, preprocess=None, loader=read_rir, align=True):
    """Load and preprocess ``entries``; returns ``{id: signal}`` in input order.

    A failure on any entry aborts with an error naming it. With ``align``
    every signal is truncated to the shortest one.
    """
    preprocess = preprocess or PreprocessConfig(enabled=False)
    ids = [e.id for e in entries]
    if len(set(ids)) != len(ids):
        raise InvalidArgumentError("entry ids are not unique")
    signals = []
    for entry in entries:
        try:
            trimmed, _ = preprocess_rir(loader(entry), preprocess)
        except (LateReverbError, OSError) as exc:
            raise type(exc)(f"entry {entry.id!r}: {exc}") from exc
        signals.append(trimmed)
    if align:
        signals = align_all(signals)
    return dict(zip(ids, signals))


def _compute_features(metric, signals, jobs):
    def one(item):
        key, sig = item
        try:
            return key, metric.features(sig), None
        except LateReverbError as exc:
            return key, None, str(exc)

    items = list(signals.items())
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            out = list(pool.map(one, items))
    else:
        out = [one(it) for it in items]
    return {k: f for k, f, _ in out}, {k: e for k, _, e in out if e is not None}


def pairwise_from_signals(signals, metric, labels, seed=None, jobs=1):
    """Metric over every ordered pair of ``signals`` (a ``{id: Signal}`` map)."""
    metric = as_metric(metric)
    if len(signals) < 2:
        raise InvalidArgumentError("a pairwise study needs at least two entries")
    features, feature_errors = _compute_features(metric, signals, jobs)
    for key, msg in feature_errors.items():
        log.warning("%s features failed for %s: %s", metric.name, key, msg)
    digest = metric.config_digest
    ids = sorted(signals)
    pairs = [(a, b) for a in ids for b in ids]

    def one(pair):
        a, b = pair
        if a in feature_errors or b in feature_errors:
            return pair, None, feature_errors.get(a) or feature_errors.get(b)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                return pair, metric.distance(features[a], features[b]), None
        except LateReverbError as exc:
            return pair, None, str(exc)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            computed = list(pool.map(one, pairs, chunksize=64))
    else:
        computed = [one(p) for p in pairs]

    results, errors = [], {}
    for (a, b), value, err in computed:
        if err is not None or not np.isfinite(value):
            errors[(a, b)] = err or f"non-finite value {value}"
            continue
        results.append(MetricResult(value, metric.name, a, b, digest))
    if errors:
        warnings.warn(f"{metric.name}: {len(errors)} pair(s) failed and are excluded", stacklevel=2)
    return PairwiseStudy(results, dict(labels), metric.name, seed, errors)


def entry_labels(entries, bin_edges=DEFAULT_BIN_EDGES):
    return {e.id: EntryLabel(partition_of(e.n_reflective_panels, bin_edges), e.mic_position,
                             e.n_reflective_panels) for e in entries}


def pairwise_matrix(entries, metric_fn, preprocess_cfg=None, *, bin_edges=DEFAULT_BIN_EDGES,
                    seed=None, jobs=1, loader=read_rir):
    """Metric over every ordered (reference, analyzed) pair of ``entries``.

    Signals are loaded, preprocessed with ``preprocess_cfg`` and truncated to
    a common length before any metric is evaluated. Results are sorted by
    ``(ref_id, analyzed_id)``.
    """
    signals = load_signals(entries, preprocess_cfg, loader)
    return pairwise_from_signals(signals, metric_fn, entry_labels(entries, bin_edges), seed, jobs)


# -- aggregation ---------------------------------------------------------------


def standardize(values):
    """Zero mean, unit population standard deviation."""
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise DegenerateDistributionError("standardization needs at least two values")
    mean = x.mean()
    std = np.sqrt(np.mean((x - mean) ** 2))
    if not std > 0:
        raise DegenerateDistributionError("values have zero variance")
    return (x - mean) / std


def panel_range_filter(index, lo, hi):
    """Keep pairs whose reference and analyzed RIRs both have ``lo..hi`` panels."""

    def keep(ref_id, analyzed_id):
        return (lo <= index[ref_id].n_reflective_panels <= hi
                and lo <= index[analyzed_id].n_reflective_panels <= hi)

    return keep


def _group_order(key, labels):
    if key == "mic_position":
        return sorted(labels)
    return sorted(labels, key=lambda s: tuple(int(p) for p in str(s).split("-")))


def median_by_group(study, group_key="partition", filter=None, include_self_pairs=True,
                    values=None):
    """Median matrix of standardized study values.

    Parameters
    ----------
    study : PairwiseStudy
    group_key : {"partition", "mic_position"}
    filter : callable, optional
        ``filter(ref_id, analyzed_id) -> bool`` selecting pairs to aggregate.
    include_self_pairs : bool
        Whether ``(i, i)`` pairs contribute to the diagonal.
    values : array_like, optional
        Values aligned with ``study.results``; defaults to the study's
        standardized values.
    """
    if group_key not in GROUP_KEYS:
        raise InvalidArgumentError(f"group_key must be one of {GROUP_KEYS}")
    vals = study.standardized() if values is None else np.asarray(values, dtype=np.float64)
    if vals.shape != (len(study.results),):
        raise InvalidArgumentError("values must align with study results")
    cells = {}
    for r, v in zip(study.results, vals):
        if not include_self_pairs and r.ref_id == r.analyzed_id:
            continue
        if filter is not None and not filter(r.ref_id, r.analyzed_id):
            continue
        g_ref = getattr(study.index[r.ref_id], group_key)
        g_ana = getattr(study.index[r.analyzed_id], group_key)
        cells.setdefault((g_ref, g_ana), []).append(v)
    if not cells:
        raise InsufficientDataError("no pairs left to aggregate")
    rows = _group_order(group_key, {k[0] for k in cells})
    cols = _group_order(group_key, {k[1] for k in cells})
    med = np.full((len(rows), len(cols)), np.nan)
    counts = np.zeros((len(rows), len(cols)), dtype=int)
    for i, g1 in enumerate(rows):
        for j, g2 in enumerate(cols):
            cell = cells.get((g1, g2))
            if cell:
                med[i, j] = np.median(cell)
                counts[i, j] = len(cell)
    return MedianMatrix(rows, cols, med, counts, study.metric, group_key)


# -- sweep ---------------------------------------------------------------------


def select_sweep_entries(target, pool, n_per_group, seed):
    """Entries drawn for the sweep, as ``{panel_count: [entries]}``.

    ``pool`` is a list of entries (or a ``{panels: [entries]}`` mapping).
    Only entries at the target's microphone position are used. For each
    panel count up to ``n_per_group`` entries are drawn with a generator
    seeded by ``(seed, panel_count)``.
    """
    if isinstance(pool, dict):
        pool = [e for group in pool.values() for e in group]
    if target.id not in {e.id for e in pool}:
        raise InvalidArgumentError(f"target {target.id!r} not found in the pool")
    if n_per_group < 1:
        raise InvalidArgumentError("n_per_group must be >= 1")
    same_mic = [e for e in pool if e.mic_position == target.mic_position]
    if all(e.id == target.id for e in same_mic):
        raise InsufficientDataError(
            f"no other RIR at mic position {target.mic_position} besides the target"
        )
    groups = {}
    for e in same_mic:
        groups.setdefault(e.n_reflective_panels, []).append(e)

    chosen = {}
    for panels in sorted(groups):
        members = groups[panels]
        rng = np.random.default_rng([seed, panels])
        k = min(n_per_group, len(members))
        idx = np.sort(rng.choice(len(members), size=k, replace=False))
        chosen[panels] = [members[i] for i in idx]
    return chosen


def sweep_from_signals(target, chosen, signals, metric_fn):
    """Median and population std of distances from ``target`` per panel group.

    ``signals`` maps ids to already preprocessed, length-aligned signals.
    """
    metric = as_metric(metric_fn)
    ref = metric.features(signals[target.id])
    cache = {}
    deltas, medians, stds, counts = [], [], [], []
    for panels, members in sorted(chosen.items()):
        vals = []
        for e in members:
            if e.id not in cache:
                try:
                    cache[e.id] = metric.distance(ref, metric.features(signals[e.id]))
                except LateReverbError as exc:
                    log.warning("sweep pair %s/%s failed: %s", target.id, e.id, exc)
                    cache[e.id] = None
            if cache[e.id] is not None:
                vals.append(cache[e.id])
        deltas.append(panels - target.n_reflective_panels)
        counts.append(len(vals))
        medians.append(float(np.median(vals)) if vals else np.nan)
        stds.append(float(np.std(vals)) if vals else np.nan)
    return SweepCurve(np.array(deltas), np.array(medians), np.array(stds),
                      np.array(counts), False, metric.name)


def sweep_experiment(target, pool, n_per_group, metric_fn, seed, preprocess_cfg=None,
                     loader=read_rir):
    """Distances from ``target`` to RIRs grouped by reflective-panel count.

    See :func:`select_sweep_entries` for how the compared RIRs are drawn.
    The target and all drawn RIRs are preprocessed and aligned together.
    """
    chosen = select_sweep_entries(target, pool, n_per_group, seed)
    needed = {target.id: target}
    for members in chosen.values():
        for e in members:
            needed.setdefault(e.id, e)
    signals = load_signals(list(needed.values()), preprocess_cfg, loader)
    return sweep_from_signals(target, chosen, signals, metric_fn)


def normalize_min_max(curve):
    """Map medians onto [0, 1]; standard deviations scale by the same factor."""
    lo, hi = np.nanmin(curve.median), np.nanmax(curve.median)
    if not hi > lo:
        raise DegenerateDistributionError("sweep medians are flat; cannot normalize")
    scale = hi - lo
    return SweepCurve(curve.delta.copy(), (curve.median - lo) / scale, curve.std / scale,
                      curve.n.copy(), True, curve.metric)


# -- CSV I/O -------------------------------------------------------------------


def _fmt(x):
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def results_rows(study, standardized=False):
    """Rows of ``metric,ref_id,analyzed_id,value[,value_std]``, failed pairs
    included with empty value fields, sorted by ``(ref_id, analyzed_id)``."""
    std = study.standardized() if standardized and len(study.results) >= 2 else None
    rows = []
    for k, r in enumerate(study.results):
        row = [study.metric, r.ref_id, r.analyzed_id, float(r.value)]
        if standardized:
            row.append(float(std[k]) if std is not None else None)
        rows.append(row)
    for (a, b) in study.errors:
        rows.append([study.metric, a, b, None] + ([None] if standardized else []))
    rows.sort(key=lambda row: (row[1], row[2]))
    return rows


def write_results_csv(path, studies, standardized=False):
    header = ["metric", "ref_id", "analyzed_id", "value"] + (["value_std"] if standardized else [])
    rows = [row for s in studies for row in results_rows(s, standardized)]
    return atomic_write_text(path, _csv_text(header, rows))


def read_results_csv(path):
    """Parse a results CSV into ``{metric: [(ref, analyzed, value, value_std)]}``.

    Empty value fields (failed pairs) are returned as ``None``.
    """
    out = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:4] != ["metric", "ref_id", "analyzed_id", "value"]:
            raise InvalidArgumentError(f"{path}: line 1: unexpected header {header}")
        has_std = len(header) > 4 and header[4] == "value_std"
        for row in reader:
            lineno = reader.line_num
            if not row:
                continue
            if len(row) != len(header):
                raise InvalidArgumentError(f"{path}: line {lineno}: expected {len(header)} fields")
            try:
                value = float(row[3]) if row[3] else None
                value_std = float(row[4]) if has_std and row[4] else None
            except ValueError:
                raise InvalidArgumentError(f"{path}: line {lineno}: non-numeric value") from None
            out.setdefault(row[0], []).append((row[1], row[2], value, value_std))
    return out


def study_from_rows(metric, rows, index, seed=None):
    """Rebuild a :class:`PairwiseStudy` (and aligned standardized values)
    from parsed CSV rows."""
    results, std, errors = [], [], {}
    for ref, ana, value, value_std in rows:
        for key in (ref, ana):
            if key not in index:
                raise InvalidArgumentError(f"id {key!r} in results but not in manifest")
        if value is None:
            errors[(ref, ana)] = "failed"
            continue
        results.append(MetricResult(value, metric, ref, ana, ""))
        std.append(value_std)
    study = PairwiseStudy(results, index, metric, seed, errors)
    if any(v is None for v in std):
        return study, None
    return study, np.array(std, dtype=np.float64)


def median_matrix_csv(m):
    header = [f"{m.group_key}:ref\\analyzed"] + [str(c) for c in m.col_labels]
    rows = [[str(label)] + list(m.values[i]) for i, label in enumerate(m.row_labels)]
    return _csv_text(header, rows)


def write_median_matrix_csv(path, matrix):
    return atomic_write_text(path, median_matrix_csv(matrix))


def sweep_csv(curve):
    rows = [[int(d), float(m), float(s), int(n)]
            for d, m, s, n in zip(curve.delta, curve.median, curve.std, curve.n)]
    return _csv_text(["delta", "median", "std", "n"], rows)


def write_sweep_csv(path, curve):
    return atomic_write_text(path, sweep_csv(curve))
