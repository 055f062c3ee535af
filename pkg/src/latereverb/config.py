"""Run configuration for the command-line harness.

A YAML file with the keys below; command-line flags override file values.

.. code-block:: yaml

    manifest: corpus/manifest.csv
    metrics: [PC, EDC, MSS, ESR]
    seed: 0
    jobs: 1
    output_dir: out
    preprocess:
      enabled: true
      t_mix_ms: 20.0
      onset: {frame_length: 256, hop: 64}
    pc: {stft_window: 1024, stft_hop: 256, kernel_side: 64, stride: 4, epsilon: 1.0e-12}
    mss: {resolutions: [[512, 128, 512], [1024, 256, 1024], [2048, 512, 2048]], log_epsilon: 1.0e-8}
    edc: {bands: third_octave, floor_db: -120.0, linear_filter: true}
    sampling: {per_mic: null, mics: [1, 2, 3, 4, 5]}
    partitions: {bin_edges: [[0, 4], [5, 9], ..., [50, 55]]}
    sweep: {target: null, n_per_group: 50}
    aggregate: {group_by: partition, panel_range: null, include_self_pairs: true}
"""
from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import yaml

from .dataset import DEFAULT_BIN_EDGES, MIC_POSITIONS, validate_bin_edges
from .dsp_core import BandSet, third_octave_centers
from .errors import ConfigError, LateReverbError
from .metrics import EdcConfig, MetricKind, MssConfig, PcConfig, build_metric
from .preprocess import OnsetConfig, PreprocessConfig

OUTPUT_DIR_ENV = "LATEREVERB_OUTPUT_DIR"
ALL_METRICS = tuple(k.value for k in MetricKind)


@dataclass(frozen=True)
class SamplingConfig:
    per_mic: int = None
    mics: tuple = MIC_POSITIONS


@dataclass(frozen=True)
class SweepConfig:
    target: str = None
    n_per_group: int = 50


@dataclass(frozen=True)
class AggregateConfig:
    group_by: str = "partition"
    panel_range: tuple = None
    include_self_pairs: bool = True


@dataclass(frozen=True)
class RunConfig:
    manifest: Path = None
    metrics: tuple = ALL_METRICS
    seed: int = 0
    jobs: int = 1
    output_dir: Path = None
    preprocess: PreprocessConfig = None
    pc: PcConfig = field(default_factory=PcConfig)
    mss: MssConfig = field(default_factory=MssConfig)
    edc: EdcConfig = field(default_factory=EdcConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    bin_edges: tuple = DEFAULT_BIN_EDGES
    sweep: SweepConfig = field(default_factory=SweepConfig)
    aggregate: AggregateConfig = field(default_factory=AggregateConfig)

    def build_metrics(self):
        return [build_metric(m, pc=self.pc, mss=self.mss, edc=self.edc) for m in self.metrics]

    def require_preprocess(self):
        if self.preprocess is None:
            raise ConfigError(
                "preprocessing is not configured: set preprocess.t_mix_ms "
                "(or preprocess.enabled: false) in the config, or pass --t-mix-ms / --no-preprocess"
            )
        return self.preprocess

    def resolved_output_dir(self):
        if self.output_dir is not None:
            return Path(self.output_dir)
        return Path(os.environ.get(OUTPUT_DIR_ENV, "latereverb-out"))


def _section(data, name, allowed):
    value = data.get(name) or {}
    if not isinstance(value, dict):
        raise ConfigError(f"'{name}' must be a mapping")
    unknown = set(value) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in '{name}': {sorted(unknown)}")
    return value


def _names(cls):
    return [f.name for f in fields(cls)]


def parse_metrics(value):
    if isinstance(value, str):
        value = [v for v in value.replace(",", " ").split() if v]
    names = []
    for v in value or []:
        name = str(v).strip().upper()
        if name not in ALL_METRICS:
            raise ConfigError(f"unknown metric {v!r}; choose from {', '.join(ALL_METRICS)}")
        if name not in names:
            names.append(name)
    if not names:
        raise ConfigError("at least one metric must be selected")
    return tuple(names)


def _bands(value):
    if value in (None, "third_octave"):
        return third_octave_centers()
    if isinstance(value, (list, tuple)):
        return BandSet(tuple(float(v) for v in value))
    raise ConfigError(f"edc.bands must be 'third_octave' or a list of Hz, got {value!r}")


def config_from_dict(data, base_dir=None):
    """Validate a parsed YAML mapping into a :class:`RunConfig`."""
    data = dict(data or {})
    top = {"manifest", "metrics", "seed", "jobs", "output_dir", "preprocess", "pc", "mss", "edc",
           "sampling", "partitions", "sweep", "aggregate"}
    unknown = set(data) - top
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {sorted(unknown)}")
    base = Path(base_dir) if base_dir is not None else None

    def path(v):
        if v is None:
            return None
        p = Path(v)
        return base / p if base is not None and not p.is_absolute() else p

    try:
        preprocess = None
        if "preprocess" in data:
            pre = _section(data, "preprocess", ["enabled", "t_mix_ms", "onset"])
            onset = pre.get("onset") or {}
            extra = set(onset) - set(_names(OnsetConfig))
            if extra:
                raise ConfigError(f"unknown key(s) in 'preprocess.onset': {sorted(extra)}")
            enabled = bool(pre.get("enabled", True))
            if enabled and pre.get("t_mix_ms") is None:
                raise ConfigError("preprocess.t_mix_ms is required when preprocessing is enabled")
            preprocess = PreprocessConfig(float(pre.get("t_mix_ms") or 0.0), OnsetConfig(**onset), enabled)

        pc = PcConfig(**_section(data, "pc", _names(PcConfig)))
        mss_d = _section(data, "mss", _names(MssConfig))
        mss = MssConfig(**mss_d)
        edc_d = _section(data, "edc", ["bands", "floor_db", "linear_filter"])
        edc = EdcConfig(_bands(edc_d.get("bands")), float(edc_d.get("floor_db", -120.0)),
                        bool(edc_d.get("linear_filter", True)))

        samp = _section(data, "sampling", _names(SamplingConfig))
        sampling = SamplingConfig(
            None if samp.get("per_mic") is None else int(samp["per_mic"]),
            tuple(int(m) for m in samp.get("mics", MIC_POSITIONS)),
        )
        parts = _section(data, "partitions", ["bin_edges"])
        bin_edges = tuple(tuple(e) for e in validate_bin_edges(parts.get("bin_edges", DEFAULT_BIN_EDGES)))
        sw = _section(data, "sweep", _names(SweepConfig))
        sweep = SweepConfig(None if sw.get("target") is None else str(sw["target"]),
                            int(sw.get("n_per_group", 50)))
        ag = _section(data, "aggregate", _names(AggregateConfig))
        aggregate = AggregateConfig(
            str(ag.get("group_by", "partition")),
            parse_panel_range(ag.get("panel_range")),
            bool(ag.get("include_self_pairs", True)),
        )
        cfg = RunConfig(
            manifest=path(data.get("manifest")),
            metrics=parse_metrics(data.get("metrics", ALL_METRICS)),
            seed=int(data.get("seed", 0)),
            jobs=int(data.get("jobs", 1)),
            output_dir=path(data.get("output_dir")),
            preprocess=preprocess, pc=pc, mss=mss, edc=edc, sampling=sampling,
            bin_edges=bin_edges, sweep=sweep, aggregate=aggregate,
        )
    except ConfigError:
        raise
    except (LateReverbError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.jobs < 1:
        raise ConfigError("jobs must be >= 1")
    if cfg.aggregate.group_by not in ("partition", "mic_position"):
        raise ConfigError("aggregate.group_by must be 'partition' or 'mic_position'")
    return cfg


def parse_panel_range(value):
    if value is None or value == "":
        return None
    if isinstance(value, str):
        parts = value.replace("..", "-").split("-")
        if len(parts) != 2:
            raise ConfigError(f"panel range must look like '35-49', got {value!r}")
        value = parts
    try:
        lo, hi = (int(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"invalid panel range {value!r}") from None
    if lo > hi:
        raise ConfigError(f"panel range {lo}-{hi} is empty")
    return (lo, hi)


def load_config(path=None):
    """Read a YAML config file; ``None`` gives the defaults."""
    if path is None:
        return config_from_dict({})
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_dict(data, base_dir=path.parent)


def with_overrides(cfg, **overrides):
    """Apply non-``None`` overrides (flag values win over the file)."""
    changes = {k: v for k, v in overrides.items() if v is not None}
    if "metrics" in changes:
        changes["metrics"] = parse_metrics(changes["metrics"])
    for key in ("manifest", "output_dir"):
        if key in changes:
            changes[key] = Path(changes[key])
    if changes.get("jobs", 1) < 1:
        raise ConfigError("jobs must be >= 1")
    return replace(cfg, **changes)


def config_as_dict(cfg):
    return asdict(cfg)
