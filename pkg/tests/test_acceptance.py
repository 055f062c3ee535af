"""Acceptance gate.

Each test checks one criterion at its stated tolerance and records a
PASS/FAIL line printed in the terminal summary. Criteria 6 and 7 share a
desk-scale synthetic corpus: 21 panel groups (T60 log-spaced 0.5 to 2.0 s),
20 RIRs per group, one microphone, 2 s per RIR.
"""
import time

import numpy as np
import pytest
from scipy.stats import spearmanr

import oracles
from conftest import FS, record
from latereverb import kernels
from latereverb.cli import main, synth_corpus
from latereverb.dataset import DEFAULT_BIN_EDGES, SynthSpec, partition_by_panels, sample_subset, synth_rir
from latereverb.dsp_core import Signal, edc_to_db_normalized, schroeder_edc
from latereverb.evaluation import (
    load_signals,
    median_by_group,
    normalize_min_max,
    pairwise_from_signals,
    entry_labels,
    select_sweep_entries,
    sweep_from_signals,
)
from latereverb.metrics import (
    build_metric,
    edc_loss,
    esr_loss,
    mss_loss,
    pc_loss,
    spectral_convergence,
)
from latereverb.preprocess import PreprocessConfig

N_CASES = 100


def rel_err(got, want):
    scale = np.max(np.abs(want))
    return float(np.max(np.abs(got - want)) / scale) if scale > 0 else float(np.max(np.abs(got)))


def test_1_oracle_equivalence():
    rng = np.random.default_rng(101)
    backends = kernels.available_backends()
    worst, count = 0.0, 0
    t0 = time.perf_counter()
    for _ in range(1000):
        k0, k1 = rng.integers(1, 5, size=2)
        n0, n1 = rng.integers(k0, 17), rng.integers(k1, 17)
        stride = int(rng.integers(1, 5))
        x = rng.standard_normal((n0, n1))
        kern = rng.random((k0, k1))
        want = oracles.conv2d(x, kern, stride)
        for b in backends:
            worst = max(worst, rel_err(kernels.conv2d_strided(x, kern, stride, backend=b), want))
        # log-uniform lengths 1..4096
        sig = rng.standard_normal(int(2.0 ** rng.uniform(0, 12)))
        want = oracles.schroeder(sig)
        for b in backends:
            worst = max(worst, rel_err(schroeder_edc(sig, backend=b), want))
        count += 2
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 10.0
    record(1, ok, "oracle equivalence: conv2d_strided and schroeder_edc",
           f"{count} instances x {len(backends)} backends, max rel err {worst:.1e}, {elapsed:.1f} s")
    assert ok


def test_2_zero_identity():
    rng = np.random.default_rng(202)
    fns = {"PC": pc_loss, "EDC": edc_loss, "MSS": mss_loss, "ESR": esr_loss}
    nonzero = []
    t0 = time.perf_counter()
    for i in range(N_CASES):
        spec = SynthSpec(float(rng.uniform(0.3, 2.0)), float(rng.uniform(0.4, 0.6)), FS,
                         int(rng.integers(2**31)), float(rng.uniform(0.0, 0.01)))
        h = synth_rir(spec)
        twin = Signal(h.samples.copy(), FS)
        for name, fn in fns.items():
            if fn(h, twin) != 0.0:
                nonzero.append((i, name))
    elapsed = time.perf_counter() - t0
    ok = not nonzero and elapsed < 30.0
    record(2, ok, "zero identity for PC, EDC, MSS, ESR",
           f"{N_CASES} RIRs, {len(nonzero)} nonzero, {elapsed:.1f} s")
    assert ok


def test_3_invariances():
    rng = np.random.default_rng(303)
    pc_asym = edc_worst = esr_p2_diff = esr_any_worst = sc_worst = 0.0
    for i in range(N_CASES):
        n = int(rng.integers(17152, 20000))
        a = Signal(rng.standard_normal(n) * np.exp(-np.arange(n) / rng.uniform(2000, 20000)), FS)
        b = Signal(rng.standard_normal(n) * np.exp(-np.arange(n) / rng.uniform(2000, 20000)), FS)
        pc_asym = max(pc_asym, abs(pc_loss(a, b) - pc_loss(b, a)))

        short_a = Signal(a.samples[:4800], FS)
        short_b = Signal(b.samples[:4800], FS)
        g = 10.0 ** rng.uniform(-3, 3)
        base = edc_loss(short_a, short_b)
        edc_worst = max(edc_worst, abs(edc_loss(short_a, Signal(g * short_b.samples, FS)) - base),
                        edc_loss(short_a, Signal(g * short_a.samples, FS)))

        x, y = rng.standard_normal((2, 2048))
        ref = esr_loss(Signal(x, FS), Signal(y, FS))
        p2 = 2.0 ** int(rng.integers(-40, 41))
        esr_p2_diff = max(esr_p2_diff, abs(esr_loss(Signal(p2 * x, FS), Signal(p2 * y, FS)) - ref))
        ga = 10.0 ** rng.uniform(-3, 3)
        esr_any = esr_loss(Signal(ga * x, FS), Signal(ga * y, FS))
        esr_any_worst = max(esr_any_worst, abs(esr_any - ref) / ref)

        mag = rng.random((int(rng.integers(2, 60)), int(rng.integers(2, 60)))) + 1e-3
        gs = rng.uniform(0.0, 4.0)
        sc_worst = max(sc_worst, abs(spectral_convergence(mag, gs * mag) - abs(1.0 - gs)))

    ok = pc_asym == 0.0 and edc_worst <= 1e-9 and esr_p2_diff == 0.0 and sc_worst <= 1e-12
    record(3, ok, "invariances: PC symmetry, EDC gain, ESR joint scaling, SC |1-g|",
           f"{N_CASES} cases each; PC asym {pc_asym:.0e}, EDC {edc_worst:.1e}, "
           f"ESR pow2 {esr_p2_diff:.0e} (any gain rel {esr_any_worst:.0e}), SC {sc_worst:.1e}")
    assert ok
    # arbitrary gains round the products; only relative agreement holds
    assert esr_any_worst <= 1e-14


def test_4_esr_statistics():
    t0 = time.perf_counter()
    values = []
    for seed in range(100):
        x, y = np.random.default_rng([404, seed]).standard_normal((2, 48000))
        values.append(esr_loss(Signal(x, FS), Signal(y, FS)))
    mean = float(np.mean(values))
    elapsed = time.perf_counter() - t0
    ok = abs(mean - 2.0) <= 0.05 and elapsed < 20.0
    record(4, ok, "ESR of independent equal-variance Gaussian pairs", f"mean {mean:.4f}, {elapsed:.1f} s")
    assert ok


def test_5_t60_recovery():
    drops = []
    for seed in range(20):
        x = synth_rir(SynthSpec(1.0, 2.0, FS, seed)).samples[: int(1.5 * FS)]
        drops.append(-edc_to_db_normalized(schroeder_edc(x))[FS])
    med = float(np.median(drops))
    ok = abs(med - 60.0) <= 1.0
    record(5, ok, "synth_rir T60 = 1 s decays 60 dB at 1 s", f"median {med:.2f} dB over 20 seeds")
    assert ok


# -- criteria 6 and 7: shared desk-scale corpus ---------------------------------

TARGET_GROUP = 10  # middle of 21 groups, 28 panels
PREPROCESS = PreprocessConfig(t_mix_ms=5.0)


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance_corpus")
    entries = synth_corpus(root, groups=21, per_group=20, mics=1, length_s=2.0)
    return entries


def prominence(median):
    """Depth of the global minimum below the lower of the two side maxima."""
    i = int(np.nanargmin(median))
    return float(min(np.max(median[: i + 1]), np.max(median[i:])) - median[i])


def sweep_shape(curve):
    i0 = int(np.flatnonzero(curve.delta == 0)[0])
    at_zero = int(np.argmin(curve.median)) == i0
    rho_left = spearmanr(curve.delta[: i0 + 1], curve.median[: i0 + 1])[0]
    rho_right = spearmanr(curve.delta[i0:], curve.median[i0:])[0]
    return at_zero, rho_left, rho_right


def test_6_sweep_shape(corpus):
    t0 = time.perf_counter()
    target = next(e for e in corpus if e.id.startswith(f"g{TARGET_GROUP:02d}_"))
    chosen = select_sweep_entries(target, corpus, 20, seed=0)
    needed = {target.id: target}
    for members in chosen.values():
        for e in members:
            needed.setdefault(e.id, e)
    signals = load_signals(list(needed.values()), PREPROCESS)
    curves = {m: normalize_min_max(sweep_from_signals(target, chosen, signals, build_metric(m)))
              for m in ("PC", "EDC", "ESR")}
    elapsed = time.perf_counter() - t0

    ok = elapsed < 300.0
    parts = []
    for m in ("PC", "EDC"):
        at_zero, rl, rr = sweep_shape(curves[m])
        ok &= at_zero and rl <= -0.9 and rr >= 0.9
        parts.append(f"{m} min@0 {at_zero} rho {rl:.3f}/{rr:.3f}")
    prom = {m: prominence(curves[m].median) for m in curves}
    ok &= prom["ESR"] <= prom["PC"]
    parts.append(f"prominence ESR {prom['ESR']:.2e} <= PC {prom['PC']:.2e}")
    parts.append(f"{elapsed:.0f} s")
    record(6, ok, "sweep shape: PC and EDC minimum at delta 0, ESR flatter", "; ".join(parts))
    assert ok


def diagonal_violations(values):
    """Indices whose diagonal cell is not strictly below its row and column."""
    bad = []
    for i in range(len(values)):
        d = values[i, i]
        if not (d < np.delete(values[i], i).min() and d < np.delete(values[:, i], i).min()):
            bad.append(i)
    return bad


def test_7_diagonal_dominance(corpus):
    subset = []
    for j, part in enumerate(partition_by_panels(corpus, DEFAULT_BIN_EDGES)):
        subset += sample_subset(part, 5, seed=j, mics=(1,))
    signals = load_signals(subset, PREPROCESS)
    labels = entry_labels(subset)
    verdict = {}
    for m in ("PC", "EDC"):
        matrix = median_by_group(pairwise_from_signals(signals, build_metric(m), labels, seed=0))
        bad = diagonal_violations(matrix.values)
        verdict[m] = (len(matrix.row_labels), [matrix.row_labels[i] for i in bad])
    ok = not any(bad for _, bad in verdict.values())
    detail = ", ".join(f"{m} {n}x{n} " + (f"violated at {' '.join(bad)}" if bad else "dominant")
                       for m, (n, bad) in verdict.items())
    record(7, ok, "median matrix diagonal dominance for PC and EDC",
           f"{len(subset)} RIRs; {detail}")
    assert ok


# losses below this are rounding residue (EDC under a pure gain is ~1e-27)
LOSS_RESOLUTION = 1e-12


def central_slope(f, d):
    return (f(d) - f(-d)) / (2.0 * d)


def test_8_finite_difference_slopes():
    h = synth_rir(SynthSpec(0.8, 0.5, FS, 808))
    x = h.samples
    fns = {"PC": pc_loss, "MSS": mss_loss, "EDC": edc_loss}
    ok = True
    parts = []
    for name, fn in fns.items():
        def f(d, fn=fn):
            return fn(h, Signal((1.0 + d) * x, FS))

        vals = {d: f(d) for d in (1e-3, -1e-3, 1e-4, -1e-4)}
        finite = all(np.isfinite(v) for v in vals.values())
        s3, s4 = central_slope(f, 1e-3), central_slope(f, 1e-4)
        scale = max(abs(vals[1e-3]), abs(vals[-1e-3])) / 1e-3
        agree = abs(s3 - s4) <= 0.05 * scale + LOSS_RESOLUTION / 1e-4
        ok &= finite and agree
        parts.append(f"{name} s={s3:.3g}/{s4:.3g} scale {scale:.3g}")

    # EDC is gain invariant (f == 0); probe it along a decay-rate perturbation instead
    t = np.arange(len(x)) / FS

    def g(d):
        return edc_loss(h, Signal(x * np.exp(-d * t / 0.1), FS))

    r3, r4 = central_slope(g, 1e-3), central_slope(g, 1e-4)
    parts.append(f"EDC decay-rate s={r3:.3g}/{r4:.3g}")
    record(8, ok, "finite-difference slopes under gain perturbation agree within 5%", "; ".join(parts))
    assert ok


def test_9_determinism(tmp_path):
    corpus_dir = tmp_path / "corpus"
    assert main(["synth", "--output-dir", str(corpus_dir), "--groups", "5", "--per-group", "5",
                 "--length-s", "0.5", "--seed", "9"]) == 0
    cfg = tmp_path / "run.yaml"
    cfg.write_text(f"manifest: {corpus_dir / 'manifest.csv'}\nseed: 3\n"
                   "preprocess: {t_mix_ms: 5.0}\nsweep: {target: g02_p28_m1_000, n_per_group: 3}\n")
    outputs = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert main(["compute", "--config", str(cfg), "--output-dir", str(out)]) == 0
        assert main(["sweep", "--config", str(cfg), "--output-dir", str(out)]) == 0
        outputs.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
    same = outputs[0].keys() == outputs[1].keys() and all(
        outputs[0][k] == outputs[1][k] for k in outputs[0])
    record(9, same, "compute + sweep CSVs byte-identical across runs",
           f"{len(outputs[0])} CSV files compared")
    assert same
