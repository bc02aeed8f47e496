"""Release gates for the full toolkit, one test per promised behavior.

Each test prints the measured numbers next to the bound it must clear and
asserts its own wall-clock budget, so `pytest -v -s tests/test_acceptance.py`
reads as a checklist. Everything here goes through public entry points only;
expected values come from closed-form constellations, brute-force oracles, or
hand-counted pair bookkeeping, never from the code under test.
"""

import time
from pathlib import Path

import numpy as np
from scipy import stats

from conftest import tone
from test_embednet import finite_difference_worst_error, small_model
from test_featcsp import HARMONIC_COLUMNS, tsm_oracle
from test_featstat import exact_constellation_stream, moment_value
from rfembed import (cli, embednet, evalverify, featcsp, featstat, impair,
                     protogen, waveform)
from rfembed.embednet import HeadKind
from rfembed.seeds import EVAL_STREAM, INSTANCE_STREAM, rng_for


def report_gate(label: str, detail: str, t0: float, budget_s: float) -> None:
    elapsed = time.monotonic() - t0
    print(f"{label}: {detail} [{elapsed:.1f}s / {budget_s:.0f}s]")
    assert elapsed < budget_s


def test_pair_counts_benchmark_composition():
    t0 = time.monotonic()
    labels = np.concatenate([np.repeat(np.arange(17), 50), np.full(30, 17)])
    same, diff = evalverify.pair_counts(labels)
    assert (same, diff) == (21260, 365500)
    report_gate("pair counts", f"same {same} diff {diff}", t0, 1.0)


def test_scf_shape_and_symbol_rate_peak():
    t0 = time.monotonic()
    rng = np.random.default_rng(7)
    x = np.repeat(rng.choice([-1.0, 1.0], size=2048), 8).astype(complex)
    scf = featcsp.estimate_scf_fsm(x)
    assert scf.shape == (64, 50)

    col_peaks = scf.max(axis=0)
    peak_col = int(np.argmax(col_peaks[1:])) + 1
    floor_cols = [k for k in range(50) if k not in HARMONIC_COLUMNS]
    floor = float(np.median(col_peaks[floor_cols]))
    dominance = col_peaks[peak_col] / floor
    assert dominance >= 5.0

    oracle_peaks = tsm_oracle(x).max(axis=0)
    oracle_col = int(np.argmax(oracle_peaks[1:])) + 1
    assert peak_col == oracle_col
    report_gate("scf peak", f"column {peak_col} (oracle {oracle_col}) "
                f"dominance {dominance:.1f}x", t0, 30.0)


def test_statistical_feature_oracles():
    t0 = time.monotonic()
    bpsk = exact_constellation_stream("psk", 2)
    qpsk = exact_constellation_stream("psk", 4)
    c40_bpsk = abs(moment_value(bpsk, "C40"))
    c40_qpsk = abs(moment_value(qpsk, "C40"))
    m20_qpsk = abs(moment_value(qpsk, "M20"))
    assert abs(c40_bpsk - 2.0) <= 1e-3
    assert abs(c40_qpsk - 1.0) <= 1e-3
    assert m20_qpsk <= 1e-3

    sigma_aa = featstat.mod_features(tone(0.1, 4096))[
        featstat.FEATURE_NAMES.index("sigma_aa")]
    assert sigma_aa <= 1e-6
    report_gate("feature oracles",
                f"|C40| bpsk {c40_bpsk:.6f} qpsk {c40_qpsk:.6f} "
                f"|M20| qpsk {m20_qpsk:.2e} sigma_aa {sigma_aa:.2e}", t0, 5.0)


def test_head_gradients_match_finite_differences():
    t0 = time.monotonic()
    rng = np.random.default_rng(7)
    feats = rng.standard_normal((3, 12))
    labels = np.array([0, 2, 3])
    worst = {}
    for head in HeadKind:
        model = small_model(head, seed=6)
        worst[head.value] = finite_difference_worst_error(model, feats, labels)
        assert worst[head.value] < 1e-4

    ns = small_model(HeadKind.NORM_SOFTMAX)
    af = small_model(HeadKind.ARCFACE, margin=0.0)
    probe = np.random.default_rng(2).standard_normal(12)
    _, l_ns = embednet.forward(ns, probe, label=1)
    _, l_af = embednet.forward(af, probe, label=1)
    assert np.array_equal(l_ns, l_af)
    detail = " ".join(f"{k} {v:.1e}" for k, v in worst.items())
    report_gate("head gradients", f"worst rel err {detail}; "
                "zero-margin logits identical", t0, 60.0)


def test_impairment_calibration():
    t0 = time.monotonic()
    # Noise sizing: long capture so the spectral floor estimate converges
    # tighter than the 0.3 dB tolerance being verified.
    n = 131072
    x = np.exp(2j * np.pi * (26.0 / 256.0) * np.arange(n))
    means = {}
    for target in (10.0, 20.0):
        est = [impair.estimate_inband_snr(
            impair.apply_awgn(x, target, 3.0 / 256.0, np.random.default_rng(t)))
            for t in range(100)]
        means[target] = float(np.mean(est))
        assert abs(means[target] - target) <= 0.3

    carrier = tone(32.0 / 4096.0, 4096)
    assert int(np.argmax(np.abs(np.fft.fft(carrier)))) == 32
    shifted = impair.apply_phase_cfo(carrier, 0.7, 16.0 / 4096.0)
    peak_bin = int(np.argmax(np.abs(np.fft.fft(shifted))))
    assert peak_bin == 48

    # Unit-gain draws make every tap power exact, so the realized FIR energy
    # isolates the profile normalization. Flat-delay copies of each power
    # table avoid same-sample taps whose amplitudes would otherwise merge.
    class _UnitGain:
        def standard_normal(self):
            return 1.0

        def random(self):
            return 0.0

    fir = impair.tdl_taps(impair.load_tdl_profile("TDL-A"), 1e-7, 1e9,
                          _UnitGain())
    worst_tdl = abs(float(np.sum(np.abs(fir) ** 2)) - 1.0)
    for name in impair.TDL_MODELS:
        real = impair.load_tdl_profile(name)
        flat = impair.TdlProfile(
            name=real.name, kfactor_db=None,
            taps=tuple(impair.TdlTap(delay=float(i), power_db=tap.power_db,
                                     los=True)
                       for i, tap in enumerate(real.taps)))
        fir = impair.tdl_taps(flat, 1e-6, 1e6, _UnitGain())
        worst_tdl = max(worst_tdl, abs(float(np.sum(np.abs(fir) ** 2)) - 1.0))
    assert worst_tdl <= 1e-9
    report_gate("impairment calibration",
                f"snr means {means[10.0]:.2f}/{means[20.0]:.2f} dB "
                f"cfo bin 32->{peak_bin} tdl power err {worst_tdl:.1e}",
                t0, 60.0)


def test_end_to_end_verification_at_desk_scale():
    t0 = time.monotonic()
    n_samples = 16384
    specs = [protogen.sample_protocol(2025, pid) for pid in range(20)]
    tc = embednet.TrainConfig(epochs=5, batch_size=64, lr=0.05,
                              instances_per_class=20, seed=11)
    hook = embednet.build_instance_hook(specs, n_samples, tc)
    model = embednet.init_model(4 * embednet.STFT_SIZE, len(specs),
                                HeadKind.ARCFACE, seed=11)
    embednet.train(model, hook, tc)

    def eval_embeddings(snr_db=None, g_idx=None):
        vecs, labels = [], []
        for cls, spec in enumerate(specs):
            for idx in range(20):
                key = (g_idx, idx) if g_idx is not None else (idx,)
                rng = rng_for(spec.seed, EVAL_STREAM, *key)
                sig = waveform.synthesize_instance(spec, n_samples, rng)
                snr = rng.uniform(3.0, 30.0) if snr_db is None else snr_db
                imp = impair.ImpairmentConfig(sigma_rfo=0.02, snr_db=snr)
                out = impair.apply_impairments(
                    sig, imp, rng, occupied_bandwidth=spec.bandwidth_fraction)
                vecs.append(embednet.embed(model, out.samples))
                labels.append(cls)
        return np.array(vecs), np.array(labels)

    vectors, labels = eval_embeddings()
    report = evalverify.pairwise_verify(vectors, labels, metric="cosine",
                                        fpr_targets=(1e-2,))
    tpr = report.tpr_at[1e-2]
    assert tpr > 0.30

    null_labels = np.random.default_rng(123).permutation(labels)
    null = evalverify.pairwise_verify(vectors, null_labels, metric="cosine",
                                      fpr_targets=(1e-2,))
    null_tpr = null.tpr_at[1e-2]
    assert tpr >= 10.0 * null_tpr

    tprs = []
    for g_idx, snr in enumerate((21.0, 9.0, -3.0)):
        v, y = eval_embeddings(snr_db=snr, g_idx=g_idx)
        r = evalverify.pairwise_verify(v, y, metric="cosine",
                                       fpr_targets=(1e-2,))
        tprs.append(r.tpr_at[1e-2])
    rho = stats.spearmanr(np.arange(len(tprs)), tprs).statistic
    assert rho < 0.0
    report_gate("end-to-end",
                f"tpr@1e-2 {tpr:.3f} null {null_tpr:.4f} "
                f"sweep {[round(t, 3) for t in tprs]} rho {rho:.2f}",
                t0, 900.0)


def _pipeline_run(out: Path) -> dict:
    args = ["--seed", "7", "--out", str(out)]
    assert cli.main(["generate", "--protocols", "5", "--instances", "3",
                     "--samples", "4096", *args]) == 0
    manifest = str(out / "manifest.json")
    assert cli.main(["features", "--manifest", manifest, *args]) == 0
    assert cli.main(["scf", "--manifest", manifest, *args]) == 0
    assert cli.main(["verify", "--table", str(out / "scf.csv"), *args]) == 0
    return {p.relative_to(out).as_posix(): p.read_bytes()
            for p in sorted(out.rglob("*")) if p.is_file()}


def test_pipeline_determinism(tmp_path):
    t0 = time.monotonic()
    first = _pipeline_run(tmp_path / "a")
    second = _pipeline_run(tmp_path / "b")
    assert sorted(first) == sorted(second)
    for name in first:
        assert first[name] == second[name], f"{name} differs between runs"
    report_gate("determinism",
                f"{len(first)} files byte-identical across runs", t0, 300.0)


def test_downstream_classifier_on_projected_cyclic_features():
    t0 = time.monotonic()
    specs = [protogen.sample_protocol(2025, pid) for pid in range(10)]
    matrices, labels = [], []
    for cls, spec in enumerate(specs):
        for idx in range(20):
            rng = rng_for(spec.seed, INSTANCE_STREAM, idx)
            sig = waveform.synthesize_instance(spec, 16384, rng)
            imp = impair.ImpairmentConfig(sigma_rfo=0.02, snr_db=20.0)
            out = impair.apply_impairments(
                sig, imp, rng, occupied_bandwidth=spec.bandwidth_fraction)
            matrices.append(featcsp.estimate_scf_fsm(out.samples))
            labels.append(cls)
    pca = featcsp.pca_fit(matrices, k=128)
    features = np.array([featcsp.pca_project(pca, m) for m in matrices])
    labels = np.array(labels)

    cc = evalverify.ClassifierConfig(scaling="global", seed=0)
    result = evalverify.train_feature_classifier(features, labels, cc)
    assert result.test_accuracy >= 0.90

    shuffled = evalverify.train_feature_classifier(
        features, np.random.default_rng(7).permutation(labels), cc)
    assert abs(shuffled.test_accuracy - 0.10) <= 0.10
    report_gate("downstream classifier",
                f"test acc {result.test_accuracy:.3f} "
                f"shuffled {shuffled.test_accuracy:.3f}", t0, 600.0)
