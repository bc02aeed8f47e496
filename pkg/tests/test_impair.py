import numpy as np
import pytest

from conftest import band_limited_carrier, noisy_qpsk, tone
from rfembed import impair
from rfembed.errors import ValidationError
from rfembed.impair import TdlProfile, TdlTap
from rfembed.waveform import ComplexSignal


# --- phase and frequency offset ---

def test_phase_cfo_identity():
    x = noisy_qpsk(2048)
    assert np.array_equal(impair.apply_phase_cfo(x, 0.0, 0.0), x)


def test_phase_pi_negates():
    x = noisy_qpsk(2048)
    assert np.allclose(impair.apply_phase_cfo(x, np.pi, 0.0), -x, atol=1e-12)


def test_cfo_shifts_tone_peak():
    n = 4096
    y = impair.apply_phase_cfo(tone(0.0, n), 0.0, 0.25)
    assert np.argmax(np.abs(np.fft.fft(y))) == round(0.25 * n)


def test_cfo_aliasing_rejected():
    with pytest.raises(ValidationError):
        impair.apply_phase_cfo(tone(0.0, 256), 0.0, 0.5)
    with pytest.raises(ValidationError):
        impair.apply_phase_cfo(tone(0.0, 256), 0.0, -0.6)


def test_phase_cfo_preserves_energy():
    x = noisy_qpsk(4096)
    y = impair.apply_phase_cfo(x, 1.2, 0.07)
    p_in = np.sum(np.abs(x) ** 2)
    assert abs(np.sum(np.abs(y) ** 2) - p_in) / p_in < 1e-9


# --- delay-line channel ---

@pytest.mark.parametrize("name", impair.TDL_MODELS)
def test_tdl_profiles_normalized(name):
    profile = impair.load_tdl_profile(name)
    powers = np.array([10.0 ** (t.power_db / 10.0) for t in profile.taps])
    powers /= powers.sum()
    assert abs(powers.sum() - 1.0) < 1e-9
    delays = [t.delay for t in profile.taps]
    assert delays == sorted(delays)
    assert delays[0] >= 0.0


def test_tdl_los_first_tap():
    for name in ("TDL-D", "TDL-E"):
        profile = impair.load_tdl_profile(name)
        assert profile.taps[0].los
        assert profile.kfactor_db is not None
    for name in ("TDL-A", "TDL-B", "TDL-C"):
        assert not any(t.los for t in impair.load_tdl_profile(name).taps)


def test_tdl_unknown_model():
    with pytest.raises(ValidationError):
        impair.load_tdl_profile("TDL-Z")


def test_tdl_single_tap_is_flat_gain():
    profile = TdlProfile("single", None, (TdlTap(0.0, 0.0, False),))
    x = noisy_qpsk(2048)
    gains = []
    for seed in range(200):
        y = impair.apply_tdl(x, profile, 100e-9, 20e6, np.random.default_rng(seed))
        ratio = y / x
        assert np.allclose(ratio, ratio[0], atol=1e-9)  # flat complex gain
        gains.append(ratio[0])
    assert abs(np.mean(np.abs(gains) ** 2) - 1.0) < 0.2  # unit-variance gain


def test_tdl_deterministic():
    x = noisy_qpsk(2048)
    profile = impair.load_tdl_profile("TDL-A")
    a = impair.apply_tdl(x, profile, 300e-9, 20e6, np.random.default_rng(11))
    b = impair.apply_tdl(x, profile, 300e-9, 20e6, np.random.default_rng(11))
    assert np.array_equal(a, b)


def test_tdl_expected_power_preserved():
    x = noisy_qpsk(2048)
    p_in = np.mean(np.abs(x) ** 2)
    profile = impair.load_tdl_profile("TDL-B")
    ratios = [np.mean(np.abs(impair.apply_tdl(
        x, profile, 300e-9, 20e6, np.random.default_rng(s))) ** 2) / p_in
        for s in range(1000)]
    assert 0.9 <= np.mean(ratios) <= 1.1


def test_tdl_signal_too_short():
    profile = impair.load_tdl_profile("TDL-A")
    with pytest.raises(ValidationError):
        impair.apply_tdl(np.ones(4, dtype=complex), profile, 1e-3, 20e6,
                         np.random.default_rng(0))


# --- noise ---

def test_awgn_full_band_0db_noise_variance():
    rng = np.random.default_rng(3)
    x = tone(0.1, 100_000)
    y = impair.apply_awgn(x, 0.0, 1.0, rng)
    noise = y - x
    assert abs(np.mean(noise)) < 0.05
    assert abs(np.mean(np.abs(noise) ** 2) - 1.0) < 0.05


def test_awgn_quarter_band_power():
    # P_n = P_s / (snr_linear * bandwidth) = 1 / (10 * 0.25)
    rng = np.random.default_rng(4)
    x = band_limited_carrier(100_000, 0.25, rng)
    noise = impair.apply_awgn(x, 10.0, 0.25, rng) - x
    assert abs(np.mean(np.abs(noise) ** 2) - 0.4) < 0.02


def test_awgn_invalid_inputs():
    x = tone(0.1, 2048)
    with pytest.raises(ValidationError):
        impair.apply_awgn(x, float("nan"), 1.0, np.random.default_rng(0))
    with pytest.raises(ValidationError):
        impair.apply_awgn(x, 10.0, 0.0, np.random.default_rng(0))
    with pytest.raises(ValidationError):
        impair.apply_awgn(np.zeros(2048, dtype=complex), 10.0, 1.0,
                          np.random.default_rng(0))


# --- in-band SNR estimation ---

def test_estimate_snr_on_pure_noise():
    rng = np.random.default_rng(5)
    wgn = (rng.standard_normal(65536) + 1j * rng.standard_normal(65536)) / np.sqrt(2)
    assert impair.estimate_inband_snr(wgn) <= 3.0


def test_estimate_snr_tone_at_20db():
    rng = np.random.default_rng(6)
    x = tone(25 / 256, 65536)  # on the analysis grid
    y = impair.apply_awgn(x, 20.0, 3 / 256, rng)  # window main-lobe width
    assert abs(impair.estimate_inband_snr(y) - 20.0) <= 1.5


def test_estimate_snr_noiseless_tone():
    assert impair.estimate_inband_snr(tone(0.2, 65536)) >= 40.0


def test_estimate_snr_absent_signal_sentinel():
    assert impair.estimate_inband_snr(np.zeros(4096, dtype=complex)) == float("-inf")


def test_estimate_snr_too_short():
    with pytest.raises(ValidationError):
        impair.estimate_inband_snr(tone(0.1, 512))


def test_snr_roundtrip_band_limited():
    devs = []
    for seed in range(20):
        rng = np.random.default_rng(1000 + seed)
        x = band_limited_carrier(65536, 0.25, rng)
        y = impair.apply_awgn(x, 15.0, 0.25, rng)
        devs.append(impair.estimate_inband_snr(y) - 15.0)
    assert abs(np.mean(devs)) <= 0.3


# --- full chain ---

def test_chain_applies_stages_in_declared_order():
    x = noisy_qpsk(8192)
    config = impair.ImpairmentConfig(phase=0.3, cfo=0.01, channel="TDL-C",
                                     delay_spread_s=300e-9, snr_db=15.0)
    sig = ComplexSignal(x, 20e6)
    got = impair.apply_impairments(sig, config, np.random.default_rng(9),
                                   occupied_bandwidth=0.5).samples

    rng = np.random.default_rng(9)
    manual = impair.apply_phase_cfo(x, 0.3, 0.01)
    manual = impair.apply_tdl(manual, impair.load_tdl_profile("TDL-C"),
                              300e-9, 20e6, rng)
    manual = impair.apply_awgn(manual, 15.0, 0.5, rng)
    assert np.array_equal(got, manual)


def test_chain_skips_disabled_stages():
    x = noisy_qpsk(4096)
    sig = ComplexSignal(x, 1.0)
    out = impair.apply_impairments(sig, impair.ImpairmentConfig(phase=0.0),
                                   np.random.default_rng(0))
    assert np.array_equal(out.samples, x)


def test_chain_draws_are_deterministic():
    sig = ComplexSignal(noisy_qpsk(4096), 1.0)
    config = impair.ImpairmentConfig(sigma_rfo=0.02, channel="TDL-A", snr_db=12.0)
    a = impair.apply_impairments(sig, config, np.random.default_rng(77),
                                 occupied_bandwidth=0.5)
    b = impair.apply_impairments(sig, config, np.random.default_rng(77),
                                 occupied_bandwidth=0.5)
    assert np.array_equal(a.samples, b.samples)
