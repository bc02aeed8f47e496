"""Shared builders for the test suite: forced protocol configs and reference signals."""

import numpy as np

from rfembed import protogen, waveform


def tone(freq, n, amplitude=1.0):
    """Unit-amplitude complex exponential at `freq` cycles/sample."""
    return amplitude * np.exp(2j * np.pi * freq * np.arange(n))


def band_limited_carrier(n, bandwidth, rng):
    """Unit-power noise carrier occupying exactly `bandwidth` of the sample rate.

    Complex white noise brickwall-filtered to [-bandwidth/2, bandwidth/2] in
    the FFT domain, so the occupied band is known by construction. Used as
    the reference signal for SNR calibration checks.
    """
    noise = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    spectrum = np.fft.fft(noise)
    freqs = np.fft.fftfreq(n)
    spectrum[np.abs(freqs) > bandwidth / 2] = 0.0
    x = np.fft.ifft(spectrum)
    return x / np.sqrt(np.mean(np.abs(x) ** 2))


def forced_config(family="linear", **kwargs):
    """GeneratorConfig restricted to a single modulation family."""
    return protogen.GeneratorConfig(families=(family,), **kwargs)


def qpsk_spec(seed=7, mode="continuous", bandwidth=0.5, rolloff=0.35, sps=4):
    """A pinned continuous QPSK protocol, sampled through the normal path."""
    config = protogen.GeneratorConfig(
        families=("linear",), linear_families=("psk",), psk_orders=(4,),
        modes=(mode,), linear_sps=(sps,),
        bandwidth_fraction_range=(bandwidth, bandwidth),
        rolloff_range=(rolloff, rolloff))
    return protogen.sample_protocol(seed, 0, config)


def family_spec(family, seed=7, mode="continuous", **extra):
    """One sampled protocol of the requested family."""
    config = protogen.GeneratorConfig(families=(family,), modes=(mode,), **extra)
    return protogen.sample_protocol(seed, 0, config)


def noisy_qpsk(n=8192, snr_db=20.0, seed=5):
    """Shaped QPSK carrier plus calibrated noise; generic complex test input."""
    rng = np.random.default_rng(seed)
    spec = qpsk_spec()
    sig = waveform.synthesize_instance(spec, n, rng)
    from rfembed import impair

    return impair.apply_awgn(sig.samples, snr_db, spec.bandwidth_fraction, rng)
