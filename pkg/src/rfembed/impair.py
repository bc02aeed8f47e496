"""Channel impairments: phase/frequency offsets, tapped-delay-line fading, noise.

The chain runs in a fixed order: carrier phase rotation, carrier frequency
offset, multipath fading from a standardized tapped-delay-line profile
(block static, one realization per call), then additive white Gaussian noise
calibrated against the in-band SNR convention. estimate_inband_snr closes the
loop: noise power is referenced to the occupied bandwidth, not the full band.
"""

import json
import logging
from dataclasses import dataclass
from importlib import resources
from typing import Optional, Tuple

import numpy as np
from scipy import signal as sig

from .errors import ConfigError, ValidationError
from .waveform import ComplexSignal

logger = logging.getLogger(__name__)

TDL_MODELS = ("TDL-A", "TDL-B", "TDL-C", "TDL-D", "TDL-E")
DEFAULT_DELAY_SPREAD_S = 100e-9
_SNR_FLOOR_DB = float("-inf")  # sentinel when no occupied band is found


@dataclass(frozen=True)
class TdlTap:
    delay: float  # normalized; scaled by the delay spread
    power_db: float
    los: bool


@dataclass(frozen=True)
class TdlProfile:
    name: str
    kfactor_db: Optional[float]
    taps: Tuple[TdlTap, ...]


_PROFILE_CACHE = {}


def load_tdl_profile(name):
    """Tap table for one of the standardized delay-line models (data file)."""
    if name in _PROFILE_CACHE:
        return _PROFILE_CACHE[name]
    raw = json.loads(resources.files("rfembed.data").joinpath("tdl_profiles.json").read_text())
    if name not in raw:
        raise ConfigError(f"unknown channel model {name!r}; known: {sorted(raw)}")
    entry = raw[name]
    # the published tables are not monotone in delay; keep taps sorted here
    taps = tuple(sorted((TdlTap(t["delay"], t["power_db"], t["los"])
                         for t in entry["taps"]), key=lambda t: t.delay))
    profile = TdlProfile(name, entry["kfactor_db"], taps)
    _PROFILE_CACHE[name] = profile
    return profile


def apply_phase_cfo(samples, phase, cfo):
    """Rotate by a constant phase and a linear carrier frequency offset.

    cfo is in cycles/sample and must satisfy |cfo| < 0.5.
    """
    samples = np.asarray(samples)
    if not abs(cfo) < 0.5:
        raise ValidationError(f"cfo must satisfy |cfo| < 0.5 cycles/sample, got {cfo}")
    n = np.arange(len(samples))
    return samples * np.exp(1j * (2.0 * np.pi * cfo * n + phase))


def tdl_taps(profile, delay_spread_s, sample_rate, rng):
    """One block-static FIR realization of a delay-line profile.

    Tap powers are normalized to sum to one. Rayleigh taps draw a complex
    Gaussian gain; LOS taps keep a fixed magnitude with a uniform random
    phase. Taps whose delays round to the same sample accumulate.
    """
    if delay_spread_s < 0 or sample_rate <= 0:
        raise ConfigError("delay spread and sample rate must be positive")
    powers = np.array([10.0 ** (t.power_db / 10.0) for t in profile.taps])
    powers /= powers.sum()
    delays = np.array([int(round(t.delay * delay_spread_s * sample_rate)) for t in profile.taps])
    fir = np.zeros(int(delays.max()) + 1, dtype=complex)
    for tap, p, d in zip(profile.taps, powers, delays):
        if tap.los:
            gain = np.sqrt(p) * np.exp(2j * np.pi * rng.random())
        else:
            gain = np.sqrt(p / 2.0) * (rng.standard_normal() + 1j * rng.standard_normal())
        fir[d] += gain
    return fir


def apply_tdl(samples, profile, delay_spread_s, sample_rate, rng):
    """Convolve with one realization of the profile; output keeps the input length."""
    samples = np.asarray(samples)
    fir = tdl_taps(profile, delay_spread_s, sample_rate, rng)
    if len(fir) >= len(samples):
        raise ValidationError(
            f"channel spans {len(fir)} samples but the signal has only {len(samples)}")
    return np.convolve(samples, fir)[:len(samples)]


def apply_awgn(samples, snr_db, occupied_bandwidth, rng):
    """Add white noise sized for the requested in-band SNR.

    Noise is flat over the full band; only the slice falling inside the
    occupied bandwidth counts against the signal, so the total noise power is
    P_signal / (snr_linear * occupied_bandwidth).
    """
    samples = np.asarray(samples)
    if not 0.0 < occupied_bandwidth <= 1.0:
        raise ValidationError(f"occupied bandwidth must be in (0, 1], got {occupied_bandwidth}")
    if not np.isfinite(snr_db):
        raise ValidationError(f"snr must be finite, got {snr_db}")
    p_signal = np.mean(np.abs(samples) ** 2)
    if p_signal <= 0:
        raise ValidationError("cannot size noise for a zero-power signal")
    p_noise = p_signal / (10.0 ** (snr_db / 10.0) * occupied_bandwidth)
    noise = np.sqrt(p_noise / 2.0) * (rng.standard_normal(len(samples))
                                      + 1j * rng.standard_normal(len(samples)))
    return samples + noise


def _welch_psd(samples, nperseg=256):
    nperseg = min(nperseg, len(samples))
    _, psd = sig.welch(samples, fs=1.0, window="hann", nperseg=nperseg,
                       return_onesided=False, detrend=False)
    return psd


def estimate_inband_snr(samples, nperseg=256):
    """In-band SNR in dB from a Welch spectrum.

    The noise floor is the median of the lowest quartile of spectral bins;
    bins more than 6 dB above the floor count as occupied. Returns -inf when
    nothing rises above the floor (noise-only input).
    """
    samples = np.asarray(samples)
    if len(samples) < 1024:
        raise ValidationError(f"need at least 1024 samples, got {len(samples)}")
    psd = _welch_psd(samples, nperseg)
    lowest = np.sort(psd)[:max(1, len(psd) // 4)]
    floor = float(np.median(lowest))
    if floor <= 0:
        floor = max(float(psd[psd > 0].min()) if (psd > 0).any() else 1e-300, 1e-300)
    occupied = psd > floor * 10.0 ** 0.6
    if not occupied.any():
        return _SNR_FLOOR_DB
    inband = float(psd[occupied].sum())
    noise_inband = floor * occupied.sum()
    excess = inband - noise_inband
    if excess <= 0:
        return _SNR_FLOOR_DB
    return 10.0 * np.log10(excess / noise_inband)


def occupied_fraction(samples, nperseg=256):
    """Fraction of spectral bins more than 6 dB above the estimated noise floor."""
    psd = _welch_psd(np.asarray(samples), nperseg)
    lowest = np.sort(psd)[:max(1, len(psd) // 4)]
    floor = float(np.median(lowest))
    if floor <= 0:
        return float((psd > 0).mean())
    return float((psd > floor * 10.0 ** 0.6).mean())


@dataclass
class ImpairmentConfig:
    """Which impairments to apply and how to draw their parameters.

    phase/cfo: fixed values, or None to draw (phase uniform, cfo normal with
    sigma_rfo). channel: delay-line model name or None. snr_db: None skips
    the noise stage.
    """

    phase: Optional[float] = None
    cfo: Optional[float] = None
    sigma_rfo: float = 0.0
    channel: Optional[str] = None
    delay_spread_s: float = DEFAULT_DELAY_SPREAD_S
    snr_db: Optional[float] = None

    def draw_phase(self, rng):
        return 2.0 * np.pi * rng.random() if self.phase is None else self.phase

    def draw_cfo(self, rng):
        if self.cfo is not None:
            return self.cfo
        if self.sigma_rfo <= 0:
            return 0.0
        return float(np.clip(rng.normal(0.0, self.sigma_rfo), -0.49, 0.49))


def apply_impairments(signal, config, rng, occupied_bandwidth=None):
    """Run the full chain (phase, cfo, fading, noise) on a ComplexSignal."""
    x = signal.samples
    x = apply_phase_cfo(x, config.draw_phase(rng), config.draw_cfo(rng))
    if config.channel is not None:
        profile = load_tdl_profile(config.channel)
        x = apply_tdl(x, profile, config.delay_spread_s, signal.sample_rate, rng)
    if config.snr_db is not None and np.isfinite(config.snr_db):
        if occupied_bandwidth is None:
            occupied_bandwidth = occupied_fraction(x)
        x = apply_awgn(x, config.snr_db, occupied_bandwidth, rng)
    return ComplexSignal(x, signal.sample_rate)
