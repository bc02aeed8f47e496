"""Statistical modulation features.

A 26-dimensional descriptor per signal: nine instantaneous-statistics
features, ten higher-order moments, and seven cumulants derived from them.
Moments and cumulants of complex quantities are reported as magnitudes, so
the vector is phase-rotation invariant; internal unit-power normalization
makes it scale invariant. No cross-dataset normalization is applied: the
values are used raw.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError

FEATURE_NAMES = (
    "gamma_max",
    "sigma_ap",
    "sigma_dp",
    "P",
    "sigma_aa",
    "sigma_af",
    "sigma_a",
    "mu42_a",
    "mu42_f",
    "M20",
    "M21",
    "M22",
    "M40",
    "M41",
    "M42",
    "M43",
    "M60",
    "M62",
    "M63",
    "C20",
    "C21",
    "C40",
    "C41",
    "C42",
    "C60",
    "C63",
)

# (p, q) pairs of the frozen moment set, in report order.
MOMENT_ORDERS = (
    (2, 0), (2, 1), (2, 2),
    (4, 0), (4, 1), (4, 2), (4, 3),
    (6, 0), (6, 2), (6, 3),
)

_MIN_FEATURE_LEN = 256


def _as_complex(signal) -> np.ndarray:
    x = np.asarray(signal, dtype=np.complex128)
    if x.ndim != 1:
        raise ValidationError(f"expected a 1-D signal, got shape {x.shape}")
    if not np.all(np.isfinite(x.view(np.float64))):
        raise ValidationError("signal contains non-finite samples")
    return x


def instantaneous_components(signal):
    """Amplitude, nonlinear phase, and instantaneous frequency of a signal.

    The phase is the unwrapped angle with its least-squares linear trend
    removed, so a pure tone maps to (near) zero phase. Frequency is the
    first difference of the raw unwrapped phase in cycles per sample and
    is one sample shorter than the input.
    """
    x = _as_complex(signal)
    if len(x) < 3:
        raise ValidationError(f"need at least 3 samples, got {len(x)}")

    amplitude = np.abs(x)
    unwrapped = np.unwrap(np.angle(x))
    n = np.arange(len(x), dtype=np.float64)
    slope, intercept = np.polyfit(n, unwrapped, 1)
    phase_nl = unwrapped - (slope * n + intercept)
    frequency = np.diff(unwrapped) / (2.0 * np.pi)
    return amplitude, phase_nl, frequency


def _std(values: np.ndarray) -> float:
    if values.size == 0:
        return 0.0
    return float(np.std(values))


def _kurtosis(values: np.ndarray) -> float:
    # Non-excess convention (Gaussian -> 3); degenerate inputs -> 0.
    z = values - np.mean(values)
    m2 = np.mean(z * z)
    if m2 < 1e-20:
        return 0.0
    return float(np.mean(z ** 4) / (m2 * m2))


def nandi_azzouz(signal) -> np.ndarray:
    """The nine instantaneous-statistics features, in vector order."""
    x = _as_complex(signal)
    if len(x) < _MIN_FEATURE_LEN:
        raise ValidationError(f"need at least {_MIN_FEATURE_LEN} samples, got {len(x)}")
    power = np.mean(np.abs(x) ** 2)
    if power <= 0.0:
        raise ValidationError("zero-power signal")

    amplitude, phase_nl, frequency = instantaneous_components(x)
    n = len(x)

    mean_amp = np.mean(amplitude)
    a_cn = amplitude / mean_amp - 1.0
    gamma_max = float(np.max(np.abs(np.fft.fft(a_cn)) ** 2) / n)

    strong = amplitude / mean_amp > 1.0
    sigma_ap = _std(np.abs(phase_nl[strong]))
    sigma_dp = _std(phase_nl[strong])

    # Power asymmetry about zero frequency; the index-1..N/2-1 half of the
    # DFT is the positive-frequency side, DC and Nyquist excluded.
    spectrum = np.abs(np.fft.fft(x)) ** 2
    half = n // 2
    p_pos = float(np.sum(spectrum[1:half]))
    p_neg = float(np.sum(spectrum[half + 1:]))
    total = p_pos + p_neg
    p_asym = (p_pos - p_neg) / total if total > 0.0 else 0.0

    f_cn = frequency - np.mean(frequency)
    sigma_aa = _std(np.abs(a_cn))
    sigma_af = _std(np.abs(f_cn))
    sigma_a = _std(a_cn)
    mu42_a = _kurtosis(a_cn)
    mu42_f = _kurtosis(f_cn)

    return np.array([
        gamma_max, sigma_ap, sigma_dp, p_asym,
        sigma_aa, sigma_af, sigma_a, mu42_a, mu42_f,
    ])


def moments_cumulants(signal) -> np.ndarray:
    """Ten moment magnitudes followed by seven cumulant magnitudes.

    Moments are M_pq = E[x^(p-q) conj(x)^q] of the unit-power normalized
    signal; cumulants follow the fixed relations below with magnitudes
    reported, so both blocks are rotation invariant.
    """
    x = _as_complex(signal)
    if len(x) < _MIN_FEATURE_LEN:
        raise ValidationError(f"need at least {_MIN_FEATURE_LEN} samples, got {len(x)}")
    power = np.mean(np.abs(x) ** 2)
    if power <= 0.0:
        raise ValidationError("zero-power signal")
    x = x / np.sqrt(power)

    conj = np.conj(x)

    def moment(p: int, q: int) -> complex:
        return complex(np.mean(x ** (p - q) * conj ** q))

    m20 = moment(2, 0)
    m21 = moment(2, 1)
    m22 = moment(2, 2)
    m40 = moment(4, 0)
    m41 = moment(4, 1)
    m42 = moment(4, 2)
    m43 = moment(4, 3)
    m60 = moment(6, 0)
    m62 = moment(6, 2)
    m63 = moment(6, 3)

    c20 = m20
    c21 = m21
    c40 = m40 - 3.0 * m20 ** 2
    c41 = m41 - 3.0 * m20 * m21
    c42 = m42 - abs(m20) ** 2 - 2.0 * m21 ** 2
    c60 = m60 - 15.0 * m21 * m40 + 30.0 * m20 ** 3
    c63 = (m63 - 6.0 * m20 * m41 - 9.0 * m21 * m42
           + 18.0 * m20 ** 2 * m21 + 12.0 * m21 ** 3)

    values = [m20, m21, m22, m40, m41, m42, m43, m60, m62, m63,
              c20, c21, c40, c41, c42, c60, c63]
    return np.abs(np.array(values))


def mod_features(signal) -> np.ndarray:
    """The full 26-D feature vector, ordered as FEATURE_NAMES."""
    return np.concatenate([nandi_azzouz(signal), moments_cumulants(signal)])
