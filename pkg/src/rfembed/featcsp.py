"""Cyclostationary features: spectral correlation estimation and PCA.

The frequency-smoothing estimator computes, per 2^14-sample segment, the
cyclic periodogram X(f + a/2) conj(X(f - a/2)) / N over a fine grid of
cyclic frequencies, smooths each slice with a length-256 moving average
over spectral frequency, and reduces to a 64 x 50 magnitude matrix whose
columns cover a in {0.00, 0.01, ..., 0.49}. Each coarse column takes the
elementwise maximum over the fine slices inside its 0.01-wide band, so
cyclic features that fall between column centers (a symbol rate of 0.125,
say) are retained instead of lost to rounding. Columns are normalized by
the a=0 total so the output is scale invariant.

PCA over collections of flattened matrices reduces them to compact
vectors; components carry a fixed sign convention for reproducibility.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

SCF_FFT_SIZE = 16384
SCF_SMOOTH_LEN = 256
SCF_FREQ_BINS = 64
SCF_ALPHA_BINS = 50
SCF_ALPHA_STEP = 0.01
SCF_MIN_INPUT = 1024


def _fine_shift_bands(n_fft: int):
    """Half-open ranges [s_lo, s_hi) of fine shifts s for each column.

    A fine shift s corresponds to cyclic frequency a = 2 s / n_fft; column
    k spans a in [k*step - step/2, k*step + step/2), clamped at zero.
    """
    bands = []
    for k in range(SCF_ALPHA_BINS):
        a_lo = max(0.0, k * SCF_ALPHA_STEP - SCF_ALPHA_STEP / 2)
        a_hi = k * SCF_ALPHA_STEP + SCF_ALPHA_STEP / 2
        s_lo = int(round(a_lo * n_fft / 2))
        s_hi = int(round(a_hi * n_fft / 2))
        bands.append((s_lo, max(s_hi, s_lo + 1)))
    return bands


def _segment_scf(segment: np.ndarray) -> np.ndarray:
    n = SCF_FFT_SIZE
    spectrum = np.fft.fftshift(np.fft.fft(segment, n))
    bands = _fine_shift_bands(n)
    s_max = bands[-1][1]

    # Smoothed magnitude of every fine slice; slice s lives at
    # product[i] = X[i+s] conj(X[i-s]) / n, nonzero for i in [s, n-s).
    fine = np.zeros((SCF_FREQ_BINS, s_max))
    row = np.zeros(n, dtype=np.complex128)
    for s in range(s_max):
        row[:] = 0.0
        if 2 * s < n:
            row[s:n - s] = spectrum[2 * s:] * np.conj(spectrum[:n - 2 * s])
        blocks = row.reshape(SCF_FREQ_BINS, SCF_SMOOTH_LEN).mean(axis=1)
        fine[:, s] = np.abs(blocks) / n

    out = np.empty((SCF_FREQ_BINS, SCF_ALPHA_BINS))
    for k, (s_lo, s_hi) in enumerate(bands):
        out[:, k] = fine[:, s_lo:s_hi].max(axis=1)
    return out


def estimate_scf_fsm(signal) -> np.ndarray:
    """Spectral correlation magnitude, 64 frequency x 50 cyclic bins.

    Inputs longer than one FFT are split into non-overlapping 2^14
    segments and the per-segment matrices averaged; a remainder of at
    least 1024 samples is zero-padded into a final segment.
    """
    x = np.asarray(signal, dtype=np.complex128)
    if x.ndim != 1:
        raise ValidationError(f"expected a 1-D signal, got shape {x.shape}")
    if len(x) < SCF_MIN_INPUT:
        raise ValidationError(
            f"need at least {SCF_MIN_INPUT} samples, got {len(x)}")
    if not np.all(np.isfinite(x.view(np.float64))):
        raise ValidationError("signal contains non-finite samples")

    n = SCF_FFT_SIZE
    starts = list(range(0, max(len(x) - n, 0) + 1, n))
    acc = np.zeros((SCF_FREQ_BINS, SCF_ALPHA_BINS))
    count = 0
    for start in starts:
        acc += _segment_scf(x[start:start + n])
        count += 1
    remainder = len(x) - len(starts) * n
    if remainder >= SCF_MIN_INPUT or count == 0:
        tail = x[len(starts) * n:]
        acc += _segment_scf(tail)
        count += 1
    acc /= count

    total = acc[:, 0].sum()
    if total > 0.0:
        acc /= total
    return acc


@dataclass(frozen=True)
class PcaModel:
    """Linear projection fitted to a collection of flattened matrices."""

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray

    def __post_init__(self):
        if self.components.ndim != 2:
            raise ValidationError("components must be a 2-D array")
        if self.mean.shape != (self.components.shape[1],):
            raise ValidationError("mean length must match component width")
        if len(self.explained_variance) != len(self.components):
            raise ValidationError("one variance per component required")


def pca_fit(matrices, k: int = 128) -> PcaModel:
    """Fits a k-component PCA to flattened (row-major) matrices."""
    data = np.stack([np.asarray(m, dtype=np.float64).ravel() for m in matrices])
    n, dim = data.shape
    if n < 2:
        raise ValidationError(f"need at least 2 matrices, got {n}")
    if not 1 <= k <= min(n - 1, dim):
        raise ValidationError(
            f"k={k} out of range for {n} matrices of dimension {dim}")

    mean = data.mean(axis=0)
    centered = data - mean
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    components = vt[:k].copy()
    for row in components:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0.0:
            row *= -1.0
    variance = (svals[:k] ** 2) / (n - 1)
    return PcaModel(mean=mean, components=components,
                    explained_variance=variance)


def pca_project(model: PcaModel, matrix) -> np.ndarray:
    flat = np.asarray(matrix, dtype=np.float64).ravel()
    if flat.shape != model.mean.shape:
        raise ValidationError(
            f"matrix size {flat.shape[0]} does not match model "
            f"dimension {model.mean.shape[0]}")
    return model.components @ (flat - model.mean)
