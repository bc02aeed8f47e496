"""Baseband waveform synthesis for sampled protocol specifications.

Turns frame bit streams into complex baseband sample streams: constellation
mapping with Gray labeling, root-raised-cosine pulse shaping, per-family
modulators (linear single carrier, MFSK, OFDM, FDM, CSS, DSSS), a windowed
sinc polyphase resampler, and synthesize_instance which assembles frames,
resamples to the protocol's occupied-bandwidth fraction, and normalizes
power. All frequencies are in cycles/sample unless a rate is passed in.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from math import ceil, gcd, log2

import numpy as np
from scipy import signal as sig

from .errors import ConfigError, UnsupportedModulationError, ValidationError
from .protogen import (CssMod, DsssMod, FdmMod, LinearMod, MfskMod, OfdmMod, SyncKind,
                       TransmissionMode, bits_per_symbol, frame_bits, samples_per_symbol)

logger = logging.getLogger(__name__)

RRC_SPAN_SYMBOLS = 12  # pulse-shaping filter length in symbol periods
RESAMPLER_TAPS_PER_PHASE = 64
RESAMPLER_KAISER_BETA = 8.0


@dataclass
class ComplexSignal:
    """A finite complex baseband record with an informational sample rate in Hz."""

    samples: np.ndarray
    sample_rate: float = 1.0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.complex128)
        if self.samples.ndim != 1:
            raise ValidationError(f"signal must be 1-D, got shape {self.samples.shape}")
        if not np.isfinite(self.samples).all():
            raise ValidationError("signal contains non-finite samples")
        if self.sample_rate <= 0:
            raise ValidationError(f"sample rate must be positive, got {self.sample_rate}")

    def __len__(self):
        return len(self.samples)


def _gray(n):
    return n ^ (n >> 1)


def constellation(family, order):
    """Unit-mean-power constellation, indexed by bit-group value.

    ask/psk/qam use Gray labeling (adjacent points differ in one bit); apsk
    uses sequential ring labeling since no Gray-consistent layout exists.
    """
    if family in ("psk", "ask") and (order < 2 or order & (order - 1)):
        raise UnsupportedModulationError(
            f"{family} order must be a power of two >= 2, got {order}")
    if family == "psk":
        pts = np.empty(order, dtype=complex)
        for k in range(order):
            pts[_gray(k)] = np.exp(2j * np.pi * k / order)
        return pts
    if family == "ask":
        # descending levels so order 2 matches the canonical 0 -> +1 mapping
        pts = np.empty(order, dtype=complex)
        for k in range(order):
            pts[_gray(k)] = (order - 1) - 2 * k
        return pts / np.sqrt(np.mean(np.abs(pts) ** 2))
    if family == "qam":
        side = round(order ** 0.5)
        if side * side != order:
            raise ConfigError(f"qam order must be square, got {order}")
        half = int(log2(side))
        levels = 2 * np.arange(side) - (side - 1)
        pts = np.empty(order, dtype=complex)
        for ki in range(side):
            for kq in range(side):
                label = (_gray(ki) << half) | _gray(kq)
                pts[label] = levels[ki] + 1j * levels[kq]
        return pts / np.sqrt(np.mean(np.abs(pts) ** 2))
    if family == "apsk":
        if order == 16:
            rings = ((1.0, 4, np.pi / 4), (2.2, 12, np.pi / 12))
        elif order == 32:
            rings = ((1.0, 4, np.pi / 4), (2.2, 12, np.pi / 12), (3.5, 16, 0.0))
        else:
            raise ConfigError(f"apsk order must be 16 or 32, got {order}")
        pts = []
        for radius, count, offset in rings:
            ang = offset + 2 * np.pi * np.arange(count) / count
            pts.append(radius * np.exp(1j * ang))
        pts = np.concatenate(pts)
        return pts / np.sqrt(np.mean(np.abs(pts) ** 2))
    raise UnsupportedModulationError(f"unknown constellation family {family!r}")


def map_symbols(bits, points, rng=None):
    """Map a bit stream onto constellation points, MSB first within each group.

    The stream length must divide by log2(len(points)); a remainder is padded
    with random bits when rng is given and rejected otherwise.
    """
    bits = np.asarray(bits)
    k = int(log2(len(points)))
    if len(bits) % k:
        if rng is None:
            raise ValidationError(f"bit stream length {len(bits)} not divisible by {k}")
        pad = rng.integers(0, 2, size=k - len(bits) % k, dtype=np.uint8)
        bits = np.concatenate([bits, pad])
    groups = bits.reshape(-1, k)
    idx = groups @ (1 << np.arange(k - 1, -1, -1))
    return points[idx]


def demap_nearest(symbols, points):
    """Inverse of map_symbols by nearest constellation point; returns the bit stream."""
    idx = np.argmin(np.abs(symbols[:, None] - points[None, :]), axis=1)
    k = int(log2(len(points)))
    shifts = np.arange(k - 1, -1, -1)
    return ((idx[:, None] >> shifts) & 1).astype(np.uint8).reshape(-1)


def rrc_taps(sps, rolloff, span=RRC_SPAN_SYMBOLS):
    """Root-raised-cosine filter, span symbol periods, unit energy."""
    if not 0.0 < rolloff <= 1.0:
        raise ConfigError(f"roll-off out of range: {rolloff}")
    n = np.arange(-span * sps // 2, span * sps // 2 + 1)
    t = n / sps
    h = np.empty(len(t))
    for i, ti in enumerate(t):
        if abs(ti) < 1e-12:
            h[i] = 1.0 - rolloff + 4.0 * rolloff / np.pi
        elif abs(abs(4.0 * rolloff * ti) - 1.0) < 1e-9:
            h[i] = (rolloff / np.sqrt(2)) * (
                (1 + 2 / np.pi) * np.sin(np.pi / (4 * rolloff))
                + (1 - 2 / np.pi) * np.cos(np.pi / (4 * rolloff)))
        else:
            h[i] = (np.sin(np.pi * ti * (1 - rolloff))
                    + 4 * rolloff * ti * np.cos(np.pi * ti * (1 + rolloff))) / (
                np.pi * ti * (1 - (4 * rolloff * ti) ** 2))
    return h / np.sqrt(np.sum(h ** 2))


def barker_code(length):
    codes = {
        7: (1, 1, 1, -1, -1, 1, -1),
        11: (1, 1, 1, -1, -1, -1, 1, -1, -1, 1, -1),
        13: (1, 1, 1, 1, 1, -1, -1, 1, 1, -1, 1, -1, 1),
    }
    if length not in codes:
        raise ConfigError(f"no Barker code of length {length}")
    return np.array(codes[length], dtype=float)


def pn_code(poly, length):
    """Maximal-length LFSR chip sequence (+1/-1), all-ones initial state."""
    degree = poly.bit_length() - 1
    if length != (1 << degree) - 1:
        raise ConfigError(f"pn length {length} does not match polynomial degree {degree}")
    taps = [i for i in range(degree) if (poly >> i) & 1]
    state = (1 << degree) - 1
    out = np.empty(length)
    for n in range(length):
        bit = state & 1
        out[n] = 1.0 - 2.0 * bit
        fb = 0
        for t in taps:
            fb ^= (state >> t) & 1
        state = (state >> 1) | (fb << (degree - 1))
    return out


def zadoff_chu(root, length):
    """Odd-length Zadoff-Chu sequence, constant amplitude."""
    if length % 2 == 0:
        raise ConfigError("Zadoff-Chu length must be odd here")
    n = np.arange(length)
    return np.exp(-1j * np.pi * root * n * (n + 1) / length)


def generation_bandwidth(spec):
    """Two-sided occupied bandwidth at generation rate, cycles/sample."""
    mod = spec.modulation
    if isinstance(mod, LinearMod):
        w = (1.0 + spec.rolloff) / spec.sps
    elif isinstance(mod, MfskMod):
        w = (mod.order - 1) * mod.tone_spacing + 2.0 / spec.sps
    elif isinstance(mod, OfdmMod):
        w = 1.0
    elif isinstance(mod, FdmMod):
        if mod.sub_family == "fsk2":
            w_sub = 3.0 / spec.sps
        else:
            w_sub = (1.0 + spec.rolloff) / spec.sps
        w = (mod.n_subchannels - 1) * mod.spacing + w_sub
    elif isinstance(mod, CssMod):
        w = mod.chirp_bandwidth
    elif isinstance(mod, DsssMod):
        w = (1.0 + spec.rolloff) / spec.sps
    else:
        raise UnsupportedModulationError(f"unknown modulation {type(mod).__name__}")
    return min(w, 1.0)


def resample_ratio(spec, tolerance=0.02, max_denominator=512):
    """Rational (up, down) mapping generation rate to the target rate.

    Chosen so the realized occupied-bandwidth fraction lands within the given
    relative tolerance of spec.bandwidth_fraction.
    """
    w = generation_bandwidth(spec)
    target = w / spec.bandwidth_fraction
    for limit in (8, 16, 32, 64, 128, 256, max_denominator):
        frac = Fraction(target).limit_denominator(limit)
        if frac.numerator == 0:
            continue
        realized = w / (frac.numerator / frac.denominator)
        if abs(realized - spec.bandwidth_fraction) / spec.bandwidth_fraction <= tolerance:
            return frac.numerator, frac.denominator
    raise ConfigError(f"cannot approximate resampling ratio {target} within {tolerance}")


def resample(x, up, down):
    """Polyphase rational resampler: windowed-sinc prototype, Kaiser window.

    64 taps per polyphase branch, beta 8 (stopband under -60 dB). The output
    is group-delay compensated and has floor(len(x) * up / down) samples.
    """
    if up < 1 or down < 1:
        raise ConfigError(f"resampling ratio must be positive, got {up}/{down}")
    x = np.asarray(x)
    g = gcd(up, down)
    up //= g
    down //= g
    if up == down:
        return x.astype(np.complex128, copy=True)
    ntaps = RESAMPLER_TAPS_PER_PHASE * up + 1
    cutoff = 0.5 * min(1.0, up / down)  # in input-rate units
    h = sig.firwin(ntaps, cutoff, window=("kaiser", RESAMPLER_KAISER_BETA), fs=float(up)) * up
    delay = (ntaps - 1) // 2
    n_out = (len(x) * up) // down
    if n_out < 1:
        raise ValidationError(
            f"resampling {len(x)} samples by {up}/{down} produces empty output")
    # prepend z input zeros so the group delay falls on an output sample
    z = (-delay * pow(up, -1, down)) % down if down > 1 else 0
    skip = (delay + z * up) // down
    tail = ceil(ntaps / up) + down
    xp = np.concatenate([np.zeros(z, dtype=x.dtype), x, np.zeros(tail, dtype=x.dtype)])
    y = sig.upfirdn(h, xp, up, down)
    if len(y) < skip + n_out:
        raise RuntimeError("resampler produced too few samples")
    return y[skip:skip + n_out]


def _shape_linear(symbols, sps, rolloff, keep_tails):
    """Upsample and root-raised-cosine filter a symbol sequence."""
    h = rrc_taps(sps, rolloff)
    upsampled = np.zeros(len(symbols) * sps, dtype=complex)
    upsampled[::sps] = symbols
    full = np.convolve(upsampled, h)
    if keep_tails:
        return full
    delay = (len(h) - 1) // 2
    return full[delay:delay + len(symbols) * sps]


def _modulate_mfsk(mod, sps, bits, rng):
    pts = np.empty(mod.order, dtype=int)
    for p in range(mod.order):
        pts[_gray(p)] = p  # Gray labeling of the tone ladder
    idx = map_symbols(bits, np.arange(mod.order), rng=rng).astype(int)
    tone = pts[idx]
    freqs = (tone - (mod.order - 1) / 2.0) * mod.tone_spacing
    inst = np.repeat(freqs, sps)
    phase = 2.0 * np.pi * np.cumsum(inst)
    return np.exp(1j * (phase - phase[0]))


def _modulate_ofdm(mod, frame, bits, rng):
    """One or more whole OFDM symbols; the first frame symbols realize the sync kind."""
    n, cp = mod.n_carriers, mod.cp_len
    bps = bits_per_symbol(mod)
    bits = np.asarray(bits)
    if len(bits) % bps:
        bits = np.concatenate([bits, rng.integers(0, 2, size=bps - len(bits) % bps, dtype=np.uint8)])
    points = constellation(mod.carrier_family, mod.carrier_order)
    syms = map_symbols(bits, points).reshape(-1, n)
    sync = frame.sync if frame is not None else None
    if sync is not None and sync.kind is SyncKind.ZADOFF_CHU:
        n_sync = ceil(sync.n_bits / bps)
        zc = zadoff_chu(sync.zc_root, sync.zc_length)
        for s in range(min(n_sync, len(syms))):
            syms[s, :] = 0
            syms[s, :sync.zc_length] = zc
    elif sync is not None and sync.kind is SyncKind.PARTIAL_CARRIERS:
        n_sync = ceil(sync.n_bits / bps)
        mask = np.ones(n, dtype=bool)
        mask[list(sync.active_carriers)] = False
        for s in range(min(n_sync, len(syms))):
            syms[s, mask] = 0
    time = np.fft.ifft(syms, axis=1) * np.sqrt(n)
    with_cp = np.concatenate([time[:, n - cp:], time], axis=1)
    return with_cp.reshape(-1)


def _modulate_fdm(mod, sps, rolloff, bits, rng, keep_tails):
    """Parallel subchannels on a shared symbol clock, mixed to spaced centers."""
    k = int(log2(mod.sub_order))
    group = mod.n_subchannels * k
    bits = np.asarray(bits)
    if len(bits) % group:
        bits = np.concatenate([bits, rng.integers(0, 2, size=group - len(bits) % group, dtype=np.uint8)])
    per_channel = bits.reshape(-1, mod.n_subchannels, k)
    out = None
    for c in range(mod.n_subchannels):
        ch_bits = per_channel[:, c, :].reshape(-1)
        if mod.sub_family == "fsk2":
            spacing = 1.0 / sps
            tone = ch_bits.astype(float) - 0.5
            inst = np.repeat(tone * spacing, sps)
            base = np.exp(2j * np.pi * np.cumsum(inst))
        else:
            points = constellation(mod.sub_family, mod.sub_order)
            base = _shape_linear(map_symbols(ch_bits, points), sps, rolloff, keep_tails)
        f_c = (c - (mod.n_subchannels - 1) / 2.0) * mod.spacing
        mix = np.exp(2j * np.pi * f_c * np.arange(len(base)))
        out = base * mix if out is None else out + base * mix
    return out


def _modulate_css(mod, sps, bits, rng):
    """Cyclic-shift keyed chirps, phase continuous across symbols."""
    n_chips = 1 << mod.spreading_factor
    seg = n_chips * sps
    w = mod.chirp_bandwidth
    vals = map_symbols(bits, np.arange(n_chips), rng=rng).astype(int)
    n = np.arange(seg)
    inst = np.empty(len(vals) * seg)
    for i, v in enumerate(vals):
        shifted = (v * sps + n) % seg
        inst[i * seg:(i + 1) * seg] = -w / 2.0 + w * shifted / seg
    phase = 2.0 * np.pi * np.cumsum(inst)
    return np.exp(1j * (phase - phase[0]))


def css_dechirp(segment, spreading_factor, sps, bandwidth):
    """Dechirp one CSS symbol and fold to chip rate; returns FFT magnitudes.

    A clean symbol concentrates in the single bin of its cyclic shift.
    """
    n_chips = 1 << spreading_factor
    seg = n_chips * sps
    if len(segment) != seg:
        raise ValidationError(f"expected one symbol of {seg} samples, got {len(segment)}")
    n = np.arange(seg)
    base_inst = -bandwidth / 2.0 + bandwidth * (n % seg) / seg
    base = np.exp(2j * np.pi * np.cumsum(base_inst))
    # decimate at offset sps-1: the shift wraparound lands on a chip boundary,
    # so these samples never straddle the frequency jump
    folded = (segment * np.conj(base))[sps - 1::sps]
    return np.abs(np.fft.fft(folded))


def spreading_code(mod):
    if mod.code_kind == "barker":
        return barker_code(mod.code_length)
    return pn_code(mod.pn_poly, mod.code_length)


def _modulate_dsss(mod, sps, rolloff, bits, rng, keep_tails):
    code = spreading_code(mod)
    points = constellation(mod.data_family, mod.data_order)
    data = map_symbols(bits, points, rng=rng)
    chips = (data[:, None] * code[None, :]).reshape(-1)
    return _shape_linear(chips, sps, rolloff, keep_tails)


def modulate(spec, bits, rng, keep_tails=False):
    """Generation-rate waveform for a bit stream of the given protocol.

    keep_tails keeps the full pulse-shaping transients (burst edges); the
    trimmed variant is aligned so symbol peaks land on multiples of sps.
    """
    mod = spec.modulation
    if isinstance(mod, LinearMod):
        points = constellation(mod.family, mod.order)
        return _shape_linear(map_symbols(bits, points, rng=rng), spec.sps, spec.rolloff, keep_tails)
    if isinstance(mod, MfskMod):
        return _modulate_mfsk(mod, spec.sps, bits, rng)
    if isinstance(mod, OfdmMod):
        return _modulate_ofdm(mod, spec.frame, bits, rng)
    if isinstance(mod, FdmMod):
        return _modulate_fdm(mod, spec.sps, spec.rolloff, bits, rng, keep_tails)
    if isinstance(mod, CssMod):
        return _modulate_css(mod, spec.sps, bits, rng)
    if isinstance(mod, DsssMod):
        return _modulate_dsss(mod, spec.sps, spec.rolloff, bits, rng, keep_tails)
    raise UnsupportedModulationError(f"unknown modulation {type(mod).__name__}")


def _synthesize_continuous(spec, n_samples, rng, up, down):
    needed_gen = ceil((n_samples + 2) * down / up) + samples_per_symbol(spec.modulation, spec.sps)
    chunks = []
    total_bits = 0
    per_bit = samples_per_symbol(spec.modulation, spec.sps) / bits_per_symbol(spec.modulation)
    while total_bits * per_bit < needed_gen:
        b = frame_bits(spec, rng)
        chunks.append(b)
        total_bits += len(b)
    stream = np.concatenate(chunks)
    gen = modulate(spec, stream, rng, keep_tails=False)
    out = resample(gen, up, down)
    while len(out) < n_samples:  # guard against rounding shortfalls
        extra = frame_bits(spec, rng)
        stream = np.concatenate([stream, extra])
        gen = modulate(spec, stream, rng, keep_tails=False)
        out = resample(gen, up, down)
    return out[:n_samples], np.ones(n_samples, dtype=bool)


def _synthesize_burst(spec, n_samples, rng, up, down):
    out = np.zeros(n_samples, dtype=complex)
    active = np.zeros(n_samples, dtype=bool)
    pos = 0
    lo, hi = spec.frame.pause_range
    while pos < n_samples:
        burst = resample(modulate(spec, frame_bits(spec, rng), rng, keep_tails=True), up, down)
        take = min(len(burst), n_samples - pos)
        out[pos:pos + take] = burst[:take]
        active[pos:pos + take] = True
        pos += take
        if pos >= n_samples:
            break
        pause_gen = int(rng.integers(lo, hi + 1))
        pos += max(1, (pause_gen * up) // down)
    return out, active


def synthesize_instance(spec, n_samples, rng, sample_rate=1.0, return_active=False):
    """Synthesize n_samples of a protocol instance at the target rate.

    Frames are generated and concatenated (burst mode: separated by exact-zero
    pauses), resampled so the occupied bandwidth is spec.bandwidth_fraction of
    the target rate, trimmed, and power normalized to 1 over the non-pause
    samples. return_active additionally yields the non-pause sample mask.
    """
    if n_samples < 1:
        raise ValidationError(f"n_samples must be positive, got {n_samples}")
    up, down = resample_ratio(spec)
    sym_out = samples_per_symbol(spec.modulation, spec.sps) * up / down
    if n_samples < sym_out:
        raise ValidationError(
            f"n_samples={n_samples} is shorter than one resampled symbol ({sym_out:.1f} samples)")
    if spec.mode is TransmissionMode.BURST:
        out, active = _synthesize_burst(spec, n_samples, rng, up, down)
    else:
        out, active = _synthesize_continuous(spec, n_samples, rng, up, down)
    power = np.mean(np.abs(out[active]) ** 2)
    if power <= 0:
        raise ValidationError("synthesized instance has zero power")
    out /= np.sqrt(power)
    result = ComplexSignal(out, sample_rate)
    return (result, active) if return_active else result
