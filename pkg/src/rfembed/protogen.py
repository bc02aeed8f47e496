"""Random wireless-protocol specifications and frame bit generation.

A protocol is a frozen description of a transmitter: modulation scheme with
its parameters, transmission mode (continuous stream or bursts with pauses),
frame layout (sync word, header with per-protocol fixed bits, payload), and
rate parameters (samples per symbol, occupied bandwidth fraction, pulse
shaping roll-off). sample_protocol draws one deterministically from a master
seed and protocol id; frame_bits emits the bit stream for a single frame.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from math import gcd, log2
from typing import Optional, Tuple, Union

import numpy as np

from .errors import ConfigError, UnsupportedModulationError
from .seeds import PROTOCOL_STREAM, derive_seed

logger = logging.getLogger(__name__)


class TransmissionMode(Enum):
    CONTINUOUS = "continuous"
    BURST = "burst"


class SyncKind(Enum):
    ALL_ZERO = "all_zero"
    ALL_ONE = "all_one"
    ALTERNATING = "alternating"
    REPEATED_PATTERN = "repeated_pattern"
    # OFDM-only kinds: realized on the carrier grid, not as a bit pattern
    ZADOFF_CHU = "zadoff_chu"
    PARTIAL_CARRIERS = "partial_carriers"


def _is_pow2(n):
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class SyncSpec:
    """One synchronization field: kind plus its length in bits.

    REPEATED_PATTERN carries the base pattern and repetition count.
    ZADOFF_CHU carries the sequence root and length (applied across OFDM
    carriers, one full symbol). PARTIAL_CARRIERS carries the set of carriers
    active during the sync symbol; the remaining carriers transmit zero.
    """

    kind: SyncKind
    n_bits: int
    pattern: Tuple[int, ...] = ()
    repetitions: int = 0
    zc_root: int = 0
    zc_length: int = 0
    active_carriers: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.n_bits < 1:
            raise ConfigError(f"sync length must be positive, got {self.n_bits}")
        if self.kind is SyncKind.REPEATED_PATTERN:
            if not self.pattern or self.repetitions < 1:
                raise ConfigError("repeated-pattern sync needs a pattern and repetitions")
        if self.kind is SyncKind.ZADOFF_CHU:
            if self.zc_length < 3 or gcd(self.zc_root, self.zc_length) != 1:
                raise ConfigError("Zadoff-Chu root must be coprime with the sequence length")


@dataclass(frozen=True)
class LinearMod:
    """Single-carrier linear modulation: ask, psk, apsk, or qam."""

    family: str
    order: int

    def __post_init__(self):
        if self.family not in ("ask", "psk", "apsk", "qam"):
            raise UnsupportedModulationError(f"unknown linear family {self.family!r}")
        if self.family in ("ask", "psk") and not (_is_pow2(self.order) and self.order >= 2):
            raise ConfigError(f"{self.family} order must be a power of two >= 2, got {self.order}")
        if self.family == "apsk" and self.order not in (16, 32):
            raise ConfigError(f"apsk order must be 16 or 32, got {self.order}")
        if self.family == "qam":
            root = round(self.order ** 0.5)
            if root * root != self.order or not _is_pow2(root) or root < 2:
                raise ConfigError(f"qam order must be a square power of two, got {self.order}")


@dataclass(frozen=True)
class MfskMod:
    """M-ary FSK with phase-continuous tone switching."""

    order: int
    tone_spacing: float  # cycles/sample at generation rate

    def __post_init__(self):
        if not (_is_pow2(self.order) and self.order >= 2):
            raise ConfigError(f"mfsk order must be a power of two >= 2, got {self.order}")
        if not 0.0 < self.tone_spacing < 1.0:
            raise ConfigError(f"tone spacing out of range: {self.tone_spacing}")


@dataclass(frozen=True)
class OfdmMod:
    """OFDM with cyclic prefix; every carrier loaded from one constellation."""

    n_carriers: int
    cp_len: int
    carrier_family: str
    carrier_order: int

    def __post_init__(self):
        if not (_is_pow2(self.n_carriers) and self.n_carriers >= 8):
            raise ConfigError(f"carrier count must be a power of two >= 8, got {self.n_carriers}")
        if not 0 < self.cp_len < self.n_carriers:
            raise ConfigError(f"cyclic prefix length out of range: {self.cp_len}")
        LinearMod(self.carrier_family, self.carrier_order)  # reuse its validation


@dataclass(frozen=True)
class FdmMod:
    """Several narrowband subchannels on a shared symbol clock."""

    n_subchannels: int
    sub_family: str  # "psk", "qam", or "fsk2"
    sub_order: int
    spacing: float  # center-to-center, cycles/sample at generation rate

    def __post_init__(self):
        if self.n_subchannels < 2:
            raise ConfigError(f"need at least 2 subchannels, got {self.n_subchannels}")
        if self.sub_family == "fsk2":
            if self.sub_order != 2:
                raise ConfigError("fsk2 subchannels are binary")
        else:
            LinearMod(self.sub_family, self.sub_order)
        if not 0.0 < self.spacing < 1.0:
            raise ConfigError(f"subchannel spacing out of range: {self.spacing}")


@dataclass(frozen=True)
class CssMod:
    """Chirp spread spectrum: cyclically shifted chirps, LoRa style."""

    spreading_factor: int  # bits per symbol, 2**sf chips per symbol
    chirp_bandwidth: float  # cycles/sample at generation rate

    def __post_init__(self):
        if not 2 <= self.spreading_factor <= 12:
            raise ConfigError(f"spreading factor out of range: {self.spreading_factor}")
        if not 0.0 < self.chirp_bandwidth <= 1.0:
            raise ConfigError(f"chirp bandwidth out of range: {self.chirp_bandwidth}")


@dataclass(frozen=True)
class DsssMod:
    """Direct-sequence spreading with a Barker or PN code over a linear constellation."""

    code_kind: str  # "barker" | "pn"
    code_length: int
    pn_poly: int = 0  # LFSR feedback polynomial bitmask (pn codes only)
    data_family: str = "psk"
    data_order: int = 2

    def __post_init__(self):
        if self.code_kind == "barker":
            if self.code_length not in (7, 11, 13):
                raise ConfigError(f"no Barker code of length {self.code_length}")
        elif self.code_kind == "pn":
            if not _is_pow2(self.code_length + 1) or self.code_length < 7:
                raise ConfigError(f"pn code length must be 2**k - 1 >= 7, got {self.code_length}")
            if self.pn_poly <= 0:
                raise ConfigError("pn code needs a feedback polynomial")
        else:
            raise UnsupportedModulationError(f"unknown spreading code kind {self.code_kind!r}")
        LinearMod(self.data_family, self.data_order)


ModulationScheme = Union[LinearMod, MfskMod, OfdmMod, FdmMod, CssMod, DsssMod]


@dataclass(frozen=True)
class ExtraSync:
    """Additional sync field inside a burst frame, inserted offset_bits into the payload."""

    sync: SyncSpec
    offset_bits: int


@dataclass(frozen=True)
class FrameSpec:
    """Frame layout: sync word, header with fixed bit mask, payload, optional extras.

    header_fixed_positions/values pin a per-protocol subset of header bits;
    the remaining header bits and the payload are random per frame. Burst
    frames draw their payload length from payload_range_bits and may carry a
    mid-frame and/or end-of-frame sync; pause_range bounds the silent gap
    between bursts in generation-rate samples.
    """

    sync: SyncSpec
    header_len_bits: int
    header_fixed_positions: Tuple[int, ...]
    header_fixed_values: Tuple[int, ...]
    payload_len_bits: int
    payload_range_bits: Optional[Tuple[int, int]] = None
    mid_sync: Optional[ExtraSync] = None
    end_sync: Optional[SyncSpec] = None
    pause_range: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        if self.header_len_bits < 0 or self.payload_len_bits < 1:
            raise ConfigError("frame field lengths must be positive")
        if len(self.header_fixed_positions) != len(self.header_fixed_values):
            raise ConfigError("fixed header positions and values differ in length")
        if any(not 0 <= p < self.header_len_bits for p in self.header_fixed_positions):
            raise ConfigError("fixed header position outside the header")
        if any(v not in (0, 1) for v in self.header_fixed_values):
            raise ConfigError("fixed header values must be bits")
        if self.payload_range_bits is not None:
            lo, hi = self.payload_range_bits
            if not 1 <= lo <= hi:
                raise ConfigError(f"bad payload range {self.payload_range_bits}")
        if self.mid_sync is not None and self.payload_range_bits is not None:
            if not 0 <= self.mid_sync.offset_bits <= self.payload_range_bits[0]:
                raise ConfigError("mid-frame sync offset beyond the shortest payload")
        if self.pause_range is not None:
            lo, hi = self.pause_range
            if not 1 <= lo <= hi:
                raise ConfigError(f"bad pause range {self.pause_range}")


@dataclass(frozen=True)
class ProtocolSpec:
    """Complete transmitter description; deterministic in (master seed, protocol id, config)."""

    protocol_id: int
    modulation: ModulationScheme
    mode: TransmissionMode
    frame: FrameSpec
    sps: int  # samples per symbol (per chip for css/dsss) at generation rate
    bandwidth_fraction: float
    rolloff: Optional[float]
    seed: int

    def __post_init__(self):
        if self.sps < 1:
            raise ConfigError(f"samples per symbol must be >= 1, got {self.sps}")
        if not 0.0 < self.bandwidth_fraction < 1.0:
            raise ConfigError(f"bandwidth fraction out of range: {self.bandwidth_fraction}")
        if self.rolloff is not None and not 0.05 <= self.rolloff <= 1.0:
            raise ConfigError(f"roll-off out of range: {self.rolloff}")


# primitive LFSR feedback polynomials (bitmask includes the x**degree term)
PN_POLYNOMIALS = {
    3: (0b1011,),
    4: (0b10011,),
    5: (0b100101, 0b111101),
    6: (0b1000011,),
    7: (0b10001001, 0b10000011),
}


@dataclass(frozen=True)
class GeneratorConfig:
    """Sampling ranges for random protocols. Every field is a config-file key."""

    families: Tuple[str, ...] = ("linear", "mfsk", "ofdm", "fdm", "css", "dsss")
    modes: Tuple[str, ...] = ("continuous", "burst")

    linear_families: Tuple[str, ...] = ("ask", "psk", "apsk", "qam")
    ask_orders: Tuple[int, ...] = (2, 4, 8)
    psk_orders: Tuple[int, ...] = (2, 4, 8, 16, 32)
    apsk_orders: Tuple[int, ...] = (16, 32)
    qam_orders: Tuple[int, ...] = (4, 16, 64, 256)
    linear_sps: Tuple[int, ...] = (2, 4, 8, 16)

    mfsk_orders: Tuple[int, ...] = (2, 4, 8, 16)
    mfsk_sps: Tuple[int, ...] = (8, 16)
    mfsk_tone_span: Tuple[float, float] = (0.3, 0.65)  # full ladder span, cycles/sample

    ofdm_carrier_counts: Tuple[int, ...] = (16, 32, 64, 128)
    ofdm_cp_fractions: Tuple[float, ...] = (0.0625, 0.125, 0.25)
    ofdm_psk_orders: Tuple[int, ...] = (2, 4, 8)
    ofdm_qam_orders: Tuple[int, ...] = (4, 16, 64)

    fdm_subchannel_range: Tuple[int, int] = (2, 8)
    fdm_sub_families: Tuple[str, ...] = ("psk", "qam", "fsk2")
    fdm_psk_orders: Tuple[int, ...] = (2, 4)
    fdm_qam_orders: Tuple[int, ...] = (4, 16)
    fdm_sps: Tuple[int, ...] = (4, 8)
    fdm_spacing_factor: Tuple[float, float] = (1.1, 1.6)  # x subchannel bandwidth

    css_spreading_factors: Tuple[int, ...] = (5, 6, 7)
    css_chip_sps: Tuple[int, ...] = (2, 4, 8)  # chirp bandwidth = 1/sps

    dsss_code_kinds: Tuple[str, ...] = ("barker", "pn")
    dsss_barker_lengths: Tuple[int, ...] = (7, 11, 13)
    dsss_pn_degrees: Tuple[int, ...] = (3, 4, 5, 6, 7)
    dsss_data_families: Tuple[str, ...] = ("psk", "qam")
    dsss_psk_orders: Tuple[int, ...] = (2, 4)
    dsss_qam_orders: Tuple[int, ...] = (4, 16)
    dsss_sps: Tuple[int, ...] = (2, 4)

    sync_kinds: Tuple[str, ...] = ("all_zero", "all_one", "alternating", "repeated_pattern")
    ofdm_sync_kinds: Tuple[str, ...] = ("all_zero", "all_one", "alternating", "repeated_pattern",
                                        "zadoff_chu", "partial_carriers")
    sync_lengths: Tuple[int, ...] = (8, 16, 32, 64)
    repeated_pattern_lengths: Tuple[int, ...] = (4, 8)
    repeated_pattern_reps: Tuple[int, ...] = (2, 3, 4)

    header_lengths: Tuple[int, ...] = (16, 24, 32, 48)
    header_fixed_prob: float = 0.5

    payload_bits_range: Tuple[int, int] = (64, 512)  # continuous mode, fixed per protocol
    burst_payload_min_range: Tuple[int, int] = (32, 256)
    burst_payload_span_range: Tuple[int, int] = (32, 256)
    extra_sync_prob: float = 0.5
    extra_sync_lengths: Tuple[int, ...] = (8, 16)
    pause_frame_factors: Tuple[float, float] = (0.25, 4.0)  # x nominal frame duration

    bandwidth_fraction_range: Tuple[float, float] = (0.05, 0.95)
    rolloff_range: Tuple[float, float] = (0.1, 0.9)
    max_generation_bandwidth: float = 0.95

    def __post_init__(self):
        if not self.families:
            raise ConfigError("at least one modulation family must be enabled")
        lo, hi = self.bandwidth_fraction_range
        if not 0.0 < lo <= hi < 1.0:
            raise ConfigError(f"bad bandwidth fraction range: {self.bandwidth_fraction_range}")
        lo, hi = self.rolloff_range
        if not 0.05 <= lo <= hi <= 1.0:
            raise ConfigError(f"bad roll-off range: {self.rolloff_range}")
        if not 0.0 <= self.header_fixed_prob <= 1.0:
            raise ConfigError(f"bad header fixed-bit probability: {self.header_fixed_prob}")


def bits_per_symbol(mod):
    """Bits consumed by one symbol (one OFDM symbol spans all carriers)."""
    if isinstance(mod, LinearMod):
        return int(log2(mod.order))
    if isinstance(mod, MfskMod):
        return int(log2(mod.order))
    if isinstance(mod, OfdmMod):
        return mod.n_carriers * int(log2(mod.carrier_order))
    if isinstance(mod, FdmMod):
        return mod.n_subchannels * int(log2(mod.sub_order))
    if isinstance(mod, CssMod):
        return mod.spreading_factor
    if isinstance(mod, DsssMod):
        return int(log2(mod.data_order))
    raise UnsupportedModulationError(f"unknown modulation {type(mod).__name__}")


def samples_per_symbol(mod, sps):
    """Generation-rate samples per symbol for the given scheme."""
    if isinstance(mod, OfdmMod):
        return mod.n_carriers + mod.cp_len
    if isinstance(mod, CssMod):
        return (1 << mod.spreading_factor) * sps
    if isinstance(mod, DsssMod):
        return mod.code_length * sps
    return sps


def _pick(rng, seq):
    return seq[int(rng.integers(len(seq)))]


def _sample_modulation(rng, config):
    """Draw (modulation, sps, rolloff). Raises for families it does not know."""
    family = _pick(rng, config.families)
    if family == "linear":
        sub = _pick(rng, config.linear_families)
        orders = {"ask": config.ask_orders, "psk": config.psk_orders,
                  "apsk": config.apsk_orders, "qam": config.qam_orders}[sub]
        mod = LinearMod(sub, _pick(rng, orders))
        return mod, _pick(rng, config.linear_sps), float(rng.uniform(*config.rolloff_range))
    if family == "mfsk":
        order = _pick(rng, config.mfsk_orders)
        sps = _pick(rng, config.mfsk_sps)
        span = float(rng.uniform(*config.mfsk_tone_span))
        spacing = span if order == 2 else span / (order - 1)
        return MfskMod(order, spacing), sps, None
    if family == "ofdm":
        n = _pick(rng, config.ofdm_carrier_counts)
        cp = max(1, int(n * _pick(rng, config.ofdm_cp_fractions)))
        cfam = _pick(rng, ("psk", "qam"))
        corder = _pick(rng, config.ofdm_psk_orders if cfam == "psk" else config.ofdm_qam_orders)
        mod = OfdmMod(n, cp, cfam, corder)
        return mod, n + cp, None
    if family == "fdm":
        sub_family = _pick(rng, config.fdm_sub_families)
        sps = _pick(rng, config.fdm_sps)
        if sub_family == "fsk2":
            order, rolloff, w_sub = 2, None, 3.0 / sps
        else:
            order = _pick(rng, config.fdm_psk_orders if sub_family == "psk" else config.fdm_qam_orders)
            rolloff = float(rng.uniform(*config.rolloff_range))
            w_sub = (1.0 + rolloff) / sps
        n_sub = int(rng.integers(config.fdm_subchannel_range[0], config.fdm_subchannel_range[1] + 1))
        f_lo, f_hi = config.fdm_spacing_factor
        # shrink the channel count until the composite fits under the bandwidth cap
        while n_sub > 2 and (n_sub - 1) * f_lo * w_sub + w_sub > config.max_generation_bandwidth:
            n_sub -= 1
        spacing_max = (config.max_generation_bandwidth - w_sub) / (n_sub - 1)
        spacing = min(float(rng.uniform(f_lo, f_hi)) * w_sub, spacing_max)
        return FdmMod(n_sub, sub_family, order, spacing), sps, rolloff
    if family == "css":
        sf = _pick(rng, config.css_spreading_factors)
        sps = _pick(rng, config.css_chip_sps)
        return CssMod(sf, 1.0 / sps), sps, None
    if family == "dsss":
        kind = _pick(rng, config.dsss_code_kinds)
        if kind == "barker":
            length, poly = _pick(rng, config.dsss_barker_lengths), 0
        else:
            degree = _pick(rng, config.dsss_pn_degrees)
            length, poly = (1 << degree) - 1, _pick(rng, PN_POLYNOMIALS[degree])
        dfam = _pick(rng, config.dsss_data_families)
        dorder = _pick(rng, config.dsss_psk_orders if dfam == "psk" else config.dsss_qam_orders)
        mod = DsssMod(kind, length, poly, dfam, dorder)
        return mod, _pick(rng, config.dsss_sps), float(rng.uniform(*config.rolloff_range))
    raise UnsupportedModulationError(f"unknown modulation family {family!r}")


def _sample_basic_sync(rng, config, lengths=None):
    kind = SyncKind(_pick(rng, config.sync_kinds))
    n_bits = _pick(rng, lengths if lengths is not None else config.sync_lengths)
    if kind is SyncKind.REPEATED_PATTERN:
        base = _pick(rng, config.repeated_pattern_lengths)
        reps = _pick(rng, config.repeated_pattern_reps)
        pattern = tuple(int(b) for b in rng.integers(0, 2, size=base))
        return SyncSpec(kind, base * reps, pattern=pattern, repetitions=reps)
    return SyncSpec(kind, n_bits)


def _sample_sync(rng, config, mod):
    if not isinstance(mod, OfdmMod):
        return _sample_basic_sync(rng, config)
    kind = SyncKind(_pick(rng, config.ofdm_sync_kinds))
    bps = bits_per_symbol(mod)
    if kind is SyncKind.ZADOFF_CHU:
        # one full OFDM symbol carrying a Zadoff-Chu sequence across carriers
        zc_len = mod.n_carriers - 1  # odd, since the carrier count is a power of two
        while True:
            root = int(rng.integers(1, zc_len))
            if gcd(root, zc_len) == 1:
                break
        return SyncSpec(kind, bps, zc_root=root, zc_length=zc_len)
    if kind is SyncKind.PARTIAL_CARRIERS:
        # one full OFDM symbol with roughly half the carriers silenced
        mask = rng.random(mod.n_carriers) < 0.5
        if not mask.any():
            mask[0] = True
        active = tuple(int(i) for i in np.flatnonzero(mask))
        return SyncSpec(kind, bps, active_carriers=active)
    return _sample_basic_sync(rng, config)


def _sample_frame(rng, config, mod, mode, sps):
    sync = _sample_sync(rng, config, mod)
    header_len = _pick(rng, config.header_lengths)
    fixed = np.flatnonzero(rng.random(header_len) < config.header_fixed_prob)
    values = rng.integers(0, 2, size=fixed.size)
    positions = tuple(int(p) for p in fixed)
    values = tuple(int(v) for v in values)

    if mode is TransmissionMode.CONTINUOUS:
        payload = int(rng.integers(config.payload_bits_range[0], config.payload_bits_range[1] + 1))
        return FrameSpec(sync, header_len, positions, values, payload)

    pmin = int(rng.integers(config.burst_payload_min_range[0], config.burst_payload_min_range[1] + 1))
    span = int(rng.integers(config.burst_payload_span_range[0], config.burst_payload_span_range[1] + 1))
    payload_range = (pmin, pmin + span)
    mid_sync = end_sync = None
    extra_bits = 0
    if rng.random() < config.extra_sync_prob:
        s = _sample_basic_sync(rng, config, lengths=config.extra_sync_lengths)
        mid_sync = ExtraSync(s, int(rng.integers(0, pmin + 1)))
        extra_bits += s.n_bits
    if rng.random() < config.extra_sync_prob:
        end_sync = _sample_basic_sync(rng, config, lengths=config.extra_sync_lengths)
        extra_bits += end_sync.n_bits

    nominal_bits = sync.n_bits + header_len + (pmin + span // 2) + extra_bits
    per_bit = samples_per_symbol(mod, sps) / bits_per_symbol(mod)
    nominal_samples = nominal_bits * per_bit
    f_lo, f_hi = config.pause_frame_factors
    pause_range = (max(1, int(f_lo * nominal_samples)), max(1, int(f_hi * nominal_samples)))
    return FrameSpec(sync, header_len, positions, values, pmin, payload_range,
                     mid_sync, end_sync, pause_range)


def sample_protocol(master_seed, protocol_id, config=None):
    """Draw one protocol. Deterministic in (master_seed, protocol_id, config).

    Selection runs modulation scheme first, then transmission mode, then frame
    structure, then rate parameters.
    """
    if config is None:
        config = GeneratorConfig()
    seed = derive_seed(master_seed, PROTOCOL_STREAM, protocol_id)
    rng = np.random.default_rng(seed)
    mod, sps, rolloff = _sample_modulation(rng, config)
    mode = TransmissionMode(_pick(rng, config.modes))
    frame = _sample_frame(rng, config, mod, mode, sps)
    bw = float(rng.uniform(*config.bandwidth_fraction_range))
    spec = ProtocolSpec(protocol_id, mod, mode, frame, sps, bw, rolloff, seed)
    logger.debug("protocol %d: %s %s bw=%.3f", protocol_id, type(mod).__name__, mode.value, bw)
    return spec


def sync_field_bits(sync, rng):
    """Bit content of a sync field. Carrier-grid kinds get placeholder bits."""
    n = sync.n_bits
    if sync.kind is SyncKind.ALL_ZERO:
        return np.zeros(n, dtype=np.uint8)
    if sync.kind is SyncKind.ALL_ONE:
        return np.ones(n, dtype=np.uint8)
    if sync.kind is SyncKind.ALTERNATING:
        return (np.arange(n) & 1).astype(np.uint8)
    if sync.kind is SyncKind.REPEATED_PATTERN:
        return np.tile(np.asarray(sync.pattern, dtype=np.uint8), sync.repetitions)[:n]
    if sync.kind is SyncKind.ZADOFF_CHU:
        # content comes from the carrier grid; the bit slots are dead weight
        return np.zeros(n, dtype=np.uint8)
    if sync.kind is SyncKind.PARTIAL_CARRIERS:
        return rng.integers(0, 2, size=n, dtype=np.uint8)
    raise ConfigError(f"unknown sync kind {sync.kind}")


def frame_bits(spec, rng):
    """Bit stream for one frame: sync, header, payload, plus burst extras.

    Fixed header bits take the per-protocol values; everything else is drawn
    from rng. Burst frames draw their payload length from the frame's range
    and may interleave a mid-frame sync or append an end-of-frame sync.
    """
    frame = spec.frame
    parts = [sync_field_bits(frame.sync, rng)]

    header = rng.integers(0, 2, size=frame.header_len_bits, dtype=np.uint8)
    if frame.header_fixed_positions:
        header[list(frame.header_fixed_positions)] = frame.header_fixed_values
    parts.append(header)

    if spec.mode is TransmissionMode.BURST and frame.payload_range_bits is not None:
        lo, hi = frame.payload_range_bits
        n_payload = int(rng.integers(lo, hi + 1))
    else:
        n_payload = frame.payload_len_bits
    payload = rng.integers(0, 2, size=n_payload, dtype=np.uint8)
    if frame.mid_sync is not None:
        off = frame.mid_sync.offset_bits
        payload = np.concatenate([payload[:off], sync_field_bits(frame.mid_sync.sync, rng), payload[off:]])
    parts.append(payload)

    if frame.end_sync is not None:
        parts.append(sync_field_bits(frame.end_sync, rng))
    return np.concatenate(parts)
