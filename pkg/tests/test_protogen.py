import numpy as np
import pytest
from scipy import stats

from rfembed import protogen
from rfembed.errors import ConfigError
from rfembed.protogen import (
    FrameSpec,
    GeneratorConfig,
    LinearMod,
    ProtocolSpec,
    SyncKind,
    SyncSpec,
    TransmissionMode,
    frame_bits,
    sample_protocol,
)

FAMILY_TYPES = ("LinearMod", "MfskMod", "OfdmMod", "FdmMod", "CssMod", "DsssMod")


def test_sample_protocol_deterministic():
    a = sample_protocol(7, 0)
    b = sample_protocol(7, 0)
    assert a == b
    assert a.seed == b.seed


def test_distinct_ids_differ():
    specs = [sample_protocol(7, i) for i in range(8)]
    assert len({s.seed for s in specs}) == 8


def test_restricted_config_forces_qpsk_continuous():
    config = GeneratorConfig(families=("linear",), linear_families=("psk",),
                             psk_orders=(4,), modes=("continuous",))
    spec = sample_protocol(3, 0, config)
    assert isinstance(spec.modulation, LinearMod)
    assert spec.modulation.family == "psk"
    assert spec.modulation.order == 4
    assert spec.mode is TransmissionMode.CONTINUOUS
    assert spec.frame.pause_range is None
    assert spec.frame.payload_range_bits is None


def test_every_family_appears_over_1000_draws():
    seen = {type(sample_protocol(11, i).modulation).__name__ for i in range(1000)}
    assert seen == set(FAMILY_TYPES)


def test_all_zero_sync_prefix():
    config = GeneratorConfig(families=("linear",), sync_kinds=("all_zero",),
                             sync_lengths=(16,), modes=("continuous",))
    spec = sample_protocol(5, 0, config)
    assert spec.frame.sync.kind is SyncKind.ALL_ZERO
    assert spec.frame.sync.n_bits == 16
    bits = frame_bits(spec, np.random.default_rng(0))
    assert np.all(bits[:16] == 0)


def test_masked_header_positions_fixed():
    # deterministic search for a spec with a non-empty fixed-bit mask
    spec = next(s for s in (sample_protocol(7, i) for i in range(20))
                if s.frame.header_fixed_positions)
    sync_len = spec.frame.sync.n_bits
    frames = [frame_bits(spec, np.random.default_rng(k)) for k in range(4)]
    positions = np.array(spec.frame.header_fixed_positions)
    values = np.array(spec.frame.header_fixed_values)
    for bits in frames:
        header = bits[sync_len:sync_len + spec.frame.header_len_bits]
        assert np.array_equal(header[positions], values)


def test_payload_differs_between_frames():
    spec = qpsk_continuous_spec()
    a = frame_bits(spec, np.random.default_rng(1))
    b = frame_bits(spec, np.random.default_rng(2))
    assert len(a) == len(b)  # continuous mode: fixed payload length
    assert not np.array_equal(a, b)


def test_frame_bits_deterministic_in_instance_seed():
    spec = sample_protocol(7, 3)
    a = frame_bits(spec, np.random.default_rng(42))
    b = frame_bits(spec, np.random.default_rng(42))
    assert np.array_equal(a, b)


def qpsk_continuous_spec():
    config = GeneratorConfig(families=("linear",), linear_families=("psk",),
                             psk_orders=(4,), modes=("continuous",))
    return sample_protocol(9, 0, config)


def test_burst_payload_lengths_uniform():
    frame = FrameSpec(
        sync=SyncSpec(SyncKind.ALL_ZERO, 16),
        header_len_bits=16,
        header_fixed_positions=(), header_fixed_values=(),
        payload_len_bits=96, payload_range_bits=(64, 128))
    spec = ProtocolSpec(0, LinearMod("psk", 2), TransmissionMode.BURST,
                        frame, 4, 0.5, 0.35, seed=123)
    rng = np.random.default_rng(17)
    overhead = 16 + 16
    lengths = np.array([len(frame_bits(spec, rng)) - overhead
                        for _ in range(10_000)])
    assert lengths.min() >= 64 and lengths.max() <= 128
    counts = np.bincount(lengths - 64, minlength=65)
    chi2 = np.sum((counts - len(lengths) / 65) ** 2 / (len(lengths) / 65))
    assert chi2 < stats.chi2.ppf(0.99, df=64)


def test_sampled_parameters_within_ranges():
    config = GeneratorConfig()
    for i in range(10_000):
        spec = sample_protocol(13, i, config)
        lo, hi = config.bandwidth_fraction_range
        assert lo <= spec.bandwidth_fraction <= hi
        if spec.rolloff is not None:
            rlo, rhi = config.rolloff_range
            assert rlo <= spec.rolloff <= rhi
        assert spec.mode.value in config.modes
        if spec.mode is TransmissionMode.BURST:
            assert spec.frame.pause_range is not None
        assert spec.frame.header_len_bits in config.header_lengths


def test_bad_config_rejected():
    with pytest.raises(ConfigError):
        GeneratorConfig(families=())
    with pytest.raises(ConfigError):
        GeneratorConfig(bandwidth_fraction_range=(0.9, 0.1))
    with pytest.raises(ConfigError):
        GeneratorConfig(header_fixed_prob=1.5)


def test_bad_dataclass_fields_rejected():
    with pytest.raises(ConfigError):
        LinearMod("psk", 3)
    with pytest.raises(ConfigError):
        SyncSpec(SyncKind.REPEATED_PATTERN, 16)
    with pytest.raises(ConfigError):
        FrameSpec(sync=SyncSpec(SyncKind.ALL_ZERO, 8), header_len_bits=8,
                  header_fixed_positions=(9,), header_fixed_values=(1,),
                  payload_len_bits=32)
