"""Dataset container, model persistence, and table exports.

On-disk layout is deliberately plain so readers are trivial in any
language: raw interleaved little-endian float32 I/Q files, a JSON
manifest describing them, JSON model containers with base64 float32
payloads, and comma-delimited tables with a header row for features,
embeddings, and reports. Floats in tables are printed with 9 significant
digits, which keeps repeated runs byte-identical.
"""

from __future__ import annotations

import base64
import dataclasses
import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import embednet, evalverify, featcsp, impair, protogen, waveform
from .errors import ConfigError, CorruptFileError, ValidationError
from .seeds import INSTANCE_STREAM, rng_for

log = logging.getLogger(__name__)

CONTAINER_VERSION = 1
MODEL_KINDS = ("pca", "embedmodel", "classifier")


# ---------------------------------------------------------------- I/Q files

def read_iq(path, sample_rate: float = 1.0) -> waveform.ComplexSignal:
    """Reads interleaved little-endian float32 I/Q into a ComplexSignal."""
    raw = np.fromfile(path, dtype="<f4")
    if len(raw) == 0:
        raise CorruptFileError(f"{path}: empty I/Q file")
    if len(raw) % 2:
        raise CorruptFileError(f"{path}: odd float count {len(raw)}")
    if not np.all(np.isfinite(raw)):
        raise ValidationError(f"{path}: non-finite samples")
    samples = raw[0::2].astype(np.float64) + 1j * raw[1::2].astype(np.float64)
    return waveform.ComplexSignal(samples, sample_rate)


def write_iq(path, signal) -> int:
    """Writes samples as interleaved float32; returns the sample count."""
    samples = signal.samples if hasattr(signal, "samples") else np.asarray(signal)
    if not np.all(np.isfinite(samples)):
        raise ValidationError("refusing to write non-finite samples")
    raw = np.empty(2 * len(samples), dtype="<f4")
    raw[0::2] = samples.real
    raw[1::2] = samples.imag
    raw.tofile(path)
    return len(samples)


# ----------------------------------------------------------------- manifest

@dataclass(frozen=True)
class ManifestEntry:
    file: str
    label: int
    sample_rate: float
    sample_count: int
    emitter: str | None = None
    snr_db: float | None = None


@dataclass
class DatasetManifest:
    name: str
    seed: int
    entries: list
    description: str = ""

    def labels(self) -> np.ndarray:
        return np.array([e.label for e in self.entries], dtype=np.intp)


def save_manifest(manifest: DatasetManifest, path) -> None:
    doc = {
        "name": manifest.name,
        "description": manifest.description,
        "seed": manifest.seed,
        "entries": [
            {k: v for k, v in dataclasses.asdict(e).items() if v is not None}
            for e in manifest.entries
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n",
                          encoding="utf-8")


def load_manifest(path, validate: bool = True) -> DatasetManifest:
    base = Path(path).parent
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        entries = [ManifestEntry(**entry) for entry in doc["entries"]]
        manifest = DatasetManifest(
            name=doc["name"], seed=doc["seed"], entries=entries,
            description=doc.get("description", ""))
    except (json.JSONDecodeError, KeyError, TypeError) as err:
        raise CorruptFileError(f"{path}: bad manifest ({err})") from err
    if not entries:
        raise ValidationError(f"{path}: manifest has no entries")
    if validate:
        for entry in entries:
            if entry.sample_count < 1:
                raise ValidationError(
                    f"{entry.file}: sample count {entry.sample_count}")
            file_path = base / entry.file
            if not file_path.exists():
                raise ValidationError(f"{file_path}: missing data file")
            size = file_path.stat().st_size
            if size != 8 * entry.sample_count:
                raise ValidationError(
                    f"{file_path}: {size} bytes contradicts sample count "
                    f"{entry.sample_count}")
    return manifest


def iter_signals(manifest: DatasetManifest, root):
    """Yields (entry, ComplexSignal) pairs in manifest order."""
    base = Path(root)
    for entry in manifest.entries:
        yield entry, read_iq(base / entry.file, entry.sample_rate)


# ------------------------------------------------------------ dataset build

@dataclass
class DatasetConfig:
    """Knobs for build_synthetic_dataset, mirroring the training recipe."""

    n_protocols: int = 10
    instances_per_protocol: int = 5
    n_samples: int = 16384
    sample_rate: float = 1.0
    snr_range_db: tuple = (3.0, 30.0)
    sigma_rfo: float = 0.02
    channel: str | None = None
    clean: bool = False
    name: str = "synthetic"


def _synthesize_entry(spec, instance: int, config: DatasetConfig):
    rng = rng_for(spec.seed, INSTANCE_STREAM, instance)
    signal = waveform.synthesize_instance(
        spec, config.n_samples, rng, sample_rate=config.sample_rate)
    snr = None
    if not config.clean:
        lo, hi = config.snr_range_db
        snr = float(rng.uniform(lo, hi))
        imp = impair.ImpairmentConfig(
            sigma_rfo=config.sigma_rfo, channel=config.channel, snr_db=snr)
        signal = impair.apply_impairments(
            signal, imp, rng, occupied_bandwidth=spec.bandwidth_fraction)
    return signal, snr


def build_synthetic_dataset(master_seed: int, out_dir,
                            config: DatasetConfig | None = None,
                            generator: protogen.GeneratorConfig | None = None,
                            jobs: int = 1) -> DatasetManifest:
    """Generates, impairs, and writes a dataset plus its manifest."""
    config = config or DatasetConfig()
    generator = generator or protogen.GeneratorConfig()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    specs = [protogen.sample_protocol(master_seed, pid, generator)
             for pid in range(config.n_protocols)]
    tasks = [(spec, inst) for spec in specs
             for inst in range(config.instances_per_protocol)]

    def run(task):
        spec, inst = task
        return _synthesize_entry(spec, inst, config)

    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_dataset_worker,
                                    [(master_seed, s.protocol_id, inst, config,
                                      generator) for s, inst in tasks]))
    else:
        results = [run(task) for task in tasks]

    entries = []
    for (spec, inst), (signal, snr) in zip(tasks, results):
        fname = f"p{spec.protocol_id:04d}_i{inst:03d}.cf32"
        count = write_iq(out / fname, signal)
        entries.append(ManifestEntry(
            file=fname, label=spec.protocol_id,
            sample_rate=config.sample_rate, sample_count=count, snr_db=snr))

    manifest = DatasetManifest(name=config.name, seed=master_seed,
                               entries=entries)
    save_manifest(manifest, out / "manifest.json")
    log.info("wrote %d instances of %d protocols to %s",
             len(entries), config.n_protocols, out)
    return manifest


def _dataset_worker(args):
    master_seed, pid, inst, config, generator = args
    spec = protogen.sample_protocol(master_seed, pid, generator)
    return _synthesize_entry(spec, inst, config)


# ------------------------------------------------------- model persistence

def _encode_arrays(arrays: dict) -> dict:
    payload = {}
    for name, arr in arrays.items():
        data = np.ascontiguousarray(arr, dtype="<f4")
        payload[name] = {
            "shape": list(data.shape),
            "data": base64.b64encode(data.tobytes()).decode("ascii"),
        }
    return payload


def _decode_arrays(payload: dict) -> dict:
    arrays = {}
    for name, item in payload.items():
        try:
            raw = base64.b64decode(item["data"], validate=True)
            shape = tuple(item["shape"])
        except (KeyError, ValueError, TypeError) as err:
            raise CorruptFileError(f"bad array {name}: {err}") from err
        expected = int(np.prod(shape)) if shape else 1
        if len(raw) != 4 * expected:
            raise CorruptFileError(
                f"array {name}: {len(raw)} bytes for shape {shape}")
        arrays[name] = np.frombuffer(raw, dtype="<f4").reshape(shape) \
            .astype(np.float64)
    return arrays


def save_model(path, kind: str, metadata: dict, arrays: dict) -> None:
    if kind not in MODEL_KINDS:
        raise ValidationError(f"unknown model kind: {kind}")
    doc = {
        "kind": kind,
        "version": CONTAINER_VERSION,
        "metadata": metadata,
        "arrays": _encode_arrays(arrays),
    }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n",
                          encoding="utf-8")


def load_model(path, expect_kind: str | None = None):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        kind = doc["kind"]
        version = doc["version"]
        metadata = doc["metadata"]
        arrays = _decode_arrays(doc["arrays"])
    except (json.JSONDecodeError, KeyError, TypeError) as err:
        raise CorruptFileError(f"{path}: bad model container ({err})") from err
    if kind not in MODEL_KINDS:
        raise CorruptFileError(f"{path}: unknown model kind {kind}")
    if version != CONTAINER_VERSION:
        raise CorruptFileError(f"{path}: unsupported version {version}")
    if expect_kind is not None and kind != expect_kind:
        raise ValidationError(f"{path}: expected {expect_kind}, got {kind}")
    return kind, metadata, arrays


def save_pca(path, model: featcsp.PcaModel) -> None:
    save_model(path, "pca",
               {"components": len(model.components),
                "dim": int(model.mean.shape[0])},
               {"mean": model.mean, "components": model.components,
                "explained_variance": model.explained_variance})


def load_pca(path) -> featcsp.PcaModel:
    _, _, arrays = load_model(path, expect_kind="pca")
    return featcsp.PcaModel(mean=arrays["mean"],
                            components=arrays["components"],
                            explained_variance=arrays["explained_variance"])


def _embed_arrays(model: embednet.EmbedModel) -> dict:
    return dict(model.parameters())


def _embed_metadata(model: embednet.EmbedModel) -> dict:
    return {
        "head": model.head.value,
        "scale": model.scale,
        "margin": model.margin,
        "hidden": [w.shape[0] for w in model.hidden_weights],
        "input_dim": model.input_dim,
        "embed_dim": model.embed_dim,
        "n_classes": model.n_classes,
    }


def save_embed_model(path, model: embednet.EmbedModel,
                     kind: str = "embedmodel", extra: dict | None = None,
                     extra_arrays: dict | None = None) -> None:
    metadata = _embed_metadata(model)
    if extra:
        metadata.update(extra)
    arrays = _embed_arrays(model)
    if extra_arrays:
        arrays.update(extra_arrays)
    save_model(path, kind, metadata, arrays)


def _embed_from_container(metadata: dict, arrays: dict) -> embednet.EmbedModel:
    try:
        head = embednet.HeadKind(metadata["head"])
        hidden = metadata["hidden"]
        weights = [arrays[f"hidden_w{i}"] for i in range(len(hidden))]
        biases = [arrays[f"hidden_b{i}"] for i in range(len(hidden))]
        model = embednet.EmbedModel(
            head=head, hidden_weights=weights, hidden_biases=biases,
            embed_weight=arrays["embed_w"], head_weight=arrays["head_w"],
            head_bias=arrays.get("head_b"), scale=metadata["scale"],
            margin=metadata["margin"])
    except (KeyError, ValueError) as err:
        raise CorruptFileError(f"bad embed model container ({err})") from err
    return model


def load_embed_model(path) -> embednet.EmbedModel:
    _, metadata, arrays = load_model(path, expect_kind="embedmodel")
    return _embed_from_container(metadata, arrays)


def save_classifier(path, result: evalverify.ClassifierResult) -> None:
    save_embed_model(
        path, result.model, kind="classifier",
        extra={"train_accuracy": result.train_accuracy,
               "test_accuracy": result.test_accuracy,
               "n_train": result.n_train, "n_test": result.n_test},
        extra_arrays={"feature_mean": result.feature_mean,
                      "feature_std": result.feature_std})


def load_classifier(path) -> evalverify.ClassifierResult:
    _, metadata, arrays = load_model(path, expect_kind="classifier")
    model = _embed_from_container(metadata, arrays)
    return evalverify.ClassifierResult(
        model=model, feature_mean=arrays["feature_mean"],
        feature_std=arrays["feature_std"],
        train_accuracy=metadata["train_accuracy"],
        test_accuracy=metadata["test_accuracy"],
        n_train=metadata["n_train"], n_test=metadata["n_test"])


# -------------------------------------------------------------- flat tables

def format_float(x: float) -> str:
    return "%.9g" % x


def save_table(path, columns, rows) -> None:
    """Comma-delimited table; floats printed with 9 significant digits."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            cells = [format_float(v) if isinstance(v, float) else str(v)
                     for v in row]
            fh.write(",".join(cells) + "\n")


def load_feature_table(path):
    """Reads a (file, label, values...) table back into arrays."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if len(lines) < 2:
        raise CorruptFileError(f"{path}: table has no data rows")
    header = lines[0].split(",")
    if header[:2] != ["file", "label"]:
        raise CorruptFileError(f"{path}: expected file,label leading columns")
    files, labels, values = [], [], []
    for ln in lines[1:]:
        cells = ln.split(",")
        if len(cells) != len(header):
            raise CorruptFileError(f"{path}: ragged row: {ln[:60]}")
        files.append(cells[0])
        try:
            labels.append(int(cells[1]))
            values.append([float(c) for c in cells[2:]])
        except ValueError as err:
            raise CorruptFileError(f"{path}: bad cell ({err})") from err
    return files, np.array(labels, dtype=np.intp), np.array(values)


def feature_table_rows(manifest: DatasetManifest, root, extract):
    """(file, label, *values) rows for each manifest entry, in order."""
    rows = []
    for entry, signal in iter_signals(manifest, root):
        values = extract(signal.samples)
        rows.append((entry.file, int(entry.label), *map(float, values)))
    return rows


def save_verification_report(path, report: evalverify.VerificationReport,
                             extra: dict | None = None) -> None:
    doc = {
        "metric": report.metric,
        "n_same": report.n_same,
        "n_different": report.n_different,
        "degenerate": report.degenerate,
        "operating_points": [
            {"fpr_target": f, "tpr": report.tpr_at[f],
             "fpr": report.fpr_at[f], "threshold": report.threshold_at[f]}
            for f in report.fpr_targets
        ],
    }
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n",
                          encoding="utf-8")


def load_verification_report(path) -> evalverify.VerificationReport:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        points = doc["operating_points"]
        report = evalverify.VerificationReport(
            metric=doc["metric"], n_same=doc["n_same"],
            n_different=doc["n_different"],
            fpr_targets=tuple(p["fpr_target"] for p in points),
            tpr_at={p["fpr_target"]: p["tpr"] for p in points},
            threshold_at={p["fpr_target"]: p["threshold"] for p in points},
            fpr_at={p["fpr_target"]: p["fpr"] for p in points},
            degenerate=doc["degenerate"])
    except (json.JSONDecodeError, KeyError, TypeError) as err:
        raise CorruptFileError(f"{path}: bad report ({err})") from err
    return report


# -------------------------------------------------------------- config file

_CONFIG_SECTIONS = {
    "generator": protogen.GeneratorConfig,
    "dataset": DatasetConfig,
    "train": embednet.TrainConfig,
    "impair": impair.ImpairmentConfig,
    "classifier": evalverify.ClassifierConfig,
}


def load_config(path) -> dict:
    """Parses the JSON config into per-section dataclass instances.

    Sections are optional; unknown sections or fields raise ConfigError.
    List values are converted to tuples so they can seed dataclass fields
    declared as tuples.
    """
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: invalid config ({err})") from err
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config root must be an object")
    out = {}
    for section, content in doc.items():
        cls = _CONFIG_SECTIONS.get(section)
        if cls is None:
            raise ConfigError(f"{path}: unknown section '{section}'")
        if not isinstance(content, dict):
            raise ConfigError(f"{path}: section '{section}' must be an object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(content) - known
        if unknown:
            raise ConfigError(
                f"{path}: unknown fields in '{section}': {sorted(unknown)}")
        kwargs = {k: tuple(v) if isinstance(v, list) else v
                  for k, v in content.items()}
        try:
            out[section] = cls(**kwargs)
        except (TypeError, ValidationError) as err:
            raise ConfigError(f"{path}: bad '{section}' ({err})") from err
    return out
