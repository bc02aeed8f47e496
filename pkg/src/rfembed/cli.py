"""Command-line entry point.

Each subcommand is a thin composition of module operations: generate and
impair build datasets, features/scf/embed turn a dataset into vector
tables, train fits the embedding network on freshly synthesized signals,
verify and sweep produce verification reports, classify fits the
feature-input classifier. Exit codes: 0 success, 1 validation or usage
error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from functools import partial
from pathlib import Path

import numpy as np

from . import (dataio, embednet, evalverify, featcsp, featstat, impair,
               protogen, waveform)
from .errors import ValidationError
from .seeds import EVAL_STREAM, rng_for

log = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 on usage errors, per the CLI contract."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _float_list(text: str):
    return [float(v) for v in text.split(",") if v]


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config(args) -> dict:
    return dataio.load_config(args.config) if args.config else {}


def _dataset_config(args, cfg) -> dataio.DatasetConfig:
    ds = cfg.get("dataset", dataio.DatasetConfig())
    overrides = {}
    for field, attr in (("n_protocols", "protocols"),
                        ("instances_per_protocol", "instances"),
                        ("n_samples", "samples"),
                        ("sample_rate", "sample_rate")):
        value = getattr(args, attr, None)
        if value is not None:
            overrides[field] = value
    if getattr(args, "clean", False):
        overrides["clean"] = True
    return replace(ds, **overrides)


def cmd_generate(args) -> int:
    cfg = _config(args)
    out = _out_dir(args)
    manifest = dataio.build_synthetic_dataset(
        args.seed, out, config=_dataset_config(args, cfg),
        generator=cfg.get("generator"), jobs=args.jobs)
    print(f"wrote {len(manifest.entries)} instances to {out}")
    return 0


def cmd_impair(args) -> int:
    cfg = _config(args)
    out = _out_dir(args)
    manifest = dataio.load_manifest(args.manifest)
    root = Path(args.manifest).parent
    base = cfg.get("impair", impair.ImpairmentConfig())
    if args.snr is not None:
        base = replace(base, snr_db=args.snr)
    if args.sigma_rfo is not None:
        base = replace(base, sigma_rfo=args.sigma_rfo, cfo=None)
    if args.channel is not None:
        base = replace(base, channel=args.channel)
    entries = []
    for idx, (entry, signal) in enumerate(dataio.iter_signals(manifest, root)):
        rng = rng_for(args.seed, EVAL_STREAM, idx)
        result = impair.apply_impairments(signal, base, rng)
        count = dataio.write_iq(out / entry.file, result)
        entries.append(replace(entry, sample_count=count, snr_db=base.snr_db))
    redone = dataio.DatasetManifest(
        name=manifest.name + "-impaired", seed=args.seed, entries=entries,
        description=manifest.description)
    dataio.save_manifest(redone, out / "manifest.json")
    print(f"re-impaired {len(entries)} instances into {out}")
    return 0


def _write_feature_table(path, manifest, root, columns, extract) -> None:
    rows = dataio.feature_table_rows(manifest, root, extract)
    dataio.save_table(path, ["file", "label", *columns], rows)


def cmd_features(args) -> int:
    out = _out_dir(args)
    manifest = dataio.load_manifest(args.manifest)
    table = out / "features.csv"
    _write_feature_table(table, manifest, Path(args.manifest).parent,
                         featstat.FEATURE_NAMES, featstat.mod_features)
    print(f"wrote {table}")
    return 0


def cmd_scf(args) -> int:
    out = _out_dir(args)
    manifest = dataio.load_manifest(args.manifest)
    root = Path(args.manifest).parent
    matrices = [featcsp.estimate_scf_fsm(sig.samples)
                for _, sig in dataio.iter_signals(manifest, root)]
    if args.pca_model:
        model = dataio.load_pca(args.pca_model)
    else:
        k = args.components or min(128, len(matrices) - 1)
        model = featcsp.pca_fit(matrices, k=k)
        dataio.save_pca(out / "pca.json", model)
        print(f"wrote {out / 'pca.json'}")
    vectors = [featcsp.pca_project(model, m) for m in matrices]
    columns = [f"pc{i}" for i in range(len(vectors[0]))]
    rows = [(e.file, int(e.label), *map(float, v))
            for e, v in zip(manifest.entries, vectors)]
    dataio.save_table(out / "scf.csv", ["file", "label", *columns], rows)
    print(f"wrote {out / 'scf.csv'}")
    return 0


def cmd_train(args) -> int:
    cfg = _config(args)
    out = _out_dir(args)
    tc = cfg.get("train", embednet.TrainConfig())
    overrides = {"seed": args.seed}
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    if args.instances is not None:
        overrides["instances_per_class"] = args.instances
    tc = replace(tc, **overrides)
    generator = cfg.get("generator", protogen.GeneratorConfig())
    specs = [protogen.sample_protocol(args.seed, pid, generator)
             for pid in range(args.protocols)]
    hook = embednet.build_instance_hook(specs, args.samples, tc,
                                        channel=args.channel)
    model = embednet.init_model(
        4 * embednet.STFT_SIZE, len(specs), embednet.HeadKind(args.head),
        seed=args.seed)
    history = embednet.train(model, hook, tc)
    dataio.save_embed_model(out / "model.json", model,
                            extra={"loss_history": history,
                                   "train_seed": args.seed,
                                   "n_protocols": len(specs)})
    print(f"wrote {out / 'model.json'}")
    for epoch, loss in enumerate(history):
        print(f"epoch {epoch} loss {dataio.format_float(loss)}")
    return 0


def cmd_embed(args) -> int:
    out = _out_dir(args)
    manifest = dataio.load_manifest(args.manifest)
    model = dataio.load_embed_model(args.model)
    table = out / "embeddings.csv"
    columns = [f"e{i}" for i in range(model.embed_dim)]
    _write_feature_table(table, manifest, Path(args.manifest).parent,
                         columns, partial(embednet.embed, model))
    print(f"wrote {table}")
    return 0


def _representation_vectors(args, manifest, root):
    if args.repr == "features":
        extract = featstat.mod_features
    elif args.repr == "scf":
        if not args.model:
            raise ValidationError("--repr scf needs --model (pca container)")
        pca = dataio.load_pca(args.model)
        extract = lambda s: featcsp.pca_project(pca, featcsp.estimate_scf_fsm(s))
    else:
        if not args.model:
            raise ValidationError("--repr embeddings needs --model")
        model = dataio.load_embed_model(args.model)
        extract = partial(embednet.embed, model)
    vectors = [extract(sig.samples)
               for _, sig in dataio.iter_signals(manifest, root)]
    return np.array(vectors)


def cmd_verify(args) -> int:
    out = _out_dir(args)
    if args.table:
        _, labels, vectors = dataio.load_feature_table(args.table)
        metric = args.metric or "euclidean"
    else:
        if not args.manifest:
            raise ValidationError("verify needs --table or --manifest")
        manifest = dataio.load_manifest(args.manifest)
        vectors = _representation_vectors(
            args, manifest, Path(args.manifest).parent)
        labels = manifest.labels()
        metric = args.metric or \
            ("cosine" if args.repr == "embeddings" else "euclidean")
    report = evalverify.pairwise_verify(
        vectors, labels, metric=metric, fpr_targets=tuple(args.fpr))
    dataio.save_verification_report(out / "report.json", report)
    for f, tpr, fpr, thr in report.table_rows():
        print(f"fpr_target {dataio.format_float(f)} "
              f"tpr {dataio.format_float(tpr)} "
              f"fpr {dataio.format_float(fpr)} "
              f"threshold {dataio.format_float(thr)}")
    print(f"wrote {out / 'report.json'}")
    return 0


def cmd_sweep(args) -> int:
    out = _out_dir(args)
    manifest = dataio.load_manifest(args.manifest)
    root = Path(args.manifest).parent
    if args.repr == "features":
        extract = featstat.mod_features
    elif args.repr == "scf":
        if not args.model:
            raise ValidationError("--repr scf needs --model (pca container)")
        pca = dataio.load_pca(args.model)
        extract = lambda s: featcsp.pca_project(pca, featcsp.estimate_scf_fsm(s))
    else:
        if not args.model:
            raise ValidationError("--repr embeddings needs --model")
        model = dataio.load_embed_model(args.model)
        extract = partial(embednet.embed, model)
    metric = args.metric or \
        ("cosine" if args.repr == "embeddings" else "euclidean")
    grid = (args.grid.split(",") if args.axis == "channel"
            else _float_list(args.grid))
    signals = [sig.samples for _, sig in dataio.iter_signals(manifest, root)]
    rate = manifest.entries[0].sample_rate
    results = evalverify.robustness_sweep(
        signals, manifest.labels(), extract, args.axis, grid,
        sample_rate=rate, metric=metric, fpr_targets=tuple(args.fpr),
        seed=args.seed)
    rows = [(str(v), float(f), float(t), float(thr))
            for v, f, t, thr in evalverify.sweep_table(results)]
    dataio.save_table(out / "sweep.csv",
                      [args.axis, "fpr_target", "tpr", "threshold"], rows)
    print(f"wrote {out / 'sweep.csv'}")
    return 0


def cmd_classify(args) -> int:
    cfg = _config(args)
    out = _out_dir(args)
    _, labels, vectors = dataio.load_feature_table(args.table)
    cc = cfg.get("classifier", evalverify.ClassifierConfig())
    overrides = {"seed": args.seed}
    if args.split is not None:
        overrides["train_fraction"] = args.split
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    if args.scaling is not None:
        overrides["scaling"] = args.scaling
    cc = replace(cc, **overrides)
    result = evalverify.train_feature_classifier(vectors, labels, cc)
    dataio.save_classifier(out / "classifier.json", result)
    print(f"train_accuracy {dataio.format_float(result.train_accuracy)}")
    print(f"test_accuracy {dataio.format_float(result.test_accuracy)}")
    print(f"wrote {out / 'classifier.json'}")
    return 0


def _add_global_args(parser, late: bool) -> None:
    # The same flags are legal before and after the subcommand; the late
    # copies use SUPPRESS so absence never clobbers an early value.
    kw = {"default": argparse.SUPPRESS} if late else {}
    parser.add_argument("--seed", type=int, **(kw or {"default": 0}))
    parser.add_argument("--config", **(kw or {"default": None}))
    parser.add_argument("--jobs", type=int, **(kw or {"default": 1}))
    parser.add_argument("--out", **(kw or {"default": "."}))
    if late:
        parser.add_argument("-v", "--verbose", action="store_true",
                            default=argparse.SUPPRESS)
    else:
        parser.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> _Parser:
    parser = _Parser(prog="rfembed", description=__doc__)
    _add_global_args(parser, late=False)
    shared = argparse.ArgumentParser(add_help=False)
    _add_global_args(shared, late=True)
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("generate", help="build a synthetic dataset",
                       parents=[shared])
    p.add_argument("--protocols", type=int, default=None)
    p.add_argument("--instances", type=int, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--sample-rate", dest="sample_rate", type=float,
                   default=None)
    p.add_argument("--clean", action="store_true",
                   help="skip the impairment chain")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("impair", help="re-impair an existing dataset",
                   parents=[shared])
    p.add_argument("--manifest", required=True)
    p.add_argument("--snr", type=float, default=None)
    p.add_argument("--sigma-rfo", dest="sigma_rfo", type=float, default=None)
    p.add_argument("--channel", default=None)
    p.set_defaults(func=cmd_impair)

    p = sub.add_parser("features", help="26-D statistical feature table",
                   parents=[shared])
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("scf", help="spectral correlation + PCA table",
                   parents=[shared])
    p.add_argument("--manifest", required=True)
    p.add_argument("--components", type=int, default=None)
    p.add_argument("--pca-model", dest="pca_model", default=None,
                   help="project with an existing PCA container")
    p.set_defaults(func=cmd_scf)

    p = sub.add_parser("train", help="train the embedding network",
                   parents=[shared])
    p.add_argument("--protocols", type=int, default=20)
    p.add_argument("--instances", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--samples", type=int, default=16384)
    p.add_argument("--head", default="norm_softmax",
                   choices=[h.value for h in embednet.HeadKind])
    p.add_argument("--channel", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("embed", help="embed a dataset with a trained model",
                   parents=[shared])
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("verify", help="pairwise verification report",
                   parents=[shared])
    p.add_argument("--table", default=None)
    p.add_argument("--manifest", default=None)
    p.add_argument("--repr", default="features",
                   choices=["features", "scf", "embeddings"])
    p.add_argument("--model", default=None)
    p.add_argument("--metric", default=None,
                   choices=["euclidean", "cosine"])
    p.add_argument("--fpr", type=_float_list, default=[1e-3, 1e-4])
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="impairment robustness sweep",
                   parents=[shared])
    p.add_argument("--manifest", required=True)
    p.add_argument("--axis", required=True,
                   choices=["snr", "sigma_rfo", "channel"])
    p.add_argument("--grid", required=True,
                   help="comma list of axis values")
    p.add_argument("--repr", default="features",
                   choices=["features", "scf", "embeddings"])
    p.add_argument("--model", default=None)
    p.add_argument("--metric", default=None,
                   choices=["euclidean", "cosine"])
    p.add_argument("--fpr", type=_float_list, default=[1e-2])
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("classify", help="downstream feature classifier",
                   parents=[shared])
    p.add_argument("--table", required=True)
    p.add_argument("--split", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--scaling", default=None,
                   choices=["per_feature", "global"])
    p.set_defaults(func=cmd_classify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValidationError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
