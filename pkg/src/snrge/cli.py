"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from . import config as cfgfile
from .embedder import EmbedderConfig, load_checkpoint, save_checkpoint, write_loss_history
from .errors import DataError, NumericError
from .figures import emit_line_chart, emit_scatter
from .harness import (
    SimulatorSource,
    WavDirectorySource,
    dataset_to_triplets,
    emit_report,
    load_report,
    merge_reports,
    run_individual_snn_workflow,
    run_single_snn_workflow,
    run_spectral_workflow,
    save_report,
    train_level_embedder,
    train_single_embedder,
)
from .inference import KnnConfig, WEIGHTING_UNIFORM, label_to_linear, select_k_elbow
from .metrics import METHOD_FREQUENCY, METHOD_PIXELS
from .synth import DatasetConfig, SnrLabel, WhistleRanges, build_dataset, format_db, load_manifest
from .tsne import tsne_project

import numpy as np

log = logging.getLogger(__name__)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _dataset_config(args) -> DatasetConfig:
    cfg = DatasetConfig()
    if args.config:
        cfg = DatasetConfig.from_kv(cfgfile.read_kv(args.config))
    overrides = {}
    if args.grid is not None:
        overrides["grid"] = cfgfile.parse_floats(args.grid)
    for name in ("clips_per_level", "sample_rate", "seed"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    if args.clip_seconds is not None:
        overrides["clip_seconds"] = args.clip_seconds
    if args.noise_kind is not None:
        overrides["noise_kind"] = args.noise_kind
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def _embedder_config(args) -> EmbedderConfig:
    cfg = EmbedderConfig()
    if getattr(args, "embedder_config", None):
        kv = cfgfile.read_kv(args.embedder_config)
        fields = {}
        for key in ("conv_blocks", "dense_layers", "embedding_dim", "batch_size", "epochs", "seed", "dense_hidden"):
            if key in kv:
                fields[key] = int(kv[key])
        for key in ("learning_rate", "margin"):
            if key in kv:
                fields[key] = float(kv[key])
        if "stop_val_loss" in kv:
            fields["stop_val_loss"] = float(kv["stop_val_loss"]) if kv["stop_val_loss"] else None
        if "input_shape" in kv:
            shape = cfgfile.parse_floats(kv["input_shape"])
            fields["input_shape"] = (int(shape[0]), int(shape[1]))
        cfg = EmbedderConfig(**{**cfg.__dict__, **fields})
    overrides = {}
    for key in ("conv_blocks", "dense_layers", "embedding_dim", "batch_size", "epochs", "seed"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    for key in ("learning_rate", "margin", "stop_val_loss"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "input_size", None) is not None:
        overrides["input_shape"] = (args.input_size, args.input_size)
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def _source(args):
    if args.source_dir:
        return WavDirectorySource(path=str(args.source_dir))
    return SimulatorSource(
        snr_bias=args.bias, quality=args.quality, count=args.count, seed=args.source_seed
    )


def _add_embedder_flags(sub):
    sub.add_argument("--embedder-config", type=Path, help="key = value file of embedder settings")
    sub.add_argument("--conv-blocks", dest="conv_blocks", type=int)
    sub.add_argument("--dense-layers", dest="dense_layers", type=int)
    sub.add_argument("--embedding-dim", dest="embedding_dim", type=int)
    sub.add_argument("--learning-rate", dest="learning_rate", type=float)
    sub.add_argument("--margin", type=float)
    sub.add_argument("--batch-size", dest="batch_size", type=int)
    sub.add_argument("--epochs", type=int)
    sub.add_argument("--seed", type=int)
    sub.add_argument("--input-size", dest="input_size", type=int, help="square network input size")
    sub.add_argument("--stop-val-loss", dest="stop_val_loss", type=float)
    sub.add_argument("--window", type=int, default=1024)
    sub.add_argument("--hop", type=int, default=256)


def _add_source_flags(sub):
    sub.add_argument("--source-dir", type=Path, help="directory of WAVs, one <level>dB subdir each")
    sub.add_argument("--bias", type=float, default=0.0, help="simulator SNR bias in dB")
    sub.add_argument("--quality", choices=("clean", "degraded"), default="clean")
    sub.add_argument("--count", type=int, default=200, help="simulator samples per level")
    sub.add_argument("--source-seed", type=int, default=1234)


def _cmd_generate_dataset(args) -> int:
    cfg = _dataset_config(args)
    manifest = build_dataset(cfg, args.out)
    print(f"wrote {len(manifest.entries)} clips to {args.out}")
    return 0


def _cmd_train_embedder(args) -> int:
    manifest = load_manifest(args.dataset)
    config = _embedder_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.all_snr:
        result = train_single_embedder(manifest, config, args.window, args.hop)
        save_checkpoint(result.net, out / "snn_all.ckpt")
        write_loss_history(result.history, out / "snn_all_loss.csv")
        print(f"final val loss {result.final_val_loss:.4f} -> {out / 'snn_all.ckpt'}")
    else:
        for index, level in enumerate(manifest.grid):
            level_config = dataclasses.replace(config, seed=config.seed + index)
            result = train_level_embedder(manifest, level, level_config, args.window, args.hop)
            stem = f"snn_{format_db(level)}dB"
            save_checkpoint(result.net, out / f"{stem}.ckpt")
            write_loss_history(result.history, out / f"{stem}_loss.csv")
            print(f"{stem}: final val loss {result.final_val_loss:.4f}")
    return 0


def _cmd_evaluate(args) -> int:
    manifest = load_manifest(args.dataset)
    source = _source(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.method in ("spectra", "pixels"):
        method = METHOD_FREQUENCY if args.method == "spectra" else METHOD_PIXELS
        report = run_spectral_workflow(
            manifest, source, method, fft_size=args.fft_size, window=args.window, hop=args.hop
        )
    elif args.method == "snn-nc":
        config = _embedder_config(args)
        nets = None
        if args.per_snr_dir:
            nets = {}
            for level in manifest.grid:
                path = Path(args.per_snr_dir) / f"snn_{format_db(level)}dB.ckpt"
                if not path.is_file():
                    raise DataError(f"missing checkpoint {path}")
                nets[level] = load_checkpoint(path)
            config = nets[manifest.grid[0]].config
        report = run_individual_snn_workflow(
            manifest, source, config, window=args.window, hop=args.hop, nets=nets
        )
    else:  # snn-knn
        config = _embedder_config(args)
        net = None
        if args.checkpoint:
            net = load_checkpoint(args.checkpoint)
            config = net.config
        knn_cfg = KnnConfig(k=args.k) if args.k else None
        report = run_single_snn_workflow(
            manifest, source, config, knn_cfg,
            window=args.window, hop=args.hop, net=net, out_dir=out,
            tsne_iterations=args.tsne_iterations,
        )
    fragment = out / f"fragment_{args.method}.json"
    save_report(report, fragment)
    print(f"wrote {fragment}")
    return 0


def _cmd_select_k(args) -> int:
    from .embedder import embed_images

    manifest = load_manifest(args.dataset)
    net = load_checkpoint(args.checkpoint)
    data = dataset_to_triplets(manifest, net.config.input_shape, args.window, args.hop)
    test_idx = data.indices("test")
    val_idx = data.indices("val")
    test_embeddings = embed_images(net, data.images[test_idx])
    val_embeddings = embed_images(net, data.images[val_idx])
    ref_values = np.array([label_to_linear(data.labels[i]) for i in test_idx])
    val_values = np.array([label_to_linear(data.labels[i]) for i in val_idx])
    k_values = range(1, min(args.k_max, len(test_idx)) + 1)
    selection = select_k_elbow(
        (test_embeddings, ref_values), (val_embeddings, val_values), k_values, WEIGHTING_UNIFORM
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "elbow.csv", "w", encoding="utf-8") as fh:
        fh.write("k,rmse,r2,max_dist\n")
        for k, r, r2, md in zip(
            selection.k_values, selection.rmse, selection.r2, selection.max_neighbor_distance
        ):
            fh.write(f"{k},{r!r},{r2!r},{md!r}\n")
    emit_line_chart(
        [("rmse", selection.k_values.tolist(), selection.rmse.tolist())],
        out / "elbow_rmse.svg", title="KNN RMSE vs K", xlabel="K", ylabel="RMSE",
    )
    print(f"elbow K = {selection.k}")
    return 0


def _cmd_project(args) -> int:
    from .embedder import embed_images

    manifest = load_manifest(args.dataset)
    net = load_checkpoint(args.checkpoint)
    data = dataset_to_triplets(manifest, net.config.input_shape, args.window, args.hop)
    idx = data.indices(args.split)
    if len(idx) == 0:
        raise DataError(f"no {args.split} entries in the dataset")
    labels = [data.labels[i] for i in idx]
    rng = np.random.default_rng(args.seed)
    keep = []
    for lb in sorted(set(labels), key=lambda l: l.sort_key()):
        members = [int(i) for i, l in zip(idx, labels) if l == lb]
        if len(members) > args.cap:
            members = sorted(rng.choice(members, size=args.cap, replace=False).tolist())
        keep.extend(members)
    embeddings = embed_images(net, data.images[keep])
    proj = tsne_project(
        embeddings,
        perplexity=args.perplexity,
        iterations=args.tsne_iterations,
        seed=args.seed,
        labels=[data.labels[i] for i in keep],
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    emit_scatter(proj, out / f"{args.split}_embeddings_tsne.svg", title="Embeddings (t-SNE)")
    print(f"final KL divergence {proj.final_kl:.4f}")
    return 0


def _cmd_report(args) -> int:
    fragments = [load_report(path) for path in args.fragments]
    if not fragments:
        raise DataError("no fragment files given")
    merged = merge_reports(*fragments)
    emit_report(merged, args.out)
    print(f"wrote report to {args.out}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="snrge", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-dataset", help="synthesize a labeled SNR dataset")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--config", type=Path, help="key = value dataset config file")
    p.add_argument("--grid", help="comma-separated dB levels")
    p.add_argument("--clips-per-level", dest="clips_per_level", type=int)
    p.add_argument("--sample-rate", dest="sample_rate", type=int)
    p.add_argument("--clip-seconds", dest="clip_seconds", type=float)
    p.add_argument("--noise-kind", dest="noise_kind", choices=("pink", "white"))
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_generate_dataset)

    p = sub.add_parser("train-embedder", help="train embedding networks")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--per-snr", dest="per_snr", action="store_true")
    mode.add_argument("--all-snr", dest="all_snr", action="store_true")
    _add_embedder_flags(p)
    p.set_defaults(func=_cmd_train_embedder)

    p = sub.add_parser("evaluate", help="score a sample source against the dataset")
    p.add_argument("--method", choices=("spectra", "pixels", "snn-nc", "snn-knn"), required=True)
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--fft-size", dest="fft_size", type=int, default=32768)
    p.add_argument("--checkpoint", type=Path, help="all-SNR checkpoint for snn-knn")
    p.add_argument("--per-snr-dir", dest="per_snr_dir", type=Path, help="checkpoint dir for snn-nc")
    p.add_argument("--k", type=int, help="fixed K (default: elbow-selected)")
    p.add_argument("--tsne-iterations", dest="tsne_iterations", type=int, default=500)
    _add_source_flags(p)
    _add_embedder_flags(p)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("select-k", help="emit elbow curves and the chosen K")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--k-max", dest="k_max", type=int, default=1000)
    p.add_argument("--window", type=int, default=1024)
    p.add_argument("--hop", type=int, default=256)
    p.set_defaults(func=_cmd_select_k)

    p = sub.add_parser("project", help="t-SNE scatter of dataset embeddings")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    p.add_argument("--cap", type=int, default=200, help="max points per label")
    p.add_argument("--perplexity", type=float, default=30.0)
    p.add_argument("--tsne-iterations", dest="tsne_iterations", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--window", type=int, default=1024)
    p.add_argument("--hop", type=int, default=256)
    p.set_defaults(func=_cmd_project)

    p = sub.add_parser("report", help="merge evaluation fragments and emit tables/figures")
    p.add_argument("fragments", nargs="+", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
