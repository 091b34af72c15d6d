"""Experiment orchestration: dataset-backed evaluation workflows and the
EvalReport they produce.

Candidate samples come from a SampleSource: either a directory of WAV files
(one subdirectory per target SNR) or the built-in generator simulator with a
controllable SNR bias. Reports are a pure function of configs, seeds, and
the dataset manifest digest; timestamps honour SOURCE_DATE_EPOCH so reruns
can be compared byte for byte.
"""

import csv
import dataclasses
import json
import logging
import os
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .audio import AudioClip, read_wav, write_wav
from .dsp import DEFAULT_HOP, DEFAULT_WINDOW, stft_spectrogram
from .embedder import (
    EmbedderConfig,
    TripletDataset,
    embed_images,
    init_network,
    resize_spectrogram,
    train,
)
from .errors import DataError, NumericError
from .figures import emit_line_chart, emit_scatter
from .inference import (
    KnnConfig,
    WEIGHTING_INVERSE,
    WEIGHTING_UNIFORM,
    compute_centroids,
    knn_predict_snr,
    label_to_linear,
    linear_to_snr_db,
    nc_predict,
    noise_binary_accuracy,
    rmsde,
    select_k_elbow,
)
from .metrics import METHOD_FREQUENCY, METHOD_PIXELS, ReferencePair, evaluate_snr_level
from .parallel import parallel_map
from .synth import (
    DatasetManifest,
    SnrLabel,
    format_db,
    simulate_generator,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DEFAULT_FFT_SIZE = 32768


# ---------------------------------------------------------------------------
# sample sources


@dataclass(frozen=True)
class SimulatorSource:
    """Emit simulator mixtures at each requested level, shifted by a bias."""

    snr_bias: float = 0.0
    quality: str = "clean"
    count: int = 200
    seed: int = 1234


@dataclass(frozen=True)
class WavDirectorySource:
    """Read samples from `<path>/<level>dB/*.wav` (e.g. `-15dB`, `10dB`)."""

    path: str


def source_level_dir(level_db: float) -> str:
    return f"{format_db(level_db)}dB"


def resolve_source_clips(source, level_db: float, manifest: DatasetManifest):
    """Clips a source provides for one target level, validated against the
    dataset's sample rate and clip length."""
    cfg = manifest.config
    if isinstance(source, SimulatorSource):
        return simulate_generator(
            level_db,
            snr_bias=source.snr_bias,
            quality=source.quality,
            count=source.count,
            seed=source.seed,
            sample_rate=cfg.sample_rate,
            clip_seconds=cfg.clip_seconds,
            ranges=cfg.ranges,
            noise_kind=cfg.noise_kind,
        )
    if isinstance(source, WavDirectorySource):
        subdir = Path(source.path) / source_level_dir(level_db)
        paths = sorted(subdir.glob("*.wav"))
        if not paths:
            raise DataError(f"source directory {subdir} holds no WAV files")
        clips = parallel_map(read_wav, paths)
        expected_len = int(round(cfg.clip_seconds * cfg.sample_rate))
        for path, clip in zip(paths, clips):
            if clip.sample_rate != cfg.sample_rate:
                raise DataError(
                    f"{path}: sample rate {clip.sample_rate} != dataset rate {cfg.sample_rate}"
                )
            if len(clip) != expected_len:
                raise DataError(f"{path}: {len(clip)} samples, expected {expected_len}")
        return clips
    raise ValueError(f"unknown sample source {source!r}")


def write_source_wavs(clips_by_level: dict, out_dir) -> None:
    """Lay out clips as a WavDirectorySource tree."""
    out_dir = Path(out_dir)
    for level_db, clips in clips_by_level.items():
        subdir = out_dir / source_level_dir(level_db)
        subdir.mkdir(parents=True, exist_ok=True)
        for i, clip in enumerate(clips):
            write_wav(subdir / f"{i:06d}.wav", clip)


def _describe_source(source) -> dict:
    doc = dataclasses.asdict(source)
    doc["kind"] = type(source).__name__
    return doc


# ---------------------------------------------------------------------------
# report


@dataclass
class LevelRecord:
    snr: SnrLabel
    n_samples: int | None = None
    frequency_score: float | None = None
    pixel_score: float | None = None
    nc_accuracy: float | None = None
    noise_accuracy: float | None = None
    rmsde_uniform: float | None = None
    rmsde_weighted: float | None = None


_RECORD_FIELDS = [f.name for f in dataclasses.fields(LevelRecord) if f.name != "snr"]


@dataclass
class EvalReport:
    metadata: dict = field(default_factory=dict)
    levels: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def record_for(self, snr: SnrLabel) -> LevelRecord:
        for rec in self.levels:
            if rec.snr == snr:
                return rec
        rec = LevelRecord(snr=snr)
        self.levels.append(rec)
        return rec

    def to_doc(self) -> dict:
        levels = []
        for rec in sorted(self.levels, key=lambda r: r.snr.sort_key()):
            doc = {"snr": rec.snr.to_json()}
            doc.update({name: getattr(rec, name) for name in _RECORD_FIELDS})
            levels.append(doc)
        return {
            "schema_version": self.schema_version,
            "metadata": self.metadata,
            "levels": levels,
            "extras": self.extras,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "EvalReport":
        levels = []
        for rec in doc.get("levels", []):
            fields = {k: v for k, v in rec.items() if k != "snr"}
            levels.append(LevelRecord(snr=SnrLabel.from_json(rec["snr"]), **fields))
        return cls(
            metadata=doc.get("metadata", {}),
            levels=levels,
            extras=doc.get("extras", {}),
            schema_version=doc.get("schema_version", SCHEMA_VERSION),
        )


def _timestamp() -> str:
    pinned = os.environ.get("SOURCE_DATE_EPOCH")
    moment = int(pinned) if pinned is not None else int(time.time())
    return datetime.fromtimestamp(moment, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _base_metadata(manifest: DatasetManifest, workflow: str, configs: dict, seeds: dict) -> dict:
    return {
        "workflow": workflow,
        "created_utc": _timestamp(),
        "manifest_digest": manifest.digest(),
        "configs": configs,
        "seeds": seeds,
    }


def merge_reports(*reports) -> EvalReport:
    """Union of fragment reports: level records merge field-wise by SNR."""
    merged = EvalReport()
    merged.metadata = {"created_utc": _timestamp(), "fragments": []}
    for report in reports:
        merged.metadata["fragments"].append(report.metadata)
        digest = report.metadata.get("manifest_digest")
        if digest is not None:
            existing = merged.metadata.setdefault("manifest_digest", digest)
            if existing != digest:
                raise DataError("fragments come from different dataset manifests")
        for rec in report.levels:
            target = merged.record_for(rec.snr)
            for name in _RECORD_FIELDS:
                value = getattr(rec, name)
                if value is not None:
                    setattr(target, name, value)
        for key, value in report.extras.items():
            merged.extras[key] = value
    return merged


def save_report(report: EvalReport, path) -> None:
    Path(path).write_text(
        json.dumps(report.to_doc(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_report(path) -> EvalReport:
    return EvalReport.from_doc(json.loads(Path(path).read_text(encoding="utf-8")))


def emit_report(report: EvalReport, out_dir) -> None:
    """Write report.json, per-table CSVs, and line-chart SVGs to `out_dir`.

    The directory is created when its parent exists; a missing parent is an
    error.
    """
    if not report.levels and not report.extras:
        raise ValueError("report is empty")
    out_dir = Path(out_dir)
    if not out_dir.exists():
        if not out_dir.parent.exists():
            raise DataError(f"parent of report directory {out_dir} does not exist")
        out_dir.mkdir()
    save_report(report, out_dir / "report.json")

    records = sorted(report.levels, key=lambda r: r.snr.sort_key())
    with open(out_dir / "levels.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["snr"] + _RECORD_FIELDS)
        for rec in records:
            row = [str(rec.snr)]
            for name in _RECORD_FIELDS:
                value = getattr(rec, name)
                row.append("" if value is None else repr(value) if isinstance(value, float) else value)
            writer.writerow(row)

    db_records = [r for r in records if not r.snr.is_noise]
    score_series = []
    for name in ("frequency_score", "pixel_score", "nc_accuracy", "noise_accuracy"):
        points = [(r.snr.db, getattr(r, name)) for r in db_records if getattr(r, name) is not None]
        if points:
            score_series.append((name, [p[0] for p in points], [p[1] for p in points]))
    if score_series:
        emit_line_chart(
            score_series, out_dir / "score_vs_snr.svg",
            title="Evaluation scores by SNR", xlabel="SNR (dB)", ylabel="score",
        )
    rmsde_series = []
    for name in ("rmsde_uniform", "rmsde_weighted"):
        points = [(r.snr.db, getattr(r, name)) for r in db_records if getattr(r, name) is not None]
        if points:
            rmsde_series.append((name, [p[0] for p in points], [p[1] for p in points]))
    if rmsde_series:
        emit_line_chart(
            rmsde_series, out_dir / "rmsde_vs_snr.svg",
            title="SNR recovery error", xlabel="SNR (dB)", ylabel="RMSDE (dB)",
        )
    elbow = report.extras.get("elbow")
    if elbow:
        with open(out_dir / "elbow.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "rmse", "r2", "max_dist"])
            for k, r, r2, md in zip(elbow["k"], elbow["rmse"], elbow["r2"], elbow["max_dist"]):
                writer.writerow([k, repr(r), repr(r2), repr(md)])


# ---------------------------------------------------------------------------
# shared data loading


def _load_clips(manifest: DatasetManifest, entries):
    return parallel_map(lambda e: read_wav(manifest.clip_path(e)), entries)


def clip_image(clip: AudioClip, input_shape, window: int, hop: int) -> np.ndarray:
    img = stft_spectrogram(clip, window, hop)
    return resize_spectrogram(img, input_shape[0], input_shape[1]).pixels


def dataset_to_triplets(
    manifest: DatasetManifest,
    input_shape,
    window: int = DEFAULT_WINDOW,
    hop: int = DEFAULT_HOP,
    entries=None,
) -> TripletDataset:
    """Load manifest clips as resized greyscale images ready for training."""
    entries = manifest.entries if entries is None else entries
    images = parallel_map(
        lambda e: clip_image(read_wav(manifest.clip_path(e)), input_shape, window, hop),
        entries,
    )
    return TripletDataset(
        images=np.stack(images),
        labels=[e.label for e in entries],
        splits=np.array([e.split for e in entries]),
    )


def _clips_to_images(clips, input_shape, window: int, hop: int) -> np.ndarray:
    return np.stack(parallel_map(lambda c: clip_image(c, input_shape, window, hop), clips))


def level_entries(manifest: DatasetManifest, level_db: float):
    """Whistle entries at one level plus all noise entries."""
    return manifest.select(label=SnrLabel.decibel(level_db)) + manifest.select(
        label=SnrLabel.noise()
    )


def train_single_embedder(
    manifest: DatasetManifest,
    config: EmbedderConfig,
    window: int = DEFAULT_WINDOW,
    hop: int = DEFAULT_HOP,
):
    """Train one embedder over every SNR level and the noise class."""
    data = dataset_to_triplets(manifest, config.input_shape, window, hop)
    return train(init_network(config), data, config)


def train_level_embedder(
    manifest: DatasetManifest,
    level_db: float,
    config: EmbedderConfig,
    window: int = DEFAULT_WINDOW,
    hop: int = DEFAULT_HOP,
):
    """Train a whistle-vs-noise embedder for a single SNR level."""
    data = dataset_to_triplets(
        manifest, config.input_shape, window, hop, entries=level_entries(manifest, level_db)
    )
    return train(init_network(config), data, config)


# ---------------------------------------------------------------------------
# workflows


def run_spectral_workflow(
    manifest: DatasetManifest,
    source,
    method: str,
    *,
    fft_size: int = DEFAULT_FFT_SIZE,
    window: int = DEFAULT_WINDOW,
    hop: int = DEFAULT_HOP,
) -> EvalReport:
    """Score source samples per SNR against per-level whistle references and
    the shared noise reference, built from the training split."""
    if method not in (METHOD_FREQUENCY, METHOD_PIXELS):
        raise ValueError(f"unknown method {method!r}")
    noise_train = _load_clips(manifest, manifest.select(label=SnrLabel.noise(), split="train"))
    if not noise_train:
        raise DataError("manifest has no noise training clips")
    report = EvalReport(
        metadata=_base_metadata(
            manifest,
            f"spectral-{method}",
            configs={
                "method": method,
                "fft_size": fft_size,
                "window": window,
                "hop": hop,
                "source": _describe_source(source),
                "dataset": manifest.config.to_kv(),
            },
            seeds={"dataset": manifest.config.seed},
        )
    )
    for level in manifest.grid:
        label = SnrLabel.decibel(level)
        whistle_train = _load_clips(manifest, manifest.select(label=label, split="train"))
        if not whistle_train:
            raise DataError(f"manifest has no training clips at {label}")
        if method == METHOD_FREQUENCY:
            refs = ReferencePair.frequency(whistle_train, noise_train, fft_size)
        else:
            refs = ReferencePair.pixels(whistle_train, noise_train, window, hop)
        samples = resolve_source_clips(source, level, manifest)
        score = evaluate_snr_level(samples, refs, method, label)
        rec = report.record_for(label)
        rec.n_samples = score.n_samples
        if method == METHOD_FREQUENCY:
            rec.frequency_score = score.mean_score
        else:
            rec.pixel_score = score.mean_score
        log.info("%s score at %s: %.3f", method, label, score.mean_score)
    return report


def _embedder_config_doc(config: EmbedderConfig) -> dict:
    doc = dataclasses.asdict(config)
    doc["input_shape"] = list(doc["input_shape"])
    return doc


def run_individual_snn_workflow(
    manifest: DatasetManifest,
    source,
    config: EmbedderConfig,
    *,
    levels=None,
    window: int = DEFAULT_WINDOW,
    hop: int = DEFAULT_HOP,
    nets: dict | None = None,
) -> EvalReport:
    """Train one whistle-vs-noise embedder per SNR level and report the
    nearest-centroid accuracy of source samples at that level.

    A level whose training diverges is recorded as failed without aborting
    the rest. Levels whose final validation loss sits more than two median
    absolute deviations from the grid median are flagged. Pass `nets`
    (level -> trained network) to reuse checkpoints instead of training.
    """
    levels = list(levels) if levels is not None else list(manifest.grid)
    report = EvalReport(
        metadata=_base_metadata(
            manifest,
            "individual-snn",
            configs={
                "embedder": _embedder_config_doc(config),
                "levels": levels,
                "window": window,
                "hop": hop,
                "source": _describe_source(source),
                "dataset": manifest.config.to_kv(),
            },
            seeds={"dataset": manifest.config.seed, "embedder": config.seed},
        )
    )
    final_losses = {}
    failures = {}
    for index, level in enumerate(levels):
        label = SnrLabel.decibel(level)
        data = dataset_to_triplets(
            manifest, config.input_shape, window, hop, entries=level_entries(manifest, level)
        )
        if nets is not None and level in nets:
            level_net = nets[level]
        else:
            level_config = dataclasses.replace(config, seed=config.seed + index)
            try:
                result = train(init_network(level_config), data, level_config)
            except NumericError as exc:
                log.warning("level %s failed: %s", label, exc)
                failures[format_db(level)] = str(exc)
                continue
            final_losses[format_db(level)] = result.final_val_loss
            level_net = result.net

        test_idx = data.indices("test")
        test_embeddings = embed_images(level_net, data.images[test_idx])
        test_labels = [data.labels[i] for i in test_idx]
        centroids = compute_centroids(test_embeddings, test_labels)

        samples = resolve_source_clips(source, level, manifest)
        sample_images = _clips_to_images(samples, config.input_shape, window, hop)
        sample_embeddings = embed_images(level_net, sample_images)
        predictions = [nc_predict(centroids, e) for e in sample_embeddings]
        accuracy = sum(1 for p in predictions if p == label) / len(predictions)

        rec = report.record_for(label)
        rec.n_samples = len(predictions)
        rec.nc_accuracy = accuracy
        log.info("per-level NC accuracy at %s: %.3f", label, accuracy)

    losses = np.array(list(final_losses.values()))
    flagged = []
    if len(losses) >= 3:
        med = np.median(losses)
        mad = np.median(np.abs(losses - med))
        if mad > 0:
            flagged = [
                lvl for lvl, loss in final_losses.items() if abs(loss - med) > 2.0 * mad
            ]
    report.extras["individual_snn"] = {
        "final_val_loss": final_losses,
        "flagged_levels": flagged,
        "failed_levels": failures,
    }
    return report


def _loo_rmsde_per_level(embeddings, labels, cfg: KnnConfig):
    """Leave-one-out KNN RMSDE of labelled embeddings per decibel level."""
    values = np.array([label_to_linear(lb) for lb in labels])
    per_level = {}
    pooled_pred, pooled_actual = [], []
    n = len(labels)
    cfg = KnnConfig(min(cfg.k, n - 1), cfg.weighting, cfg.zero_floor_db)
    for level in sorted({lb.db for lb in labels if not lb.is_noise}):
        preds, actuals = [], []
        for i in range(n):
            if labels[i].is_noise or labels[i].db != level:
                continue
            keep = np.arange(n) != i
            pred_linear = knn_predict_snr(
                (embeddings[keep], values[keep]), embeddings[i], cfg
            )
            preds.append(linear_to_snr_db(max(pred_linear, 0.0), cfg.zero_floor_db))
            actuals.append(level)
        per_level[format_db(level)] = rmsde(preds, actuals)
        pooled_pred.extend(preds)
        pooled_actual.extend(actuals)
    pooled = rmsde(pooled_pred, pooled_actual)
    return per_level, pooled


def run_single_snn_workflow(
    manifest: DatasetManifest,
    source,
    config: EmbedderConfig,
    knn_cfg: KnnConfig | None = None,
    *,
    window: int = DEFAULT_WINDOW,
    hop: int = DEFAULT_HOP,
    k_cap: int = 1000,
    out_dir=None,
    tsne_cap_per_label: int = 200,
    tsne_iterations: int = 1000,
    tsne_perplexity: float = 30.0,
    net=None,
) -> EvalReport:
    """Train a single embedder over all SNR and noise data, then recover
    labels (nearest centroid) and SNR values (KNN regression) for source
    samples at every grid level.

    Reference embeddings come from the held-out test split. When `knn_cfg`
    is omitted, K is chosen by the elbow rule on the validation-query RMSE
    curve. With `out_dir` set, t-SNE projections of real and source
    embeddings are written there. Pass `net` to reuse a trained network
    instead of training one here.
    """
    data = dataset_to_triplets(manifest, config.input_shape, window, hop)
    result = None
    if net is None:
        result = train(init_network(config), data, config)
        net = result.net

    test_idx = data.indices("test")
    val_idx = data.indices("val")
    test_embeddings = embed_images(net, data.images[test_idx])
    val_embeddings = embed_images(net, data.images[val_idx])
    test_labels = [data.labels[i] for i in test_idx]
    val_labels = [data.labels[i] for i in val_idx]

    centroids = compute_centroids(test_embeddings, test_labels)
    ref_values = np.array([label_to_linear(lb) for lb in test_labels])
    references = (test_embeddings, ref_values)

    k_values = np.arange(1, min(k_cap, len(test_labels)) + 1)
    selection = select_k_elbow(
        references,
        (val_embeddings, np.array([label_to_linear(lb) for lb in val_labels])),
        k_values,
        weighting=WEIGHTING_UNIFORM,
    )
    if knn_cfg is None:
        knn_cfg = KnnConfig(k=selection.k)
    uniform_cfg = KnnConfig(knn_cfg.k, WEIGHTING_UNIFORM, knn_cfg.zero_floor_db)
    weighted_cfg = KnnConfig(knn_cfg.k, WEIGHTING_INVERSE, knn_cfg.zero_floor_db)

    report = EvalReport(
        metadata=_base_metadata(
            manifest,
            "single-snn",
            configs={
                "embedder": _embedder_config_doc(config),
                "knn": dataclasses.asdict(uniform_cfg) | {"weighted": True},
                "window": window,
                "hop": hop,
                "source": _describe_source(source),
                "dataset": manifest.config.to_kv(),
            },
            seeds={"dataset": manifest.config.seed, "embedder": config.seed},
        )
    )

    source_projection_points = []
    source_projection_labels = []
    for level in manifest.grid:
        label = SnrLabel.decibel(level)
        samples = resolve_source_clips(source, level, manifest)
        images = _clips_to_images(samples, config.input_shape, window, hop)
        embeddings = embed_images(net, images)
        predictions = [nc_predict(centroids, e) for e in embeddings]

        preds_uniform = [
            linear_to_snr_db(max(knn_predict_snr(references, e, uniform_cfg), 0.0))
            for e in embeddings
        ]
        preds_weighted = [
            linear_to_snr_db(max(knn_predict_snr(references, e, weighted_cfg), 0.0))
            for e in embeddings
        ]
        actuals = [level] * len(embeddings)

        rec = report.record_for(label)
        rec.n_samples = len(embeddings)
        rec.nc_accuracy = sum(1 for p in predictions if p == label) / len(predictions)
        rec.noise_accuracy = noise_binary_accuracy(predictions, [False] * len(predictions))
        rec.rmsde_uniform = rmsde(preds_uniform, actuals)
        rec.rmsde_weighted = rmsde(preds_weighted, actuals)
        report.extras.setdefault("mean_predicted_db", {})[format_db(level)] = float(
            np.mean(preds_weighted)
        )
        source_projection_points.append(embeddings)
        source_projection_labels.extend([label] * len(embeddings))
        log.info(
            "single-SNN at %s: nc %.3f, noise-acc %.3f, rmsde(w) %.2f dB",
            label, rec.nc_accuracy, rec.noise_accuracy, rec.rmsde_weighted,
        )

    test_per_level, test_pooled = _loo_rmsde_per_level(test_embeddings, test_labels, weighted_cfg)
    report.extras["test_rmsde_weighted"] = {"per_level": test_per_level, "pooled": test_pooled}
    report.extras["elbow"] = {
        "chosen_k": selection.k,
        "used_k": knn_cfg.k,
        "k": selection.k_values.tolist(),
        "rmse": selection.rmse.tolist(),
        "r2": selection.r2.tolist(),
        "max_dist": selection.max_neighbor_distance.tolist(),
    }
    if result is not None:
        report.extras["training"] = {
            "final_val_loss": result.final_val_loss,
            "epochs_run": len(result.history),
        }

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        from .tsne import tsne_project  # local import keeps module deps one-way

        def project_capped(points, labels, stem, title):
            # perplexity must satisfy 3*perp < N; shrink it for small sets
            perplexity = min(tsne_perplexity, (len(points) - 1) / 3.0)
            if len(points) < 4 or perplexity < 1.0:
                log.warning("too few points (%d) to project %s", len(points), stem)
                return None
            proj = tsne_project(
                points,
                perplexity=perplexity,
                iterations=tsne_iterations,
                seed=config.seed,
                labels=labels,
            )
            emit_scatter(proj, out_dir / f"{stem}.svg", title=title)
            return proj

        rng = np.random.default_rng([config.seed, 99])
        keep = []
        for lb in centroids.labels:
            members = [i for i, x in enumerate(test_labels) if x == lb]
            if len(members) > tsne_cap_per_label:
                members = list(rng.choice(members, size=tsne_cap_per_label, replace=False))
            keep.extend(sorted(members))
        real_proj = project_capped(
            test_embeddings[keep],
            [test_labels[i] for i in keep],
            "real_embeddings_tsne",
            "Real embeddings (t-SNE)",
        )
        synth_proj = project_capped(
            np.concatenate(source_projection_points),
            source_projection_labels,
            "source_embeddings_tsne",
            "Source embeddings (t-SNE)",
        )
        report.extras["projections"] = {
            "real_final_kl": None if real_proj is None else real_proj.final_kl,
            "source_final_kl": None if synth_proj is None else synth_proj.final_kl,
        }
    return report
