"""Label and SNR recovery from embeddings.

Nearest-centroid classification, K-nearest-neighbour regression on linear
SNR values (uniform or inverse-distance weighted), decibel conversions with
a floor for zero predictions, RMS decibel error, and elbow-based K choice.
"""

from dataclasses import dataclass

import numpy as np

from .synth import SnrLabel

ZERO_FLOOR_DB = -40.0
WEIGHT_EPS = 1e-12

WEIGHTING_UNIFORM = "uniform"
WEIGHTING_INVERSE = "inverse_distance"


@dataclass
class KnnConfig:
    k: int
    weighting: str = WEIGHTING_UNIFORM
    zero_floor_db: float = ZERO_FLOOR_DB

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.weighting not in (WEIGHTING_UNIFORM, WEIGHTING_INVERSE):
            raise ValueError(f"unknown weighting {self.weighting!r}")


@dataclass
class CentroidSet:
    """Per-label mean embeddings, ordered noise first then ascending dB."""

    labels: list
    centroids: np.ndarray  # one row per label

    def __post_init__(self):
        self.centroids = np.asarray(self.centroids, dtype=np.float64)
        if len(self.labels) != self.centroids.shape[0]:
            raise ValueError("one centroid per label required")


def snr_db_to_linear(db: float) -> float:
    """Decibels to linear power ratio: 10^(db/10)."""
    return float(10.0 ** (np.float64(db) / 10.0))


def linear_to_snr_db(ratio: float, zero_floor_db: float = ZERO_FLOOR_DB) -> float:
    """Linear power ratio to decibels; a ratio of zero maps to the floor."""
    if ratio < 0.0:
        raise ValueError(f"linear SNR cannot be negative, got {ratio:g}")
    if ratio == 0.0:
        return float(zero_floor_db)
    return float(10.0 * np.log10(np.float64(ratio)))


def label_to_linear(label: SnrLabel) -> float:
    """Noise enters regression with a linear SNR of zero."""
    return 0.0 if label.is_noise else snr_db_to_linear(label.db)


def compute_centroids(embeddings, labels) -> CentroidSet:
    """Arithmetic mean embedding per label."""
    embeddings = np.asarray(embeddings, dtype=np.float64)
    labels = list(labels)
    if embeddings.shape[0] != len(labels):
        raise ValueError("one label per embedding required")
    unique = sorted(set(labels), key=lambda lb: lb.sort_key())
    rows = []
    for lb in unique:
        members = embeddings[[i for i, x in enumerate(labels) if x == lb]]
        if members.shape[0] == 0:
            raise ValueError(f"label {lb} has no members")
        rows.append(members.mean(axis=0))
    return CentroidSet(unique, np.stack(rows))


def _sq_distances(query: np.ndarray, points: np.ndarray) -> np.ndarray:
    diff = points - query[None, :]
    return np.sum(diff * diff, axis=1)


def nc_predict(centroids: CentroidSet, query) -> SnrLabel:
    """Label of the nearest centroid; ties resolve toward lower dB, with
    noise below every decibel level."""
    if len(centroids.labels) == 0:
        raise ValueError("empty centroid set")
    query = np.asarray(query, dtype=np.float64)
    if query.shape != (centroids.centroids.shape[1],):
        raise ValueError(
            f"query dimension {query.shape} does not match centroids "
            f"({centroids.centroids.shape[1]})"
        )
    d2 = _sq_distances(query, centroids.centroids)
    return centroids.labels[int(np.argmin(d2))]  # first minimum = lowest label


def _neighbor_order(query: np.ndarray, references: np.ndarray) -> np.ndarray:
    # Stable sort on squared distance ties by index.
    return np.argsort(_sq_distances(query, references), kind="stable")


def knn_predict_snr(references, query, cfg: KnnConfig) -> float:
    """Predicted linear SNR from the query's K nearest reference embeddings.

    Uniform weighting takes the plain mean; inverse-distance weighting uses
    w = 1 / (d + 1e-12) so an exact match dominates.
    """
    ref_embeddings, ref_values = references
    ref_embeddings = np.asarray(ref_embeddings, dtype=np.float64)
    ref_values = np.asarray(ref_values, dtype=np.float64)
    if cfg.k > ref_embeddings.shape[0]:
        raise ValueError(f"k={cfg.k} exceeds reference count {ref_embeddings.shape[0]}")
    query = np.asarray(query, dtype=np.float64)
    order = _neighbor_order(query, ref_embeddings)[: cfg.k]
    values = ref_values[order]
    if cfg.weighting == WEIGHTING_UNIFORM:
        return float(np.mean(values))
    dists = np.sqrt(_sq_distances(query, ref_embeddings)[order])
    weights = 1.0 / (dists + WEIGHT_EPS)
    return float(np.sum(weights * values) / np.sum(weights))


def rmsde(predicted_db, actual_db) -> float:
    """Root mean square decibel error between prediction and truth."""
    predicted_db = np.asarray(predicted_db, dtype=np.float64)
    actual_db = np.asarray(actual_db, dtype=np.float64)
    if predicted_db.shape != actual_db.shape or predicted_db.ndim != 1:
        raise ValueError("predicted and actual must be equal-length 1-D sequences")
    if len(predicted_db) == 0:
        raise ValueError("rmsde of an empty sequence is undefined")
    diff = predicted_db - actual_db
    return float(np.sqrt(np.mean(diff * diff)))


def noise_binary_accuracy(predictions, actual_is_noise) -> float:
    """Fraction of samples whose noise-vs-not prediction matches the flag."""
    predictions = list(predictions)
    flags = list(actual_is_noise)
    if len(predictions) != len(flags):
        raise ValueError("predictions and flags must have equal length")
    if not predictions:
        raise ValueError("no predictions to score")
    hits = sum(1 for p, f in zip(predictions, flags) if p.is_noise == bool(f))
    return hits / len(predictions)


@dataclass
class KSelection:
    """Chosen K together with the diagnostic curves it was read from."""

    k: int
    k_values: np.ndarray
    rmse: np.ndarray
    r2: np.ndarray
    max_neighbor_distance: np.ndarray


def find_knee(k_values, curve) -> int:
    """Knee of a curve: the point with maximum perpendicular distance to the
    chord between the curve's endpoints, after normalizing both axes to
    [0, 1]. A flat or straight curve has no knee and yields the smallest k."""
    k_values = np.asarray(k_values, dtype=np.float64)
    curve = np.asarray(curve, dtype=np.float64)
    if k_values.shape != curve.shape or k_values.ndim != 1 or len(k_values) == 0:
        raise ValueError("k_values and curve must be equal-length non-empty 1-D sequences")
    if len(k_values) == 1:
        return int(k_values[0])

    def normalize(v):
        span = v[-1] - v[0] if v[-1] != v[0] else (v.max() - v.min())
        if span == 0:
            return np.zeros_like(v)
        return (v - v[0]) / span

    x = normalize(k_values)
    y = normalize(curve)
    # Distance from each point to the chord through the normalized endpoints.
    x0, y0, x1, y1 = x[0], y[0], x[-1], y[-1]
    chord = np.hypot(x1 - x0, y1 - y0)
    if chord == 0:
        return int(k_values[0])
    dist = np.abs((y1 - y0) * x - (x1 - x0) * y + x1 * y0 - y1 * x0) / chord
    if dist.max() <= 1e-12:
        return int(k_values[0])
    return int(k_values[int(np.argmax(dist))])


def knn_curves(references, queries, k_values, weighting: str = WEIGHTING_UNIFORM):
    """RMSE, R^2, and max neighbour distance of KNN regression, for every K.

    Computed from one sorted neighbour table per query via prefix sums, so
    sweeping K over [1, len(references)] costs one sort per query.
    """
    ref_embeddings, ref_values = references
    query_embeddings, query_values = queries
    ref_embeddings = np.asarray(ref_embeddings, dtype=np.float64)
    ref_values = np.asarray(ref_values, dtype=np.float64)
    query_embeddings = np.asarray(query_embeddings, dtype=np.float64)
    query_values = np.asarray(query_values, dtype=np.float64)
    k_values = np.asarray(k_values, dtype=np.int64)
    if len(k_values) == 0:
        raise ValueError("k range is empty")
    if k_values.min() < 1 or k_values.max() > ref_embeddings.shape[0]:
        raise ValueError("k range must lie within [1, reference count]")

    n_q = query_embeddings.shape[0]
    preds = np.zeros((n_q, len(k_values)))
    kth_dist = np.zeros((n_q, len(k_values)))
    for i in range(n_q):
        d2 = _sq_distances(query_embeddings[i], ref_embeddings)
        order = np.argsort(d2, kind="stable")
        values = ref_values[order]
        dists = np.sqrt(d2[order])
        if weighting == WEIGHTING_UNIFORM:
            cum = np.cumsum(values)
            preds[i] = cum[k_values - 1] / k_values
        else:
            w = 1.0 / (dists + WEIGHT_EPS)
            cum_wv = np.cumsum(w * values)
            cum_w = np.cumsum(w)
            preds[i] = cum_wv[k_values - 1] / cum_w[k_values - 1]
        kth_dist[i] = dists[k_values - 1]

    err = preds - query_values[:, None]
    rmse = np.sqrt(np.mean(err * err, axis=0))
    ss_tot = np.sum((query_values - query_values.mean()) ** 2)
    if ss_tot == 0:
        r2 = np.full(len(k_values), np.nan)
    else:
        r2 = 1.0 - np.sum(err * err, axis=0) / ss_tot
    return rmse, r2, kth_dist.max(axis=0)


def select_k_elbow(references, validation, k_range, weighting: str = WEIGHTING_UNIFORM) -> KSelection:
    """Choose K at the knee of the RMSE-vs-K curve.

    The R^2 and max-neighbour-distance curves are computed over the same
    range and returned for diagnostics; only the RMSE curve drives the
    choice.
    """
    k_values = np.asarray(sorted(set(int(k) for k in k_range)), dtype=np.int64)
    rmse, r2, max_dist = knn_curves(references, validation, k_values, weighting)
    chosen = find_knee(k_values, rmse)
    return KSelection(chosen, k_values, rmse, r2, max_dist)
