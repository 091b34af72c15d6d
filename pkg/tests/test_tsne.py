import numpy as np
import pytest

from snrge.tsne import (
    Projection2D,
    _sq_distance_matrix,
    conditional_affinities,
    tsne_project,
)


def two_clusters(seed=0, n_per=50, dim=8, separation=10.0, spread=0.5):
    rng = np.random.default_rng(seed)
    a = rng.normal(0.0, spread, size=(n_per, dim))
    b = rng.normal(0.0, spread, size=(n_per, dim))
    b[:, 0] += separation
    return np.vstack([a, b]), [0] * n_per + [1] * n_per


def silhouette(points, labels):
    points = np.asarray(points)
    n = len(points)
    d = np.sqrt(np.sum((points[:, None, :] - points[None, :, :]) ** 2, axis=-1))
    scores = []
    for i in range(n):
        same = [j for j in range(n) if labels[j] == labels[i] and j != i]
        other = [j for j in range(n) if labels[j] != labels[i]]
        a_i = d[i, same].mean()
        b_i = d[i, other].mean()
        scores.append((b_i - a_i) / max(a_i, b_i))
    return float(np.mean(scores))


def test_affinity_rows_are_distributions():
    x, _ = two_clusters()
    p = conditional_affinities(_sq_distance_matrix(x), 20.0)
    sums = p.sum(axis=1)
    assert np.max(np.abs(sums - 1.0)) <= 1e-9
    assert np.all(np.diag(p) == 0.0)


def test_point_count_preserved():
    x, labels = two_clusters(n_per=20)
    proj = tsne_project(x, perplexity=5, iterations=250, seed=0, labels=labels)
    assert proj.points.shape == (40, 2)
    assert len(proj.labels) == 40
    assert np.all(np.isfinite(proj.points))


def test_separated_clusters_stay_separated():
    x, labels = two_clusters()
    proj = tsne_project(x, perplexity=20, iterations=500, seed=0, labels=labels)
    assert silhouette(proj.points, labels) >= 0.3


def test_kl_descends_after_exaggeration():
    x, labels = two_clusters(seed=1)
    proj = tsne_project(x, perplexity=20, iterations=500, seed=1, labels=labels)
    assert proj.final_kl <= proj.kl_history[250]
    assert proj.final_kl == proj.kl_history[-1]


def test_deterministic_given_seed():
    x, labels = two_clusters(seed=2, n_per=20)
    a = tsne_project(x, perplexity=5, iterations=300, seed=5, labels=labels)
    b = tsne_project(x, perplexity=5, iterations=300, seed=5, labels=labels)
    assert np.array_equal(a.points, b.points)
    assert a.final_kl == b.final_kl


def test_rotation_insensitive_cluster_structure():
    x, labels = two_clusters(seed=3, n_per=30)
    rng = np.random.default_rng(0)
    q, _ = np.linalg.qr(rng.normal(size=(x.shape[1], x.shape[1])))
    # learning rate ~ N / (4 * exaggeration): converged regime for 60 points
    base = tsne_project(x, perplexity=10, iterations=1000, seed=7, labels=labels, learning_rate=50)
    rotated = tsne_project(
        x @ q, perplexity=10, iterations=1000, seed=7, labels=labels, learning_rate=50
    )
    assert abs(silhouette(base.points, labels) - silhouette(rotated.points, labels)) <= 0.1


def test_validation_errors():
    x, _ = two_clusters(n_per=20)
    with pytest.raises(ValueError):
        tsne_project(x, perplexity=20.0, iterations=250, seed=0)  # 3*perp >= N
    with pytest.raises(ValueError):
        tsne_project(x[:3], perplexity=1.0, iterations=250, seed=0)  # too few points
    with pytest.raises(ValueError):
        tsne_project(x, perplexity=5.0, iterations=100, seed=0)  # too few iterations
    with pytest.raises(ValueError):
        tsne_project(x, perplexity=5.0, iterations=250, seed=0, labels=[0] * 3)
