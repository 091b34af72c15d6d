"""Exact (quadratic) t-SNE projection to two dimensions.

Conditional affinities use a per-point bandwidth found by binary search on
the perplexity, the joint distribution is the symmetrized average, and the
map is optimized by momentum gradient descent with early exaggeration for
the first 250 iterations. The KL divergence against the true (unexaggerated)
affinities is tracked every iteration.
"""

from dataclasses import dataclass, field

import numpy as np

MAX_EXACT_POINTS = 5000
_EXAGGERATION_ITERS = 250
_EXAGGERATION_FACTOR = 12.0
_MOMENTUM_EARLY = 0.5
_MOMENTUM_LATE = 0.8
_P_MIN = 1e-12


@dataclass
class Projection2D:
    points: np.ndarray  # (N, 2)
    labels: list
    final_kl: float
    kl_history: list = field(default_factory=list)


def _sq_distance_matrix(x: np.ndarray) -> np.ndarray:
    sq = np.sum(x * x, axis=1, keepdims=True)
    d2 = sq + sq.T - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


def _row_affinities(d2_row: np.ndarray, i: int, beta: float) -> np.ndarray:
    p = np.exp(-d2_row * beta)
    p[i] = 0.0
    total = p.sum()
    return p / total if total > 0 else p


def conditional_affinities(d2: np.ndarray, perplexity: float, tol: float = 1e-5, max_iter: int = 50):
    """Per-row conditional distributions whose entropy matches the target
    perplexity, via binary search on the precision beta = 1/(2 sigma^2)."""
    n = d2.shape[0]
    target = np.log(perplexity)
    p_cond = np.zeros((n, n))
    for i in range(n):
        beta, lo, hi = 1.0, 0.0, np.inf
        row = d2[i]
        for _ in range(max_iter):
            p = _row_affinities(row, i, beta)
            nz = p > 0
            entropy = -np.sum(p[nz] * np.log(p[nz]))
            gap = entropy - target
            if abs(gap) < tol:
                break
            if gap > 0:  # too spread out: raise beta
                lo = beta
                beta = beta * 2.0 if hi == np.inf else (lo + hi) / 2.0
            else:
                hi = beta
                beta = (lo + hi) / 2.0
        p_cond[i] = p
    return p_cond


def _kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def tsne_project(
    embeddings,
    perplexity: float = 30.0,
    iterations: int = 1000,
    seed: int = 0,
    labels=None,
    learning_rate: float = 200.0,
) -> Projection2D:
    """Project points to 2-D, recording the KL divergence per iteration."""
    x = np.asarray(embeddings, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 4:
        raise ValueError("t-SNE needs at least 4 points in a 2-D array")
    n = x.shape[0]
    if n > MAX_EXACT_POINTS:
        raise ValueError(
            f"{n} points exceeds the exact-mode cap of {MAX_EXACT_POINTS}; subsample first"
        )
    if 3.0 * perplexity >= n:
        raise ValueError(f"perplexity {perplexity:g} infeasible for {n} points (need 3*perp < N)")
    if iterations < _EXAGGERATION_ITERS:
        raise ValueError(f"iterations must be >= {_EXAGGERATION_ITERS}")

    p_cond = conditional_affinities(_sq_distance_matrix(x), perplexity)
    p = (p_cond + p_cond.T) / (2.0 * n)
    np.maximum(p, _P_MIN, out=p)

    rng = np.random.default_rng(seed)
    y = rng.normal(0.0, 1e-4, size=(n, 2))
    velocity = np.zeros_like(y)
    gains = np.ones_like(y)
    kl_history = []

    for it in range(iterations):
        d2 = _sq_distance_matrix(y)
        q_kernel = 1.0 / (1.0 + d2)
        np.fill_diagonal(q_kernel, 0.0)
        q = q_kernel / q_kernel.sum()
        np.maximum(q, _P_MIN, out=q)

        exaggeration = _EXAGGERATION_FACTOR if it < _EXAGGERATION_ITERS else 1.0
        coeff = (exaggeration * p - q) * q_kernel
        grad = 4.0 * (np.diag(coeff.sum(axis=1)) - coeff) @ y

        # per-coordinate adaptive gains, the standard schedule: x0.8 when the
        # gradient sign matches the velocity sign, +0.2 when it flips
        same_sign = np.sign(grad) == np.sign(velocity)
        gains = np.where(same_sign, gains * 0.8, gains + 0.2)
        np.maximum(gains, 0.01, out=gains)

        momentum = _MOMENTUM_EARLY if it < _EXAGGERATION_ITERS else _MOMENTUM_LATE
        velocity = momentum * velocity - learning_rate * gains * grad
        y = y + velocity
        y = y - y.mean(axis=0)
        kl_history.append(_kl_divergence(p, q))

    # KL of the final map (the loop's last entry predates the last update).
    d2 = _sq_distance_matrix(y)
    q_kernel = 1.0 / (1.0 + d2)
    np.fill_diagonal(q_kernel, 0.0)
    q = np.maximum(q_kernel / q_kernel.sum(), _P_MIN)
    kl_history.append(_kl_divergence(p, q))

    label_list = list(labels) if labels is not None else [None] * n
    if len(label_list) != n:
        raise ValueError("one label per point required")
    return Projection2D(points=y, labels=label_list, final_kl=kl_history[-1], kl_history=kl_history)
