"""Convolutional embedding network trained with semi-hard triplet mining.

Pure numpy, double precision. The architecture is a stack of 3x3 stride-2
convolution blocks (channels double from 8) followed by a dense head; the
output is L2-normalized, so pairwise Euclidean distances live in [0, 2].
Training mines semi-hard triplets per batch and applies Adam updates.
Every step is deterministic given the config seed.
"""

import json
import logging
import struct
from dataclasses import dataclass, field

import numpy as np

from .dsp import GreySpectrogram
from .errors import DataError, NumericError

log = logging.getLogger(__name__)

_BASE_CHANNELS = 8
_NORM_EPS = 1e-12
_CHECKPOINT_MAGIC = b"SNRGENET"
_CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class EmbedderConfig:
    conv_blocks: int = 3
    dense_layers: int = 1
    embedding_dim: int = 16
    learning_rate: float = 2e-4
    margin: float = 0.2
    batch_size: int = 32
    epochs: int = 30
    seed: int = 0
    input_shape: tuple = (128, 128)
    dense_hidden: int = 128
    stop_val_loss: float | None = None

    def __post_init__(self):
        if self.conv_blocks < 1 or self.dense_layers < 1:
            raise ValueError("need at least one conv block and one dense layer")
        if self.embedding_dim < 2:
            raise ValueError(f"embedding_dim must be >= 2, got {self.embedding_dim}")
        if self.learning_rate <= 0 or self.margin <= 0:
            raise ValueError("learning_rate and margin must be positive")
        if self.batch_size < 4:
            raise ValueError("batch_size must be >= 4 for triplet batches")


@dataclass
class EmbedderNetwork:
    config: EmbedderConfig
    params: dict  # name -> ndarray, in declaration order

    def param_names(self) -> list:
        return list(self.params)


def _conv_channels(config: EmbedderConfig) -> list:
    return [_BASE_CHANNELS * (2 ** i) for i in range(config.conv_blocks)]


def _layer_shapes(config: EmbedderConfig):
    """Parameter shapes in declaration order; raises on spatial collapse."""
    rows, cols = config.input_shape
    factor = 2 ** config.conv_blocks
    if rows % factor or cols % factor or rows < factor or cols < factor:
        raise ValueError(
            f"input {rows}x{cols} cannot pass {config.conv_blocks} halving blocks "
            f"(needs dimensions divisible by {factor})"
        )
    shapes = []
    c_in = 1
    for i, c_out in enumerate(_conv_channels(config)):
        shapes.append((f"conv{i}_w", (c_out, c_in, 3, 3)))
        shapes.append((f"conv{i}_b", (c_out,)))
        c_in = c_out
    flat = c_in * (rows // factor) * (cols // factor)
    widths = [flat] + [config.dense_hidden] * (config.dense_layers - 1) + [config.embedding_dim]
    for j in range(config.dense_layers):
        shapes.append((f"dense{j}_w", (widths[j + 1], widths[j])))
        shapes.append((f"dense{j}_b", (widths[j + 1],)))
    return shapes


def init_network(config: EmbedderConfig) -> EmbedderNetwork:
    """Fresh network with scaled-uniform weights drawn from the config seed."""
    rng = np.random.default_rng(config.seed)
    params = {}
    for name, shape in _layer_shapes(config):
        if name.endswith("_b"):
            params[name] = np.zeros(shape)
        else:
            if name.startswith("conv"):
                fan_in = shape[1] * 9
                fan_out = shape[0] * 9
            else:
                fan_out, fan_in = shape
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            params[name] = rng.uniform(-limit, limit, size=shape)
    return EmbedderNetwork(config, params)


# ---------------------------------------------------------------------------
# forward / backward


def _im2col(x: np.ndarray):
    # x: (n, c, h, w) -> col: (n, ho*wo, c*9) for 3x3 kernels, stride 2, pad 1
    n, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    ho, wo = (h - 1) // 2 + 1, (w - 1) // 2 + 1
    win = np.lib.stride_tricks.sliding_window_view(xp, (3, 3), axis=(2, 3))
    win = win[:, :, ::2, ::2]
    col = win.transpose(0, 2, 3, 1, 4, 5).reshape(n, ho * wo, c * 9)
    return np.ascontiguousarray(col), ho, wo


def _col2im(dcol: np.ndarray, x_shape, ho: int, wo: int) -> np.ndarray:
    n, c, h, w = x_shape
    dxp = np.zeros((n, c, h + 2, w + 2))
    dwin = dcol.reshape(n, ho, wo, c, 3, 3).transpose(0, 3, 1, 2, 4, 5)
    for di in range(3):
        for dj in range(3):
            dxp[:, :, di : di + ho * 2 : 2, dj : dj + wo * 2 : 2] += dwin[..., di, dj]
    return dxp[:, :, 1 : h + 1, 1 : w + 1]


def _forward_batch(net: EmbedderNetwork, x: np.ndarray, keep_cache: bool = False):
    """Embeddings for a batch of images shaped (n, rows, cols) in [0, 1]."""
    cfg = net.config
    if x.ndim != 3 or x.shape[1:] != tuple(cfg.input_shape):
        raise ValueError(f"expected batch of {cfg.input_shape} images, got {x.shape}")
    h = x[:, None, :, :].astype(np.float64)
    caches = []
    for i in range(cfg.conv_blocks):
        w = net.params[f"conv{i}_w"]
        b = net.params[f"conv{i}_b"]
        col, ho, wo = _im2col(h)
        z = col @ w.reshape(w.shape[0], -1).T + b
        a = np.maximum(z, 0.0)
        caches.append(("conv", i, col, z, h.shape, ho, wo))
        h = a.transpose(0, 2, 1).reshape(h.shape[0], w.shape[0], ho, wo)
    flat = h.reshape(h.shape[0], -1)
    caches.append(("flatten", h.shape))
    a = flat
    for j in range(cfg.dense_layers):
        w = net.params[f"dense{j}_w"]
        b = net.params[f"dense{j}_b"]
        z = a @ w.T + b
        last = j == cfg.dense_layers - 1
        caches.append(("dense", j, a, z, last))
        a = z if last else np.maximum(z, 0.0)
    norms = np.maximum(np.sqrt(np.sum(a * a, axis=1, keepdims=True)), _NORM_EPS)
    e = a / norms
    caches.append(("normalize", e, norms))
    return (e, caches) if keep_cache else (e, None)


def _backward_batch(net: EmbedderNetwork, caches: list, d_embed: np.ndarray) -> dict:
    """Gradients of a scalar loss wrt every parameter, given dLoss/dEmbedding."""
    grads = {name: None for name in net.params}
    kind, e, norms = caches[-1]
    assert kind == "normalize"
    da = (d_embed - e * np.sum(e * d_embed, axis=1, keepdims=True)) / norms
    pos = len(caches) - 2
    while pos >= 0 and caches[pos][0] == "dense":
        _, j, a_in, z, last = caches[pos]
        dz = da if last else da * (z > 0.0)
        grads[f"dense{j}_w"] = dz.T @ a_in
        grads[f"dense{j}_b"] = dz.sum(axis=0)
        da = dz @ net.params[f"dense{j}_w"]
        pos -= 1
    kind, conv_out_shape = caches[pos]
    assert kind == "flatten"
    dh = da.reshape(conv_out_shape)
    pos -= 1
    while pos >= 0:
        _, i, col, z, x_shape, ho, wo = caches[pos]
        w = net.params[f"conv{i}_w"]
        dyf = dh.transpose(0, 2, 3, 1).reshape(dh.shape[0], ho * wo, w.shape[0])
        dz = dyf * (z > 0.0)
        grads[f"conv{i}_w"] = np.tensordot(dz, col, axes=([0, 1], [0, 1])).reshape(w.shape)
        grads[f"conv{i}_b"] = dz.sum(axis=(0, 1))
        dcol = dz @ w.reshape(w.shape[0], -1)
        dh = _col2im(dcol, x_shape, ho, wo)
        pos -= 1
    return grads


def forward_embed(net: EmbedderNetwork, img: GreySpectrogram) -> np.ndarray:
    """Unit-norm embedding of a single spectrogram sized to the network input."""
    if img.pixels.shape != tuple(net.config.input_shape):
        raise ValueError(
            f"image shape {img.pixels.shape} does not match network input "
            f"{tuple(net.config.input_shape)}"
        )
    e, _ = _forward_batch(net, img.pixels[None, :, :] / 255.0)
    return e[0]


def embed_images(net: EmbedderNetwork, images: np.ndarray, batch_size: int = 64) -> np.ndarray:
    """Embeddings for a stack of uint8 images, in fixed-size batches."""
    images = np.asarray(images)
    out = []
    for start in range(0, len(images), batch_size):
        chunk = images[start : start + batch_size].astype(np.float64) / 255.0
        e, _ = _forward_batch(net, chunk)
        out.append(e)
    return np.concatenate(out) if out else np.zeros((0, net.config.embedding_dim))


# ---------------------------------------------------------------------------
# resizing (spectrogram -> network input)


def resize_pixels(pixels: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Bilinear resize with half-pixel centers and edge clamping."""
    src = np.asarray(pixels, dtype=np.float64)
    r_in, c_in = src.shape
    ys = np.clip((np.arange(rows) + 0.5) * (r_in / rows) - 0.5, 0.0, r_in - 1.0)
    xs = np.clip((np.arange(cols) + 0.5) * (c_in / cols) - 0.5, 0.0, c_in - 1.0)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, r_in - 1)
    x1 = np.minimum(x0 + 1, c_in - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = src[np.ix_(y0, x0)] * (1.0 - fx) + src[np.ix_(y0, x1)] * fx
    bottom = src[np.ix_(y1, x0)] * (1.0 - fx) + src[np.ix_(y1, x1)] * fx
    return top * (1.0 - fy) + bottom * fy


def resize_spectrogram(img: GreySpectrogram, rows: int, cols: int) -> GreySpectrogram:
    resized = np.rint(resize_pixels(img.pixels, rows, cols)).astype(np.uint8)
    return GreySpectrogram(resized, img.window, img.hop, img.floor_db)


# ---------------------------------------------------------------------------
# triplet loss and mining


def triplet_loss(d_ap: float, d_an: float, margin: float) -> float:
    """Hinge on the anchor-positive vs anchor-negative distance gap."""
    if d_ap < 0 or d_an < 0:
        raise ValueError("distances must be non-negative")
    return max(0.0, d_ap - d_an + margin)


def semi_hard_triplets(embeddings, labels, margin: float) -> np.ndarray:
    """Mined (anchor, positive, negative) index triples.

    For every ordered same-label pair the negative is the closest one inside
    the band d_ap < d_an < d_ap + margin; when the band is empty the closest
    negative overall is taken. Ties resolve to the lowest index.
    """
    emb = np.asarray(embeddings, dtype=np.float64)
    labels = list(labels)
    if emb.shape[0] != len(labels):
        raise ValueError("one label per embedding required")
    if len(set(labels)) < 2:
        raise ValueError("triplet mining needs at least two classes in the batch")
    # Stable small-int ids in order of first appearance.
    table = {}
    ids = np.array([table.setdefault(l, len(table)) for l in labels])
    diff = emb[:, None, :] - emb[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    triplets = []
    for a in range(len(labels)):
        negatives = np.where(ids != ids[a])[0]
        positives = np.where(ids == ids[a])[0]
        if negatives.size == 0:
            continue
        d_neg = dist[a, negatives]
        for p in positives:
            if p == a:
                continue
            d_ap = dist[a, p]
            band = (d_neg > d_ap) & (d_neg < d_ap + margin)
            if band.any():
                pool, pool_d = negatives[band], d_neg[band]
            else:
                pool, pool_d = negatives, d_neg
            triplets.append((a, p, pool[int(np.argmin(pool_d))]))
    return np.array(triplets, dtype=np.int64).reshape(-1, 3)


def batch_triplet_loss(embeddings: np.ndarray, triplets: np.ndarray, margin: float):
    """Mean triplet loss over the given triples and its gradient wrt the
    embeddings."""
    emb = np.asarray(embeddings, dtype=np.float64)
    d_emb = np.zeros_like(emb)
    if len(triplets) == 0:
        return 0.0, d_emb
    a, p, n = triplets[:, 0], triplets[:, 1], triplets[:, 2]
    ap = emb[a] - emb[p]
    an = emb[a] - emb[n]
    d_ap = np.sqrt(np.sum(ap * ap, axis=1))
    d_an = np.sqrt(np.sum(an * an, axis=1))
    per = d_ap - d_an + margin
    active = per > 0.0
    loss = float(np.mean(np.maximum(per, 0.0)))
    scale = active / len(triplets)
    u_ap = ap / np.maximum(d_ap, _NORM_EPS)[:, None]
    u_an = an / np.maximum(d_an, _NORM_EPS)[:, None]
    np.add.at(d_emb, a, scale[:, None] * (u_ap - u_an))
    np.add.at(d_emb, p, -scale[:, None] * u_ap)
    np.add.at(d_emb, n, scale[:, None] * u_an)
    return loss, d_emb


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_init(params: dict) -> AdamState:
    return AdamState(
        m={k: np.zeros_like(v) for k, v in params.items()},
        v={k: np.zeros_like(v) for k, v in params.items()},
    )


def adam_step(
    params: dict,
    grads: dict,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    *,
    t: int,
):
    """One bias-corrected Adam update. Returns (params, state).

    A non-finite gradient is reported and the step is skipped, leaving
    params and state untouched.
    """
    if t < 1:
        raise ValueError(f"step counter must be >= 1, got {t}")
    if set(params) != set(grads):
        raise ValueError("params and grads must have the same keys")
    for k in params:
        if params[k].shape != grads[k].shape:
            raise ValueError(f"shape mismatch for {k}: {params[k].shape} vs {grads[k].shape}")
    if any(not np.all(np.isfinite(g)) for g in grads.values()):
        log.warning("non-finite gradient at step %d; update skipped", t)
        return params, state
    new_params, new_m, new_v = {}, {}, {}
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for k, p in params.items():
        g = grads[k]
        m = beta1 * state.m[k] + (1.0 - beta1) * g
        v = beta2 * state.v[k] + (1.0 - beta2) * g * g
        new_params[k] = p - lr * (m / c1) / (np.sqrt(v / c2) + eps)
        new_m[k], new_v[k] = m, v
    return new_params, AdamState(new_m, new_v)


# ---------------------------------------------------------------------------
# training


@dataclass
class TripletDataset:
    """Images with labels and split assignments, ready for training."""

    images: np.ndarray  # (N, rows, cols) uint8
    labels: list
    splits: np.ndarray

    def __post_init__(self):
        self.images = np.asarray(self.images)
        self.splits = np.asarray(self.splits)
        if self.images.ndim != 3:
            raise ValueError("images must be a (N, rows, cols) stack")
        if len(self.labels) != len(self.images) or len(self.splits) != len(self.images):
            raise ValueError("images, labels, and splits must align")

    def indices(self, split: str) -> np.ndarray:
        return np.where(self.splits == split)[0]


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float


@dataclass
class TrainResult:
    net: EmbedderNetwork
    history: list

    @property
    def final_val_loss(self) -> float:
        return self.history[-1].val_loss


def _class_pools(ids: np.ndarray, subset: np.ndarray):
    pools = []
    for cid in np.unique(ids[subset]):
        pools.append(subset[ids[subset] == cid])
    return pools


def _stratified_batches(pools: list, batch_size: int, rng: np.random.Generator):
    """Batches drawing equally from rotating classes; every batch holds at
    least two classes with at least two members each."""
    n_classes = len(pools)
    if n_classes < 2 or any(len(p) < 2 for p in pools):
        raise ValueError("unsatisfiable batch stratification: need >= 2 classes with >= 2 members")
    members = max(2, batch_size // n_classes)
    classes_per_batch = min(n_classes, max(2, batch_size // members))
    shuffled = [rng.permutation(p) for p in pools]
    cursors = [0] * n_classes
    total = sum(len(p) for p in pools)
    n_batches = max(1, total // max(classes_per_batch * members, 1))
    for b in range(n_batches):
        chosen = [(b * classes_per_batch + j) % n_classes for j in range(classes_per_batch)]
        batch = []
        for ci in set(chosen):
            pool = shuffled[ci]
            take = [(cursors[ci] + t) % len(pool) for t in range(members)]
            cursors[ci] += members
            batch.extend(pool[take])
        yield np.asarray(sorted(batch))


def _subset_loss(net: EmbedderNetwork, images: np.ndarray, ids: np.ndarray, batches: list, margin: float) -> float:
    losses = []
    for batch in batches:
        x = images[batch].astype(np.float64) / 255.0
        e, _ = _forward_batch(net, x)
        trips = semi_hard_triplets(e, list(ids[batch]), margin)
        loss, _ = batch_triplet_loss(e, trips, margin)
        losses.append(loss)
    return float(np.mean(losses)) if losses else float("nan")


def train(net: EmbedderNetwork, data: TripletDataset, config: EmbedderConfig) -> TrainResult:
    """Mined-triplet Adam training with per-epoch train/val loss tracking.

    Stops early once the validation loss reaches config.stop_val_loss.
    Raises NumericError if parameters stop being finite.
    """
    table = {}
    ids = np.array([table.setdefault(l, len(table)) for l in data.labels])
    train_idx = data.indices("train")
    val_idx = data.indices("val")
    if len(train_idx) == 0 or len(val_idx) == 0:
        raise ValueError("dataset needs non-empty train and val splits")
    val_batches = list(
        _stratified_batches(_class_pools(ids, val_idx), config.batch_size, np.random.default_rng([config.seed, 1]))
    )
    state = adam_init(net.params)
    history = []
    t = 0
    for epoch in range(1, config.epochs + 1):
        rng = np.random.default_rng([config.seed, 2, epoch])
        batch_losses = []
        for batch in _stratified_batches(_class_pools(ids, train_idx), config.batch_size, rng):
            x = data.images[batch].astype(np.float64) / 255.0
            e, caches = _forward_batch(net, x, keep_cache=True)
            trips = semi_hard_triplets(e, list(ids[batch]), config.margin)
            loss, d_emb = batch_triplet_loss(e, trips, config.margin)
            grads = _backward_batch(net, caches, d_emb)
            t += 1
            net.params, state = adam_step(
                net.params, grads, state, config.learning_rate, t=t
            )
            if any(not np.all(np.isfinite(p)) for p in net.params.values()):
                raise NumericError(f"training diverged at step {t}")
            batch_losses.append(loss)
        train_loss = float(np.mean(batch_losses)) if batch_losses else float("nan")
        val_loss = _subset_loss(net, data.images, ids, val_batches, config.margin)
        history.append(EpochStats(epoch, train_loss, val_loss))
        log.info("epoch %d: train loss %.4f, val loss %.4f", epoch, train_loss, val_loss)
        if config.stop_val_loss is not None and val_loss <= config.stop_val_loss:
            break
    return TrainResult(net, history)


def write_loss_history(history, path) -> None:
    lines = ["epoch,train_loss,val_loss"]
    lines += [f"{h.epoch},{h.train_loss!r},{h.val_loss!r}" for h in history]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# hyperparameter search


@dataclass
class Trial:
    config: EmbedderConfig
    val_loss: float


@dataclass
class HyperSearchResult:
    best: EmbedderConfig
    trials: list


def hyper_search(
    space: dict,
    data: TripletDataset,
    budget: int,
    seed: int,
    base: EmbedderConfig | None = None,
) -> HyperSearchResult:
    """Seeded random search over architecture/learning-rate choices, ranked
    by final validation loss.

    `space` maps any of conv_blocks / dense_layers / embedding_dim to a list
    of choices and learning_rate to a (low, high) log-uniform range.
    """
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    if not space:
        raise ValueError("empty search space")
    known = {"conv_blocks", "dense_layers", "embedding_dim", "learning_rate"}
    unknown = set(space) - known
    if unknown:
        raise ValueError(f"unknown search dimensions: {sorted(unknown)}")
    base = base or EmbedderConfig()
    rng = np.random.default_rng(seed)
    trials = []
    for i in range(budget):
        kwargs = {}
        for key in ("conv_blocks", "dense_layers", "embedding_dim"):
            if key in space:
                choices = list(space[key])
                kwargs[key] = int(choices[rng.integers(len(choices))])
        if "learning_rate" in space:
            lo, hi = space["learning_rate"]
            kwargs["learning_rate"] = float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
        cfg_i = EmbedderConfig(
            **{
                **base.__dict__,
                **kwargs,
                "seed": base.seed + i,
            }
        )
        result = train(init_network(cfg_i), data, cfg_i)
        trials.append(Trial(cfg_i, result.final_val_loss))
        log.info("trial %d/%d: val loss %.4f", i + 1, budget, trials[-1].val_loss)
    best = min(range(len(trials)), key=lambda i: (trials[i].val_loss, i))
    return HyperSearchResult(trials[best].config, trials)


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(net: EmbedderNetwork, path) -> None:
    """Self-describing little-endian binary: magic, version, config, tensors."""
    cfg = net.config
    cfg_doc = {
        "conv_blocks": cfg.conv_blocks,
        "dense_layers": cfg.dense_layers,
        "embedding_dim": cfg.embedding_dim,
        "learning_rate": cfg.learning_rate,
        "margin": cfg.margin,
        "batch_size": cfg.batch_size,
        "epochs": cfg.epochs,
        "seed": cfg.seed,
        "input_shape": list(cfg.input_shape),
        "dense_hidden": cfg.dense_hidden,
        "stop_val_loss": cfg.stop_val_loss,
    }
    blob = json.dumps(cfg_doc, sort_keys=True).encode("utf-8")
    parts = [_CHECKPOINT_MAGIC, struct.pack("<II", _CHECKPOINT_VERSION, len(blob)), blob]
    parts.append(struct.pack("<I", len(net.params)))
    for name, tensor in net.params.items():
        encoded = name.encode("ascii")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<B", tensor.ndim))
        parts.append(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
        parts.append(np.ascontiguousarray(tensor, dtype="<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def load_checkpoint(path) -> EmbedderNetwork:
    raw = open(path, "rb").read()
    if raw[: len(_CHECKPOINT_MAGIC)] != _CHECKPOINT_MAGIC:
        raise DataError(f"{path}: not an embedder checkpoint (bad magic)")
    off = len(_CHECKPOINT_MAGIC)
    version, cfg_len = struct.unpack_from("<II", raw, off)
    off += 8
    if version != _CHECKPOINT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    cfg_doc = json.loads(raw[off : off + cfg_len].decode("utf-8"))
    off += cfg_len
    cfg_doc["input_shape"] = tuple(cfg_doc["input_shape"])
    config = EmbedderConfig(**cfg_doc)
    (n_tensors,) = struct.unpack_from("<I", raw, off)
    off += 4
    params = {}
    for _ in range(n_tensors):
        (name_len,) = struct.unpack_from("<H", raw, off)
        off += 2
        name = raw[off : off + name_len].decode("ascii")
        off += name_len
        (ndim,) = struct.unpack_from("<B", raw, off)
        off += 1
        shape = struct.unpack_from(f"<{ndim}I", raw, off)
        off += 4 * ndim
        count = int(np.prod(shape)) if ndim else 1
        tensor = np.frombuffer(raw, dtype="<f8", count=count, offset=off).reshape(shape)
        off += 8 * count
        params[name] = tensor.astype(np.float64)
    expected = dict(_layer_shapes(config))
    if set(params) != set(expected) or any(params[k].shape != expected[k] for k in expected):
        raise DataError(f"{path}: tensor layout does not match the declared architecture")
    return EmbedderNetwork(config, params)
