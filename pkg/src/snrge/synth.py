"""Whistle and noise synthesis, SNR-exact mixing, and dataset builds.

A mixture is x = s + beta * n with beta = A_s / (A_n * sqrt(snr_linear)),
where A is RMS amplitude. SNR is a power ratio throughout:
dB = 10 * log10(linear).
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import config as cfgfile
from .audio import AudioClip, rms, write_wav
from .errors import DataError
from .parallel import parallel_map

log = logging.getLogger(__name__)

SPLIT_NAMES = ("train", "val", "test")


@dataclass(frozen=True)
class SnrLabel:
    """Either a decibel level or the categorical noise class."""

    db: float | None  # None means noise

    @classmethod
    def decibel(cls, db: float) -> "SnrLabel":
        return cls(float(db))

    @classmethod
    def noise(cls) -> "SnrLabel":
        return cls(None)

    @property
    def is_noise(self) -> bool:
        return self.db is None

    def sort_key(self) -> float:
        """Noise orders below every decibel level."""
        return -np.inf if self.db is None else self.db

    def to_json(self):
        return "noise" if self.db is None else self.db

    @classmethod
    def from_json(cls, value) -> "SnrLabel":
        if value == "noise":
            return cls.noise()
        return cls.decibel(float(value))

    def __str__(self) -> str:
        return "noise" if self.db is None else f"{self.db:g}dB"


def format_db(db: float) -> str:
    return f"{db:g}"


@dataclass(frozen=True)
class WhistleSpec:
    """An upsweep: instantaneous frequency rises from f_start to f_end."""

    f_start: float
    f_end: float
    onset: float
    duration: float
    amplitude: float = 0.5


@dataclass(frozen=True)
class WhistleRanges:
    """Uniform sampling ranges for whistle parameters."""

    f_start_hz: tuple = (2000.0, 5000.0)
    bandwidth_hz: tuple = (1000.0, 3000.0)
    duration_s: tuple = (0.3, 0.8)
    amplitude: float = 0.5


DEFAULT_RANGES = WhistleRanges()

_FADE_SECONDS = 0.010


def gen_whistle(spec: WhistleSpec, clip_len: float, sample_rate: int) -> AudioClip:
    """Linear chirp with raised-cosine fades, zero outside its active region."""
    nyquist = sample_rate / 2.0
    if not (0.0 < spec.f_start < spec.f_end <= nyquist):
        raise ValueError(
            f"need 0 < f_start < f_end <= Nyquist ({nyquist:g} Hz), "
            f"got {spec.f_start:g}..{spec.f_end:g} Hz"
        )
    if spec.onset < 0.0 or spec.onset + spec.duration > clip_len + 1e-12:
        raise ValueError(
            f"active region [{spec.onset:g}, {spec.onset + spec.duration:g}] s "
            f"does not fit a {clip_len:g} s clip"
        )
    if not (0.0 < spec.amplitude <= 1.0):
        raise ValueError(f"amplitude must be in (0, 1], got {spec.amplitude:g}")

    n = int(round(clip_len * sample_rate))
    samples = np.zeros(n)
    start = int(round(spec.onset * sample_rate))
    stop = min(int(round((spec.onset + spec.duration) * sample_rate)), n)
    if stop <= start:
        raise ValueError("active region contains no samples")

    tau = (np.arange(start, stop) - start) / sample_rate
    sweep = (spec.f_end - spec.f_start) / spec.duration
    phase = 2.0 * np.pi * (spec.f_start * tau + 0.5 * sweep * tau * tau)

    fade = min(_FADE_SECONDS, spec.duration / 2.0)
    envelope = np.ones(stop - start)
    if fade > 0:
        ramp = np.minimum(tau, tau[-1] - tau) / fade
        np.minimum(ramp, 1.0, out=ramp)
        envelope = 0.5 * (1.0 - np.cos(np.pi * ramp))

    samples[start:stop] = spec.amplitude * envelope * np.sin(phase)
    return AudioClip(samples, sample_rate)


_PINK_CORNER_HZ = 50.0
_NOISE_RMS = 0.1


def gen_noise(kind: str, clip_len: float, sample_rate: int, seed) -> AudioClip:
    """Zero-mean noise clip at RMS 0.1; `pink` has PSD proportional to 1/f
    above 50 Hz, `white` is flat. Deterministic given the seed."""
    if clip_len <= 0:
        raise ValueError(f"clip_len must be positive, got {clip_len:g}")
    rng = np.random.default_rng(seed)
    n = int(round(clip_len * sample_rate))
    white = rng.standard_normal(n)
    if kind == "white":
        samples = white - white.mean()
    elif kind == "pink":
        spectrum = np.fft.rfft(white)
        freqs = np.fft.rfftfreq(n, 1.0 / sample_rate)
        shaping = 1.0 / np.sqrt(np.maximum(freqs, _PINK_CORNER_HZ))
        shaping[0] = 0.0  # zero mean
        samples = np.fft.irfft(spectrum * shaping, n)
    else:
        raise ValueError(f"unknown noise kind {kind!r}")
    level = np.sqrt(np.mean(samples * samples))
    return AudioClip(samples * (_NOISE_RMS / level), sample_rate)


def compute_beta(a_s: float, a_n: float, snr_linear: float) -> float:
    """Noise scale that makes s + beta*n hit the requested power ratio."""
    if a_n <= 0.0:
        raise ValueError(f"noise amplitude must be positive, got {a_n:g}")
    if snr_linear <= 0.0:
        raise ValueError(f"linear SNR must be positive, got {snr_linear:g}")
    return a_s / (a_n * np.sqrt(snr_linear))


@dataclass
class MixResult:
    """A mixture along with its jointly scaled components."""

    mixture: AudioClip
    signal: AudioClip
    noise: AudioClip
    beta: float
    gain: float


def _coerce_db(snr) -> float:
    if isinstance(snr, SnrLabel):
        if snr.is_noise:
            raise ValueError("cannot mix at the categorical noise label")
        return snr.db
    return float(snr)


def mix_components(signal: AudioClip, noise: AudioClip, snr, peak_norm: float | None = 0.9) -> MixResult:
    """Mix signal and noise at an exact SNR, returning the scaled parts.

    When `peak_norm` is set the mixture is rescaled to that peak with both
    components scaled jointly, which leaves the component ratio untouched.
    """
    db = _coerce_db(snr)
    if len(signal) != len(noise) or signal.sample_rate != noise.sample_rate:
        raise ValueError("signal and noise must share length and sample rate")
    a_s, a_n = rms(signal), rms(noise)
    if a_s == 0.0:
        raise ValueError("signal is silent")
    if a_n == 0.0:
        raise ValueError("noise is silent")
    beta = compute_beta(a_s, a_n, 10.0 ** (db / 10.0))
    mixed = signal.samples + beta * noise.samples
    gain = 1.0
    if peak_norm is not None:
        peak = np.max(np.abs(mixed))
        gain = peak_norm / peak
    sr = signal.sample_rate
    return MixResult(
        mixture=AudioClip(gain * mixed, sr),
        signal=AudioClip(gain * signal.samples, sr),
        noise=AudioClip(gain * beta * noise.samples, sr),
        beta=beta,
        gain=gain,
    )


def mix_at_snr(signal: AudioClip, noise: AudioClip, snr, peak_norm: float | None = 0.9) -> AudioClip:
    """Mixture of signal and noise whose component power ratio equals `snr` dB."""
    return mix_components(signal, noise, snr, peak_norm).mixture


def measured_snr_db(signal: AudioClip, noise: AudioClip) -> float:
    """Component-wise power ratio of two already-scaled parts, in dB."""
    return 10.0 * np.log10(rms(signal) ** 2 / rms(noise) ** 2)


def clip_seed(master_seed: int, label_key: str, index: int) -> int:
    """Per-clip RNG seed derived by hashing, stable under parallel generation."""
    digest = hashlib.sha256(f"{master_seed}:{label_key}:{index}".encode("ascii")).digest()
    return int.from_bytes(digest[:8], "little")


def sample_whistle_spec(rng: np.random.Generator, ranges: WhistleRanges, clip_len: float) -> WhistleSpec:
    """Draw a whistle uniformly from the configured parameter ranges."""
    if ranges.duration_s[1] > clip_len:
        raise ValueError(
            f"whistle duration range {ranges.duration_s} exceeds the {clip_len:g} s clip"
        )
    f_start = rng.uniform(*ranges.f_start_hz)
    f_end = f_start + rng.uniform(*ranges.bandwidth_hz)
    duration = rng.uniform(*ranges.duration_s)
    onset = rng.uniform(0.0, clip_len - duration)
    return WhistleSpec(f_start, f_end, onset, duration, ranges.amplitude)


@dataclass(frozen=True)
class DatasetConfig:
    """Everything needed to regenerate a dataset bit-for-bit."""

    grid: tuple = (-15.0, -10.0, -5.0, 0.0, 5.0, 10.0)
    clips_per_level: int = 500
    sample_rate: int = 32000
    clip_seconds: float = 1.0
    noise_kind: str = "pink"
    ranges: WhistleRanges = field(default_factory=WhistleRanges)
    split_ratio: tuple = (0.6, 0.2, 0.2)
    seed: int = 0

    def to_kv(self) -> dict:
        return {
            "grid_db": cfgfile.format_floats(self.grid),
            "clips_per_level": str(self.clips_per_level),
            "sample_rate": str(self.sample_rate),
            "clip_seconds": f"{self.clip_seconds:g}",
            "noise_kind": self.noise_kind,
            "f_start_hz": cfgfile.format_floats(self.ranges.f_start_hz),
            "bandwidth_hz": cfgfile.format_floats(self.ranges.bandwidth_hz),
            "duration_s": cfgfile.format_floats(self.ranges.duration_s),
            "amplitude": f"{self.ranges.amplitude:g}",
            "split_ratio": cfgfile.format_floats(self.split_ratio),
            "seed": str(self.seed),
        }

    @classmethod
    def from_kv(cls, kv: dict) -> "DatasetConfig":
        base = cls()
        ranges = WhistleRanges(
            f_start_hz=cfgfile.parse_floats(kv.get("f_start_hz", cfgfile.format_floats(base.ranges.f_start_hz))),
            bandwidth_hz=cfgfile.parse_floats(kv.get("bandwidth_hz", cfgfile.format_floats(base.ranges.bandwidth_hz))),
            duration_s=cfgfile.parse_floats(kv.get("duration_s", cfgfile.format_floats(base.ranges.duration_s))),
            amplitude=float(kv.get("amplitude", base.ranges.amplitude)),
        )
        return cls(
            grid=cfgfile.parse_floats(kv.get("grid_db", cfgfile.format_floats(base.grid))),
            clips_per_level=int(kv.get("clips_per_level", base.clips_per_level)),
            sample_rate=int(kv.get("sample_rate", base.sample_rate)),
            clip_seconds=float(kv.get("clip_seconds", base.clip_seconds)),
            noise_kind=kv.get("noise_kind", base.noise_kind),
            ranges=ranges,
            split_ratio=cfgfile.parse_floats(kv.get("split_ratio", cfgfile.format_floats(base.split_ratio))),
            seed=int(kv.get("seed", base.seed)),
        )


@dataclass(frozen=True)
class ManifestEntry:
    path: str  # relative to the dataset root
    label: SnrLabel
    split: str
    seed: int


@dataclass
class DatasetManifest:
    entries: list
    grid: tuple
    clips_per_level: int
    config: DatasetConfig
    root: Path

    def select(self, label: SnrLabel | None = None, split: str | None = None) -> list:
        out = self.entries
        if label is not None:
            out = [e for e in out if e.label == label]
        if split is not None:
            out = [e for e in out if e.split == split]
        return out

    def clip_path(self, entry: ManifestEntry) -> Path:
        return self.root / entry.path

    def digest(self) -> str:
        return hashlib.sha256((self.root / "manifest.jsonl").read_bytes()).hexdigest()


def assign_split(index: int, count: int, ratio=(0.6, 0.2, 0.2)) -> str:
    """Deterministic split of the index range [0, count) by the given ratio."""
    n_train = int(ratio[0] * count)
    n_val = int(ratio[1] * count)
    if index < n_train:
        return "train"
    if index < n_train + n_val:
        return "val"
    return "test"


def _label_dir(label: SnrLabel) -> str:
    return "noise" if label.is_noise else f"{format_db(label.db)}dB"


def _synth_mixture(cfg: DatasetConfig, label: SnrLabel, seed: int) -> AudioClip:
    rng = np.random.default_rng(seed)
    if label.is_noise:
        return gen_noise(cfg.noise_kind, cfg.clip_seconds, cfg.sample_rate, rng)
    spec = sample_whistle_spec(rng, cfg.ranges, cfg.clip_seconds)
    whistle = gen_whistle(spec, cfg.clip_seconds, cfg.sample_rate)
    noise = gen_noise(cfg.noise_kind, cfg.clip_seconds, cfg.sample_rate, rng)
    return mix_at_snr(whistle, noise, label.db)


def build_dataset(cfg: DatasetConfig, out_dir) -> DatasetManifest:
    """Generate labeled WAV clips plus a manifest under `out_dir`.

    The output is a pure function of the config: per-clip RNG streams are
    derived by hashing (master seed, label, clip index), so generation
    order and worker count cannot change any byte on disk.
    """
    if not cfg.grid:
        raise ValueError("SNR grid must be non-empty")
    if cfg.clips_per_level < 1:
        raise ValueError("clips_per_level must be >= 1")
    root = Path(out_dir)
    try:
        root.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create dataset directory {root}: {exc}") from exc

    labels = [SnrLabel.decibel(db) for db in cfg.grid] + [SnrLabel.noise()]
    entries = []
    for label in labels:
        subdir = root / "clips" / _label_dir(label)
        subdir.mkdir(parents=True, exist_ok=True)
        label_key = "noise" if label.is_noise else format_db(label.db)

        def make_clip(index: int, _label=label, _key=label_key, _subdir=subdir):
            seed = clip_seed(cfg.seed, _key, index)
            clip = _synth_mixture(cfg, _label, seed)
            rel = f"clips/{_label_dir(_label)}/{index:06d}.wav"
            write_wav(root / f"{rel}", clip)
            return ManifestEntry(
                path=rel,
                label=_label,
                split=assign_split(index, cfg.clips_per_level, cfg.split_ratio),
                seed=seed,
            )

        entries.extend(parallel_map(make_clip, range(cfg.clips_per_level)))
        log.info("generated %d clips for label %s", cfg.clips_per_level, label)

    lines = [
        json.dumps(
            {"path": e.path, "label": e.label.to_json(), "split": e.split, "seed": e.seed},
            sort_keys=True,
        )
        for e in entries
    ]
    (root / "manifest.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
    cfgfile.write_kv(root / "dataset_config.txt", cfg.to_kv())
    return DatasetManifest(entries, cfg.grid, cfg.clips_per_level, cfg, root)


def load_manifest(root) -> DatasetManifest:
    """Read a dataset directory written by build_dataset."""
    root = Path(root)
    manifest_path = root / "manifest.jsonl"
    if not manifest_path.is_file():
        raise DataError(f"no manifest.jsonl under {root}")
    cfg = DatasetConfig.from_kv(cfgfile.read_kv(root / "dataset_config.txt"))
    entries = []
    for line in manifest_path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        entries.append(
            ManifestEntry(
                path=rec["path"],
                label=SnrLabel.from_json(rec["label"]),
                split=rec["split"],
                seed=int(rec["seed"]),
            )
        )
    seen = set()
    for e in entries:
        if e.path in seen:
            raise DataError(f"duplicate manifest path {e.path}")
        seen.add(e.path)
    return DatasetManifest(entries, cfg.grid, cfg.clips_per_level, cfg, root)


def simulate_generator(
    target,
    snr_bias: float = 0.0,
    quality: str = "clean",
    count: int = 1,
    seed: int = 0,
    *,
    sample_rate: int = 32000,
    clip_seconds: float = 1.0,
    ranges: WhistleRanges = DEFAULT_RANGES,
    noise_kind: str = "pink",
    return_components: bool = False,
):
    """Stand-in for a generator under test: emits whistle mixtures whose
    actual SNR is `target - snr_bias` dB.

    `degraded` quality additionally jitters each whistle's band edges by
    up to +/-10%. With `return_components` every item is a MixResult so the
    achieved component ratio can be verified directly.
    """
    target_db = _coerce_db(target)
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if quality not in ("clean", "degraded"):
        raise ValueError(f"quality must be clean or degraded, got {quality!r}")
    actual_db = target_db - snr_bias
    key = f"sim:{format_db(target_db)}:{format_db(snr_bias)}:{quality}"

    def make(index: int):
        rng = np.random.default_rng(clip_seed(seed, key, index))
        spec = sample_whistle_spec(rng, ranges, clip_seconds)
        if quality == "degraded":
            f_start = spec.f_start * rng.uniform(0.9, 1.1)
            f_end = spec.f_end * rng.uniform(0.9, 1.1)
            f_end = min(max(f_end, f_start + 100.0), sample_rate / 2.0)
            spec = replace(spec, f_start=f_start, f_end=f_end)
        whistle = gen_whistle(spec, clip_seconds, sample_rate)
        noise = gen_noise(noise_kind, clip_seconds, sample_rate, rng)
        result = mix_components(whistle, noise, actual_db)
        return result if return_components else result.mixture

    return parallel_map(make, range(count))
