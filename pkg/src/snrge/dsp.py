"""Spectral primitives: magnitude spectra, greyscale spectrograms, pixel
intensity distributions, and Pearson correlation.

All operations are pure. Greyscale spectrograms are normalized per image:
the brightest cell maps to 255 and anything at or below `floor_db` below it
maps to 0, which makes downstream pixel statistics amplitude-invariant.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import AudioClip
from .errors import UndefinedCorrelationError

DEFAULT_WINDOW = 1024
DEFAULT_HOP = 256
DEFAULT_FLOOR_DB = -80.0


@dataclass
class FrequencySpectrum:
    """Non-negative magnitudes for bins 0..n/2 of a real transform."""

    magnitudes: np.ndarray
    bin_width: float

    def __post_init__(self):
        self.magnitudes = np.asarray(self.magnitudes, dtype=np.float64)


@dataclass
class GreySpectrogram:
    """8-bit time-frequency grid; rows are frequency bins, columns are frames."""

    pixels: np.ndarray
    window: int
    hop: int
    floor_db: float = DEFAULT_FLOOR_DB

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.uint8)
        if self.pixels.ndim != 2:
            raise ValueError(f"pixels must be 2-D, got shape {self.pixels.shape}")

    @property
    def shape(self):
        return self.pixels.shape


@dataclass
class PixelIntensityDistribution:
    """Normalized 256-bin histogram of greyscale pixel values."""

    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (256,):
            raise ValueError(f"weights must have shape (256,), got {self.weights.shape}")


def _require_power_of_two(n: int, what: str) -> None:
    if n < 2 or (n & (n - 1)) != 0:
        raise ValueError(f"{what} must be a power of two, got {n}")


def fft_magnitude(clip: AudioClip, n: int) -> FrequencySpectrum:
    """Magnitude of the length-`n` real DFT of the clip.

    Clips longer than `n` are truncated; shorter ones are zero-padded.
    """
    _require_power_of_two(n, "transform size")
    x = clip.samples[:n]
    mags = np.abs(np.fft.rfft(x, n))
    return FrequencySpectrum(mags, clip.sample_rate / n)


def _canonical_mean(rows: np.ndarray) -> np.ndarray:
    # Sort each column's addends so the result is bit-identical under any
    # permutation of the inputs.
    return np.sort(rows, axis=0).mean(axis=0)


def average_spectrum(clips, n: int) -> FrequencySpectrum:
    """Element-wise mean of per-clip magnitude spectra."""
    clips = list(clips)
    if not clips:
        raise ValueError("average_spectrum needs at least one clip")
    spectra = [fft_magnitude(c, n) for c in clips]
    widths = {s.bin_width for s in spectra}
    if len(widths) != 1:
        raise ValueError("clips must share a sample rate")
    stacked = np.stack([s.magnitudes for s in spectra])
    return FrequencySpectrum(_canonical_mean(stacked), spectra[0].bin_width)


def pearson(a, b) -> float:
    """Pearson product-moment correlation of two equal-length sequences."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"sequences must be 1-D and equal length, got {a.shape} / {b.shape}")
    if len(a) < 2:
        raise ValueError("correlation needs at least two samples")
    da = a - a.mean()
    db = b - b.mean()
    denom_sq = np.dot(da, da) * np.dot(db, db)
    if denom_sq == 0.0:
        raise UndefinedCorrelationError("correlation is undefined for a constant sequence")
    r = np.dot(da, db) / np.sqrt(denom_sq)
    return float(np.clip(r, -1.0, 1.0))


def stft_spectrogram(
    clip: AudioClip,
    window: int = DEFAULT_WINDOW,
    hop: int = DEFAULT_HOP,
    floor_db: float = DEFAULT_FLOOR_DB,
) -> GreySpectrogram:
    """Hann-windowed STFT magnitudes quantized to an 8-bit greyscale grid.

    Frames are taken every `hop` samples with no padding, so a clip of
    length L yields floor((L - window) / hop) + 1 frames. Magnitudes are
    converted to dB relative to the grid maximum, floored at `floor_db`,
    and mapped linearly onto 0..255.
    """
    _require_power_of_two(window, "window size")
    if hop < 1 or hop > window:
        raise ValueError(f"hop must be in [1, window], got {hop}")
    if len(clip) < window:
        raise ValueError(f"clip of {len(clip)} samples is shorter than one window ({window})")

    n_frames = (len(clip) - window) // hop + 1
    idx = hop * np.arange(n_frames)[:, None] + np.arange(window)[None, :]
    frames = clip.samples[idx] * np.hanning(window)[None, :]
    mags = np.abs(np.fft.rfft(frames, axis=1)).T  # rows = bins, cols = frames

    peak = mags.max()
    if peak == 0.0:
        pixels = np.zeros(mags.shape, dtype=np.uint8)
    else:
        with np.errstate(divide="ignore"):
            db = 20.0 * np.log10(mags / peak)
        db = np.maximum(db, floor_db)
        pixels = np.rint((db - floor_db) / (-floor_db) * 255.0).astype(np.uint8)
    return GreySpectrogram(pixels, window, hop, floor_db)


def pixel_intensity_distribution(img: GreySpectrogram) -> PixelIntensityDistribution:
    """Normalized histogram of the image's pixel values."""
    if img.pixels.size == 0:
        raise ValueError("empty spectrogram has no pixel distribution")
    counts = np.bincount(img.pixels.ravel(), minlength=256).astype(np.float64)
    return PixelIntensityDistribution(counts / img.pixels.size)


def write_pgm(img: GreySpectrogram, path) -> None:
    """Dump a spectrogram as a binary PGM (P5) file for visual inspection."""
    rows, cols = img.pixels.shape
    header = f"P5\n{cols} {rows}\n255\n".encode("ascii")
    Path(path).write_bytes(header + img.pixels.tobytes())
