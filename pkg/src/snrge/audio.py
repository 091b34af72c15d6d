"""Mono audio containers, WAV file I/O, and amplitude primitives.

Samples are kept as 64-bit floats everywhere; quantization to 16-bit PCM
happens only when a clip is written to disk.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import MultiChannelError, UnsupportedEncodingError

# Full-scale 16-bit code used symmetrically for read and write.
_PCM16_SCALE = 32767.0


@dataclass
class AudioClip:
    """A mono sample sequence at a fixed rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError(f"samples must be 1-D, got shape {self.samples.shape}")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def read_wav(path) -> AudioClip:
    """Read a mono WAV file (16-bit PCM or 32-bit float) into [-1, 1] floats."""
    path = Path(path)
    rate, data = wavfile.read(path)
    if data.ndim != 1:
        raise MultiChannelError(
            f"{path}: expected mono audio, got {data.shape[1]} channels"
        )
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / _PCM16_SCALE
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise UnsupportedEncodingError(
            f"{path}: unsupported sample encoding {data.dtype}"
        )
    np.clip(samples, -1.0, 1.0, out=samples)
    return AudioClip(samples, int(rate))


def write_wav(path, clip: AudioClip) -> None:
    """Write a clip as mono 16-bit PCM, clipping samples to [-1, 1] first."""
    if len(clip) == 0:
        raise ValueError("cannot write an empty clip")
    path = Path(path)
    clipped = np.clip(clip.samples, -1.0, 1.0)
    codes = np.rint(clipped * _PCM16_SCALE).astype(np.int16)
    wavfile.write(path, clip.sample_rate, codes)


def rms(clip: AudioClip) -> float:
    """Root mean square amplitude of the clip."""
    if len(clip) == 0:
        raise ValueError("rms of an empty clip is undefined")
    return float(np.sqrt(np.mean(np.square(clip.samples))))
