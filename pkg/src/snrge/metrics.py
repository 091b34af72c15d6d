"""Binary similarity scoring of candidate clips against averaged whistle
and noise references.

A sample scores 1 when it correlates at least as strongly with the whistle
reference as with the noise reference (ties count for the whistle), and the
per-SNR result is the mean of those binary scores.
"""

from dataclasses import dataclass

import numpy as np

from .audio import AudioClip
from .dsp import (
    FrequencySpectrum,
    PixelIntensityDistribution,
    average_spectrum,
    fft_magnitude,
    pearson,
    pixel_intensity_distribution,
    stft_spectrogram,
)
from .synth import SnrLabel

METHOD_FREQUENCY = "frequency"
METHOD_PIXELS = "pixels"


def _canonical_mean(rows: np.ndarray) -> np.ndarray:
    # Permutation-invariant mean: sort each column's addends first.
    return np.sort(rows, axis=0).mean(axis=0)


@dataclass
class ReferencePair:
    """Averaged whistle and noise references plus the transform config
    needed to put a sample on the same footing."""

    kind: str  # METHOD_FREQUENCY or METHOD_PIXELS
    whistle_ref: np.ndarray
    noise_ref: np.ndarray
    fft_size: int | None = None
    window: int | None = None
    hop: int | None = None

    def __post_init__(self):
        if self.kind not in (METHOD_FREQUENCY, METHOD_PIXELS):
            raise ValueError(f"unknown reference kind {self.kind!r}")
        self.whistle_ref = np.asarray(self.whistle_ref, dtype=np.float64)
        self.noise_ref = np.asarray(self.noise_ref, dtype=np.float64)
        if self.whistle_ref.shape != self.noise_ref.shape:
            raise ValueError("whistle and noise references must share a shape")

    @classmethod
    def frequency(cls, whistle_clips, noise_clips, fft_size: int) -> "ReferencePair":
        """Average magnitude spectra of whistle and noise clip collections."""
        w = average_spectrum(whistle_clips, fft_size)
        n = average_spectrum(noise_clips, fft_size)
        return cls(METHOD_FREQUENCY, w.magnitudes, n.magnitudes, fft_size=fft_size)

    @classmethod
    def pixels(cls, whistle_clips, noise_clips, window: int, hop: int) -> "ReferencePair":
        """Average pixel intensity distributions of the two collections."""

        def mean_pid(clips):
            clips = list(clips)
            if not clips:
                raise ValueError("reference needs at least one clip")
            pids = [
                pixel_intensity_distribution(stft_spectrogram(c, window, hop)).weights
                for c in clips
            ]
            return _canonical_mean(np.stack(pids))

        return cls(
            METHOD_PIXELS, mean_pid(whistle_clips), mean_pid(noise_clips), window=window, hop=hop
        )

    def describe_sample(self, sample: AudioClip) -> np.ndarray:
        """The sample's spectrum or PID under this pair's transform config."""
        if self.kind == METHOD_FREQUENCY:
            return fft_magnitude(sample, self.fft_size).magnitudes
        img = stft_spectrogram(sample, self.window, self.hop)
        return pixel_intensity_distribution(img).weights


@dataclass
class SnrScore:
    """Mean binary score over all samples evaluated at one SNR level."""

    snr: SnrLabel
    mean_score: float
    n_samples: int


def _score_against(refs: ReferencePair, description: np.ndarray):
    c_w = pearson(description, refs.whistle_ref)
    c_n = pearson(description, refs.noise_ref)
    return (1 if c_w >= c_n else 0), c_w, c_n


def score_sample_frequency(sample: AudioClip, refs: ReferencePair):
    """Score a sample by frequency-spectrum correlation.

    Returns (score, c_fw, c_fn) where the score is 1 iff c_fw >= c_fn.
    """
    if refs.kind != METHOD_FREQUENCY:
        raise ValueError("frequency scoring needs frequency references")
    return _score_against(refs, refs.describe_sample(sample))


def score_sample_pixels(sample: AudioClip, refs: ReferencePair):
    """Score a sample by spectrogram pixel-intensity-distribution correlation."""
    if refs.kind != METHOD_PIXELS:
        raise ValueError("pixel scoring needs PID references")
    return _score_against(refs, refs.describe_sample(sample))


def evaluate_snr_level(samples, refs: ReferencePair, method: str, snr: SnrLabel) -> SnrScore:
    """Mean binary score of all samples at one SNR level."""
    samples = list(samples)
    if not samples:
        raise ValueError("no samples to evaluate")
    if method == METHOD_FREQUENCY:
        scorer = score_sample_frequency
    elif method == METHOD_PIXELS:
        scorer = score_sample_pixels
    else:
        raise ValueError(f"unknown method {method!r}")
    total = sum(scorer(sample, refs)[0] for sample in samples)
    return SnrScore(snr=snr, mean_score=total / len(samples), n_samples=len(samples))
