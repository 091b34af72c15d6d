import numpy as np
import pytest

from snrge import (
    AudioClip,
    GreySpectrogram,
    average_spectrum,
    fft_magnitude,
    pearson,
    pixel_intensity_distribution,
    stft_spectrogram,
    write_pgm,
)
from snrge.errors import UndefinedCorrelationError

from conftest import make_tone


def test_sine_at_bin_center_is_a_single_line():
    n = 1024
    rate = 32000
    k = 96  # 3 kHz
    clip = make_tone(k * rate / n, rate=rate, seconds=n / rate, amp=1.0)
    spec = fft_magnitude(clip, n)
    peak = int(np.argmax(spec.magnitudes))
    assert peak == k
    neighbors = np.delete(spec.magnitudes, k)
    assert neighbors.max() <= 0.01 * spec.magnitudes[k]
    assert spec.bin_width == rate / n


def test_zero_clip_zero_spectrum():
    spec = fft_magnitude(AudioClip(np.zeros(2048), 8000), 1024)
    assert np.all(spec.magnitudes == 0.0)
    assert len(spec.magnitudes) == 513


def test_parseval_identity():
    rng = np.random.default_rng(0)
    n = 2048
    for _ in range(5):
        x = rng.normal(size=n)
        spec = fft_magnitude(AudioClip(x, 8000), n)
        mags_sq = spec.magnitudes**2
        energy_freq = (mags_sq[0] + 2.0 * mags_sq[1:-1].sum() + mags_sq[-1]) / n
        energy_time = np.sum(x * x)
        assert abs(energy_freq - energy_time) / energy_time <= 1e-9


def test_fft_magnitude_requires_power_of_two():
    with pytest.raises(ValueError):
        fft_magnitude(AudioClip(np.zeros(100), 8000), 100)


def test_fft_magnitude_pads_and_truncates():
    clip = make_tone(1000, rate=8000, seconds=0.1)
    short = fft_magnitude(clip, 2048)  # clip has 800 samples -> zero-pad
    assert len(short.magnitudes) == 1025
    longer = fft_magnitude(clip, 512)  # truncate
    assert len(longer.magnitudes) == 257


def test_average_spectrum_idempotent_on_identical_clips():
    clip = make_tone(500)
    single = fft_magnitude(clip, 1024)
    pair = average_spectrum([clip, clip], 1024)
    assert np.array_equal(pair.magnitudes, single.magnitudes)
    triple = average_spectrum([clip, clip, clip], 1024)  # mean of 3 rounds by <= 1 ulp
    assert np.allclose(triple.magnitudes, single.magnitudes, rtol=1e-15, atol=0)


def test_average_spectrum_is_the_mean():
    a = make_tone(500)
    b = make_tone(900)
    avg = average_spectrum([a, b], 1024)
    expect = (fft_magnitude(a, 1024).magnitudes + fft_magnitude(b, 1024).magnitudes) / 2
    assert np.max(np.abs(avg.magnitudes - expect)) <= 1e-12


def test_average_spectrum_order_invariant():
    rng = np.random.default_rng(2)
    clips = [AudioClip(rng.normal(size=1024), 8000) for _ in range(5)]
    forward = average_spectrum(clips, 512).magnitudes
    backward = average_spectrum(clips[::-1], 512).magnitudes
    assert np.array_equal(forward, backward)


def test_average_spectrum_empty_error():
    with pytest.raises(ValueError):
        average_spectrum([], 1024)


def test_pearson_exact_cases():
    assert pearson([1, 2, 3], [2, 4, 6]) == 1.0
    assert pearson([1, 2, 3], [3, 2, 1]) == -1.0
    assert abs(pearson([1, 2, 3], [1, 1, 2]) - np.sqrt(3) / 2) < 1e-12


def test_pearson_constant_sequence_error():
    with pytest.raises(UndefinedCorrelationError):
        pearson([1.0, 1.0, 1.0], [1, 2, 3])


def test_pearson_shape_errors():
    with pytest.raises(ValueError):
        pearson([1, 2], [1, 2, 3])
    with pytest.raises(ValueError):
        pearson([1.0], [2.0])


def test_pearson_symmetry_and_affine():
    rng = np.random.default_rng(3)
    for _ in range(10):
        a = rng.normal(size=50)
        b = rng.normal(size=50)
        assert abs(pearson(a, b) - pearson(b, a)) <= 1e-12
        p, q = rng.uniform(0.1, 3.0), rng.normal()
        assert abs(pearson(a, p * a + q) - 1.0) <= 1e-12
        assert abs(pearson(a, -p * a + q) + 1.0) <= 1e-12


def test_triangle_inequality_on_magnitudes():
    rng = np.random.default_rng(4)
    x = rng.normal(size=1024)
    y = rng.normal(size=1024)
    mx = fft_magnitude(AudioClip(x, 8000), 1024).magnitudes
    my = fft_magnitude(AudioClip(y, 8000), 1024).magnitudes
    mxy = fft_magnitude(AudioClip(x + y, 8000), 1024).magnitudes
    assert np.all(mxy <= mx + my + 1e-9)


def test_stft_shape_and_anchors():
    clip = make_tone(3000, rate=32000, seconds=1.0)
    img = stft_spectrogram(clip, 1024, 256)
    assert img.shape == (513, 122)
    assert img.pixels.max() == 255
    assert img.pixels.dtype == np.uint8


def test_stft_zero_clip_is_black():
    img = stft_spectrogram(AudioClip(np.zeros(4000), 8000), 256, 64)
    assert np.all(img.pixels == 0)


def test_stft_determinism():
    clip = make_tone(1234.5)
    a = stft_spectrogram(clip, 256, 64)
    b = stft_spectrogram(clip, 256, 64)
    assert np.array_equal(a.pixels, b.pixels)


def test_stft_errors():
    clip = make_tone(500)
    with pytest.raises(ValueError):
        stft_spectrogram(clip, 300, 64)  # not a power of two
    with pytest.raises(ValueError):
        stft_spectrogram(clip, 256, 512)  # hop > window
    with pytest.raises(ValueError):
        stft_spectrogram(AudioClip(np.zeros(100), 8000), 256, 64)  # too short


def test_pid_all_zero_image():
    img = GreySpectrogram(np.zeros((4, 4), dtype=np.uint8), 256, 64)
    pid = pixel_intensity_distribution(img)
    assert pid.weights[0] == 1.0
    assert pid.weights[1:].sum() == 0.0


def test_pid_half_and_half():
    pixels = np.zeros((2, 4), dtype=np.uint8)
    pixels[1] = 255
    pid = pixel_intensity_distribution(GreySpectrogram(pixels, 256, 64))
    assert pid.weights[0] == 0.5
    assert pid.weights[255] == 0.5


def test_pid_matches_counting_oracle():
    rng = np.random.default_rng(5)
    pixels = rng.integers(0, 256, size=(31, 17)).astype(np.uint8)
    pid = pixel_intensity_distribution(GreySpectrogram(pixels, 256, 64))
    counts = np.zeros(256)
    for v in pixels.ravel():
        counts[v] += 1
    assert np.max(np.abs(pid.weights - counts / pixels.size)) <= 1e-12
    assert abs(pid.weights.sum() - 1.0) <= 1e-12


def test_pid_weights_sum_to_one_for_real_spectrograms():
    clip = make_tone(700)
    pid = pixel_intensity_distribution(stft_spectrogram(clip, 256, 64))
    assert abs(pid.weights.sum() - 1.0) <= 1e-12


def test_write_pgm(tmp_path):
    pixels = np.arange(12, dtype=np.uint8).reshape(3, 4)
    path = tmp_path / "img.pgm"
    write_pgm(GreySpectrogram(pixels, 256, 64), path)
    raw = path.read_bytes()
    assert raw.startswith(b"P5\n4 3\n255\n")
    assert raw[len(b"P5\n4 3\n255\n") :] == pixels.tobytes()
