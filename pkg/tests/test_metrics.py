import numpy as np
import pytest

from snrge import (
    ReferencePair,
    SnrLabel,
    evaluate_snr_level,
    gen_noise,
    gen_whistle,
    mix_at_snr,
    score_sample_frequency,
    score_sample_pixels,
)
from snrge.synth import sample_whistle_spec

from conftest import MINI_RATE, MINI_SECONDS, mini_dataset_config

FFT_SIZE = 4096
WINDOW, HOP = 256, 64
RANGES = mini_dataset_config().ranges


def make_mixture(snr_db, seed):
    rng = np.random.default_rng(seed)
    spec = sample_whistle_spec(rng, RANGES, MINI_SECONDS)
    whistle = gen_whistle(spec, MINI_SECONDS, MINI_RATE)
    noise = gen_noise("pink", MINI_SECONDS, MINI_RATE, rng)
    return mix_at_snr(whistle, noise, snr_db)


def make_noise(seed):
    return gen_noise("pink", MINI_SECONDS, MINI_RATE, seed)


@pytest.fixture(scope="module")
def high_snr_refs():
    whistles = [make_mixture(10.0, 100 + i) for i in range(20)]
    noises = [make_noise(500 + i) for i in range(20)]
    return {
        "frequency": ReferencePair.frequency(whistles, noises, FFT_SIZE),
        "pixels": ReferencePair.pixels(whistles, noises, WINDOW, HOP),
    }


def test_self_correlation_scores_one():
    clip = make_mixture(10.0, 1)
    other = make_noise(2)
    refs = ReferencePair.frequency([clip], [other], FFT_SIZE)
    score, c_fw, c_fn = score_sample_frequency(clip, refs)
    assert score == 1
    assert c_fw == 1.0


def test_tie_scores_one():
    clip = make_mixture(5.0, 3)
    refs = ReferencePair.frequency([clip], [clip], FFT_SIZE)
    score, c_fw, c_fn = score_sample_frequency(clip, refs)
    assert c_fw == c_fn
    assert score == 1
    pid_refs = ReferencePair.pixels([clip], [clip], WINDOW, HOP)
    score, c_pw, c_pn = score_sample_pixels(clip, pid_refs)
    assert c_pw == c_pn
    assert score == 1


def test_pid_self_match_scores_one():
    clip = make_mixture(10.0, 4)
    refs = ReferencePair.pixels([clip], [make_noise(7)], WINDOW, HOP)
    score, c_pw, _ = score_sample_pixels(clip, refs)
    assert score == 1
    assert c_pw == 1.0


def test_noise_rejected_by_frequency_method(high_snr_refs):
    hits = sum(
        score_sample_frequency(make_noise(1000 + i), high_snr_refs["frequency"])[0]
        for i in range(200)
    )
    assert hits <= 0.05 * 200


def test_noise_rejected_by_pixel_method(high_snr_refs):
    hits = sum(
        score_sample_pixels(make_noise(2000 + i), high_snr_refs["pixels"])[0]
        for i in range(200)
    )
    assert hits <= 0.10 * 200


def test_kind_mismatch_errors(high_snr_refs):
    clip = make_mixture(0.0, 8)
    with pytest.raises(ValueError):
        score_sample_frequency(clip, high_snr_refs["pixels"])
    with pytest.raises(ValueError):
        score_sample_pixels(clip, high_snr_refs["frequency"])


def test_evaluate_snr_level_mean():
    whistle = make_mixture(10.0, 9)
    noise = make_noise(10)
    refs = ReferencePair.frequency([whistle], [noise], FFT_SIZE)
    label = SnrLabel.decibel(10.0)
    result = evaluate_snr_level([whistle, whistle, whistle, noise], refs, "frequency", label)
    assert result.mean_score == 0.75
    assert result.n_samples == 4
    assert result.snr == label
    all_same = evaluate_snr_level([whistle, whistle], refs, "frequency", label)
    assert all_same.mean_score == 1.0


def test_evaluate_snr_level_order_invariant(high_snr_refs):
    samples = [make_mixture(10.0, 300 + i) for i in range(6)] + [make_noise(900)]
    label = SnrLabel.decibel(10.0)
    forward = evaluate_snr_level(samples, high_snr_refs["frequency"], "frequency", label)
    backward = evaluate_snr_level(samples[::-1], high_snr_refs["frequency"], "frequency", label)
    assert forward.mean_score == backward.mean_score


def test_evaluate_snr_level_empty_error(high_snr_refs):
    with pytest.raises(ValueError):
        evaluate_snr_level([], high_snr_refs["frequency"], "frequency", SnrLabel.decibel(0.0))
    with pytest.raises(ValueError):
        evaluate_snr_level([make_noise(1)], high_snr_refs["frequency"], "nope", SnrLabel.noise())


def test_reference_swap_antisymmetry(high_snr_refs):
    refs = high_snr_refs["frequency"]
    swapped = ReferencePair("frequency", refs.noise_ref, refs.whistle_ref, fft_size=FFT_SIZE)
    for i in range(10):
        sample = make_mixture(5.0, 4000 + i) if i % 2 else make_noise(4100 + i)
        s, c_w, c_n = score_sample_frequency(sample, refs)
        s_swapped, _, _ = score_sample_frequency(sample, swapped)
        if c_w != c_n:  # exact ties keep the inclusive rule in both directions
            assert s_swapped == 1 - s


def test_score_trend_with_snr(high_snr_refs):
    def mean_score(level, base_seed):
        scores = [
            score_sample_frequency(make_mixture(level, base_seed + i), high_snr_refs["frequency"])[0]
            for i in range(30)
        ]
        return np.mean(scores)

    low = mean_score(-10.0, 6000)
    high = mean_score(10.0, 7000)
    assert high >= low - 0.1
    assert high >= 0.9


def test_reference_pair_validation():
    with pytest.raises(ValueError):
        ReferencePair("frequency", np.ones(4), np.ones(5), fft_size=8)
    with pytest.raises(ValueError):
        ReferencePair("sideways", np.ones(4), np.ones(4))
    with pytest.raises(ValueError):
        ReferencePair.frequency([], [make_noise(1)], FFT_SIZE)
